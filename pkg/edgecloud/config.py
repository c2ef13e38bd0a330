# Copyright (C) 2021, edgecloud contributors
#
# This file is part of edgecloud
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional
from edgecloud.exceptions import ConfigException

sampling_period = 1
aggregation_scale = 10
sensitivity = 27
p_threshold = 0.65
alpha = 0.05
resample_factor = 10
layers = 5
hidden = 64
learning_rate = 0.01
max_epochs = 500
patience = 20
validation_fraction = 0.1
batch_size = 64
seed = 0
output_dir = "./out/"


def derive_seed(root_seed, name):
    digest = hashlib.sha256(f"{root_seed}:{name}".encode("UTF-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class GcrlConfig:
    layers: int = layers
    hidden: int = hidden
    n_classes: int = 2
    window: int = aggregation_scale + 1
    n_sensors: int = 0
    use_lstm: bool = True
    learning_rate: float = learning_rate
    max_epochs: int = max_epochs
    patience: int = patience
    batch_size: Optional[int] = batch_size
    validation_fraction: float = validation_fraction

    def validate(self):
        _require(self.layers >= 1, f"gcrl.layers must be >= 1, got {self.layers}")
        _require(self.hidden >= 1, f"gcrl.hidden must be >= 1, got {self.hidden}")
        _require(self.n_classes >= 2, f"gcrl.n_classes must be >= 2, got {self.n_classes}")
        _require(self.window >= 1, f"gcrl.window must be >= 1, got {self.window}")
        _require(self.learning_rate > 0, f"gcrl.learning_rate must be > 0, got {self.learning_rate}")
        _require(self.max_epochs >= 1, f"gcrl.max_epochs must be >= 1, got {self.max_epochs}")
        _require(self.patience >= 1, f"gcrl.patience must be >= 1, got {self.patience}")
        _require(self.batch_size is None or self.batch_size >= 1,
                 f"gcrl.batch_size must be >= 1 or null, got {self.batch_size}")
        _require(0 <= self.validation_fraction < 1,
                 f"gcrl.validation_fraction must be in [0, 1), got {self.validation_fraction}")

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class DatasetConfig:
    train_csv: Optional[str] = None
    test_csv: Optional[str] = None
    label_column: str = "label"
    binary_labels: bool = True
    train_fraction: float = 1.0
    edge_map: Optional[str] = None
    synthetic: Optional[object] = None

    def validate(self):
        if self.synthetic is None and self.train_csv is None:
            raise ConfigException("dataset needs either 'train_csv' or 'synthetic'")
        if self.synthetic is not None and self.train_csv is not None:
            raise ConfigException("dataset must not define both 'train_csv' and 'synthetic'")
        paths = [self.train_csv, self.test_csv, self.edge_map]
        if isinstance(self.synthetic, str):
            paths.append(self.synthetic)
        for path in paths:
            if path is not None and not os.path.isfile(path):
                raise ConfigException(f"file does not exist: {path}")
        _require(0 < self.train_fraction <= 1, f"dataset.train_fraction must be in (0, 1], got {self.train_fraction}")


@dataclass
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    sampling_period: int = sampling_period
    aggregation_scale: int = aggregation_scale
    stride: Optional[int] = None
    sensitivity: int = sensitivity
    p_threshold: float = p_threshold
    alpha: float = alpha
    absolute: bool = False
    resample_factor: int = resample_factor
    gcrl: GcrlConfig = field(default_factory=GcrlConfig)
    sweep_sensitivity: list = field(default_factory=list)
    sweep_p: list = field(default_factory=list)
    workers: int = 1
    seed: int = seed
    output_dir: str = output_dir

    @property
    def window_stride(self):
        return self.stride if self.stride is not None else self.aggregation_scale + 1

    def validate(self):
        self.dataset.validate()
        _require(self.sampling_period >= 1, f"sampling_period must be >= 1, got {self.sampling_period}")
        _require(self.aggregation_scale >= 1, f"aggregation_scale must be >= 1, got {self.aggregation_scale}")
        _require(self.stride is None or self.stride >= 1, f"stride must be >= 1, got {self.stride}")
        _require(self.sensitivity >= -1, f"sensitivity must be >= -1, got {self.sensitivity}")
        _require(all(isinstance(e, int) and e >= -1 for e in self.sweep_sensitivity),
                 f"sweep_sensitivity must hold integers >= -1, got {self.sweep_sensitivity}")
        _require(-1 <= self.p_threshold <= 1, f"p_threshold must be in [-1, 1], got {self.p_threshold}")
        _require(all(-1 <= p <= 1 for p in self.sweep_p), f"sweep_p must hold values in [-1, 1], got {self.sweep_p}")
        _require(0 < self.alpha <= 1, f"alpha must be in (0, 1], got {self.alpha}")
        _require(self.resample_factor >= 1, f"resample_factor must be >= 1, got {self.resample_factor}")
        _require(self.workers >= 1, f"workers must be >= 1, got {self.workers}")
        self.gcrl.window = self.aggregation_scale + 1
        self.gcrl.validate()
        return self


def _require(condition, msg):
    if not condition:
        raise ConfigException(msg)


_TOP_LEVEL = {f for f in RunConfig.__dataclass_fields__}


def build_run_config(document, overrides=None):
    document = copy.deepcopy(document or {})
    if not isinstance(document, dict):
        raise ConfigException("configuration must be a JSON object")

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, name = key.partition(".")
        if name:
            document.setdefault(section, {})[name] = value
        else:
            document[key] = value

    unknown = set(document) - _TOP_LEVEL
    if unknown:
        raise ConfigException(f"unknown configuration keys: {sorted(unknown)}")

    dataset = _build_section(DatasetConfig, document.pop("dataset", {}), "dataset")
    gcrl = _build_section(GcrlConfig, document.pop("gcrl", {}), "gcrl")
    try:
        run_config = RunConfig(dataset=dataset, gcrl=gcrl, **document)
    except TypeError as e:
        raise ConfigException(f"invalid configuration: {e}")

    _check_types(run_config)
    return run_config.validate()


def load_run_config(path, overrides=None):
    if not os.path.isfile(path):
        raise ConfigException(f"configuration file does not exist: {path}")

    with open(path, 'r') as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigException(f"configuration file {path} is not valid JSON: {e}")

    return build_run_config(document, overrides)


def _build_section(cls, values, name):
    if not isinstance(values, dict):
        raise ConfigException(f"'{name}' must be a JSON object")

    unknown = set(values) - set(cls.__dataclass_fields__)
    if unknown:
        raise ConfigException(f"unknown keys in '{name}': {sorted(unknown)}")

    return cls(**values)


def _check_types(run_config):
    ints = ["sampling_period", "aggregation_scale", "sensitivity", "resample_factor", "workers", "seed"]
    for name in ints:
        value = getattr(run_config, name)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigException(f"'{name}' must be an integer, got {value!r}")

    for name in ["p_threshold", "alpha"]:
        value = getattr(run_config, name)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigException(f"'{name}' must be a number, got {value!r}")

    for name in ["layers", "hidden", "n_classes", "max_epochs", "patience"]:
        value = getattr(run_config.gcrl, name)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigException(f"'gcrl.{name}' must be an integer, got {value!r}")

    if not isinstance(run_config.sweep_sensitivity, list) or not isinstance(run_config.sweep_p, list):
        raise ConfigException("'sweep_sensitivity' and 'sweep_p' must be lists")

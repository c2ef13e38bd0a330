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

import json
import logging
import os
from dataclasses import dataclass, field
import numpy as np
from scipy import signal
from edgecloud.data.dataset import DatasetSplit, FrameSeries
from edgecloud.data.exceptions import DatasetException
from edgecloud.exceptions import ConfigException

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttackWindow:
    start: int
    end: int
    attack_type: int
    sensors: tuple
    magnitude: float

    def overlaps(self, other):
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class SensorProcess:
    offset: float = 10.0
    scale: float = 1.0
    noise: float = 0.25


@dataclass
class SyntheticSpec:
    """
    Each edge is driven by one latent AR(1) process; every sensor of the edge
    is an affine function of that driver plus independent noise. Attack
    windows add `magnitude` stationary standard deviations to the affected
    sensors for timestamps in [start, end).
    """
    n_sensors: int
    n_edges: int
    duration: int
    attack_windows: list = field(default_factory=list)
    base_process: list = field(default_factory=list)
    ar_coefficient: float = 0.95
    driver_noise: float = 1.0
    train_fraction: float = 0.7
    binary: bool = False
    seed: int = 0

    def process_of(self, sensor):
        if self.base_process:
            return self.base_process[sensor]
        return SensorProcess(offset=10.0 + sensor, scale=1.0 + 0.1 * (sensor % 5))

    def validate(self):
        if self.n_sensors < 1 or self.n_edges < 1 or self.n_edges > self.n_sensors:
            raise DatasetException(f"need 1 <= n_edges <= n_sensors, got {self.n_edges} edges, "
                                   f"{self.n_sensors} sensors")
        if self.duration < 2:
            raise DatasetException(f"duration must be >= 2, got {self.duration}")
        if self.base_process and len(self.base_process) != self.n_sensors:
            raise DatasetException(f"base_process lists {len(self.base_process)} sensors, expected {self.n_sensors}")
        if not 0 <= self.ar_coefficient < 1:
            raise DatasetException(f"ar_coefficient must be in [0, 1), got {self.ar_coefficient}")
        if not 0 < self.train_fraction < 1:
            raise DatasetException(f"train_fraction must be in (0, 1), got {self.train_fraction}")

        for w in self.attack_windows:
            if not 0 <= w.start < w.end <= self.duration:
                raise DatasetException(f"attack window [{w.start}, {w.end}) lies outside [0, {self.duration})")
            if not w.sensors:
                raise DatasetException(f"attack window [{w.start}, {w.end}) affects no sensor")
            if any(s < 0 or s >= self.n_sensors for s in w.sensors):
                raise DatasetException(f"attack window [{w.start}, {w.end}) names an unknown sensor: {w.sensors}")
            if w.attack_type < 1:
                raise DatasetException(f"attack types start at 1, got {w.attack_type}")

        for i, a in enumerate(self.attack_windows):
            for b in self.attack_windows[i + 1:]:
                if a.overlaps(b) and a.attack_type != b.attack_type:
                    raise DatasetException(f"attack windows [{a.start}, {a.end}) and [{b.start}, {b.end}) overlap "
                                           f"with conflicting types {a.attack_type} and {b.attack_type}")
        return self

    def edge_of(self, sensor):
        return 1 + sensor * self.n_edges // self.n_sensors

    def sensor_names(self):
        return [f"sensor_{i:03d}" for i in range(self.n_sensors)]


def spec_from_dict(document):
    windows = [AttackWindow(int(w["start"]), int(w["end"]), int(w["attack_type"]), tuple(w["sensors"]),
                            float(w["magnitude"])) for w in document.get("attack_windows", [])]
    processes = [SensorProcess(**p) for p in document.get("base_process", [])]
    values = {k: v for k, v in document.items() if k not in ("attack_windows", "base_process")}
    try:
        return SyntheticSpec(attack_windows=windows, base_process=processes, **values)
    except TypeError as e:
        raise DatasetException(f"invalid synthetic spec: {e}")


def read_spec_document(path):
    if not os.path.isfile(path):
        raise DatasetException(f"synthetic spec does not exist: {path}", missing_input=True)

    with open(path, 'r') as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigException(f"synthetic spec {path} is not valid JSON: {e}")


def read_spec(path):
    return spec_from_dict(read_spec_document(path))


def generate_synthetic(spec):
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    driver_var = spec.driver_noise ** 2 / (1 - spec.ar_coefficient ** 2)

    drivers = {}
    for edge in range(1, spec.n_edges + 1):
        innovations = rng.normal(0.0, spec.driver_noise, spec.duration)
        start = rng.normal(0.0, np.sqrt(driver_var))
        drivers[edge], _ = signal.lfilter([1.0], [1.0, -spec.ar_coefficient], innovations,
                                          zi=[spec.ar_coefficient * start])

    values = np.empty((spec.duration, spec.n_sensors))
    stds = np.empty(spec.n_sensors)
    for sensor in range(spec.n_sensors):
        process = spec.process_of(sensor)
        noise = rng.normal(0.0, process.noise, spec.duration)
        values[:, sensor] = process.offset + process.scale * drivers[spec.edge_of(sensor)] + noise
        stds[sensor] = np.sqrt(process.scale ** 2 * driver_var + process.noise ** 2)

    classes = np.zeros(spec.duration, dtype=np.int64)
    affected = np.zeros((spec.duration, spec.n_sensors), dtype=bool)
    # overlapping windows shift a frame once, the later window wins
    shift = np.zeros_like(values)
    for w in spec.attack_windows:
        sensors = list(w.sensors)
        shift[w.start:w.end, sensors] = w.magnitude * stds[sensors]
        classes[w.start:w.end] = w.attack_type
        affected[w.start:w.end, sensors] = True
    values += shift

    timestamps = np.arange(spec.duration, dtype=np.int64)
    cut = int(spec.duration * spec.train_fraction)
    series = FrameSeries(timestamps, values, classes, binary=spec.binary, affected=affected)
    train = series.take(np.arange(cut))
    test = series.take(np.arange(cut, spec.duration))

    n_classes = 2 if spec.binary else max([w.attack_type for w in spec.attack_windows], default=1) + 1
    assignment = {i: spec.edge_of(i) for i in range(spec.n_sensors)}
    log.info(f"generated synthetic dataset: {spec.n_sensors} sensors, {spec.n_edges} edges, "
             f"{len(spec.attack_windows)} attack window(s), train {train.counts()}, test {test.counts()}")
    return DatasetSplit(train, test, spec.sensor_names(), assignment, n_classes)

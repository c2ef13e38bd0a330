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
import json
import os
import numpy as np
from edgecloud import config
from edgecloud.data.dataset import DatasetSplit, FrameSeries
from edgecloud.edge.detector import EdgeModel, SensorGaussians
from edgecloud.edge.preprocess import BoxCoxEntry, BoxCoxParams

RESOURCES = os.path.dirname(__file__) + "/resources"


def resource(name):
    return os.path.join(RESOURCES, name)


def synthetic_document():
    with open(resource("synthetic-spec.json"), 'r') as f:
        return json.load(f)


def run_document(output_dir="./out/"):
    with open(resource("run-config.json"), 'r') as f:
        document = json.load(f)

    document["dataset"]["synthetic"] = resource("synthetic-spec.json")
    document["output_dir"] = output_dir
    return document


def small_run_config(output_dir="./out/", overrides=None, **values):
    document = run_document(output_dir)
    for key, value in values.items():
        if isinstance(value, dict):
            document.setdefault(key, {}).update(copy.deepcopy(value))
        else:
            document[key] = value
    return config.build_run_config(document, overrides)


def identity_model(edge_id, sensor_indices, aggregation_scale=1, priors=(0.5, 0.5)):
    """Edge model whose Box-Cox step is the identity: sums near 0 are normal, sums near 20 abnormal."""
    names = [f"s{i}" for i in sensor_indices]
    gaussians = [SensorGaussians(edge_id, n, 0.0, 1.0, 20.0, 1.0) for n in names]
    boxcox = BoxCoxParams(edge_id, {n: BoxCoxEntry(1.0, 1.0) for n in names})
    return EdgeModel(edge_id, names, list(sensor_indices), gaussians, priors[0], priors[1], boxcox, aggregation_scale)


def tiny_split(attacks=((4, 6, 1), (10, 12, 2)), n_frames=20):
    """Four sensors on two edges, attacks set sensors 0-2 to 10 on [start, end) frames."""
    values = np.zeros((n_frames, 4))
    classes = np.zeros(n_frames, dtype=np.int64)
    for start, end, attack_type in attacks:
        values[start:end, :3] = 10.0
        classes[start:end] = attack_type
    series = FrameSeries(np.arange(n_frames), values, classes, binary=False)
    return DatasetSplit(series, series, ["s0", "s1", "s2", "s3"], {0: 1, 1: 1, 2: 2, 3: 2}, n_classes=3)


def tiny_models():
    return {1: identity_model(1, [0, 1]), 2: identity_model(2, [2, 3])}

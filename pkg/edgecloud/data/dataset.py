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
from collections.abc import Sequence
from dataclasses import dataclass
import numpy as np
import pandas as pd
from edgecloud.data.exceptions import DatasetException
from edgecloud.exceptions import ConfigException

log = logging.getLogger(__name__)

TIMESTAMP_COLUMN = "timestamp"
MISSING_MARKER = ""


def class_to_binary(class_id):
    """Multi-class id (0 = normal) to the edge convention (1 = normal, 0 = abnormal)."""
    return 1 if class_id == 0 else 0


def binary_to_class(label):
    """Edge convention (1 = normal, 0 = abnormal) to a class id (0 = normal, 1 = abnormal)."""
    return 0 if label == 1 else 1


@dataclass(frozen=True)
class SensorFrame:
    timestamp: int
    values: tuple
    label: int


class FrameSeries(Sequence):
    """
    Time ordered frames held column-wise. Classes follow the multi-class
    convention internally; `labels` renders them in the dataset's own
    convention.
    """

    def __init__(self, timestamps, values, classes, binary=True, affected=None):
        self.timestamps = np.asarray(timestamps, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64).reshape(len(self.timestamps), -1)
        self.classes = np.asarray(classes, dtype=np.int64)
        self.binary = binary
        self.affected = None if affected is None else np.asarray(affected, dtype=bool)

        if len(self.classes) != len(self.timestamps):
            raise DatasetException(f"got {len(self.classes)} labels for {len(self.timestamps)} frames")

    def __len__(self):
        return len(self.timestamps)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return self.take(np.arange(len(self))[idx])

        return SensorFrame(int(self.timestamps[idx]), tuple(float(v) for v in self.values[idx]),
                           int(self.labels[idx]))

    @property
    def n_sensors(self):
        return self.values.shape[1]

    @property
    def abnormal(self):
        return self.classes != 0

    @property
    def labels(self):
        if self.binary:
            return np.where(self.abnormal, 0, 1)

        return self.classes

    def classes_for(self, n_classes):
        if n_classes == 2:
            return self.abnormal.astype(np.int64)

        return self.classes

    def take(self, indices):
        affected = None if self.affected is None else self.affected[indices]
        return FrameSeries(self.timestamps[indices], self.values[indices], self.classes[indices],
                           self.binary, affected)

    def counts(self):
        abnormal = int(self.abnormal.sum())
        return {"normal": len(self) - abnormal, "abnormal": abnormal}


class DatasetSplit(object):
    def __init__(self, train, test, sensor_names, edge_assignment, n_classes=2):
        self.train = train
        self.test = test
        self.sensor_names = list(sensor_names)
        self.edge_assignment = dict(edge_assignment)
        self.n_classes = n_classes

        if set(self.edge_assignment) != set(range(len(self.sensor_names))):
            raise DatasetException("every sensor must be assigned to exactly one edge")

    @property
    def n_sensors(self):
        return len(self.sensor_names)

    def edges(self):
        return sorted(set(self.edge_assignment.values()))

    def sensors_of(self, edge_id):
        return [i for i in range(self.n_sensors) if self.edge_assignment[i] == edge_id]


def read_edge_map(path):
    if not os.path.isfile(path):
        raise DatasetException(f"edge map does not exist: {path}", missing_input=True)

    with open(path, 'r') as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigException(f"edge map {path} is not valid JSON: {e}")

    edges = document.get("edges") if isinstance(document, dict) else None
    if not isinstance(edges, dict):
        raise ConfigException(f"edge map {path} needs an 'edges' object")

    edge_map = {}
    for edge, names in edges.items():
        try:
            edge_id = int(edge)
        except ValueError:
            raise ConfigException(f"edge map {path}: edge id '{edge}' is not an integer")
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise ConfigException(f"edge map {path}: edge {edge} needs a list of sensor names")
        edge_map[edge_id] = list(names)
    return edge_map


def assign_edges(sensor_names, edge_map=None):
    if edge_map is None:
        return {i: 1 for i in range(len(sensor_names))}

    index_of = {name: i for i, name in enumerate(sensor_names)}
    assignment = {}
    for edge_id, names in edge_map.items():
        for name in names:
            if name not in index_of:
                raise DatasetException(f"edge map references unknown sensor '{name}' (edge {edge_id})")
            if index_of[name] in assignment:
                raise DatasetException(f"sensor '{name}' is assigned to more than one edge")
            assignment[index_of[name]] = int(edge_id)

    unassigned = [n for n in sensor_names if index_of[n] not in assignment]
    if unassigned:
        raise DatasetException(f"sensors without edge assignment: {unassigned}")

    return assignment


def load_csv(path, label_column="label", edge_map=None, test_path=None, train_fraction=1.0,
             binary_labels=True):
    sensor_names, series = read_frames(path, label_column, binary_labels)

    if test_path is not None:
        test_names, test = read_frames(test_path, label_column, binary_labels)
        if test_names != sensor_names:
            raise DatasetException(f"{test_path} does not share the sensor columns of {path}")
        train = series
    else:
        cut = int(round(len(series) * train_fraction))
        train = series.take(np.arange(cut))
        test = series.take(np.arange(cut, len(series)))

    n_classes = 2 if binary_labels else int(max(train.classes.max(initial=0), test.classes.max(initial=0))) + 1
    split = DatasetSplit(train, test, sensor_names, assign_edges(sensor_names, edge_map), n_classes)
    log.info(f"dataset {path}: train {train.counts()}, test {test.counts()}, "
             f"{split.n_sensors} sensors on {len(split.edges())} edge(s)")
    return split


def read_frames(path, label_column="label", binary_labels=True):
    if not os.path.isfile(path):
        raise DatasetException(f"dataset file does not exist: {path}", missing_input=True)

    table = pd.read_csv(path, dtype=str, keep_default_na=False)
    if label_column not in table.columns:
        raise DatasetException(f"{path}: label column '{label_column}' not found in header")

    sensor_names = [c for c in table.columns if c not in (label_column, TIMESTAMP_COLUMN)]
    if not sensor_names:
        raise DatasetException(f"{path}: no sensor columns")

    values = pd.DataFrame({name: _parse_column(path, name, table[name]) for name in sensor_names})
    for name in sensor_names:
        if values[name].isna().all():
            raise DatasetException(f"{path}: sensor column '{name}' holds no values")
    values = values.ffill().bfill()

    labels = _parse_integers(path, label_column, table[label_column])
    if TIMESTAMP_COLUMN in table.columns:
        timestamps = _parse_integers(path, TIMESTAMP_COLUMN, table[TIMESTAMP_COLUMN])
    else:
        timestamps = np.arange(len(table), dtype=np.int64)

    if binary_labels:
        if not np.isin(labels, (0, 1)).all():
            raise DatasetException(f"{path}: binary labels must be 0 (abnormal) or 1 (normal)")
        classes = np.where(labels == 1, 0, 1)
    else:
        if (labels < 0).any():
            raise DatasetException(f"{path}: class ids must be >= 0")
        classes = labels

    order = np.argsort(timestamps, kind="stable")
    series = FrameSeries(timestamps[order], values.to_numpy(dtype=np.float64)[order], classes[order],
                         binary=binary_labels)
    log.info(f"read {len(series)} frames from {path}: {series.counts()}")
    return sensor_names, series


def _parse_column(path, name, cells):
    parsed = np.empty(len(cells), dtype=np.float64)
    for row, cell in enumerate(cells, start=1):
        cell = cell.strip()
        if cell == MISSING_MARKER:
            parsed[row - 1] = np.nan
            continue
        try:
            parsed[row - 1] = float(cell)
        except ValueError:
            raise DatasetException(f"{path}: malformed value {cell!r} in column '{name}' at row {row}")

        if not np.isfinite(parsed[row - 1]):
            raise DatasetException(f"{path}: non-finite value {cell!r} in column '{name}' at row {row}")

    return parsed


def _parse_integers(path, name, cells):
    parsed = np.empty(len(cells), dtype=np.int64)
    for row, cell in enumerate(cells, start=1):
        try:
            parsed[row - 1] = int(cell.strip())
        except ValueError:
            raise DatasetException(f"{path}: malformed {name} {cell!r} at row {row}")

    return parsed


def write_csv(series, sensor_names, path, label_column="label"):
    table = pd.DataFrame(series.values, columns=sensor_names)
    table.insert(0, TIMESTAMP_COLUMN, series.timestamps)
    table[label_column] = series.labels
    table.to_csv(path, index=False, float_format=lambda v: repr(float(v)))


def resample_abnormal(train, factor):
    if factor < 1:
        raise DatasetException(f"resampling factor must be >= 1, got {factor}")

    indices = repeat_abnormal_indices(train.abnormal, factor)
    resampled = train.take(indices)
    log.info(f"resampled abnormal frames x{factor}: {train.counts()} -> {resampled.counts()}")
    return resampled


def repeat_abnormal_indices(abnormal, factor):
    counts = np.where(np.asarray(abnormal, dtype=bool), factor, 1)
    return np.repeat(np.arange(len(counts)), counts)


def window_class(classes):
    """Most frequent attack class of a window (ties to the lower id), 0 when all frames are normal."""
    attacks = classes[classes != 0]
    if len(attacks) == 0:
        return 0

    ids, counts = np.unique(attacks, return_counts=True)
    return int(ids[np.argmax(counts)])

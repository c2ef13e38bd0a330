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
import math
import os
from dataclasses import dataclass
import numpy as np
from packaging.version import parse
from scipy import stats
from edgecloud.edge import preprocess
from edgecloud.edge.exceptions import EdgeModelException
from edgecloud.edge.preprocess import AggregationConfig, BoxCoxParams

log = logging.getLogger(__name__)

FORMAT_VERSION = "1.0"
SIGMA_FLOOR = 1e-9
BORROWED_SHIFT = 6.0


@dataclass(frozen=True)
class SensorGaussians:
    edge_id: int
    sensor: str
    mu_no: float
    sigma_no: float
    mu_ab: float
    sigma_ab: float
    borrowed: bool = False


@dataclass
class EdgeModel:
    edge_id: int
    sensors: list
    sensor_indices: list
    gaussians: list
    prior_normal: float
    prior_abnormal: float
    boxcox: BoxCoxParams
    aggregation_scale: int

    @property
    def priors(self):
        return self.prior_normal, self.prior_abnormal

    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "edge_id": self.edge_id,
            "aggregation_scale": self.aggregation_scale,
            "priors": {"normal": self.prior_normal, "abnormal": self.prior_abnormal},
            "sensors": [{"name": g.sensor, "index": idx, "mu_no": g.mu_no, "sigma_no": g.sigma_no,
                         "mu_ab": g.mu_ab, "sigma_ab": g.sigma_ab, "borrowed": g.borrowed}
                        for g, idx in zip(self.gaussians, self.sensor_indices)],
            "boxcox": self.boxcox.to_dict()
        }

    @staticmethod
    def from_dict(d):
        version = parse(d.get("format_version", "0"))
        if version.major != parse(FORMAT_VERSION).major:
            raise EdgeModelException(f"unsupported edge model format {version}, expected {FORMAT_VERSION}")

        edge_id = int(d["edge_id"])
        gaussians = [SensorGaussians(edge_id, s["name"], s["mu_no"], s["sigma_no"], s["mu_ab"], s["sigma_ab"],
                                     s.get("borrowed", False)) for s in d["sensors"]]
        return EdgeModel(edge_id, [s["name"] for s in d["sensors"]], [int(s["index"]) for s in d["sensors"]],
                         gaussians, d["priors"]["normal"], d["priors"]["abnormal"],
                         BoxCoxParams.from_dict(edge_id, d["boxcox"]), int(d["aggregation_scale"]))


@dataclass(frozen=True)
class EdgeVerdict:
    t: int
    edge_id: int
    sensor_indices: tuple
    flags: tuple
    s: int
    payload: np.ndarray
    clamped: tuple = ()


@dataclass(frozen=True)
class VoteDecision:
    t: int
    upload: bool
    s_total: int
    edge_ids: tuple
    payload: np.ndarray = None


def _mle(values):
    mu = float(np.mean(values))
    return mu, max(float(np.sqrt(np.mean((values - mu) ** 2))), SIGMA_FLOOR)


def fit_edge_model(aggregates, labels, edge_id, sensor_names, sensor_indices=None, boxcox=None,
                   aggregation_scale=10):
    """
    Fit per-sensor Gaussians on transformed aggregates. `labels` follow the
    edge convention (1 = normal, 0 = abnormal), either one label per window
    or one per window and sensor.
    """
    aggregates = np.asarray(aggregates, dtype=np.float64)
    labels = np.asarray(labels)
    if aggregates.size == 0 or len(aggregates) == 0:
        raise EdgeModelException(f"edge {edge_id}: empty training set")

    aggregates = aggregates.reshape(len(aggregates), -1)
    if aggregates.shape[1] != len(sensor_names):
        raise EdgeModelException(f"edge {edge_id}: {aggregates.shape[1]} columns for {len(sensor_names)} sensors")

    window_labels = labels if labels.ndim == 1 else labels.min(axis=1)
    per_sensor = labels if labels.ndim == 2 else np.repeat(labels[:, None], aggregates.shape[1], axis=1)
    n_normal = int((window_labels == 1).sum())
    n_abnormal = int((window_labels == 0).sum())
    if n_normal == 0 or n_abnormal == 0:
        raise EdgeModelException(f"edge {edge_id}: training set needs both classes, "
                                 f"got {n_normal} normal and {n_abnormal} abnormal")

    fitted = []
    for j, name in enumerate(sensor_names):
        normal = aggregates[per_sensor[:, j] == 1, j]
        abnormal = aggregates[per_sensor[:, j] == 0, j]
        if len(normal) == 0:
            raise EdgeModelException(f"edge {edge_id}: sensor {name} has no normal training samples")
        mu_no, sigma_no = _mle(normal)
        fitted.append((name, mu_no, sigma_no, _mle(abnormal) if len(abnormal) else None))

    pooled = [ab[1] ** 2 for _, _, _, ab in fitted if ab is not None]
    gaussians = []
    for name, mu_no, sigma_no, abnormal in fitted:
        if abnormal is None:
            sigma_ab = math.sqrt(np.mean(pooled)) if pooled else sigma_no
            log.warning(f"edge {edge_id}: sensor {name} has no abnormal training samples, "
                        f"borrowing mu_ab=mu_no+{BORROWED_SHIFT}*sigma_no, sigma_ab={sigma_ab:.6g}")
            gaussians.append(SensorGaussians(edge_id, name, mu_no, sigma_no, mu_no + BORROWED_SHIFT * sigma_no,
                                             sigma_ab, True))
        else:
            gaussians.append(SensorGaussians(edge_id, name, mu_no, sigma_no, abnormal[0], abnormal[1]))

    total = n_normal + n_abnormal
    prior_normal = n_normal / total
    return EdgeModel(edge_id, list(sensor_names),
                     list(sensor_indices) if sensor_indices is not None else list(range(len(sensor_names))),
                     gaussians, prior_normal, 1.0 - prior_normal,
                     boxcox if boxcox is not None else BoxCoxParams(edge_id), aggregation_scale)


def classify_window(x, gaussians, priors):
    """True when the window is abnormal for this sensor; ties go to abnormal."""
    prior_normal, prior_abnormal = priors
    score_normal = stats.norm.logpdf(x, gaussians.mu_no, gaussians.sigma_no) + math.log(prior_normal)
    score_abnormal = stats.norm.logpdf(x, gaussians.mu_ab, gaussians.sigma_ab) + math.log(prior_abnormal)
    return bool(score_abnormal >= score_normal)


def detect_edge(window, model, t=0):
    window = np.asarray(window, dtype=np.float64)
    expected = (model.aggregation_scale + 1, len(model.sensors))
    if window.shape != expected:
        raise EdgeModelException(f"edge {model.edge_id}: window shape {window.shape}, expected {expected}")

    flags = []
    clamped = []
    for j, (name, gaussians) in enumerate(zip(model.sensors, model.gaussians)):
        aggregated = preprocess.aggregate(window[:, j], model.aggregation_scale)
        value, was_clamped = preprocess.transform(aggregated, model.boxcox[name])
        if was_clamped:
            clamped.append(name)
        flags.append(classify_window(value, gaussians, model.priors))

    return EdgeVerdict(t, model.edge_id, tuple(model.sensor_indices), tuple(flags), sum(flags),
                       window.T.copy(), tuple(clamped))


def network_vote(verdicts, e):
    if not verdicts:
        raise EdgeModelException("network vote needs at least one edge verdict")

    times = {v.t for v in verdicts}
    if len(times) != 1:
        raise EdgeModelException(f"edge verdicts belong to different windows: {sorted(times)}")

    t = verdicts[0].t
    s_total = sum(v.s for v in verdicts)
    edge_ids = tuple(sorted(v.edge_id for v in verdicts if v.s > 0))
    if s_total <= e:
        return VoteDecision(t, False, s_total, edge_ids)

    n_sensors = sum(len(v.sensor_indices) for v in verdicts)
    payload = np.empty((n_sensors, verdicts[0].payload.shape[1]))
    for v in verdicts:
        payload[list(v.sensor_indices)] = v.payload
    return VoteDecision(t, True, s_total, edge_ids, payload)


class EdgeNode(object):
    def __init__(self, model):
        self.model = model

    def detect(self, frames_window, t):
        return detect_edge(frames_window[:, self.model.sensor_indices], self.model, t)


def fit_edge_models(split, aggregation):
    train = split.train
    aggregated, starts = preprocess.aggregate_series(train.values, aggregation)
    window_labels = np.array([0 if train.abnormal[s:s + aggregation.window_length].any() else 1 for s in starts])
    log.info(f"fitting edge models on {len(starts)} training windows "
             f"({int((window_labels == 0).sum())} abnormal)")

    models = {}
    for edge_id in split.edges():
        indices = split.sensors_of(edge_id)
        names = [split.sensor_names[i] for i in indices]
        boxcox = preprocess.fit_boxcox(edge_id, aggregated[:, indices], names)
        transformed, _ = preprocess.transform_array(aggregated[:, indices], [boxcox[n] for n in names])
        models[edge_id] = fit_edge_model(transformed, window_labels, edge_id, names, indices, boxcox,
                                         aggregation.aggregation_scale)
        log.info(f"edge {edge_id}: {len(names)} sensors, priors={models[edge_id].priors}")

    return models


def write_edge_models(models, directory):
    os.makedirs(directory, exist_ok=True)
    paths = []
    for edge_id in sorted(models):
        path = os.path.join(directory, f"edge-{edge_id}.json")
        with open(path, "w") as f:
            f.write(json.dumps(models[edge_id].to_dict(), indent=2))
        paths.append(path)

    return paths


def read_edge_models(directory):
    if not os.path.isdir(directory):
        raise EdgeModelException(f"edge model directory does not exist: {directory}")

    models = {}
    for name in sorted(os.listdir(directory)):
        if name.startswith("edge-") and name.endswith(".json"):
            with open(os.path.join(directory, name), 'r') as f:
                model = EdgeModel.from_dict(json.load(f))
            models[model.edge_id] = model

    if not models:
        raise EdgeModelException(f"no edge models found in {directory}")
    return models

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

import logging
import math
from dataclasses import dataclass, field
import numpy as np
from scipy import optimize, special, stats
from edgecloud.edge.exceptions import PreprocessException

log = logging.getLogger(__name__)

EPSILON = 1e-6
MIN_FIT_SAMPLES = 20
LAMBDA_RANGE = (-5.0, 5.0)
GRID_STEP = 0.1


@dataclass(frozen=True)
class AggregationConfig:
    sampling_period: int = 1
    aggregation_scale: int = 10
    stride: int = None

    def __post_init__(self):
        if self.stride is None:
            object.__setattr__(self, "stride", self.aggregation_scale + 1)
        if self.sampling_period < 1 or self.aggregation_scale < 1 or self.stride < 1:
            raise PreprocessException(f"invalid aggregation config: a={self.sampling_period}, "
                                      f"B={self.aggregation_scale}, stride={self.stride}")

    @property
    def window_length(self):
        """Raw samples per window (B+1)."""
        return self.aggregation_scale + 1

    def window_starts(self, n_samples):
        return list(range(0, n_samples - self.window_length + 1, self.stride))


@dataclass(frozen=True)
class BoxCoxEntry:
    lmbda: float
    shift: float
    degenerate: bool = False

    def to_dict(self):
        return {"lambda": self.lmbda, "shift": self.shift, "degenerate": self.degenerate}

    @staticmethod
    def from_dict(d):
        return BoxCoxEntry(float(d["lambda"]), float(d["shift"]), bool(d.get("degenerate", False)))


@dataclass
class BoxCoxParams:
    edge_id: int
    entries: dict = field(default_factory=dict)

    def __getitem__(self, sensor_name):
        return self.entries[sensor_name]

    def to_dict(self):
        return {f"{self.edge_id}/{name}": e.to_dict() for name, e in self.entries.items()}

    @staticmethod
    def from_dict(edge_id, d):
        entries = {}
        for key, value in d.items():
            edge, _, name = key.partition("/")
            if int(edge) != edge_id:
                raise PreprocessException(f"Box-Cox entry '{key}' does not belong to edge {edge_id}")
            entries[name] = BoxCoxEntry.from_dict(value)
        return BoxCoxParams(edge_id, entries)


def aggregate(window, aggregation_scale):
    if len(window) != aggregation_scale + 1:
        raise PreprocessException(f"window holds {len(window)} samples, expected {aggregation_scale + 1}")

    return math.fsum(window)


def aggregate_series(values, config):
    """Sum non-overlapping (or strided) windows of a samples x sensors array."""
    values = np.asarray(values, dtype=np.float64)
    starts = config.window_starts(len(values))
    if not starts:
        return np.empty((0, values.shape[1])), starts

    windows = np.stack([values[s:s + config.window_length] for s in starts])
    return windows.sum(axis=1), starts


def profile_log_likelihood(lmbda, shifted):
    return float(stats.boxcox_llf(lmbda, shifted))


def fit_lambda(aggregates):
    aggregates = np.asarray(aggregates, dtype=np.float64)
    if len(aggregates) < MIN_FIT_SAMPLES:
        raise PreprocessException(f"need at least {MIN_FIT_SAMPLES} aggregates to fit lambda, got {len(aggregates)}")

    shift = max(0.0, EPSILON - float(aggregates.min()))
    if np.all(aggregates == aggregates[0]):
        log.warning("constant training aggregates, using lambda=1 (degenerate)")
        return BoxCoxEntry(1.0, shift, True)

    shifted = aggregates + shift
    grid = np.round(np.arange(LAMBDA_RANGE[0], LAMBDA_RANGE[1] + GRID_STEP / 2, GRID_STEP), 10)
    scores = np.array([profile_log_likelihood(g, shifted) for g in grid])
    best = int(np.nanargmax(scores))
    best_lmbda, best_score = float(grid[best]), float(scores[best])

    def neg_llf(lmbda):
        return -profile_log_likelihood(lmbda, shifted)

    try:
        if 0 < best < len(grid) - 1:
            result = optimize.minimize_scalar(neg_llf, method="golden",
                                              bracket=(grid[best - 1], grid[best], grid[best + 1]))
        else:
            # maximum on the border of the search range
            result = optimize.minimize_scalar(neg_llf, method="bounded", options={"xatol": 1e-10},
                                              bounds=(grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]))
    except ValueError:
        result = None

    if result is not None and -result.fun >= best_score:
        best_lmbda = float(result.x)

    return BoxCoxEntry(best_lmbda, shift, False)


def transform(x, entry):
    """Box-Cox transform of one aggregate; returns (value, clamped)."""
    shifted = x + entry.shift
    clamped = False
    if not shifted > 0:
        log.warning(f"aggregate {x} + shift {entry.shift} <= 0, clamped to {EPSILON}")
        shifted = EPSILON
        clamped = True

    return float(special.boxcox(shifted, entry.lmbda)), clamped


def transform_array(values, entries):
    """Column-wise transform of a windows x sensors array of aggregates with one entry per column."""
    values = np.asarray(values, dtype=np.float64)
    out = np.empty_like(values)
    clamped = np.zeros(values.shape, dtype=bool)
    for j, entry in enumerate(entries):
        shifted = values[:, j] + entry.shift
        clamped[:, j] = ~(shifted > 0)
        shifted = np.where(clamped[:, j], EPSILON, shifted)
        out[:, j] = special.boxcox(shifted, entry.lmbda)

    if clamped.any():
        log.warning(f"{int(clamped.sum())} aggregate(s) fell below the training minimum and were clamped")
    return out, clamped


def fit_boxcox(edge_id, aggregates, sensor_names):
    entries = {}
    for j, name in enumerate(sensor_names):
        entries[name] = fit_lambda(aggregates[:, j])
        log.debug(f"edge {edge_id} sensor {name}: lambda={entries[name].lmbda:.4f} shift={entries[name].shift}")

    return BoxCoxParams(edge_id, entries)

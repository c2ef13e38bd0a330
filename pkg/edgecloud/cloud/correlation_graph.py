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

import hashlib
import json
import logging
from dataclasses import dataclass
from typing import NamedTuple
import numpy as np
from scipy import stats
from edgecloud.cloud.exceptions import ShapeException

log = logging.getLogger(__name__)

DEFAULT_P_THRESHOLD = 0.65
DEFAULT_ALPHA = 0.05


class Correlation(NamedTuple):
    rho: float
    degenerate: bool


@dataclass
class CorrelationGraph:
    sensor_names: list
    rho: np.ndarray
    pvals: np.ndarray
    adjacency: np.ndarray
    p_threshold: float = DEFAULT_P_THRESHOLD
    alpha: float = DEFAULT_ALPHA
    absolute: bool = False

    @property
    def n(self):
        return len(self.sensor_names)

    def edges(self):
        z, c = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(z.tolist(), c.tolist()))

    def edge_count(self):
        return len(self.edges())

    def digest(self):
        return hashlib.sha256(np.ascontiguousarray(self.adjacency, dtype="<u1").tobytes()).hexdigest()

    def to_dict(self):
        return {
            "sensors": self.sensor_names,
            "p_threshold": self.p_threshold,
            "alpha": self.alpha,
            "absolute": self.absolute,
            "adjacency": self.adjacency.astype(int).tolist(),
            "rho": self.rho.tolist(),
            "pvals": self.pvals.tolist()
        }

    @staticmethod
    def from_dict(d):
        return CorrelationGraph(list(d["sensors"]), np.array(d["rho"], dtype=np.float64),
                                np.array(d["pvals"], dtype=np.float64), np.array(d["adjacency"], dtype=np.int64),
                                d["p_threshold"], d["alpha"], d.get("absolute", False))

    def edge_list(self):
        lines = []
        for z, c in self.edges():
            lines.append(f"{self.sensor_names[z]} {self.sensor_names[c]} {self.rho[z, c]!r} {self.pvals[z, c]!r}")
        return "\n".join(lines) + ("\n" if lines else "")


def spearman_rho(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeException(f"spearman_rho needs two series of equal length, got {x.shape} and {y.shape}")
    if len(x) < 3:
        raise ShapeException(f"spearman_rho needs at least 3 samples, got {len(x)}")

    if np.all(x == x[0]) or np.all(y == y[0]):
        return Correlation(0.0, True)

    rx = stats.rankdata(x)
    ry = stats.rankdata(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    rho = float(np.dot(dx, dy) / np.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    return Correlation(min(1.0, max(-1.0, rho)), False)


def significance(rho, n):
    """Two-sided p-value of a rank correlation under the Student-t approximation."""
    if n < 4:
        raise ShapeException(f"significance needs n >= 4, got {n}")
    if abs(rho) > 1:
        raise ShapeException(f"|rho| must be <= 1, got {rho}")
    if abs(rho) == 1:
        return 0.0

    t = rho * np.sqrt((n - 2) / (1 - rho ** 2))
    return float(min(1.0, 2 * stats.t.sf(abs(t), n - 2)))


def rank_correlation_matrix(values):
    """All pairwise Spearman coefficients of a samples x sensors array (constant columns give 0)."""
    values = np.asarray(values, dtype=np.float64)
    ranks = stats.rankdata(values, axis=0)
    centered = ranks - ranks.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    constant = np.all(values == values[0], axis=0)
    norms[constant] = 1.0
    rho = (centered.T @ centered) / np.outer(norms, norms)
    rho = (rho + rho.T) / 2
    rho[constant, :] = 0.0
    rho[:, constant] = 0.0
    if constant.any():
        log.warning(f"{int(constant.sum())} constant sensor(s) have no rank correlation")
    return np.clip(rho, -1.0, 1.0)


def build_graph(values, sensor_names, p_threshold=DEFAULT_P_THRESHOLD, alpha=DEFAULT_ALPHA, absolute=False):
    values = np.asarray(values, dtype=np.float64)
    n_samples, n_sensors = values.shape
    if n_samples < 4:
        raise ShapeException(f"build_graph needs at least 4 training frames, got {n_samples}")
    if len(sensor_names) != n_sensors:
        raise ShapeException(f"{len(sensor_names)} sensor names for {n_sensors} columns")

    rho = rank_correlation_matrix(values)
    pvals = np.ones_like(rho)
    for z in range(n_sensors):
        for c in range(z + 1, n_sensors):
            pvals[z, c] = pvals[c, z] = significance(rho[z, c], n_samples)

    strength = np.abs(rho) if absolute else rho
    adjacency = ((strength > p_threshold) & (pvals < alpha)).astype(np.int64)
    np.fill_diagonal(adjacency, 0)

    graph = CorrelationGraph(list(sensor_names), rho, pvals, adjacency, p_threshold, alpha, absolute)
    log.info(f"correlation graph (p={p_threshold}, alpha={alpha}): {graph.edge_count()} edges "
             f"over {n_sensors} sensors")
    return graph


def write_graph(graph, json_path, edge_list_path=None):
    with open(json_path, "w") as f:
        f.write(json.dumps(graph.to_dict(), indent=2))

    if edge_list_path is not None:
        with open(edge_list_path, "w") as f:
            f.write(graph.edge_list())


def read_graph(path):
    with open(path, 'r') as f:
        return CorrelationGraph.from_dict(json.load(f))

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

"""
Published WADI detection figures and the arithmetic checks run against
them (FNR, k_times, RTL and F1 formulas).
"""

import logging
from dataclasses import dataclass, field
from edgecloud.harness.metrics import f1_score, false_negative_rate, reduced_traffic_load

log = logging.getLogger(__name__)

N_TEST_SAMPLES = 35581
N_SENSORS = 127
AGGREGATION_SCALE = 10
ABNORMAL_WINDOWS = 196

# e, TP, FP, FNR (%), k_times, RTL, mean time (ms)
EDGE_DETECTION_ROWS = [
    (15, 196, 3361, 0.0, 3557, 255397, 22.32),
    (20, 196, 3037, 0.0, 3233, 412877, 22.21),
    (21, 196, 2464, 0.0, 2660, 1140587, 22.19),
    (22, 196, 1374, 0.0, 1570, 2537587, 22.86),
    (23, 196, 1012, 0.0, 1208, 2984627, 23.30),
    (24, 196, 843, 0.0, 1039, 3199257, 22.94),
    (25, 196, 759, 0.0, 955, 3305937, 22.77),
    (26, 196, 721, 0.0, 917, 3354197, 22.98),
    (27, 196, 663, 0.0, 859, 3427857, 22.83),
    (28, 193, 538, 1.53, 731, 3590417, 22.77),
    (29, 167, 243, 14.79, 410, 4466717, 22.49),
    (31, 111, 0, 43.37, 111, 4504690, 22.21),
    (33, 19, 0, 90.31, 19, 45134657, 22.49),
]

# model, precision (%), recall (%), F1
MODEL_COMPARISON_ROWS = [
    ("PCA", 39.53, 53.63, 0.10),
    ("KNN", 7.76, 7.75, 0.08),
    ("FB", 8.60, 8.60, 0.09),
    ("AE", 34.35, 34.35, 0.34),
    ("MAD-GAN", 41.44, 33.92, 0.37),
    ("DAGMM", 54.44, 26.99, 0.36),
    ("LSTM-VAE", 87.79, 14.45, 0.25),
    ("ARADF", 89.15, 20.34, 0.42),
    ("GDN", 97.5, 40.19, 0.57),
    ("GTA", 83.91, 83.61, 0.84),
    ("G-GCRL", 99.16, 92.97, 0.96),
]

FNR_TOLERANCE = 0.01
F1_TOLERANCE = 0.005


@dataclass
class Check:
    name: str
    reported: float
    computed: float
    ok: bool


@dataclass
class RowReport:
    table: str
    key: str
    checks: list = field(default_factory=list)

    @property
    def status(self):
        return "PASS" if all(c.ok for c in self.checks) else "FLAGGED"

    def check(self, name):
        return next(c for c in self.checks if c.name == name)


def verify_edge_detection_row(e, tp, fp, fnr, k_times, rtl):
    fn = ABNORMAL_WINDOWS - tp
    computed_fnr = 100.0 * false_negative_rate(tp, fn)
    computed_k = tp + fp
    computed_rtl = reduced_traffic_load(N_TEST_SAMPLES, k_times, AGGREGATION_SCALE, N_SENSORS)
    return RowReport("edge", f"e={e}", [
        Check("FNR", fnr, computed_fnr, abs(computed_fnr - fnr) <= FNR_TOLERANCE),
        Check("k_times", k_times, computed_k, computed_k == k_times),
        Check("RTL", rtl, computed_rtl, computed_rtl == rtl),
    ])


def verify_model_row(model, precision, recall, f1):
    computed = f1_score(precision / 100.0, recall / 100.0)
    return RowReport("model", model, [Check("F1", f1, computed, abs(computed - f1) <= F1_TOLERANCE)])


def verify_tables():
    reports = [verify_edge_detection_row(*row[:6]) for row in EDGE_DETECTION_ROWS]
    reports += [verify_model_row(*row) for row in MODEL_COMPARISON_ROWS]
    for r in reports:
        if r.status != "PASS":
            failed = ", ".join(f"{c.name} reported {c.reported} vs computed {c.computed}" for c in r.checks if not c.ok)
            log.warning(f"table {r.table} row {r.key} is inconsistent: {failed}")
    return reports

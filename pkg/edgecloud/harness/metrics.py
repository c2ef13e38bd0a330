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

from dataclasses import dataclass, field
from typing import Optional
import numpy as np
from sklearn.metrics import confusion_matrix, recall_score
from edgecloud.harness.exceptions import PipelineException


@dataclass
class Tallies:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @staticmethod
    def from_labels(predicted_abnormal, actual_abnormal):
        predicted = np.asarray(predicted_abnormal, dtype=bool)
        actual = np.asarray(actual_abnormal, dtype=bool)
        if predicted.shape != actual.shape:
            raise PipelineException(f"{len(predicted)} decisions for {len(actual)} ground truth labels")
        if not len(actual):
            return Tallies()

        tn, fp, fn, tp = confusion_matrix(actual, predicted, labels=[False, True]).ravel()
        return Tallies(int(tp), int(fp), int(fn), int(tn))

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class RunMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    fnr: Optional[float]
    k_times: int
    rtl: int
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    final: Tallies = field(default_factory=Tallies)
    per_class_acc: dict = field(default_factory=dict)
    mean_time: Optional[float] = None
    undefined: list = field(default_factory=list)

    def to_dict(self, include_timing=False):
        d = {
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "fnr": self.fnr, "k_times": self.k_times, "rtl": self.rtl,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "final": {"tp": self.final.tp, "fp": self.final.fp, "fn": self.final.fn, "tn": self.final.tn},
            "per_class_acc": {str(k): v for k, v in sorted(self.per_class_acc.items())},
            "undefined": list(self.undefined)
        }
        if include_timing:
            d["mean_time_ms"] = self.mean_time
        return d

    def row(self):
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn, "fnr": self.fnr,
                "k_times": self.k_times, "rtl": self.rtl, "precision": self.precision, "recall": self.recall,
                "f1": self.f1}


def _ratio(numerator, denominator):
    return numerator / denominator if denominator > 0 else None


def false_negative_rate(tp, fn):
    return _ratio(fn, tp + fn)


def reduced_traffic_load(n_frames, k_times, aggregation_scale, n_sensors):
    """Raw sensor values never uploaded; the uploads are counted with B samples each."""
    return (n_frames - k_times * aggregation_scale) * n_sensors


def f1_score(precision, recall):
    if precision is None or recall is None or precision + recall == 0:
        return None
    return 2 * precision * recall / (precision + recall)


def compute_metrics(tallies, n_frames, n_sensors, aggregation_scale, final=None, per_class_acc=None,
                    mean_time=None):
    """
    Edge-stage figures come from `tallies`; precision, recall and F1 from
    the cloud-stage `final` tallies when given, otherwise from `tallies`.
    """
    scored = final if final is not None else tallies
    k_times = tallies.tp + tallies.fp
    fnr = false_negative_rate(tallies.tp, tallies.fn)
    precision = _ratio(scored.tp, scored.tp + scored.fp)
    recall = _ratio(scored.tp, scored.tp + scored.fn)
    f1 = f1_score(precision, recall)

    undefined = [name for name, value in (("fnr", fnr), ("precision", precision), ("recall", recall), ("f1", f1))
                 if value is None]
    per_class_acc = dict(per_class_acc or {})
    undefined += [f"per_class_acc[{k}]" for k, v in sorted(per_class_acc.items()) if v is None]
    return RunMetrics(tallies.tp, tallies.fp, tallies.fn, tallies.tn, fnr, k_times,
                      reduced_traffic_load(n_frames, k_times, aggregation_scale, n_sensors),
                      precision, recall, f1, Tallies(scored.tp, scored.fp, scored.fn, scored.tn), per_class_acc,
                      mean_time, undefined)


def per_class_accuracy(predictions, truth, n_classes=None):
    """Recall of every class id; None for a class without ground truth windows."""
    predictions = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if len(predictions) != len(truth):
        raise PipelineException(f"{len(predictions)} predictions for {len(truth)} ground truth labels")

    classes = list(range(n_classes)) if n_classes is not None else sorted(set(truth.tolist()))
    if not classes or not len(truth):
        return {c: None for c in classes}

    recalls = recall_score(truth, predictions, labels=classes, average=None, zero_division=np.nan)
    return {c: None if np.isnan(r) else float(r) for c, r in zip(classes, recalls)}

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
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import numpy as np
from edgecloud.cloud import gcrl
from edgecloud.data.dataset import window_class
from edgecloud.edge.detector import EdgeNode, network_vote
from edgecloud.harness.channel import UploadChannel, UploadMessage
from edgecloud.harness.exceptions import PipelineException
from edgecloud.harness.metrics import Tallies, compute_metrics, per_class_accuracy

log = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    metrics: object
    header: dict
    events: list
    uploads: list = field(default_factory=list)


class CloudAnalyzer(object):
    """Single consumer of the upload channel; predictions come back in upload order."""

    def __init__(self, params):
        self.params = params

    def analyze(self, channel):
        messages = list(channel.drain())
        if not messages:
            return messages, []
        if self.params is None:
            return messages, [(1, None)] * len(messages)

        predicted, confidence = gcrl.classify_batch(np.stack([m.payload for m in messages]), self.params)
        return messages, [(int(p), float(c)) for p, c in zip(predicted, confidence)]


def _check(split, edge_models, graph, params, aggregation):
    covered = sorted(i for m in edge_models.values() for i in m.sensor_indices)
    if covered != list(range(split.n_sensors)):
        raise PipelineException(f"edge models cover sensors {covered}, expected 0..{split.n_sensors - 1}")
    for m in edge_models.values():
        if m.aggregation_scale != aggregation.aggregation_scale:
            raise PipelineException(f"edge {m.edge_id} was fitted with B={m.aggregation_scale}, "
                                    f"pipeline runs with B={aggregation.aggregation_scale}")
    if graph is not None and graph.n != split.n_sensors:
        raise PipelineException(f"graph has {graph.n} sensors, dataset {split.n_sensors}")
    if params is not None:
        if params.n_nodes != split.n_sensors or params.config.window != aggregation.window_length:
            raise PipelineException(f"cloud model expects ({params.n_nodes}, {params.config.window}) payloads, "
                                    f"pipeline produces ({split.n_sensors}, {aggregation.window_length})")
        if graph is not None and not np.allclose(gcrl.propagation_matrix(graph.adjacency), params.propagation):
            raise PipelineException("cloud model was trained on a different correlation graph")
    if not aggregation.window_starts(len(split.test)):
        raise PipelineException(f"test stream of {len(split.test)} frames holds no complete window")


def run_pipeline(split, edge_models, graph, params, e, aggregation, workers=1):
    _check(split, edge_models, graph, params, aggregation)
    test = split.test
    n_classes = params.config.n_classes if params is not None else 2
    length = aggregation.window_length
    nodes = [EdgeNode(edge_models[edge_id]) for edge_id in sorted(edge_models)]
    channel = UploadChannel(split.n_sensors, length)
    starts = aggregation.window_starts(len(test))
    classes = test.classes_for(n_classes)
    log.info(f"streaming {len(starts)} windows through {len(nodes)} edge(s), e={e}")

    events = []
    elapsed = 0.0
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for start in starts:
            window = test.values[start:start + length]
            t = int(test.timestamps[start])

            begin = time.perf_counter()
            if pool is not None:
                verdicts = list(pool.map(lambda node: node.detect(window, t), nodes))
            else:
                verdicts = [node.detect(window, t) for node in nodes]
            decision = network_vote(verdicts, e)
            elapsed += time.perf_counter() - begin

            if decision.upload:
                channel.send(UploadMessage(t, decision.edge_ids, decision.payload, decision.s_total,
                                           t + length * aggregation.sampling_period))

            truth = window_class(classes[start:start + length])
            events.append({
                "type": "window", "t": t, "start": start,
                "verdicts": [{"edge": v.edge_id, "s": v.s, "flags": [int(f) for f in v.flags],
                              "clamped": list(v.clamped)} for v in verdicts],
                "s_total": decision.s_total,
                "decision": "upload" if decision.upload else "normal",
                "prediction": 0, "confidence": None,
                "truth": truth
            })
    finally:
        if pool is not None:
            pool.shutdown()

    uploads, predictions = CloudAnalyzer(params).analyze(channel)
    uploaded = [event for event in events if event["decision"] == "upload"]
    if len(uploaded) != len(predictions):
        raise PipelineException(f"{len(predictions)} cloud predictions for {len(uploaded)} uploaded windows")
    for event, (prediction, confidence) in zip(uploaded, predictions):
        event["prediction"], event["confidence"] = prediction, confidence

    header = {"type": "run", "n_frames": len(test), "n_sensors": split.n_sensors,
              "aggregation_scale": aggregation.aggregation_scale, "sensitivity": e, "n_classes": n_classes,
              "windows": len(starts)}
    metrics = metrics_from_events(header, events)
    metrics.mean_time = 1000.0 * elapsed / len(starts)
    log.info(f"e={e}: k_times={metrics.k_times}, FNR={metrics.fnr}, RTL={metrics.rtl}, "
             f"precision={metrics.precision}, recall={metrics.recall}, mean time {metrics.mean_time:.3f} ms")
    return PipelineResult(metrics, header, events, uploads)


def metrics_from_events(header, events):
    abnormal = [e["truth"] != 0 for e in events]
    edge = Tallies.from_labels([e["decision"] == "upload" for e in events], abnormal)
    final = Tallies.from_labels([e["prediction"] != 0 for e in events], abnormal)

    per_class = per_class_accuracy([e["prediction"] for e in events], [e["truth"] for e in events],
                                   header["n_classes"])
    return compute_metrics(edge, header["n_frames"], header["n_sensors"], header["aggregation_scale"], final,
                           per_class)


def write_event_log(result, path):
    with open(path, "w") as f:
        f.write(json.dumps(result.header, sort_keys=True) + "\n")
        for event in result.events:
            f.write(json.dumps(event, sort_keys=True) + "\n")


def read_event_log(path):
    with open(path, 'r') as f:
        records = [json.loads(line) for line in f if line.strip()]

    headers = [r for r in records if r.get("type") == "run"]
    if len(headers) != 1:
        raise PipelineException(f"{path}: expected one run header, found {len(headers)}")
    return headers[0], [r for r in records if r.get("type") == "window"]


def replay_metrics(path):
    header, events = read_event_log(path)
    return metrics_from_events(header, events)

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
from dataclasses import dataclass
from edgecloud.harness import pipeline, stages

log = logging.getLogger(__name__)


@dataclass
class SweepRow:
    p: float
    e: int
    edge_count: int
    metrics: object

    def keys(self):
        return {"p": self.p, "e": self.e, "edge_count": self.edge_count}


def sweep(split, e_values, p_values, run_config, edge_models=None):
    """
    Grid over the correlation threshold and the vote sensitivity. The graph
    and the cloud model are rebuilt once per threshold; the edge models do
    not depend on either and are fitted once.
    """
    aggregation = stages.aggregation_of(run_config)
    models = edge_models if edge_models is not None else stages.fit_edges(split, run_config)

    rows = []
    for p in p_values:
        graph = stages.correlation_graph(split, run_config, p)
        params = stages.train_cloud_model(split, graph, run_config)
        for e in e_values:
            result = pipeline.run_pipeline(split, models, graph, params, e, aggregation, run_config.workers)
            rows.append(SweepRow(p, e, graph.edge_count(), result.metrics))
            log.info(f"sweep p={p} e={e}: F1={result.metrics.f1}, RTL={result.metrics.rtl}")

    return rows


def select_best(rows):
    """Row with the highest F1; ties go to the larger traffic reduction."""
    scored = [r for r in rows if r.metrics.f1 is not None]
    if not scored:
        return None
    return max(scored, key=lambda r: (r.metrics.f1, r.metrics.rtl))

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

import os
import unittest
from edgecloud.harness import pipeline, stages
from test.edgecloud import fixtures

SENSOR_SETS = {
    1: [0, 1, 2, 3],
    2: [4, 5, 6, 7],
    3: [8, 9, 10, 11],
    4: [0, 4, 8, 9, 1],
    5: [2, 3, 6, 7, 10],
    6: [1, 5, 9, 11],
}


def plant_document():
    """Twelve sensors on three edges, every attack covers ten whole windows of B=10."""
    train = [(1100 * (i + 1), 1 + i % 6) for i in range(12)]
    test = [(14550 + 550 * i, 1 + i) for i in range(6)]
    return {
        "n_sensors": 12,
        "n_edges": 3,
        "duration": 20000,
        "train_fraction": 0.7,
        "seed": 5,
        "attack_windows": [{"start": start, "end": start + 110, "attack_type": attack_type,
                            "sensors": SENSOR_SETS[attack_type], "magnitude": 8.0}
                           for start, attack_type in train + test]
    }


@unittest.skipUnless(os.environ.get("EDGECLOUD_SLOW_TESTS") == "1", "set EDGECLOUD_SLOW_TESTS=1 to run")
class EndToEndTest(unittest.TestCase):
    def setUp(self) -> None:
        unittest.TestCase.setUp(self)
        self.run_config = fixtures.small_run_config(
            dataset={"synthetic": plant_document()},
            gcrl={"layers": 2, "hidden": 16, "max_epochs": 60, "patience": 10, "n_classes": 7})
        self.split = stages.load_dataset(self.run_config)
        self.aggregation = stages.aggregation_of(self.run_config)

    def tearDown(self) -> None:
        unittest.TestCase.tearDown(self)

    def test_tuned_sensitivity_detects_every_attack(self):
        models = stages.fit_edges(self.split, self.run_config)
        edge_only = {e: pipeline.run_pipeline(self.split, models, None, None, e, self.aggregation)
                     for e in range(0, self.split.n_sensors + 1)}
        tuned = max(e for e, r in edge_only.items() if r.metrics.fnr == 0)

        graph = stages.correlation_graph(self.split, self.run_config)
        params = stages.train_cloud_model(self.split, graph, self.run_config)
        sut = pipeline.run_pipeline(self.split, models, graph, params, tuned, self.aggregation).metrics

        self.assertEqual(0, sut.fn)
        self.assertGreaterEqual(sut.precision, 0.9)
        self.assertGreaterEqual(sut.recall, 0.9)
        self.assertGreater(sut.rtl, 0.5 * len(self.split.test) * self.split.n_sensors)
        self.assertGreater(graph.edge_count(), 0)


if __name__ == '__main__':
    unittest.main()

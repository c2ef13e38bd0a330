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

import math
import os
import unittest
from tempfile import TemporaryDirectory
import numpy as np
from edgecloud.data import synthetic
from edgecloud.edge import detector
from edgecloud.edge.detector import EdgeModel, EdgeNode, EdgeVerdict, SensorGaussians
from edgecloud.edge.exceptions import EdgeModelException
from edgecloud.edge.preprocess import AggregationConfig
from test.edgecloud import fixtures


def verdict(t, edge_id, s, sensor_indices, window_length=2):
    payload = np.full((len(sensor_indices), window_length), float(edge_id))
    flags = tuple(i < s for i in range(len(sensor_indices)))
    return EdgeVerdict(t, edge_id, tuple(sensor_indices), flags, s, payload)


class DetectorTest(unittest.TestCase):
    def setUp(self) -> None:
        unittest.TestCase.setUp(self)
        self.maxDiff = None

    def tearDown(self) -> None:
        unittest.TestCase.tearDown(self)

    def test_fit_edge_model_variance_floor(self):
        sut = detector.fit_edge_model([0.0, 0.0, 0.0, 0.0, 2.0, 2.0], [1, 1, 1, 1, 0, 0], 1, ["a"])

        g = sut.gaussians[0]
        self.assertEqual(0.0, g.mu_no)
        self.assertEqual(detector.SIGMA_FLOOR, g.sigma_no)
        self.assertEqual(2.0, g.mu_ab)
        self.assertEqual(detector.SIGMA_FLOOR, g.sigma_ab)
        self.assertAlmostEqual(2 / 3, sut.prior_normal, places=15)
        self.assertAlmostEqual(1 / 3, sut.prior_abnormal, places=15)

    def test_fit_edge_model_mle(self):
        sut = detector.fit_edge_model([1.0, 3.0, 10.0], [1, 1, 0], 1, ["a"])

        self.assertEqual(2.0, sut.gaussians[0].mu_no)
        self.assertEqual(1.0, sut.gaussians[0].sigma_no)

    def test_fit_edge_model_large_sample(self):
        rng = np.random.default_rng(3)
        aggregates = np.concatenate([rng.normal(5.0, 2.0, 1000), rng.normal(-3.0, 0.5, 1000)])
        labels = np.array([1] * 1000 + [0] * 1000)

        g = detector.fit_edge_model(aggregates, labels, 1, ["a"]).gaussians[0]

        self.assertAlmostEqual(5.0, g.mu_no, delta=0.25)
        self.assertAlmostEqual(2.0, g.sigma_no, delta=0.1)
        self.assertAlmostEqual(-3.0, g.mu_ab, delta=0.15)
        self.assertAlmostEqual(0.5, g.sigma_ab, delta=0.025)

    def test_fit_edge_model_needs_both_classes(self):
        with self.assertRaises(EdgeModelException):
            detector.fit_edge_model([1.0, 2.0, 3.0], [1, 1, 1], 1, ["a"])

        with self.assertRaises(EdgeModelException):
            detector.fit_edge_model([], [], 1, ["a"])

    def test_fit_edge_model_borrows_abnormal_gaussian(self):
        aggregates = np.array([[0.0, 1.0], [2.0, 3.0], [10.0, 2.0], [12.0, 2.0]])
        labels = np.array([[1, 1], [1, 1], [0, 1], [0, 1]])

        sut = detector.fit_edge_model(aggregates, labels, 1, ["a", "b"])

        a, b = sut.gaussians
        self.assertFalse(a.borrowed)
        self.assertTrue(b.borrowed)
        self.assertAlmostEqual(b.mu_no + detector.BORROWED_SHIFT * b.sigma_no, b.mu_ab, places=12)
        self.assertEqual(a.sigma_ab, b.sigma_ab)
        self.assertEqual(0.5, sut.prior_normal)

    def test_classify_window_tie_goes_to_abnormal(self):
        g = SensorGaussians(1, "a", 0.0, 1.0, 4.0, 1.0)

        self.assertTrue(detector.classify_window(2.0, g, (0.5, 0.5)))
        self.assertFalse(detector.classify_window(0.0, g, (0.5, 0.5)))
        self.assertTrue(detector.classify_window(4.0, g, (0.5, 0.5)))

    def test_classify_window_boundary(self):
        g = SensorGaussians(1, "a", 0.0, 1.0, 4.0, 1.0)
        boundary = (8.0 - math.log(0.05 / 0.95)) / 4.0

        for x in np.linspace(0.0, 4.0, 81):
            expected = x >= boundary
            self.assertEqual(expected, detector.classify_window(x, g, (0.95, 0.05)), msg=str(x))

    def test_detect_edge(self):
        model = fixtures.identity_model(1, range(5))
        window = np.zeros((2, 5))

        self.assertEqual(0, detector.detect_edge(window, model).s)

        window[:, [0, 2, 4]] = 10.0
        sut = detector.detect_edge(window, model, t=42)

        self.assertEqual(3, sut.s)
        self.assertEqual((True, False, True, False, True), sut.flags)
        self.assertEqual(42, sut.t)
        self.assertEqual((5, 2), sut.payload.shape)

    def test_detect_edge_matches_recount(self):
        rng = np.random.default_rng(5)
        model = fixtures.identity_model(1, range(5))
        for _ in range(20):
            window = rng.uniform(-2.0, 12.0, (2, 5))

            sut = detector.detect_edge(window, model)

            recount = sum(detector.classify_window(window[:, j].sum(), g, model.priors)
                          for j, g in enumerate(model.gaussians))
            self.assertEqual(recount, sut.s)

    def test_detect_edge_wrong_shape(self):
        with self.assertRaises(EdgeModelException):
            detector.detect_edge(np.zeros((3, 5)), fixtures.identity_model(1, range(5)))

    def test_network_vote_is_strict(self):
        verdicts = [verdict(7, 1, 2, [0, 1, 2]), verdict(7, 2, 1, [3, 4])]

        self.assertFalse(detector.network_vote(verdicts, 3).upload)
        sut = detector.network_vote(verdicts, 2)

        self.assertTrue(sut.upload)
        self.assertEqual(3, sut.s_total)
        self.assertEqual((1, 2), sut.edge_ids)
        self.assertEqual([1.0, 1.0, 1.0, 2.0, 2.0], sut.payload[:, 0].tolist())

    def test_network_vote_assembles_payload_by_sensor_index(self):
        verdicts = [verdict(0, 2, 1, [1, 3]), verdict(0, 1, 0, [0, 2])]

        sut = detector.network_vote(verdicts, 0)

        self.assertEqual([1.0, 2.0, 1.0, 2.0], sut.payload[:, 0].tolist())
        self.assertEqual((2,), sut.edge_ids)

    def test_network_vote_cloud_only(self):
        sut = detector.network_vote([verdict(0, 1, 0, [0, 1])], -1)

        self.assertTrue(sut.upload)

    def test_network_vote_errors(self):
        with self.assertRaises(EdgeModelException):
            detector.network_vote([], 1)
        with self.assertRaises(EdgeModelException):
            detector.network_vote([verdict(0, 1, 0, [0]), verdict(1, 2, 0, [1])], 1)

    def test_upload_count_non_increasing_in_e(self):
        rng = np.random.default_rng(9)
        totals = rng.integers(15, 35, 500)

        counts = []
        for e in range(22, 28):
            counts.append(sum(detector.network_vote([verdict(t, 1, int(s), list(range(40)))], e).upload
                              for t, s in enumerate(totals)))

        self.assertEqual(sorted(counts, reverse=True), counts)

    def test_edge_node_selects_its_sensors(self):
        sut = EdgeNode(fixtures.identity_model(2, [1, 3]))
        window = np.zeros((2, 4))
        window[:, 3] = 10.0

        result = sut.detect(window, 5)

        self.assertEqual(1, result.s)
        self.assertEqual((1, 3), result.sensor_indices)
        self.assertEqual([10.0, 10.0], result.payload[1].tolist())

    def test_edge_model_serialisation(self):
        model = fixtures.identity_model(2, [1, 3])

        self.assertEqual(model, EdgeModel.from_dict(model.to_dict()))

        document = model.to_dict()
        document["format_version"] = "2.0"
        with self.assertRaises(EdgeModelException):
            EdgeModel.from_dict(document)

    def test_fit_edge_models_is_reproducible(self):
        split = synthetic.generate_synthetic(synthetic.spec_from_dict(fixtures.synthetic_document()))
        aggregation = AggregationConfig(aggregation_scale=10)

        with TemporaryDirectory() as td:
            first = detector.write_edge_models(detector.fit_edge_models(split, aggregation), f"{td}/a")
            second = detector.write_edge_models(detector.fit_edge_models(split, aggregation), f"{td}/b")
            self.assertEqual(["edge-1.json", "edge-2.json"], [os.path.basename(p) for p in first])
            for a, b in zip(first, second):
                with open(a, 'rb') as fa, open(b, 'rb') as fb:
                    self.assertEqual(fa.read(), fb.read())

            models = detector.read_edge_models(f"{td}/a")

        self.assertEqual([0, 1, 2], models[1].sensor_indices)
        self.assertEqual(["sensor_003", "sensor_004", "sensor_005"], models[2].sensors)
        self.assertEqual(10, models[1].aggregation_scale)

    def test_read_edge_models_missing(self):
        with self.assertRaises(EdgeModelException):
            detector.read_edge_models("/does/not/exist")


if __name__ == '__main__':
    unittest.main()

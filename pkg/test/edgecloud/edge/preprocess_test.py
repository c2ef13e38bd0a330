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

import unittest
import numpy as np
from scipy import special, stats
from edgecloud.edge import preprocess
from edgecloud.edge.exceptions import PreprocessException
from edgecloud.edge.preprocess import AggregationConfig, BoxCoxEntry, BoxCoxParams


def grid_log_likelihood(data, grid):
    """Profile log-likelihood of every grid lambda in one broadcast."""
    transformed = special.boxcox(data[None, :], grid[:, None])
    return (grid - 1) * np.log(data).sum() - len(data) / 2 * np.log(transformed.var(axis=1))


class PreprocessTest(unittest.TestCase):
    def setUp(self) -> None:
        unittest.TestCase.setUp(self)
        self.rng = np.random.default_rng(42)

    def tearDown(self) -> None:
        unittest.TestCase.tearDown(self)

    def test_aggregate(self):
        self.assertEqual(6.0, preprocess.aggregate([1.0, 2.0, 3.0], 2))
        self.assertEqual(11.0, preprocess.aggregate([1.0] * 11, 10))
        self.assertEqual(0.0, preprocess.aggregate([5.0, -5.0], 1))

    def test_aggregate_wrong_length(self):
        with self.assertRaises(PreprocessException):
            preprocess.aggregate([1.0, 2.0], 2)

    def test_aggregation_config(self):
        sut = AggregationConfig(aggregation_scale=2)

        self.assertEqual(3, sut.window_length)
        self.assertEqual(3, sut.stride)
        self.assertEqual([0, 3, 6], sut.window_starts(10))
        self.assertEqual([0, 1, 2], AggregationConfig(aggregation_scale=2, stride=1).window_starts(5))
        with self.assertRaises(PreprocessException):
            AggregationConfig(aggregation_scale=0)

    def test_aggregate_series(self):
        values = np.arange(14, dtype=np.float64).reshape(7, 2)

        sums, starts = preprocess.aggregate_series(values, AggregationConfig(aggregation_scale=2))

        self.assertEqual([0, 3], starts)
        self.assertEqual([[6.0, 9.0], [24.0, 27.0]], sums.tolist())

    def test_transform_log_at_zero(self):
        value, clamped = preprocess.transform(np.e, BoxCoxEntry(0.0, 0.0))

        self.assertAlmostEqual(1.0, value, places=12)
        self.assertFalse(clamped)

    def test_transform_power(self):
        value, _ = preprocess.transform(3.0, BoxCoxEntry(2.0, 0.0))
        self.assertAlmostEqual(4.0, value, places=12)

        value, _ = preprocess.transform(1.0, BoxCoxEntry(0.5, 3.0))
        self.assertAlmostEqual(2.0, value, places=12)

    def test_transform_examples(self):
        self.assertEqual(0.0, preprocess.transform(1.0, BoxCoxEntry(0.0, 0.0))[0])
        self.assertAlmostEqual(4.0, preprocess.transform(5.0, BoxCoxEntry(1.0, 0.0))[0], places=12)
        self.assertAlmostEqual(4.0, preprocess.transform(9.0, BoxCoxEntry(0.5, 0.0))[0], places=12)
        self.assertEqual(0.0, preprocess.aggregate([0.0] * 11, 10))

    def test_transform_near_zero_lambda_matches_log(self):
        for x in np.geomspace(0.1, 100.0, 25):
            value, _ = preprocess.transform(x, BoxCoxEntry(1e-8, 0.0))
            self.assertLess(abs(value - np.log(x)), 1e-6)

    def test_transform_clamps_below_training_minimum(self):
        value, clamped = preprocess.transform(-10.0, BoxCoxEntry(1.0, 2.0))

        self.assertTrue(clamped)
        self.assertAlmostEqual(preprocess.EPSILON - 1.0, value, places=12)

    def test_transform_array(self):
        values = np.array([[np.e, 3.0], [1.0, -4.0]])

        out, clamped = preprocess.transform_array(values, [BoxCoxEntry(0.0, 0.0), BoxCoxEntry(2.0, 0.0)])

        self.assertAlmostEqual(1.0, out[0, 0], places=12)
        self.assertAlmostEqual(4.0, out[0, 1], places=12)
        self.assertEqual([[False, False], [False, True]], clamped.tolist())

    def test_fit_lambda_needs_samples(self):
        with self.assertRaises(PreprocessException):
            preprocess.fit_lambda(np.ones(19))

    def test_fit_lambda_constant(self):
        sut = preprocess.fit_lambda(np.full(50, 3.0))

        self.assertEqual(1.0, sut.lmbda)
        self.assertTrue(sut.degenerate)

    def test_fit_lambda_shifts_non_positive_data(self):
        data = self.rng.normal(0.0, 1.0, 200)

        sut = preprocess.fit_lambda(data)

        self.assertAlmostEqual(preprocess.EPSILON - data.min(), sut.shift, places=12)
        self.assertGreater(data.min() + sut.shift, 0)

    def test_fit_lambda_against_grid_oracle(self):
        grid = np.round(np.arange(-5.0, 5.0 + 5e-4, 1e-3), 10)
        self.assertIn(0.0, grid)
        lambdas = []
        for _ in range(50):
            data = self.rng.lognormal(0.0, 1.0, 500)

            sut = preprocess.fit_lambda(data)

            self.assertGreaterEqual(preprocess.profile_log_likelihood(sut.lmbda, data),
                                    grid_log_likelihood(data, grid).max() - 1e-6)
            lambdas.append(sut.lmbda)

        self.assertLess(abs(np.mean(lambdas)), 0.05)
        self.assertLess(max(abs(v) for v in lambdas), 0.15)

    def test_fit_lambda_on_log_normal_quantiles(self):
        for n in (200, 500, 2000):
            data = np.exp(stats.norm.ppf((np.arange(n) + 0.5) / n))

            sut = preprocess.fit_lambda(data)

            self.assertLess(abs(sut.lmbda), 0.05, msg=str(n))

    def test_fit_boxcox(self):
        aggregates = np.column_stack([self.rng.lognormal(0.0, 0.5, 100), np.full(100, 2.0)])

        sut = preprocess.fit_boxcox(3, aggregates, ["a", "b"])

        self.assertFalse(sut["a"].degenerate)
        self.assertTrue(sut["b"].degenerate)
        self.assertEqual({"3/a", "3/b"}, set(sut.to_dict()))
        self.assertEqual(sut, BoxCoxParams.from_dict(3, sut.to_dict()))

    def test_boxcox_params_from_foreign_edge(self):
        with self.assertRaises(PreprocessException):
            BoxCoxParams.from_dict(1, {"2/a": {"lambda": 1.0, "shift": 0.0}})


if __name__ == '__main__':
    unittest.main()

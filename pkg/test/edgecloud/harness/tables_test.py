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
from edgecloud.harness import tables


class TablesTest(unittest.TestCase):
    def setUp(self) -> None:
        unittest.TestCase.setUp(self)
        self.reports = {(r.table, r.key): r for r in tables.verify_tables()}

    def tearDown(self) -> None:
        unittest.TestCase.tearDown(self)

    def test_consistent_edge_rows(self):
        for e in (23, 24, 25, 26, 27):
            self.assertEqual("PASS", self.reports[("edge", f"e={e}")].status, msg=str(e))

        self.assertEqual(3427857, self.reports[("edge", "e=27")].check("RTL").computed)
        self.assertEqual(859, self.reports[("edge", "e=27")].check("k_times").computed)
        self.assertEqual(2984627, self.reports[("edge", "e=23")].check("RTL").computed)

    def test_inconsistent_edge_rows(self):
        for e in (22, 29, 31, 33):
            self.assertEqual("FLAGGED", self.reports[("edge", f"e={e}")].status, msg=str(e))

        sut = self.reports[("edge", "e=22")].check("RTL")
        self.assertEqual(2537587, sut.reported)
        self.assertEqual(2524887, sut.computed)
        self.assertFalse(sut.ok)

    def test_false_negative_rate_column(self):
        for e in (28, 29, 31, 33):
            self.assertTrue(self.reports[("edge", f"e={e}")].check("FNR").ok, msg=str(e))

        self.assertAlmostEqual(1.53, self.reports[("edge", "e=28")].check("FNR").computed, delta=0.01)

    def test_model_rows(self):
        sut = self.reports[("model", "G-GCRL")].check("F1")

        self.assertAlmostEqual(0.9597, sut.computed, delta=0.0005)
        self.assertEqual("PASS", self.reports[("model", "G-GCRL")].status)
        self.assertEqual("PASS", self.reports[("model", "GTA")].status)
        self.assertEqual("FLAGGED", self.reports[("model", "PCA")].status)

    def test_every_row_is_checked(self):
        self.assertEqual(len(tables.EDGE_DETECTION_ROWS) + len(tables.MODEL_COMPARISON_ROWS), len(self.reports))


if __name__ == '__main__':
    unittest.main()

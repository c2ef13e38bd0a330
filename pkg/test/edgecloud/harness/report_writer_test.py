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
import os
import unittest
from tempfile import TemporaryDirectory
import pandas as pd
from edgecloud.harness import tables
from edgecloud.harness.metrics import Tallies, compute_metrics
from edgecloud.harness.report_writer import ReportWriter
from edgecloud.harness.sweep import SweepRow


class ReportWriterTest(unittest.TestCase):
    def setUp(self) -> None:
        unittest.TestCase.setUp(self)
        self.tmp = TemporaryDirectory()
        self.out_dir = os.path.join(self.tmp.name, "reports")
        self.sut = ReportWriter(self.out_dir)
        self.metrics = compute_metrics(Tallies(tp=9, fp=1, fn=1, tn=9), 100, 2, 4)
        self.empty = compute_metrics(Tallies(tn=10), 100, 2, 4)

    def tearDown(self) -> None:
        unittest.TestCase.tearDown(self)
        self.tmp.cleanup()

    def read(self, name):
        with open(os.path.join(self.out_dir, name), 'r') as f:
            return f.read()

    def test_write_verify_tables(self):
        rendered = self.sut.write_verify_tables(tables.verify_tables())

        self.assertEqual(rendered, self.read("verify-tables.txt"))
        lines = rendered.splitlines()
        self.assertIn("Edge detection (N=35581, N_sensors=127, B=10)", lines)
        self.assertIn("e=27   PASS     FNR: reported 0.0, computed 0.0000; k_times: reported 859, computed 859; "
                      "RTL: reported 3427857, computed 3427857", lines)
        self.assertIn("e=22   FLAGGED  FNR: reported 0.0, computed 0.0000; k_times: reported 1570, computed 1570; "
                      "RTL: reported 2537587, computed 2524887 (!)", lines)
        self.assertTrue(any(line.startswith("G-GCRL    PASS     F1: reported 0.96, computed 0.959") for line in lines))
        self.assertTrue(any(line.startswith("PCA       FLAGGED") for line in lines))
        self.assertTrue(lines[-1].endswith("row(s) FLAGGED"))

    def test_write_sweep_table(self):
        rows = [SweepRow(0.65, 2, 3, self.metrics), SweepRow(0.45, 1, 0, self.empty)]

        rendered = self.sut.write_sweep_table(rows, rows[0])

        self.assertEqual([
            "| p | e | edges | TP | FP | FN | k_times | RTL | FNR | Precision | Recall | F1 |",
            "|---|---|-------|----|----|----|---------|-----|-----|-----------|--------|----|",
            "| 0.65 | 2 | 3 | 9 | 1 | 1 | 10 | 120 | 10.00% | 90.00% | 90.00% | 90.00% |",
            "| 0.45 | 1 | 0 | 0 | 0 | 0 | 0 | 200 | n/a | n/a | n/a | n/a |",
            "",
            "Selected: p=0.65, e=2 (F1 90.00%, RTL 120)",
        ], rendered.splitlines())
        self.assertEqual(rendered, self.read("sweep.md"))

    def test_write_sweep_table_without_selection(self):
        rendered = self.sut.write_sweep_table([SweepRow(0.45, 1, 0, self.empty)])

        self.assertEqual(3, len(rendered.splitlines()))
        self.assertNotIn("Selected", rendered)

    def test_write_metrics_json(self):
        path = self.sut.write_metrics_json(self.metrics, extra={"sensitivity": 2})

        with open(path, 'r') as f:
            document = json.load(f)
        self.assertEqual(120, document["rtl"])
        self.assertEqual(2, document["sensitivity"])
        self.assertAlmostEqual(0.1, document["fnr"])
        self.assertNotIn("mean_time_ms", document)

    def test_write_metrics_csv(self):
        path = self.sut.write_metrics_csv([({"e": 2}, self.metrics), ({"e": 3}, self.empty)])

        table = pd.read_csv(path)
        self.assertEqual(["e", "tp", "fp", "fn", "tn", "fnr", "k_times", "rtl", "precision", "recall", "f1"],
                         list(table.columns))
        self.assertEqual([120, 200], table["rtl"].tolist())
        self.assertTrue(pd.isna(table["precision"][1]))

    def test_write_timing(self):
        self.sut.write_timing({"mean_time_ms": {"2": 0.5}})

        self.assertEqual({"mean_time_ms": {"2": 0.5}}, json.loads(self.read("timing.json")))


if __name__ == '__main__':
    unittest.main()

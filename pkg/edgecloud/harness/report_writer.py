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
import pandas as pd
from jinja2 import Environment, FileSystemLoader
from edgecloud.harness import tables

TEMPLATE_DIR = os.path.dirname(__file__) + "/../templates"


def _percent(value):
    return "n/a" if value is None else f"{100.0 * value:.2f}%"


def _number(value):
    return f"{value:.4f}" if isinstance(value, float) else str(value)


class ReportWriter(object):

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.env = Environment(loader=FileSystemLoader(TEMPLATE_DIR), keep_trailing_newline=True)
        self.env.filters["percent"] = _percent
        self.env.filters["number"] = _number

    def _path(self, name):
        os.makedirs(self.out_dir, exist_ok=True)
        return os.path.join(self.out_dir, name)

    def _render(self, template_name, target, **data):
        rendered = self.env.get_template(template_name).render(**data)
        with open(self._path(target), "w") as f:
            f.write(rendered)
        return rendered

    def write_verify_tables(self, reports):
        edge_rows = [r for r in reports if r.table == "edge"]
        model_rows = [r for r in reports if r.table == "model"]
        passed = sum(1 for r in reports if r.status == "PASS")
        return self._render("verify-tables.txt.template", "verify-tables.txt", edge_rows=edge_rows,
                            model_rows=model_rows, passed=passed, flagged=len(reports) - passed,
                            n_samples=tables.N_TEST_SAMPLES, n_sensors=tables.N_SENSORS,
                            aggregation_scale=tables.AGGREGATION_SCALE)

    def write_sweep_table(self, rows, best=None):
        return self._render("sweep-table.md.template", "sweep.md", rows=rows, best=best)

    def write_metrics_json(self, metrics, name="metrics.json", extra=None):
        document = metrics.to_dict()
        document.update(extra or {})
        with open(self._path(name), "w") as f:
            f.write(json.dumps(document, indent=2, sort_keys=True) + "\n")
        return self._path(name)

    def write_metrics_csv(self, rows, name="metrics.csv"):
        table = pd.DataFrame([dict(keys, **metrics.row()) for keys, metrics in rows])
        table.to_csv(self._path(name), index=False)
        return self._path(name)

    def write_timing(self, timings, name="timing.json"):
        with open(self._path(name), "w") as f:
            f.write(json.dumps(timings, indent=2, sort_keys=True) + "\n")
        return self._path(name)

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
Checkpoint layout: `manifest.json` (format version, hyperparameters, array
names, shapes and offsets) next to `weights.bin`, the concatenation of all
arrays as little-endian IEEE-754 float64 in row-major order.
"""

import json
import logging
import os
import numpy as np
from packaging.version import parse
from edgecloud.cloud.exceptions import CheckpointException
from edgecloud.cloud.gcrl import GcrlParams
from edgecloud.config import GcrlConfig

log = logging.getLogger(__name__)

FORMAT_VERSION = "1.0"
MANIFEST = "manifest.json"
WEIGHTS = "weights.bin"
MODEL_CARD = "model-card.json"
DTYPE = np.dtype("<f8")


def _arrays(params):
    arrays = {"propagation": params.propagation, "feature_mean": params.feature_mean,
              "feature_std": params.feature_std}
    arrays.update({f"weights/{name}": value for name, value in params.weights.items()})
    return arrays


def save_checkpoint(params, directory):
    os.makedirs(directory, exist_ok=True)
    entries = []
    offset = 0
    with open(os.path.join(directory, WEIGHTS), "wb") as f:
        for name, value in _arrays(params).items():
            data = np.ascontiguousarray(value, dtype=DTYPE)
            f.write(data.tobytes(order="C"))
            entries.append({"name": name, "shape": list(data.shape), "offset": offset, "count": int(data.size)})
            offset += data.size

    manifest = {"format_version": FORMAT_VERSION, "byte_order": "little", "dtype": "float64",
                "config": params.config.to_dict(), "seed": params.seed, "arrays": entries}
    with open(os.path.join(directory, MANIFEST), "w") as f:
        f.write(json.dumps(manifest, indent=2))

    log.info(f"checkpoint written to {directory} ({offset} values)")
    return directory


def load_checkpoint(directory):
    manifest_path = os.path.join(directory, MANIFEST)
    weights_path = os.path.join(directory, WEIGHTS)
    if not os.path.isfile(manifest_path) or not os.path.isfile(weights_path):
        raise CheckpointException(f"no checkpoint in {directory}")

    with open(manifest_path, 'r') as f:
        manifest = json.load(f)

    version = parse(manifest.get("format_version", "0"))
    if version.major != parse(FORMAT_VERSION).major:
        raise CheckpointException(f"unsupported checkpoint format {version}, expected {FORMAT_VERSION}")
    if manifest.get("byte_order") != "little" or manifest.get("dtype") != "float64":
        raise CheckpointException(f"unsupported array encoding {manifest.get('byte_order')}/{manifest.get('dtype')}")

    data = np.fromfile(weights_path, dtype=DTYPE)
    arrays = {}
    for entry in manifest["arrays"]:
        end = entry["offset"] + entry["count"]
        if end > len(data):
            raise CheckpointException(f"{weights_path} is truncated at array {entry['name']}")
        arrays[entry["name"]] = data[entry["offset"]:end].astype(np.float64).reshape(entry["shape"])

    weights = {name.split("/", 1)[1]: value for name, value in arrays.items() if name.startswith("weights/")}
    return GcrlParams(GcrlConfig(**manifest["config"]), arrays["propagation"], weights, arrays["feature_mean"],
                      arrays["feature_std"], manifest.get("seed", 0))


def write_model_card(directory, params, graph_digest, metrics=None):
    card = {
        "format_version": FORMAT_VERSION,
        "config": params.config.to_dict(),
        "graph_sha256": graph_digest,
        "seed": params.seed,
        "history": params.history,
        "metrics": metrics or {}
    }
    path = os.path.join(directory, MODEL_CARD)
    with open(path, "w") as f:
        f.write(json.dumps(card, indent=2))
    return path

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

import copy
import logging
import numpy as np
from edgecloud.cloud import correlation_graph as cg
from edgecloud.cloud import gcrl
from edgecloud.config import derive_seed
from edgecloud.data import dataset, synthetic
from edgecloud.edge import detector
from edgecloud.edge.preprocess import AggregationConfig
from edgecloud.exceptions import ConfigException
from edgecloud.harness import pipeline

log = logging.getLogger(__name__)


def load_dataset(run_config):
    ds = run_config.dataset
    if ds.synthetic is not None:
        document = synthetic.read_spec_document(ds.synthetic) if isinstance(ds.synthetic, str) else ds.synthetic
        spec = synthetic.spec_from_dict(document)
        if "seed" not in document:
            spec.seed = derive_seed(run_config.seed, "synthetic")
        return synthetic.generate_synthetic(spec)

    edge_map = dataset.read_edge_map(ds.edge_map) if ds.edge_map else None
    return dataset.load_csv(ds.train_csv, ds.label_column, edge_map, ds.test_csv, ds.train_fraction,
                            ds.binary_labels)


def aggregation_of(run_config):
    return AggregationConfig(run_config.sampling_period, run_config.aggregation_scale, run_config.window_stride)


def fit_edges(split, run_config):
    return detector.fit_edge_models(split, aggregation_of(run_config))


def correlation_graph(split, run_config, p_threshold=None):
    return cg.build_graph(split.train.values, split.sensor_names,
                          run_config.p_threshold if p_threshold is None else p_threshold,
                          run_config.alpha, run_config.absolute)


def gcrl_config(split, run_config):
    config = copy.deepcopy(run_config.gcrl)
    if config.n_classes != 2 and config.n_classes < split.n_classes:
        raise ConfigException(f"gcrl.n_classes={config.n_classes} cannot hold the {split.n_classes} dataset classes")
    config.n_sensors = split.n_sensors
    config.window = run_config.aggregation_scale + 1
    return config


def training_windows(series, aggregation, n_classes, resample_factor=1):
    """Raw (samples, sensors, window) payloads of the training stream with abnormal windows repeated."""
    length = aggregation.window_length
    starts = aggregation.window_starts(len(series))
    classes_per_frame = series.classes_for(n_classes)
    features = np.stack([series.values[s:s + length].T for s in starts])
    classes = np.array([dataset.window_class(classes_per_frame[s:s + length]) for s in starts], dtype=np.int64)

    indices = dataset.repeat_abnormal_indices(classes != 0, resample_factor)
    log.info(f"{len(starts)} training windows, {int((classes != 0).sum())} abnormal resampled x{resample_factor}")
    return features[indices], classes[indices]


def train_cloud_model(split, graph, run_config):
    config = gcrl_config(split, run_config)
    features, classes = training_windows(split.train, aggregation_of(run_config), config.n_classes,
                                         run_config.resample_factor)
    return gcrl.train(features, classes, config, graph.adjacency, derive_seed(run_config.seed, "gcrl"))


def simulate(run_config, split=None, sensitivities=None):
    split = split if split is not None else load_dataset(run_config)
    models = fit_edges(split, run_config)
    graph = correlation_graph(split, run_config)
    params = train_cloud_model(split, graph, run_config)

    results = {}
    for e in sensitivities or [run_config.sensitivity]:
        results[e] = pipeline.run_pipeline(split, models, graph, params, e, aggregation_of(run_config),
                                           run_config.workers)
    return split, models, graph, params, results

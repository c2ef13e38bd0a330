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

import argparse
import json
import logging
import os
import sys
import traceback
from edgecloud import config
from edgecloud.cloud import checkpoint
from edgecloud.cloud import correlation_graph as cg
from edgecloud.data import dataset, synthetic
from edgecloud.data.exceptions import DatasetException
from edgecloud.edge import detector
from edgecloud.exceptions import ConfigException, EdgeCloudException
from edgecloud.harness import channel, pipeline, stages, tables
from edgecloud.harness import sweep as grid
from edgecloud.harness.report_writer import ReportWriter

log = logging.getLogger(__name__)

EDGE_MODEL_DIR = "edge-models"
GRAPH_FILE = "graph.json"
EDGE_LIST_FILE = "graph.edges.txt"
CHECKPOINT_DIR = "checkpoint"


def _fmt(value):
    return "n/a" if value is None else f"{value:.4f}"


def _overrides(args):
    values = {
        "aggregation_scale": getattr(args, "B", None),
        "stride": getattr(args, "stride", None),
        "p_threshold": getattr(args, "p", None),
        "alpha": getattr(args, "alpha", None),
        "workers": getattr(args, "workers", None),
        "seed": getattr(args, "seed", None),
        "output_dir": getattr(args, "output_dir", None),
        "dataset.train_csv": getattr(args, "train_csv", None),
        "dataset.test_csv": getattr(args, "test_csv", None),
        "dataset.edge_map": getattr(args, "edge_map", None),
        "dataset.synthetic": getattr(args, "synthetic", None),
        "gcrl.layers": getattr(args, "layers", None),
        "gcrl.hidden": getattr(args, "hidden", None),
        "gcrl.max_epochs": getattr(args, "max_epochs", None),
    }
    e = getattr(args, "e", None)
    values["sensitivity"] = e[0] if isinstance(e, list) else e
    variant = getattr(args, "variant", None)
    if variant is not None:
        values["gcrl.use_lstm"] = variant == "gcrl"
    return values


def run_config_of(args):
    if args.config:
        return config.load_run_config(args.config, _overrides(args))
    return config.build_run_config({}, _overrides(args))


def _out(run_config, name):
    os.makedirs(run_config.output_dir, exist_ok=True)
    return os.path.join(run_config.output_dir, name)


def _sensitivities(args, run_config):
    e = getattr(args, "e", None)
    return list(e) if e else [run_config.sensitivity]


def cmd_fit_edge(args):
    run_config = run_config_of(args)
    split = stages.load_dataset(run_config)
    models = stages.fit_edges(split, run_config)
    paths = detector.write_edge_models(models, _out(run_config, EDGE_MODEL_DIR))
    for edge_id, path in zip(sorted(models), paths):
        m = models[edge_id]
        print(f"edge {edge_id}: {len(m.sensors)} sensors, prior normal {m.prior_normal:.4f} -> {path}")
    return models


def _write_graph(run_config, graph):
    cg.write_graph(graph, _out(run_config, GRAPH_FILE), _out(run_config, EDGE_LIST_FILE))


def cmd_build_graph(args):
    run_config = run_config_of(args)
    split = stages.load_dataset(run_config)
    graph = stages.correlation_graph(split, run_config)
    _write_graph(run_config, graph)
    print(f"correlation graph p={graph.p_threshold}, alpha={graph.alpha}: {graph.edge_count()} edges "
          f"over {graph.n} sensors -> {_out(run_config, EDGE_LIST_FILE)}")
    return graph


def _save_model(run_config, params, graph, metrics=None):
    directory = _out(run_config, CHECKPOINT_DIR)
    checkpoint.save_checkpoint(params, directory)
    checkpoint.write_model_card(directory, params, graph.digest(), metrics)
    return directory


def _graph_matches(graph, split, run_config):
    return (graph.sensor_names == list(split.sensor_names) and graph.p_threshold == run_config.p_threshold
            and graph.alpha == run_config.alpha and graph.absolute == run_config.absolute)


def cmd_train(args):
    run_config = run_config_of(args)
    split = stages.load_dataset(run_config)
    graph_path = os.path.join(run_config.output_dir, GRAPH_FILE)
    graph = cg.read_graph(graph_path) if os.path.isfile(graph_path) else None
    if graph is not None and not _graph_matches(graph, split, run_config):
        log.info(f"{graph_path} was built with p={graph.p_threshold}, alpha={graph.alpha}, "
                 f"absolute={graph.absolute}, rebuilding")
        graph = None
    if graph is None:
        graph = stages.correlation_graph(split, run_config)
        _write_graph(run_config, graph)
    params = stages.train_cloud_model(split, graph, run_config)
    directory = _save_model(run_config, params, graph)
    best = min(params.history, key=lambda h: h["val_loss"]) if params.history else None
    print(f"trained {'gcrl' if params.config.use_lstm else 'gcn'} model: {len(params.history)} epochs, "
          f"best validation loss {_fmt(best['val_loss'] if best else None)} -> {directory}")
    return params


def write_results(run_config, results):
    writer = ReportWriter(run_config.output_dir)
    suffixed = len(results) > 1
    rows = []
    timings = {}
    for e, result in sorted(results.items()):
        suffix = f"-e{e}" if suffixed else ""
        writer.write_metrics_json(result.metrics, f"metrics{suffix}.json", {"sensitivity": e})
        pipeline.write_event_log(result, _out(run_config, f"events{suffix}.jsonl"))
        channel.write_uploads(result.uploads, _out(run_config, f"uploads{suffix}.bin"))
        rows.append(({"e": e}, result.metrics))
        timings[str(e)] = result.metrics.mean_time
        m = result.metrics
        print(f"e={e}: k_times={m.k_times} RTL={m.rtl} FNR={_fmt(m.fnr)} precision={_fmt(m.precision)} "
              f"recall={_fmt(m.recall)} F1={_fmt(m.f1)}")

    writer.write_metrics_csv(rows)
    writer.write_timing({"mean_time_ms": timings})


def cmd_simulate(args):
    run_config = run_config_of(args)
    split, models, graph, params, results = stages.simulate(run_config, sensitivities=_sensitivities(args, run_config))
    detector.write_edge_models(models, _out(run_config, EDGE_MODEL_DIR))
    _write_graph(run_config, graph)
    _save_model(run_config, params, graph, {str(e): r.metrics.to_dict() for e, r in sorted(results.items())})
    write_results(run_config, results)
    return results


def cmd_evaluate(args):
    if args.replay:
        if not os.path.isfile(args.replay):
            raise DatasetException(f"event log does not exist: {args.replay}", missing_input=True)
        metrics = pipeline.replay_metrics(args.replay)
        print(json.dumps(metrics.to_dict(), indent=2, sort_keys=True))
        return {None: metrics}

    run_config = run_config_of(args)
    model_dir, graph_path, checkpoint_dir = [os.path.join(run_config.output_dir, name)
                                             for name in (EDGE_MODEL_DIR, GRAPH_FILE, CHECKPOINT_DIR)]
    for path in (model_dir, graph_path, checkpoint_dir):
        if not os.path.exists(path):
            raise DatasetException(f"run fit-edge, build-graph and train first, missing: {path}", missing_input=True)

    split = stages.load_dataset(run_config)
    models = detector.read_edge_models(model_dir)
    graph = cg.read_graph(graph_path)
    params = checkpoint.load_checkpoint(checkpoint_dir)

    results = {}
    for e in _sensitivities(args, run_config):
        results[e] = pipeline.run_pipeline(split, models, graph, params, e, stages.aggregation_of(run_config),
                                           run_config.workers)
    write_results(run_config, results)
    return results


def cmd_sweep(args):
    run_config = run_config_of(args)
    e_values = args.e or run_config.sweep_sensitivity or [run_config.sensitivity]
    p_values = args.p_values or run_config.sweep_p or [run_config.p_threshold]
    split = stages.load_dataset(run_config)
    rows = grid.sweep(split, e_values, p_values, run_config)
    best = grid.select_best(rows)

    writer = ReportWriter(run_config.output_dir)
    writer.write_metrics_csv([(r.keys(), r.metrics) for r in rows], "sweep.csv")
    print(writer.write_sweep_table(rows, best), end="")
    return rows, best


def cmd_verify_tables(args):
    reports = tables.verify_tables()
    report = ReportWriter(args.output_dir or config.output_dir).write_verify_tables(reports)
    print(report, end="")
    return reports


def cmd_gen_data(args):
    if not os.path.isfile(args.spec):
        raise DatasetException(f"synthetic spec does not exist: {args.spec}", missing_input=True)
    document = synthetic.read_spec_document(args.spec)
    spec = synthetic.spec_from_dict(document)
    if args.seed is not None:
        spec.seed = args.seed
    elif "seed" not in document:
        spec.seed = config.derive_seed(config.seed, "synthetic")
    split = synthetic.generate_synthetic(spec)

    out_dir = args.output_dir or config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    dataset.write_csv(split.train, split.sensor_names, os.path.join(out_dir, "dataset-train.csv"))
    dataset.write_csv(split.test, split.sensor_names, os.path.join(out_dir, "dataset-test.csv"))
    edges = {str(edge_id): [split.sensor_names[i] for i in split.sensors_of(edge_id)] for edge_id in split.edges()}
    with open(os.path.join(out_dir, "edge-map.json"), "w") as f:
        f.write(json.dumps({"edges": edges}, indent=2))

    print(f"synthetic dataset: {split.n_sensors} sensors on {len(edges)} edge(s), train {split.train.counts()}, "
          f"test {split.test.counts()} -> {out_dir}")
    return split


def _common(parser):
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--output-dir", dest="output_dir", help=f"artifact directory (default {config.output_dir})")
    parser.add_argument("--seed", type=int, help="root seed of every random stream")
    parser.add_argument("--train-csv", dest="train_csv", help="training (or combined) CSV file")
    parser.add_argument("--test-csv", dest="test_csv", help="separate test CSV file")
    parser.add_argument("--edge-map", dest="edge_map", help="JSON assignment of sensors to edges")
    parser.add_argument("--synthetic", help="synthetic dataset spec (JSON) used instead of CSV input")
    parser.add_argument("--B", type=int, help="aggregation scale, windows hold B+1 samples")
    parser.add_argument("--stride", type=int, help="window stride (default B+1)")
    parser.add_argument("--alpha", type=float, help="significance level of the correlation test")
    parser.add_argument("--workers", type=int, help="threads evaluating the edges of one window")
    parser.add_argument("--layers", type=int, help="number of stacked GCRL blocks")
    parser.add_argument("--hidden", type=int, help="hidden feature width of the cloud model")
    parser.add_argument("--max-epochs", dest="max_epochs", type=int, help="upper bound of training epochs")
    parser.add_argument("--variant", choices=["gcrl", "gcn"], help="cloud model, gcn disables the LSTM branch")


def build_parser():
    parser = argparse.ArgumentParser(prog="edgecloud",
                                     description="Edge filtering and cloud classification of ICS sensor streams")
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("fit-edge", help="fit Box-Cox and naive Bayes models per edge")
    _common(p)
    p.set_defaults(func=cmd_fit_edge)

    p = commands.add_parser("build-graph", help="build the sensor correlation graph")
    _common(p)
    p.add_argument("--p", type=float, help="correlation threshold of an edge")
    p.set_defaults(func=cmd_build_graph)

    p = commands.add_parser("train", help="train the cloud model and write a checkpoint")
    _common(p)
    p.add_argument("--p", type=float, help="correlation threshold of an edge")
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("simulate", help="fit, train and stream the test split")
    _common(p)
    p.add_argument("--p", type=float, help="correlation threshold of an edge")
    p.add_argument("--e", type=int, nargs="+", help="sensitivity coefficient(s), -1 uploads every window")
    p.set_defaults(func=cmd_simulate)

    p = commands.add_parser("evaluate", help="stream the test split through saved artifacts or replay an event log")
    _common(p)
    p.add_argument("--e", type=int, nargs="+", help="sensitivity coefficient(s)")
    p.add_argument("--replay", metavar="EVENTS", help="recompute metrics from an event log")
    p.set_defaults(func=cmd_evaluate)

    p = commands.add_parser("sweep", help="grid over correlation threshold and sensitivity")
    _common(p)
    p.add_argument("--e", type=int, nargs="+", help="sensitivity coefficients")
    p.add_argument("--p", dest="p_values", type=float, nargs="+", help="correlation thresholds")
    p.set_defaults(func=cmd_sweep)

    p = commands.add_parser("verify-tables", help="check the arithmetic of the published detection tables")
    p.add_argument("--output-dir", dest="output_dir", help=f"report directory (default {config.output_dir})")
    p.set_defaults(func=cmd_verify_tables)

    p = commands.add_parser("gen-data", help="write a synthetic dataset as CSV files and an edge map")
    p.add_argument("--spec", required=True, help="synthetic dataset spec (JSON)")
    p.add_argument("--seed", type=int, help="overrides the seed of the synthetic spec file")
    p.add_argument("--output-dir", dest="output_dir", help=f"target directory (default {config.output_dir})")
    p.set_defaults(func=cmd_gen_data)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        args.func(args)
        return 0
    except ConfigException as e:
        print(f"Invalid configuration: {e}")
        return 2
    except DatasetException as e:
        print(f"Unable to read dataset: {e}")
        log.debug(traceback.format_exc())
        return 2 if e.missing_input else 3
    except (EdgeCloudException, ArithmeticError, ValueError) as e:
        print(f"{args.command} failed: {e}")
        print(f"Caused by: {traceback.format_exc()}")
        return 3


if __name__ == '__main__':
    sys.exit(main())

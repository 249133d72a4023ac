"""Command-line front end over the library.

Subcommands: ``stats``, ``filter``, ``infer``, ``eval``, ``simulate``,
``ablate``. Global flags: ``--config`` (INI file), ``--set section.key=value``
(repeatable override), ``--seed``, ``--jobs``, ``--format {json,csv}``.

Reports go to stdout and embed the resolved run configuration, so a rerun
with the same inputs is byte-identical. Failures print one machine-readable
JSON object to stderr and exit with a class-specific code: 2 configuration,
3 file system, 4 validation, 5 parse, 1 anything else.

Event-file format is taken from the file extension (``.csv`` is text, all
else binary) unless the config io.format says otherwise. When no weight file
is configured, ``infer`` and ``eval`` fall back to a random model drawn from
``--seed`` so pipelines can be exercised without trained weights.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import RunConfig, expand_sweep, load_config, write_config
from .errors import (ConfigError, EvkwsError, OrderingError, ParseError,
                     ValidationError)
from .events import (FORMAT_CSV, EventStream, compute_stats, read_stream,
                     write_stream)
from .graph import dump_neighbors, edges_per_event
from .hwmodel import latency_report, simulate, throughput_envelope
from .inference import infer_stream, summarize_predictions
from .metrics import (EvalRecord, event_rate_report, metric_report,
                      read_records)
from .model import load_weights, random_weights

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VALIDATION = 4
EXIT_PARSE = 5


def _stream_format(path: str, config: RunConfig) -> str:
    if str(path).endswith(".csv"):
        return FORMAT_CSV
    return config.io_format


def _load_stream(path: str, config: RunConfig) -> EventStream:
    return read_stream(path, _stream_format(path, config), config.sensor)


def _emit(doc: dict, fmt: str, out=None) -> None:
    out = out or sys.stdout
    if fmt == "csv":
        rows = []
        _flatten("", doc, rows)
        writer = csv.writer(out)
        writer.writerow(["key", "value"])
        writer.writerows(rows)
    else:
        json.dump(doc, out, indent=2, sort_keys=True)
        out.write("\n")


def _flatten(prefix: str, node, rows: list) -> None:
    if isinstance(node, dict):
        for key in sorted(node):
            _flatten(f"{prefix}{key}.", node[key], rows)
    else:
        key = prefix[:-1] if prefix.endswith(".") else prefix
        if isinstance(node, (list, tuple)):
            rows.append([key, json.dumps(node)])
        else:
            rows.append([key, node])


def _get_weights(args, config: RunConfig):
    path = getattr(args, "weights", None) or config.weights_path
    if path:
        return load_weights(path)
    return random_weights(args.seed)


def cmd_stats(args, config: RunConfig) -> int:
    streams = [_load_stream(p, config) for p in args.inputs]
    stats = compute_stats(streams, config.hw.window_us)
    _emit({"config": config.to_dict(), "stats": stats.to_json_dict()},
          args.format)
    return EXIT_OK


def cmd_filter(args, config: RunConfig) -> int:
    from .filtering import filter_stream

    stream = _load_stream(args.input, config)
    filtered = filter_stream(stream, config.filtration_params())
    write_stream(filtered, args.output, _stream_format(args.output, config))
    if len(stream):
        report = event_rate_report([stream], [filtered], config.hw.window_us)
        reduction = report["reduction_pct"]
    else:
        reduction = None  # 0/0: nothing to reduce
    _emit({"config": config.to_dict(),
           "input_events": len(stream),
           "output_events": len(filtered),
           "reduction_pct": reduction},
          args.format)
    return EXIT_OK


def cmd_infer(args, config: RunConfig) -> int:
    stream = _load_stream(args.input, config)
    weights = _get_weights(args, config)
    predictions = infer_stream(stream, weights, config.graph,
                               config.filtration_params(),
                               config.hw.window_us)
    sink = open(args.out, "w") if args.out else sys.stdout
    try:
        for pred in predictions:
            sink.write(json.dumps(pred.to_json_dict(), sort_keys=True) + "\n")
    finally:
        if args.out:
            sink.close()
    return EXIT_OK


def _read_manifest(path: str) -> list[tuple[str, int, int | None]]:
    """Rows of ``path,label,end_bin``; paths resolve against the manifest."""
    import os

    base = os.path.dirname(os.path.abspath(path))
    rows: list[tuple[str, int, int | None]] = []
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if lineno == 1 and line.replace(" ", "") == "path,label,end_bin":
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise ParseError(f"{path}: expected 3 fields, got {len(parts)}",
                                 line=lineno)
            try:
                rows.append((os.path.join(base, parts[0]), int(parts[1]),
                             int(parts[2]) if parts[2] else None))
            except ValueError as exc:
                raise ParseError(f"{path}: bad manifest row: {exc}",
                                 line=lineno)
    if not rows:
        raise ValidationError(f"{path}: manifest lists no samples")
    return rows


def _eval_one(task) -> EvalRecord:
    path, label, end_bin, config, weights = task
    stream = _load_stream(path, config)
    predictions = infer_stream(stream, weights, config.graph,
                               config.filtration_params(),
                               config.hw.window_us)
    summary = summarize_predictions(predictions)
    if summary is None:
        # No window ever emitted (empty or fully filtered sample): score as
        # an always-wrong placeholder so the sample still counts.
        y_hat, pred_bin = -1, 0
    else:
        y_hat, pred_bin = summary
    return EvalRecord(sample_id=stream.sample_id, y=label, y_hat=y_hat,
                      pred_bin=pred_bin, true_bin=end_bin)


def cmd_eval(args, config: RunConfig) -> int:
    ks = [int(k) for k in args.tolerances.split(",") if k.strip()]
    if args.records:
        records = read_records(args.records)
    else:
        weights = _get_weights(args, config)
        tasks = [(path, label, end_bin, config, weights)
                 for path, label, end_bin in _read_manifest(args.manifest)]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                records = list(pool.map(_eval_one, tasks))
        else:
            records = [_eval_one(task) for task in tasks]
    report = metric_report(records, ks=ks)
    _emit({"config": config.to_dict(), "metrics": report.to_json_dict()},
          args.format)
    return EXIT_OK


def cmd_simulate(args, config: RunConfig) -> int:
    stream = _load_stream(args.input, config)
    if args.filtered:
        from .filtering import filter_stream

        stream = filter_stream(stream, config.filtration_params())
    edges = edges_per_event(stream, config.graph)
    if args.dump_graph:
        with open(args.dump_graph, "w") as fh:
            dump_neighbors(stream, config.graph, fh)
    trace = simulate(stream, edges, config.hw)
    if args.trace_csv:
        with open(args.trace_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["event_index", "arrival_us", "admit_us",
                             "done_us", "edges"])
            for row in trace.to_rows():
                writer.writerow(["" if v is None else v for v in row])
    best_eps, worst_eps = throughput_envelope(config.hw)
    _emit({"config": config.to_dict(),
           "events": len(stream),
           "throughput_eps": {"max": best_eps, "min": worst_eps},
           "latency": latency_report(trace),
           "processed_rate_eps": trace.processed_rate_eps()},
          args.format)
    return EXIT_OK


def cmd_ablate(args, config: RunConfig) -> int:
    import os

    combos = expand_sweep(args.sweep)
    os.makedirs(args.out_dir, exist_ok=True)
    index = []
    for i, (varied, resolved) in enumerate(combos):
        name = f"sweep_{i:04d}.ini"
        write_config(resolved, os.path.join(args.out_dir, name))
        index.append({"config": name, "varied": varied})
    index_path = os.path.join(args.out_dir, "index.json")
    with open(index_path, "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit({"combinations": len(combos), "out_dir": args.out_dir,
           "index": index}, args.format)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evkws",
        description="Streaming event-based keyword spotting toolkit")
    parser.add_argument("--config", help="INI run configuration")
    parser.add_argument("--set", dest="overrides", action="append",
                        default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config key (repeatable)")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for operations that draw randomness")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for per-sample work")
    parser.add_argument("--format", choices=("json", "csv"), default="json",
                        help="report format on stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="aggregate stream statistics")
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("filter", help="run decayed-potential filtration")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("infer", help="per-window predictions for one stream")
    p.add_argument("input")
    p.add_argument("--weights", help="weight file (overrides config)")
    p.add_argument("--out", help="write JSON lines here instead of stdout")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score a manifest or a record file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--manifest", help="CSV of path,label,end_bin")
    group.add_argument("--records", help="precomputed records (JSONL or CSV)")
    p.add_argument("--weights", help="weight file (overrides config)")
    p.add_argument("--tolerances", default="1,3",
                   help="comma-separated window tolerances for timing accuracy")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="hardware pipeline timing simulation")
    p.add_argument("input")
    p.add_argument("--filtered", action="store_true",
                   help="apply configured filtration before simulating")
    p.add_argument("--trace-csv", help="write per-event timing rows here")
    p.add_argument("--dump-graph", help="write per-event neighbor JSONL here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ablate", help="expand list-valued config into a sweep")
    p.add_argument("sweep", help="INI file whose values may be comma lists")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, args.overrides)
        return args.func(args, config)
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)
    except ParseError as exc:
        return _fail(exc, EXIT_PARSE)
    except (OrderingError, ValidationError) as exc:
        return _fail(exc, EXIT_VALIDATION)
    except OSError as exc:
        return _fail(exc, EXIT_IO)
    except EvkwsError as exc:
        return _fail(exc, EXIT_OTHER)


def _fail(exc: Exception, code: int) -> int:
    json.dump({"error": {"type": type(exc).__name__, "message": str(exc),
                         "exit_code": code}},
              sys.stderr, sort_keys=True)
    sys.stderr.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())

"""``aedetect`` command line: synth, train, calibrate, infer, evaluate, report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 model-file error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import autoencoder as ae
from . import csvio
from . import detector as det
from . import modelstore
from . import pipeline
from . import report as rpt
from . import stream
from . import synthgen as sg

EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _percentiles(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad percentile list {text!r}") from None
    if not values or not all(0 < v <= 100 for v in values):
        raise argparse.ArgumentTypeError("percentiles must lie in (0, 100]")
    return values


def _train_config(args) -> ae.TrainConfig:
    try:
        return ae.TrainConfig(
            epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr,
            l1_lambda=args.l1, hidden_multiplier=args.hidden_mult, seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read_trace(path):
    try:
        return csvio.read_trace(path)
    except OSError as exc:
        raise DataError(f"cannot read trace: {exc}") from None


def _load_model(path):
    try:
        return modelstore.load(path)
    except OSError as exc:
        raise modelstore.ModelFileError(f"cannot read model file: {exc}") from None


def cmd_synth(args, out, err) -> int:
    settings = {
        "nodes": args.nodes, "length": args.length, "dim": args.dim, "seed": args.seed,
        "gap_fraction": args.gap_fraction, "train_fraction": args.train_fraction,
    }
    if args.config:
        try:
            settings.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"bad config file: {exc}") from None
    unknown = set(settings) - {"nodes", "length", "dim", "seed", "gap_fraction", "train_fraction"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    try:
        profiles = sg.make_fleet(int(settings["nodes"]), int(settings["dim"]), int(settings["seed"]))
        schedules = [sg.default_schedule(int(settings["length"]), p.seed, float(settings["train_fraction"]))
                     for p in profiles]
        traces = sg.fleet_generate(profiles, int(settings["length"]), int(settings["dim"]), schedules,
                                   float(settings["gap_fraction"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for trace in traces:
        path = csvio.write_trace(trace, outdir / f"{trace.node_id}.csv")
        print(path, file=out)
    return 0


def cmd_train(args, out, err) -> int:
    config = _train_config(args)
    trace = _read_trace(args.trace)

    def progress(epoch, loss):
        print(f"epoch {epoch + 1} loss {loss:.6f}", file=out)

    model, history = pipeline.train_node(trace, config, args.train_fraction, args.holdout_fraction,
                                         callback=progress)
    modelstore.save(model, None, args.output)
    print(f"saved {args.output} (d={model.d}, h={model.h}, epochs={len(history)})", file=out)
    return 0


def cmd_calibrate(args, out, err) -> int:
    model, _ = _load_model(args.model)
    trace = _read_trace(args.trace)
    profile, report, cal = pipeline.calibrate_node(model, trace, args.percentiles, args.train_fraction,
                                                   args.holdout_fraction)
    target = args.output or args.model
    modelstore.save(model, profile, target)
    if args.report:
        csvio.write_table([report], args.report)
    if args.errors_out:
        Path(args.errors_out).write_text("".join(f"{float(e)!r}\n" for e in cal))
    for row in report.rows:
        print(f"n={row.percentile_n:g} theta={row.theta:.6g} F(N)={row.f_normal:.4f} "
              f"F(A)={row.f_anomaly:.4f}", file=out)
    print(f"chosen n={profile.percentile_n:g} theta={profile.theta!r}", file=out)
    return 0


def cmd_infer(args, out, err) -> int:
    model, profile = _load_model(args.model)
    if profile is None:
        raise modelstore.ModelFileError("model file has no detector profile; run calibrate first")
    detector = stream.OnlineDetector(model, profile)
    if args.input and args.input != "-":
        try:
            fh = open(args.input)
        except OSError as exc:
            raise DataError(f"cannot read input: {exc}") from None
        with fh:
            events = detector.run(fh, out, err)
    else:
        events = detector.run(sys.stdin, out, err)
    if args.latency and events:
        print(f"records={len(events)} median_latency_us={stream.median_latency_us(events):.1f}", file=err)
    return 0


def cmd_evaluate(args, out, err) -> int:
    model, profile = _load_model(args.model)
    if profile is None:
        raise modelstore.ModelFileError("model file has no detector profile; run calibrate first")
    trace = _read_trace(args.trace)
    report, scored = pipeline.evaluate_node(model, profile, trace, args.percentiles, args.train_fraction,
                                            args.holdout_fraction)
    if args.report:
        csvio.write_table([report], args.report)
    if args.summary:
        csvio.write_summary([(trace.node_id, report.normal_error_mean, report.anomaly_error_mean,
                              report.ratio, profile.percentile_n)], args.summary)
    if args.rows:
        csvio.write_rows(args.rows, trace.node_id, scored.timestamps, scored.labels, scored.errors,
                         scored.normalized, scored.verdicts)
    print(",".join(det.table_header([r.percentile_n for r in report.rows])), file=out)
    print(",".join(det.table_row(report)), file=out)

    def show(x):
        return "n/a" if x is None else f"{x:.3f}"

    print(f"normalized error: normal={show(report.normal_error_mean)} "
          f"anomaly={show(report.anomaly_error_mean)} ratio={show(report.ratio)}", file=out)
    return 0


def cmd_report(args, out, err) -> int:
    try:
        rows = csvio.read_rows(args.rows)
    except OSError as exc:
        raise DataError(f"cannot read rows: {exc}") from None
    title = rows[0]["node_id"] if rows else ""
    if args.csv:
        rpt.write_timeseries(rows, args.csv)
    if args.svg:
        rpt.write_svg(rows, args.svg, title=f"Reconstruction error {title}")
    print(f"{len(rows)} rows, {len(rpt.anomaly_bands([r['timestamp_index'] for r in rows], [r['label'] for r in rows]))} "
          f"anomaly bands", file=out)
    return 0


def _add_training_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden-mult", type=int, default=10)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--l1", type=float, default=1e-4)


def _add_split_flags(p):
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--holdout-fraction", type=float, default=0.0,
                   help="calibrate on this trailing share of the training window instead of the fit rows")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aedetect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate synthetic node traces")
    p.add_argument("--out", default="traces")
    p.add_argument("--nodes", type=int, default=4)
    p.add_argument("--length", type=int, default=8000)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gap-fraction", type=float, default=0.05)
    p.add_argument("--train-fraction", type=float, default=0.5,
                   help="anomalies are placed after this share of each trace")
    p.add_argument("--config", help="JSON file overriding the flags above")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a node autoencoder")
    p.add_argument("trace")
    p.add_argument("-o", "--output", required=True)
    _add_training_flags(p)
    _add_split_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="choose the threshold percentile and embed it")
    p.add_argument("model")
    p.add_argument("trace")
    p.add_argument("-o", "--output", help="write here instead of updating MODEL in place")
    p.add_argument("--percentiles", type=_percentiles, default=list(det.DEFAULT_CANDIDATES))
    p.add_argument("--report")
    p.add_argument("--errors-out", help="write the calibration errors, one per line")
    _add_split_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("infer", help="classify a line-delimited stream")
    p.add_argument("model")
    p.add_argument("--input", help="read records from this file instead of standard input")
    p.add_argument("--latency", action="store_true", help="print the median latency to stderr")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="score a labeled trace")
    p.add_argument("model")
    p.add_argument("trace")
    p.add_argument("--percentiles", type=_percentiles, default=list(det.DEFAULT_CANDIDATES))
    p.add_argument("--report")
    p.add_argument("--summary")
    p.add_argument("--rows", help="per-row errors and verdicts (input for 'report')")
    _add_split_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="time-series CSV and SVG from evaluate --rows")
    p.add_argument("rows")
    p.add_argument("--csv")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out, err)
    except UsageError as exc:
        print(f"aedetect: {exc}", file=err)
        return EXIT_USAGE
    except modelstore.ModelFileError as exc:
        print(f"aedetect: model file error: {exc}", file=err)
        return EXIT_MODEL
    except (DataError, ValueError) as exc:
        print(f"aedetect: data error: {exc}", file=err)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``powl2 {stats,discover,convert,conform,enumerate,sample}``.

Exit codes: 0 success, 1 input/parse error, 2 usage/contract error,
3 inconclusive (state-space limits hit).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

from . import __version__
from .conformance import conformance_report
from .discovery import DiscoveryConfig, discover
from .errors import ContractError, Powl2Error
from .log import CsvColumns, log_stats, read_log, write_csv, write_xes
from .model import deserialize, enumerate_language, export_dot, sample_traces, serialize, validate_model
from .wfnet import Limits, LimitReached, check_soundness, export_net, powl_to_wfnet

EXIT_OK, EXIT_INPUT, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3
JOBS_ENV = "POWL2_JOBS"


class _InputError(Exception):
    pass


def _threshold(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{value} is outside [0, 1]")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} is not positive")
    return value


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"{value} is negative")
    return value


def _add_log_options(p: argparse.ArgumentParser, flag: str = "--input") -> None:
    p.add_argument(flag, required=True, dest="log_path", metavar="PATH", help="XES or CSV event log")
    p.add_argument("--format", choices=["xes", "csv"], help="log format (default: from suffix)")
    p.add_argument("--case-col", default="case_id")
    p.add_argument("--activity-col", default="activity")
    p.add_argument("--timestamp-col", default="timestamp")


def _add_limits(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-states", type=_positive, default=Limits.max_states)
    p.add_argument("--max-seconds", type=float, default=Limits.max_seconds)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="powl2", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"powl2 {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="print log statistics as JSON")
    _add_log_options(p)

    p = sub.add_parser("discover", help="mine a POWL 2.0 model from a log")
    _add_log_options(p)
    p.add_argument("--noise-threshold", type=_threshold, default=0.0,
                   help="DFG noise filter threshold in [0, 1], e.g. 0.2 (default 0: no filtering)")
    p.add_argument("--no-reductions", action="store_true", help="skip model simplification")
    p.add_argument("--out", help="POWL JSON output (default: stdout)")
    p.add_argument("--dot", help="also write a Graphviz rendering of the model")

    p = sub.add_parser("convert", help="convert POWL JSON to a workflow net")
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--to", dest="net_format", choices=["pnml", "dot"],
                   help="net format (default: from suffix, else pnml)")
    p.add_argument("--soundness", action="store_true", help="check soundness and print the verdict")
    _add_limits(p)

    p = sub.add_parser("conform", help="fitness, precision and f-score of a model on a log")
    _add_log_options(p, "--log")
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="JSON report (default: stdout)")
    p.add_argument("--csv", dest="csv_out", help="per-variant fit table (CSV)")
    p.add_argument("--figure", help="render a summary figure (PNG/PDF/SVG by suffix)")
    p.add_argument("--jobs", type=_positive, default=int(os.environ.get(JOBS_ENV, "1") or 1),
                   help=f"worker processes for membership checks (default: ${JOBS_ENV} or 1)")
    _add_limits(p)

    p = sub.add_parser("enumerate", help="print the bounded language of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--max-len", type=_non_negative, default=10)
    p.add_argument("--max-loop-unroll", type=_non_negative, default=2)

    p = sub.add_parser("sample", help="simulate a log from a model")
    p.add_argument("--model", required=True)
    p.add_argument("-n", "--traces", type=_positive, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p-redo", type=float, default=0.3)
    p.add_argument("--out", required=True, help="output log (.xes or .csv)")
    p.add_argument("--format", choices=["xes", "csv"])
    return parser


# -- io helpers ---------------------------------------------------------------------

def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise _InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _load_log(args):
    columns = CsvColumns(args.case_col, args.activity_col, args.timestamp_col)
    _read_bytes(args.log_path)
    return read_log(args.log_path, args.format, columns)


def _load_model(path: str):
    model = deserialize(_read_bytes(path))
    problems = validate_model(model)
    if problems:
        raise _InputError(f"{path}: invalid model: " + "; ".join(map(str, problems)))
    return model


def _emit(text: str, path: str | None, written: dict) -> None:
    data = text.encode("utf-8")
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).write_bytes(data)
    written[path] = hashlib.sha256(data).hexdigest()


def _write_manifest(args, inputs: list[str], written: dict) -> None:
    if not written:
        return
    flags = {k: v for k, v in sorted(vars(args).items()) if k != "command"}
    manifest = {
        "tool": "powl2",
        "version": __version__,
        "command": args.command,
        "flags": flags,
        "inputs": {p: hashlib.sha256(_read_bytes(p)).hexdigest() for p in inputs},
        "outputs": dict(sorted(written.items())),
    }
    first = sorted(written)[0]
    Path(first + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# -- commands ---------------------------------------------------------------------

def cmd_stats(args) -> int:
    log = _load_log(args)
    sys.stdout.write(_dumps(log_stats(log).to_dict(log.activities)))
    return EXIT_OK


def cmd_discover(args) -> int:
    log = _load_log(args)
    cfg = DiscoveryConfig(args.noise_threshold, not args.no_reductions)
    model = discover(log, cfg)
    written: dict = {}
    _emit(serialize(model) + "\n", args.out, written)
    if args.dot:
        _emit(export_dot(model), args.dot, written)
    _write_manifest(args, [args.log_path], written)
    return EXIT_OK


def cmd_convert(args) -> int:
    model = _load_model(args.model)
    net = powl_to_wfnet(model)
    fmt = args.net_format or ("dot" if args.out and args.out.endswith(".dot") else "pnml")
    written: dict = {}
    _emit(export_net(net, fmt), args.out, written)
    _write_manifest(args, [args.model], written)
    if args.soundness:
        verdict = check_soundness(net, Limits(args.max_states, args.max_seconds))
        out = sys.stdout if args.out else sys.stderr
        out.write(_dumps({"soundness": verdict.status, "reason": verdict.reason,
                          "states": verdict.states}))
        if verdict.status == "inconclusive":
            return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_conform(args) -> int:
    log = _load_log(args)
    model = _load_model(args.model)
    report = conformance_report(log, model, Limits(args.max_states, args.max_seconds), args.jobs)
    written: dict = {}
    _emit(_dumps(report.to_dict()), args.out, written)
    if args.csv_out:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variant", "count", "fits"])
        for t in report.per_trace:
            w.writerow([" ".join(t.trace), t.count, int(t.fits)])
        _emit(buf.getvalue(), args.csv_out, written)
    if args.figure:
        from .plotting import plot_conformance

        plot_conformance(report, args.figure, title=Path(args.log_path).name)
        written[args.figure] = hashlib.sha256(Path(args.figure).read_bytes()).hexdigest()
    _write_manifest(args, [args.log_path, args.model], written)
    return EXIT_OK


def cmd_enumerate(args) -> int:
    model = _load_model(args.model)
    lang = enumerate_language(model, args.max_len, args.max_loop_unroll)
    sys.stdout.write(_dumps({"traces": [list(t) for t in lang.sorted()],
                             "truncated": lang.truncated}))
    return EXIT_OK


def cmd_sample(args) -> int:
    if not 0.0 <= args.p_redo < 1.0:
        raise ContractError(f"--p-redo {args.p_redo} outside [0, 1)")
    model = _load_model(args.model)
    log = sample_traces(model, args.traces, args.seed, args.p_redo)
    fmt = args.format or ("csv" if args.out.lower().endswith(".csv") else "xes")
    data = write_csv(log) if fmt == "csv" else write_xes(log)
    written: dict = {}
    _emit(data.decode("utf-8"), args.out, written)
    _write_manifest(args, [args.model], written)
    return EXIT_OK


COMMANDS = {
    "stats": cmd_stats,
    "discover": cmd_discover,
    "convert": cmd_convert,
    "conform": cmd_conform,
    "enumerate": cmd_enumerate,
    "sample": cmd_sample,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ContractError as exc:
        print(f"powl2: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LimitReached as exc:
        print(f"powl2: inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except (_InputError, Powl2Error, OSError) as exc:
        print(f"powl2: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

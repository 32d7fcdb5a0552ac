"""Command-line front end: ``cpapprox report`` and ``cpapprox sweep``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import CPApproxError
from .model import check_conditions, load_model, marginals, model_from_dict, two_runs_model
from .report import RunConfig, reports_csv, run_reports, sweep_csv

log = logging.getLogger("cpapprox")

EXIT_OK, EXIT_USAGE, EXIT_CONDITIONS = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _csv_list(text: str) -> list[str]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise argparse.ArgumentTypeError("empty list")
    return items


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _two_runs(tokens: list[str]) -> dict:
    vals = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or key not in ("q", "qbar", "delta"):
            raise UsageError(f"--two-runs expects q=.. qbar=.. delta=.., got {tok!r}")
        try:
            vals[key] = float(value)
        except ValueError:
            raise UsageError(f"not a number in {tok!r}") from None
    if set(vals) != {"q", "qbar", "delta"}:
        raise UsageError("--two-runs needs all of q, qbar and delta")
    # validates the ranges
    return two_runs_model(vals["q"], vals["qbar"], vals["delta"]).to_dict()


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", metavar="FILE", help="model JSON file")
    src.add_argument("--two-runs", nargs=3, metavar="KEY=VAL", help="q=.. qbar=.. delta=..")
    common.add_argument("--n", type=_int_list, required=True, help="comma-separated horizons")
    common.add_argument("--approx", type=_csv_list, default=["poisson", "a1", "g"])
    common.add_argument("--norms", type=_csv_list, default=["inf", "2", "1"])
    common.add_argument("--b", type=float, default=1.0, help="lower-bound tuning parameter (>= 1)")
    common.add_argument("--grid", type=_int_list, default=None, help="lattice box extents per axis")
    common.add_argument("--mc-samples", type=int, default=0)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", metavar="DIR", default=None)
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--require-conditions", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="cpapprox", description="Exact laws and compound Poisson approximations "
                     "for sums of 1-dependent lattice vectors.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("report", parents=[common], help="one report per n")
    sub.add_parser("sweep", parents=[common], help="distance table over n with log-log slopes")
    return parser


def config_from_args(args) -> RunConfig:
    if args.model is not None:
        spec = load_model(args.model).to_dict()
    else:
        spec = _two_runs(args.two_runs)
    fmt = args.format or ("csv" if args.command == "sweep" else "json")
    return RunConfig(
        model=spec, n=args.n, approx=args.approx, norms=args.norms, b=args.b, grid=args.grid,
        mc_samples=args.mc_samples, seed=args.seed, out=args.out, format=fmt,
        require_conditions=args.require_conditions,
    )


def _emit(name: str, text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / name, "w", newline="\n") as fh:
        fh.write(text)


def cmd_report(config: RunConfig) -> None:
    reports = run_reports(config)
    if config.format == "csv":
        _emit("report.csv", reports_csv(reports, config), config.out)
        return
    for rep in reports:
        _emit(f"report_n{rep.n}.json", rep.to_json(), config.out)


def cmd_sweep(config: RunConfig) -> None:
    if len(config.n) < 3:
        raise UsageError(f"a sweep needs at least 3 values of n, got {len(config.n)}")
    reports = run_reports(config)
    if config.format == "csv":
        _emit("sweep.csv", sweep_csv(reports, config), config.out)
    else:
        payload = {"reports": [r.to_dict() for r in reports]}
        _emit("sweep.json", json.dumps(payload, indent=2, sort_keys=True) + "\n", config.out)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        config = config_from_args(args)
        if config.require_conditions:
            cond = check_conditions(marginals(model_from_dict(config.model)))
            if not cond.passed:
                print(f"cpapprox: smallness conditions fail: {json.dumps(cond.to_dict())}", file=sys.stderr)
                return EXIT_CONDITIONS
        if args.command == "report":
            cmd_report(config)
        else:
            cmd_sweep(config)
    except UsageError as exc:
        print(f"cpapprox: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CPApproxError, ValueError, OSError, KeyError) as exc:
        print(f"cpapprox: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

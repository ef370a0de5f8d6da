"""Command line entry point: ``koranyi run --config exp.yaml`` or ``koranyi <experiment> [flags]``."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .experiments.config import (
    DEFAULT_QUADRATURE,
    EXPERIMENTS,
    FORMATS,
    ConfigError,
    ExperimentConfig,
    load_config,
    render_report,
    write_report,
)
from .quadrature import QuadratureSpec

# where --samples lands for each experiment (quadrature.samples otherwise)
SAMPLE_PARAM = {"green-check": "ball_samples", "bellman": "count", "cap-measure": "mc_samples"}


def _count(text: str) -> int:
    v = float(text)
    if v < 1 or v != int(v):
        raise argparse.ArgumentTypeError(f"expected a positive integer count, got {text!r}")
    return int(v)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _output_flags(p: argparse.ArgumentParser):
    p.add_argument("--workers", type=int, default=None, help="worker threads for Monte Carlo chunks")
    p.add_argument("--format", choices=FORMATS, default=None, help="report format (default: from the file suffix)")
    p.add_argument("--no-figures", action="store_true", help="do not write a PNG next to each report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="koranyi", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run every experiment listed in a YAML config")
    run.add_argument("--config", required=True)
    _output_flags(run)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--n", type=int, default=None, help="dimension (default 2; restricts n lists when given)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--samples", type=_count, default=None)
        p.add_argument("--epsilon", type=float, default=None, help="ball truncation 1 - epsilon")
        p.add_argument("--aperture", type=_floats, default=None, help="aperture list (bound-check)")
        p.add_argument("--alpha-list", type=_floats, default=None,
                       help="alpha / (n - 1) fractions (a2-compare)")
        p.add_argument("--q-list", type=_floats, default=None, help="Q list (bellman)")
        p.add_argument("--out", default=None, help="report path; the table goes to stdout when omitted")
        _output_flags(p)
    return parser


def config_from_args(args) -> ExperimentConfig:
    name = args.command
    quad = dict(DEFAULT_QUADRATURE[name], seed=args.seed)
    params = {}
    n = 2 if args.n is None else args.n
    if args.n is not None and name in ("green-check", "bound-check"):
        params["n_list"] = [args.n]
    if args.samples is not None:
        if name in SAMPLE_PARAM:
            params[SAMPLE_PARAM[name]] = args.samples
        else:
            quad["samples"] = args.samples
    if args.epsilon is not None:
        quad["epsilon"] = args.epsilon
    if args.workers is not None:
        quad["workers"] = args.workers
    for flag, exp, key in (("aperture", "bound-check", "apertures"), ("alpha_list", "a2-compare", "alpha_fractions"),
                           ("q_list", "bellman", "q_list")):
        value = getattr(args, flag)
        if value is None:
            continue
        if name != exp:
            raise ConfigError(f"--{flag.replace('_', '-')} only applies to {exp}")
        params[key] = value
    return ExperimentConfig(name, n=n, quadrature=QuadratureSpec(**quad), params=params, output=args.out)


def execute(cfg: ExperimentConfig, fmt: str | None, figures: bool, stdout=None):
    from .experiments.runners import run

    report = run(cfg)
    if cfg.output:
        path = write_report(report, cfg.output, fmt)
        if figures:
            from .experiments.figures import figure_path, render_figure

            render_figure(report, figure_path(path))
    else:
        (stdout or sys.stdout).write(render_report(report, fmt or "table"))
    return report


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            configs = load_config(args.config)
            if args.workers is not None:
                configs = [ExperimentConfig(c.experiment, c.n, c.quadrature.with_(workers=args.workers), c.params,
                                            c.thresholds, c.output) for c in configs]
        else:
            configs = [config_from_args(args)]
    except (ConfigError, OSError, ValueError) as exc:
        print(f"koranyi: {exc}", file=sys.stderr)
        return 2
    reports = [execute(c, args.format, not args.no_figures) for c in configs]
    for r in reports:
        print(r.summary(), file=sys.stderr)
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - failed}/{len(reports)} experiments passed", file=sys.stderr)
    return 0 if failed == 0 else 1


if __name__ == "__main__":
    sys.exit(main())

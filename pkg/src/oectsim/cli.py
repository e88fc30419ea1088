"""Command line entry point.

    oectsim <experiment> --preset <name> --seed <n> --out <dir> [--set key=value]...
    oectsim replay <manifest.json> [--out <dir>]
    oectsim list

Exit status: 0 success, 1 usage or configuration error, 2 data error,
3 invariant violation.
"""

from __future__ import annotations

import argparse
import os
import sys

_THREAD_VARS = ("NUMBA_NUM_THREADS", "OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS")

EXPERIMENT_NAMES = ("ltp-curve", "retention", "stdp-sweep", "mnist-snn", "mnist-ann",
                    "reflex", "ecg-rc", "characterize")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="oectsim", description="Simulate OECT synapse/receptor experiments.")
    p.add_argument("--threads", type=int, default=None, help="cap worker threads")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in EXPERIMENT_NAMES:
        e = sub.add_parser(name, help=f"run the {name} experiment")
        e.add_argument("--preset", default="cv-OECT-200C")
        e.add_argument("--seed", type=int, default=0)
        e.add_argument("--out", default=None, help="output directory (default results/<name>)")
        e.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one configuration key")
        e.add_argument("--config", default=None, help="file of key = value overrides")
        e.add_argument("--threads", type=int, default=None, help="cap worker threads")
        e.add_argument("--plot", action="store_true", help="also write gnuplot scripts")
    r = sub.add_parser("replay", help="re-run an experiment from its manifest")
    r.add_argument("manifest")
    r.add_argument("--out", default=None)
    r.add_argument("--threads", type=int, default=None)
    r.add_argument("--plot", action="store_true")
    sub.add_parser("list", help="list experiments and presets")
    return p


def _cap_threads(n: int | None) -> None:
    if n is None:
        return
    if n < 1:
        raise SystemExit("oectsim: error: --threads must be >= 1")
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _cap_threads(args.threads)
    except SystemExit as exc:
        print(exc, file=sys.stderr)
        return 1

    # heavy imports after the thread caps are in the environment
    from .config import ConfigError, parse_assignment
    from .experiments import (EXIT_DATA, EXIT_INVARIANT, EXIT_OK, EXIT_USAGE, EXPERIMENTS,
                              DataError, ExperimentSpec, read_overrides_file, replay,
                              run_experiment)
    from .presets import available_presets

    if args.command == "list":
        for name, exp in EXPERIMENTS.items():
            print(f"{name:14s} {exp.description}")
        print("presets:", ", ".join(available_presets()))
        return EXIT_OK

    try:
        if args.command == "replay":
            result = replay(args.manifest, args.out, args.plot)
        else:
            overrides = read_overrides_file(args.config) if args.config else {}
            overrides.update(parse_assignment(item) for item in args.overrides)
            out = args.out or os.path.join("results", args.command)
            spec = ExperimentSpec(args.command, args.preset, args.seed, out, overrides, args.plot)
            result = run_experiment(spec)
    except ConfigError as exc:
        print(f"oectsim: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"oectsim: data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    m = result.manifest
    print(f"{m['experiment']} [{m['preset']}, seed {m['seed']}] "
          f"{m['wall_time_s']:.2f} s -> {result.files[0].parent if result.files else '-'}")
    for k, v in m["metrics"].items():
        if isinstance(v, float):
            print(f"  {k} = {v:.6g}")
        elif not isinstance(v, list):
            print(f"  {k} = {v}")
    if result.status == EXIT_INVARIANT:
        print("invariant violation: " + ", ".join(result.failed_checks), file=sys.stderr)
    return result.status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

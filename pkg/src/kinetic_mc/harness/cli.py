"""Command line interface: ``kinetic-mc {simulate,converge-n,converge-dt,validate}``.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, build, read_config
from .emit import EmitError, emit, write
from .sweeps import converge_in_dt, converge_in_n
from .validation import validate

logger = logging.getLogger("kinetic_mc")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
THREADS_ENV = "KINETIC_MC_THREADS"


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return os.cpu_count() or 1


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinetic-mc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", type=Path, required=config_required, help="JSON configuration file")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=_u64, default=None, help="override the scheme seed and sweep master seed")
        p.add_argument("--threads", type=_positive, default=None, help=f"worker threads (default: ${THREADS_ENV} or CPU count)")
        p.add_argument("--format", dest="formats", action="append", choices=["csv", "json", "svg"], help="output format, repeatable")

    common(sub.add_parser("simulate", help="run one simulation and record moment snapshots"))
    common(sub.add_parser("converge-n", help="error versus particle number"))
    common(sub.add_parser("converge-dt", help="error versus time step"))
    v = sub.add_parser("validate", help="run the invariant suites")
    common(v, config_required=False)
    v.add_argument("--model", default=None, help="model name or 'all' (default: the config's model, else all)")
    v.add_argument("--depth", choices=["Quick", "Full"], default="Quick")
    return parser


def _outputs(args, cfg_output: dict, default_formats, stem: str, obj, config_raw, svg=True):
    formats = args.formats or cfg_output.get("formats") or default_formats
    if not svg and "svg" in formats:
        if args.formats and "svg" in args.formats:
            raise ConfigError("SVG output is only available for convergence sweeps")
        logger.warning("skipping svg output: only sweeps have a chart")
        formats = [f for f in formats if f != "svg"]
    out_dir = args.out or Path(cfg_output.get("dir", "."))
    prefix = cfg_output.get("prefix", stem)
    written = []
    for fmt in dict.fromkeys(formats):
        written.append(write(out_dir / f"{prefix}.{fmt}", emit(obj, fmt, config_raw)))
    return written


def _sweep_outputs(args, cfg, result, stem):
    written = _outputs(args, cfg.output, ["csv", "json"], stem, result, cfg.raw)
    formats = args.formats or cfg.output.get("formats") or ["csv", "json"]
    if "csv" in formats and result.max_rows:
        out_dir = args.out or Path(cfg.output.get("dir", "."))
        prefix = cfg.output.get("prefix", stem)
        written.append(write(out_dir / f"{prefix}_max.csv", emit(result.max_rows, "csv")))
    return written


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads or default_threads()
    try:
        if args.command == "validate":
            selector = args.model
            if args.config is not None:
                cfg = build(read_config(args.config), args.seed)
                selector = selector or cfg.model
                output = cfg.output
            else:
                output = {}
            report = validate(selector or "all", args.depth, **({} if args.seed is None else {"seed": args.seed}))
            for e in report.entries:
                print(f"{'PASS' if e.passed else 'FAIL'} {e.suite:<24} {e.model:<12} margin={e.margin:.4g} {e.detail}")
            if args.out or args.formats or output:
                _outputs(args, output, ["json"], "validation", report, None, svg=False)
            return EXIT_OK if report.passed else EXIT_VALIDATION
        cfg = build(read_config(args.config), args.seed, need=_NEEDS[args.command])
        if args.command == "simulate":
            from ..solvers import run

            traj = run(cfg.params, cfg.model, cfg.ic, equilibrium=cfg.equilibrium, workers=threads)
            paths = _outputs(args, cfg.output, ["csv", "json"], "trajectory", traj, cfg.raw, svg=False)
        else:
            fn = converge_in_n if args.command == "converge-n" else converge_in_dt
            result = fn(cfg.plan, workers=threads)
            if result.fit is not None:
                print(f"slope={result.fit.slope:.6g} intercept={result.fit.intercept:.6g} r_squared={result.fit.r_squared:.6g}")
            else:
                print(result.diagnostic)
            paths = _sweep_outputs(args, cfg, result, "sweep")
        for p in paths:
            print(f"wrote {p}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EmitError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        logger.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


_NEEDS = {
    "simulate": ("initial_condition", "scheme"),
    "converge-n": ("initial_condition", "scheme", "sweep"),
    "converge-dt": ("initial_condition", "scheme", "sweep"),
}


if __name__ == "__main__":
    sys.exit(main())

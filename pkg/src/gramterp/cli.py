"""``gramterp`` command line: ``mse``, ``ber``, ``complexity``, ``tradeoff``, ``validate``.

Each subcommand loads an optional configuration file, runs the experiment
and writes ``<out>`` (CSV) plus ``<out stem>.plot.json``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import KINDS, SCALES, ConfigError, default_config, load_config
from .experiments import run_experiment
from .results import write_plots

log = logging.getLogger("gramterp")


def _u64(text: str) -> int:
    val = int(text, 0)
    if not 0 <= val < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return val


def _positive(text: str) -> int:
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gramterp",
        description="Gram-matrix interpolation experiments for massive MU-MIMO-OFDM.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "mse": "closed-form vs. simulated interpolation MSE",
        "ber": "uncoded BER vs. SNR per Gram method",
        "complexity": "multiplication counts per Gram method",
        "tradeoff": "required SNR vs. Gram complexity",
        "validate": "run the invariant suite (nonzero exit on failure)",
    }
    for kind in KINDS:
        p = sub.add_parser(kind, help=helps[kind])
        p.add_argument("--config", type=Path, help="experiment configuration file")
        p.add_argument("--seed", type=_u64, help="root seed (overrides the config)")
        p.add_argument("--out", type=Path, help=f"CSV output path (default results/{kind}.csv)")
        p.add_argument("--threads", type=_positive, default=1,
                       help="worker threads; results do not depend on this")
        p.add_argument("--scale", choices=SCALES,
                       help="desk or paper parameterization (overrides the config)")
        p.add_argument("-q", "--quiet", action="store_true", help="only report errors")
    return parser


def _summary(kind: str, table) -> str:
    if kind == "validate":
        lines = [f"{'PASS' if r['passed'] else 'FAIL'}  {r['property']}  "
                 f"(deviation {r['deviation']:.3g}, threshold {r['threshold']:.3g})"
                 for r in table.rows]
        return "\n".join(lines)
    return f"{len(table.rows)} rows"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s")
    kind = args.command
    try:
        if args.config is not None:
            cfg = load_config(args.config, scale=args.scale)
            if cfg.kind != kind:
                raise ConfigError(f"config describes a {cfg.kind!r} experiment, "
                                  f"not {kind!r}")
        else:
            cfg = default_config(kind, args.scale or "desk")
    except (ConfigError, OSError) as exc:
        print(f"gramterp: config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)

    out = args.out or Path("results") / f"{kind}.csv"
    log.info("running %s (%s scale, seed %d, %d thread(s))", kind, cfg.scale, cfg.seed,
             args.threads)
    table, plots = run_experiment(cfg, threads=args.threads)
    table.write(out)
    if plots:
        write_plots(plots, out)
    log.info("%s\nwrote %s", _summary(kind, table), out)
    if kind == "validate" and not all(r["passed"] for r in table.rows):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

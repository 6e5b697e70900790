"""Command-line entry point (``divexplore``)."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_config


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="divexplore", description="Diversity-driven exploration experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    r = sub.add_parser("run", help="train the agent described by a config file")
    r.add_argument("config")
    r.add_argument("--seed", type=int, action="append", help="replace the config's seed list (repeatable)")
    r.add_argument("--out", help="output root (default: config output, $DIV_EXPLORE_OUT, or ./runs)")
    r.add_argument("--budget", type=int, help="override the step budget")

    t = sub.add_parser("reproduce-table1", help="DQN vs Div-DQN on the deceptive and sparse gridworlds")
    t.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200])
    t.add_argument("--modes", nargs="+", choices=["deceptive", "sparse"], default=["deceptive", "sparse"])
    t.add_argument("--seed", type=int, action="append")
    t.add_argument("--out")
    t.add_argument("--budget-scale", type=float, default=1.0)

    h = sub.add_parser("heatmap", help="print visitation statistics of a finished run directory")
    h.add_argument("run_dir")

    sub.add_parser("gradcheck", help="finite-difference check of every loss gradient")
    return p


def _out_root(args):
    return args.out or os.environ.get("DIV_EXPLORE_OUT")


def cmd_run(args) -> int:
    from .harness import run_experiment

    cfg = parse_config(Path(args.config))
    changes = {}
    if args.seed:
        changes["seeds"] = list(args.seed)
    if args.budget is not None:
        changes["budget"] = args.budget
    if changes:
        cfg = cfg.replace(**changes)
    results = run_experiment(cfg, _out_root(args))
    for r in results:
        if r.status == "ok":
            print(f"{cfg.name} seed={r.seed} mean_last_10={r.mean_last_10:.3f} coverage={r.coverage:.4f} steps={r.steps}")
        else:
            print(f"{cfg.name} seed={r.seed} FAILED: {r.error}")
    return 0 if all(r.status == "ok" for r in results) else 1


def cmd_table1(args) -> int:
    from .harness import format_table, reproduce_table1

    rows, verdicts, _ = reproduce_table1(
        sizes=args.sizes, modes=args.modes, seeds=args.seed, out=_out_root(args) or "runs", budget_scale=args.budget_scale,
    )
    print(format_table(rows))
    return 0 if all(ok for ok, _ in verdicts.values()) else 1


def cmd_heatmap(args) -> int:
    from .metrics import read_pgm

    path = Path(args.run_dir) / "heatmap.pgm"
    try:
        img = read_pgm(path)
    except OSError as e:
        print(f"cannot read {path}: {e}", file=sys.stderr)
        return 1
    visited = int(np.count_nonzero(img))
    print(f"{path}: {img.shape[1]}x{img.shape[0]} cells, visited {visited} ({visited / img.size:.4f}), max intensity {int(img.max())}")
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import TOLERANCE, run_suite

    ok = True
    for name, err in run_suite(trials=5):
        status = "ok" if err < TOLERANCE else "FAIL"
        ok &= err < TOLERANCE
        print(f"{name:<28} max rel err {err:.2e}  {status}")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return {"run": cmd_run, "reproduce-table1": cmd_table1, "heatmap": cmd_heatmap, "gradcheck": cmd_gradcheck}[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

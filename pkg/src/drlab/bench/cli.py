"""Command line: ``drlab run | summarize | curves``."""
from __future__ import annotations

import argparse
import sys

from .config import ALGOS, load_config
from .report import emit_curves, format_table, summarize, write_summary_csv
from .run import run


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drlab", description="Train and compare RL agents.")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="train one agent and log metrics")
    r.add_argument("--algo", required=True, choices=sorted(ALGOS))
    r.add_argument("--env", required=True, help="cartpole, chain(n), gridworld(w,h), cliff")
    r.add_argument("--steps", type=int, required=True)
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--config", default=None, help="INI file with overrides")
    r.add_argument("--out", required=True, help="run directory")
    r.add_argument("--threads", type=int, default=None, help="number of parallel env instances E")
    r.add_argument("--updates-per-vector-step", type=int, default=None, dest="updates",
                   help="gradient steps L after each vector step")

    s = sub.add_parser("summarize", help="comparison table over run directories")
    s.add_argument("dirs", nargs="+")
    s.add_argument("--csv", default=None, help="also write the table as CSV")

    c = sub.add_parser("curves", help="smoothed return curves per run")
    c.add_argument("dirs", nargs="+")
    c.add_argument("--window", type=int, default=10)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            cli = {"run.algo": args.algo, "run.env": args.env, "run.steps": args.steps,
                   "run.seed": args.seed, "run.threads": args.threads,
                   "run.updates_per_vector_step": args.updates}
            cfg = load_config(args.config, cli)
            info = run(cfg, args.out)
            print(f"{cfg.algo} on {cfg.env}: {info['steps']} steps, {info['episodes']} episodes, "
                  f"{info['updates']} updates -> {args.out}")
        elif args.cmd == "summarize":
            rows = summarize(args.dirs)
            print(format_table(rows))
            if args.csv:
                write_summary_csv(rows, args.csv)
        else:
            for path in emit_curves(args.dirs, args.window):
                print(path)
    except (ValueError, FileNotFoundError) as exc:
        print(f"drlab: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

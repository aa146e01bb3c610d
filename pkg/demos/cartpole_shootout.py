"""Train several agents on CartPole for a short budget and compare them.

Run: python3 demos/cartpole_shootout.py [out_dir]
Takes a few minutes on one core.
"""
import os
import sys

from drlab.bench import emit_curves, format_table, resolve, run, summarize

out = sys.argv[1] if len(sys.argv) > 1 else "shootout_runs"
dirs = []
for algo in ("dqn", "double_dqn", "c51", "rainbow", "ppo", "a2c"):
    cfg = resolve(cli={"run.algo": algo, "run.env": "cartpole", "run.steps": 10_000,
                       "run.seed": 0})
    d = os.path.join(out, algo)
    info = run(cfg, d)
    print(f"{algo:12s} {info['episodes']:4d} episodes, {info['updates']:6d} updates")
    dirs.append(d)

print()
print(format_table(summarize(dirs)))
emit_curves(dirs, 10)
print(f"\nsmoothed curves written next to each metrics.csv under {out}/")

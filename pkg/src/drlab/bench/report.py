"""Comparison tables and smoothed training curves built from ``metrics.csv`` logs."""
from __future__ import annotations

import configparser
import csv
import os
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..mdp.envs import max_return


def read_metrics(run_dir) -> dict:
    path = os.path.join(run_dir, "metrics.csv")
    if not os.path.exists(path):
        raise FileNotFoundError(f"{run_dir}: no metrics.csv")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    cols = {}
    for key in ("wall_ms", "env_step", "episode", "episode_return"):
        cols[key] = np.array([float(r[key]) for r in rows])
    return cols


def _run_meta(run_dir):
    cp = configparser.ConfigParser()
    cp.read(os.path.join(run_dir, "config.ini"), encoding="utf-8")
    if "run" not in cp:
        return os.path.basename(os.path.normpath(run_dir)), None
    return cp["run"].get("algo", "?"), cp["run"].get("env")


@dataclass
class SummaryRow:
    run: str
    algo: str
    reached: Optional[int]
    mean_return: float
    fps: float
    episodes: int

    def cells(self):
        return [self.run, self.algo, "-" if self.reached is None else str(self.reached),
                f"{self.mean_return:.2f}", f"{self.fps:.1f}", str(self.episodes)]


HEADER = ["run", "algo", "reached", "mean_return", "fps", "episodes"]


def summarize(run_dirs) -> List[SummaryRow]:
    """Per run: first episode hitting the env's max return, mean return, transitions per second."""
    rows = []
    for d in run_dirs:
        m = read_metrics(d)
        algo, env = _run_meta(d)
        target = max_return(env) if env else None
        ret = m["episode_return"]
        reached = None
        if target is not None and ret.size:
            hit = np.flatnonzero(ret >= target - 1e-9)
            if hit.size:
                reached = int(m["episode"][hit[0]])
        secs = m["wall_ms"][-1] / 1000.0 if ret.size else 0.0
        fps = m["env_step"][-1] / secs if ret.size and secs > 0 else float("nan")
        rows.append(SummaryRow(os.path.basename(os.path.normpath(d)), algo, reached,
                               float(ret.mean()) if ret.size else float("nan"), fps, ret.size))
    rows.sort(key=lambda r: -r.mean_return if np.isfinite(r.mean_return) else np.inf)
    return rows


def format_table(rows: List[SummaryRow]) -> str:
    cells = [HEADER] + [r.cells() for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(HEADER))]
    lines = ["  ".join(c[i].ljust(widths[i]) for i in range(len(HEADER))) for c in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_summary_csv(rows: List[SummaryRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for r in rows:
            w.writerow(r.cells())


def moving_average(x, window: int) -> np.ndarray:
    """Trailing mean over the last ``window`` values (fewer at the start)."""
    x = np.asarray(x, dtype=np.float64)
    if window < 1:
        raise ValueError("window must be >= 1")
    if x.size == 0:
        return x.copy()
    # direct window sums keep window=1 and constant series exact
    padded = np.concatenate([np.full(window - 1, np.nan), x])
    return np.nanmean(np.lib.stride_tricks.sliding_window_view(padded, window), axis=1)

def emit_curves(run_dirs, window: int) -> list:
    """Write ``curve_steps.csv`` and ``curve_time.csv`` into every run directory."""
    written = []
    for d in run_dirs:
        m = read_metrics(d)
        smooth = moving_average(m["episode_return"], window)
        for name, xs, head in (("curve_steps.csv", m["env_step"].astype(np.int64), "env_step"),
                               ("curve_time.csv", m["wall_ms"] / 1000.0, "wall_s")):
            path = os.path.join(d, name)
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow([head, "smoothed_return"])
                for x, y in zip(xs, smooth):
                    w.writerow([x if head == "env_step" else repr(float(x)), repr(float(y))])
            written.append(path)
    return written

#!/usr/bin/env python3
"""Plot metrics CSVs written by `marl-bench run --out` or a comparison table
written by `marl-bench compare --out`.

    python3 scripts/plot_metrics.py runs/awl.csv runs/baseline.csv -o curves.png
    python3 scripts/plot_metrics.py --compare runs/compare.csv -o throughput.png
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

METRICS_HEADER = [
    "wall_time_s", "env_steps", "episodes", "steps_per_sec", "loss",
    "eval_return", "solve_rate", "snapshot_version", "mean_staleness",
]


def read_rows(path):
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != METRICS_HEADER:
            raise SystemExit(f"{path}: unexpected header {reader.fieldnames}")
        return list(reader)


def column(rows, key, x_key="episodes"):
    xs, ys = [], []
    for r in rows:
        if r[key] != "":
            xs.append(float(r[x_key]))
            ys.append(float(r[key]))
    return xs, ys


def plot_runs(paths, out):
    fig, axes = plt.subplots(1, 3, figsize=(15, 4))
    for path in paths:
        rows = read_rows(path)
        label = Path(path).stem
        axes[0].plot(*column(rows, "env_steps", "wall_time_s"), label=label)
        axes[1].plot(*column(rows, "eval_return"), marker="o", label=label)
        axes[2].plot(*column(rows, "loss"), label=label)
    axes[0].set(xlabel="time (s)", ylabel="environment steps", title="sample collection")
    axes[1].set(xlabel="episodes", ylabel="greedy return", title="evaluation")
    axes[2].set(xlabel="episodes", ylabel="TD loss", title="training loss")
    for ax in axes:
        ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=120)


def plot_compare(path, out):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    modes = [r["mode"] for r in rows]
    sps = [float(r["steps_per_sec"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar(modes, sps)
    for bar, r in zip(bars, rows):
        ax.annotate(f'{float(r["ratio_vs_baseline"]):.2f}x', (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                    ha="center", va="bottom")
    ax.set(ylabel="environment steps / s", title="sample collection speed")
    fig.tight_layout()
    fig.savefig(out, dpi=120)


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("csv", nargs="+")
    p.add_argument("--compare", action="store_true", help="input is a comparison table")
    p.add_argument("-o", "--out", default="metrics.png")
    args = p.parse_args()
    if args.compare:
        plot_compare(args.csv[0], args.out)
    else:
        plot_runs(args.csv, args.out)


if __name__ == "__main__":
    main()

"""Discretization-scaling figure: wall time vs link count on log axes.

Usage: python -m flexhose_figures.plot_scaling BENCHMARK.csv --out FIG.png
"""

from __future__ import annotations

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .csvdata import FigureInputError, read_table


def plot_scaling(table_path, out_path) -> Path:
    table = read_table(table_path)
    n = table.col("n")
    secs = table.col("wall_seconds")
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(n, secs, "o-", lw=1.2)
    ax.set_xlabel("number of links n")
    ax.set_ylabel("wall time to simulate [s]")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("table", help="benchmark CSV (n, wall_seconds)")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        out = plot_scaling(args.table, args.out)
    except FigureInputError as exc:
        print(f"error: {exc}")
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Error-decay figure: link and quadrotor attitude errors over time.

One panel per error family (Psi_q for the hose links, Psi_R for the
quadrotors). Given two logs the runs are overlaid, solid vs dashed, labeled
by file stem — the controller-comparison layout.

Usage: python -m flexhose_figures.plot_errors LOG.csv [LOG2.csv] --out FIG.png
"""

from __future__ import annotations

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .csvdata import FigureInputError, read_table

LINESTYLES = ["-", "--"]


def plot_errors(log_paths, out_path) -> Path:
    tables = [read_table(p) for p in log_paths]
    for table in tables:
        if not table.group("psi_q") or not table.group("psi_R"):
            raise FigureInputError(f"{table.source}: psi_q / psi_R columns required")

    fig, (ax_q, ax_R) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for table, style in zip(tables, LINESTYLES):
        label = Path(table.source).stem if len(tables) > 1 else None
        t = table.col("t")
        for k, name in enumerate(table.group("psi_q")):
            ax_q.plot(t, table.col(name), style, lw=0.9,
                      label=label if k == 0 else None)
        for k, name in enumerate(table.group("psi_R")):
            ax_R.plot(t, table.col(name), style, lw=0.9,
                      label=label if k == 0 else None)
    ax_q.set_ylabel("link attitude error")
    ax_R.set_ylabel("quadrotor attitude error")
    ax_R.set_xlabel("time [s]")
    for ax in (ax_q, ax_R):
        ax.grid(True, alpha=0.3)
        if len(tables) > 1:
            ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("logs", nargs="+", help="one or two rollout log CSVs")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    if len(args.logs) > 2:
        parser.error("at most two logs can be overlaid")
    try:
        out = plot_errors(args.logs, args.out)
    except FigureInputError as exc:
        print(f"error: {exc}")
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

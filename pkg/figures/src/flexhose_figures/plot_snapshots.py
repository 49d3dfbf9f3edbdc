"""Chain-shape snapshots at selected instants (side and top views).

The hose polyline is rebuilt from the logged x0 and link directions using the
link lengths recorded in the run manifest; quadrotor joints get markers.
Default instants are the quarter points of the run.

Usage: python -m flexhose_figures.plot_snapshots LOG.csv --out FIG.png
       [--manifest MANIFEST.json] [--instants t1,t2,...]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .csvdata import (
    FigureInputError,
    attach_indices,
    chain_nodes,
    link_lengths,
    read_manifest,
    read_table,
)

QUARTERS = (0.25, 0.5, 0.75, 1.0)


def plot_snapshots(log_path, out_path, manifest_path=None, instants=None) -> Path:
    table = read_table(log_path)
    if manifest_path is None:
        manifest_path = Path(log_path).parent / "manifest.json"
    lengths = link_lengths(read_manifest(manifest_path))
    attach = attach_indices(table)
    t = table.col("t")
    if instants is None:
        instants = [t[0] + frac * (t[-1] - t[0]) for frac in QUARTERS]

    fig, (ax_side, ax_top) = plt.subplots(1, 2, figsize=(9, 4))
    cmap = plt.get_cmap("viridis")
    for idx, t_want in enumerate(instants):
        row = int(np.argmin(np.abs(t - t_want)))
        nodes = chain_nodes(table, lengths, row)
        color = cmap(idx / max(len(instants) - 1, 1))
        label = f"t = {t[row]:.2f} s"
        ax_side.plot(nodes[:, 0], nodes[:, 2], "-", color=color, lw=1.2, label=label)
        ax_top.plot(nodes[:, 0], nodes[:, 1], "-", color=color, lw=1.2)
        for k in attach:
            ax_side.plot(nodes[k, 0], nodes[k, 2], "s", color=color, ms=6)
            ax_top.plot(nodes[k, 0], nodes[k, 1], "s", color=color, ms=6)
    ax_side.set_xlabel("x [m]")
    ax_side.set_ylabel("z [m]")
    ax_side.set_title("side view")
    ax_top.set_xlabel("x [m]")
    ax_top.set_ylabel("y [m]")
    ax_top.set_title("top view")
    for ax in (ax_side, ax_top):
        ax.grid(True, alpha=0.3)
        ax.set_aspect("equal", adjustable="datalim")
    ax_side.legend(loc="best", fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("log", help="rollout log CSV")
    parser.add_argument("--out", required=True)
    parser.add_argument("--manifest", default=None, help="manifest.json with the parameters")
    parser.add_argument("--instants", default=None, help="comma-separated times [s]")
    args = parser.parse_args(argv)
    instants = [float(v) for v in args.instants.split(",")] if args.instants else None
    try:
        out = plot_snapshots(args.log, args.out, args.manifest, instants)
    except FigureInputError as exc:
        print(f"error: {exc}")
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

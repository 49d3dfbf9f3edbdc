"""Stable on-disk CSV schemas for rollout logs and planned trajectories.

Every file carries a header row naming each column; columns are grouped as
t, x0, v0, link attitudes q{i}, link rates w{i}, attitude errors, quadrotor
blocks (R{j} row-major, errors, inputs), energies, constraint defects, and
link tensions. Quadrotor columns are keyed by the attachment joint index.
Floats are written with shortest round-trip precision, so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import csv

import numpy as np

from .model import SystemParams

SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    return repr(float(x))


def log_header(params: SystemParams) -> list[str]:
    n = params.n
    cols = ["t", "x0.x", "x0.y", "x0.z", "v0.x", "v0.y", "v0.z"]
    for i in range(1, n + 1):
        cols += [f"q{i}.x", f"q{i}.y", f"q{i}.z"]
    for i in range(1, n + 1):
        cols += [f"w{i}.x", f"w{i}.y", f"w{i}.z"]
    cols += [f"psi_q{i}" for i in range(1, n + 1)]
    cols += [f"xi{i}.norm" for i in range(1, n + 1)]
    for j in params.attach:
        cols += [f"R{j}.m{r}{c}" for r in range(3) for c in range(3)]
    cols += [f"psi_R{j}" for j in params.attach]
    cols += [f"eta{j}.norm" for j in params.attach]
    cols += [f"f{j}" for j in params.attach]
    for j in params.attach:
        cols += [f"M{j}.x", f"M{j}.y", f"M{j}.z"]
    cols += ["energy.T", "energy.U", "energy.total"]
    cols += ["defect.qnorm", "defect.qw", "defect.orth"]
    for i in range(1, n + 1):
        cols += [f"T{i}.x", f"T{i}.y", f"T{i}.z"]
    return cols


def log_row(rec) -> list[str]:
    vals = [rec.t]
    vals += list(rec.x0) + list(rec.v0)
    vals += list(rec.q.ravel()) + list(rec.omega.ravel())
    vals += list(rec.psi_q) + list(rec.xi_norm)
    vals += list(rec.R.reshape(-1))
    vals += list(rec.psi_R) + list(rec.eta_norm)
    vals += list(rec.f) + list(rec.M.ravel())
    vals += [rec.kinetic, rec.potential, rec.kinetic + rec.potential]
    vals += [rec.defect_qnorm, rec.defect_qw, rec.defect_orth]
    vals += list(rec.tensions.ravel())
    return [_fmt(v) for v in vals]


def write_log_csv(path, params: SystemParams, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(log_header(params))
        for rec in records:
            writer.writerow(log_row(rec))


def plan_header(params: SystemParams) -> list[str]:
    n = params.n
    cols = ["t", "residual"]
    cols += ["x0.x", "x0.y", "x0.z", "v0.x", "v0.y", "v0.z"]
    for i in range(n + 1):
        cols += [f"node{i}.x", f"node{i}.y", f"node{i}.z"]
    for i in range(1, n + 1):
        cols += [f"q{i}.x", f"q{i}.y", f"q{i}.z"]
    for i in range(1, n + 1):
        cols += [f"w{i}.x", f"w{i}.y", f"w{i}.z"]
    for j in params.attach:
        cols += [f"R{j}.m{r}{c}" for r in range(3) for c in range(3)]
    for j in params.attach:
        cols += [f"Omega{j}.x", f"Omega{j}.y", f"Omega{j}.z"]
    cols += [f"f{j}" for j in params.attach]
    for j in params.attach:
        cols += [f"M{j}.x", f"M{j}.y", f"M{j}.z"]
    return cols


def plan_row(params: SystemParams, point, node_pos: np.ndarray, residual: float) -> list[str]:
    st = point.state
    vals = [point.t, residual]
    vals += list(st.x0) + list(st.v0)
    vals += list(node_pos.ravel())
    vals += list(st.q.ravel()) + list(st.omega.ravel())
    vals += list(st.R.reshape(-1)) + list(st.Omega.ravel())
    vals += list(point.input.f) + list(point.input.M.ravel())
    return [_fmt(v) for v in vals]


def write_benchmark_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "wall_seconds"])
        for n, secs in rows:
            writer.writerow([str(int(n)), _fmt(secs)])

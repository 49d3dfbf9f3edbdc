"""Read-only access to flexhose CSV outputs.

The simulator writes rollout logs (log.csv), planned reference trajectories
(plan.csv), and benchmark tables (benchmark.csv), each with a header row
naming every column; a manifest.json with the resolved physical parameters
sits next to them. These helpers never modify the files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


class FigureInputError(Exception):
    """Missing files or columns in the CSV inputs."""


class Table:
    """A CSV file as named float columns."""

    def __init__(self, header: list[str], data: np.ndarray, source: str):
        self.header = header
        self.data = data
        self.source = source
        self._index = {name: i for i, name in enumerate(header)}

    def __len__(self) -> int:
        return self.data.shape[0]

    def has(self, name: str) -> bool:
        return name in self._index

    def col(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self._index[name]]
        except KeyError:
            raise FigureInputError(f"{self.source}: column {name!r} missing") from None

    def group(self, prefix: str, suffix: str = "") -> list[str]:
        """Column names like '<prefix><k><suffix>' ordered by the integer k."""
        found = []
        for name in self.header:
            if name.startswith(prefix) and name.endswith(suffix):
                middle = name[len(prefix) : len(name) - len(suffix) if suffix else len(name)]
                if middle.isdigit():
                    found.append((int(middle), name))
        return [name for _, name in sorted(found)]

    def triple(self, stem: str) -> np.ndarray:
        """(rows, 3) array from '<stem>.x/.y/.z' columns."""
        return np.stack([self.col(f"{stem}.{ax}") for ax in "xyz"], axis=1)


def read_table(path) -> Table:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FigureInputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise FigureInputError(f"{path}: empty file")
    header = rows[0]
    if len(rows) == 1:
        raise FigureInputError(f"{path}: no data rows")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise FigureInputError(f"{path}: non-numeric cell ({exc})") from exc
    return Table(header, data, str(path))


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FigureInputError(f"cannot read manifest {path}: {exc}") from exc


def link_lengths(manifest: dict) -> np.ndarray:
    try:
        return np.asarray(manifest["params"]["lengths"], float)
    except KeyError as exc:
        raise FigureInputError(f"manifest missing params.lengths ({exc})") from exc


def attach_indices(table: Table) -> list[int]:
    """Attachment joint indices, recovered from the psi_R column names."""
    names = table.group("psi_R")
    if not names:
        raise FigureInputError(f"{table.source}: no psi_R columns (not a rollout log?)")
    return [int(name[len("psi_R") :]) for name in names]


def chain_nodes(table: Table, lengths: np.ndarray, row: int) -> np.ndarray:
    """Joint positions x_i = x0 + sum_{k<=i} l_k q_k for one logged sample."""
    n = len(lengths)
    q_names = [f"q{i}" for i in range(1, n + 1)]
    q = np.stack([table.triple(name)[row] for name in q_names])
    x0 = table.triple("x0")[row]
    nodes = np.empty((n + 1, 3))
    nodes[0] = x0
    nodes[1:] = x0 + np.cumsum(lengths[:, None] * q, axis=0)
    return nodes

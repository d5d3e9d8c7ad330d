"""Core value types, rank computation, basis expansion and CSV I/O.

Everything in this module is immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, ParseError, TiesPresent

_NAME_RE = re.compile(r"^[A-Za-z0-9_]+$")


@dataclass(frozen=True)
class Dataset:
    """An n x m matrix of finite continuous observations with named columns."""

    values: np.ndarray
    column_names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        if values.ndim != 2:
            raise ValueError("values must be a 2-d matrix")
        n, m = values.shape
        if n < 2:
            raise ValueError(f"need at least 2 rows, got {n}")
        if m < 1:
            raise ValueError("need at least 1 column")
        if len(self.column_names) != m:
            raise ValueError("column_names length does not match column count")
        if len(set(self.column_names)) != m:
            raise ValueError("column names must be unique")
        if not np.all(np.isfinite(values)):
            i, j = np.argwhere(~np.isfinite(values))[0]
            raise ValueError(f"non-finite entry at row {i}, column {self.column_names[j]}")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph over m nodes; edges are (parent, child) pairs."""

    m: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(self.edges))
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < self.m and 0 <= v < self.m):
                raise ValueError(f"edge ({u}, {v}) outside node range")
        if self.topological_order() is None:
            raise ValueError("edge relation contains a cycle")

    def parents(self, k: int) -> list[int]:
        return sorted(u for u, v in self.edges if v == k)

    def children(self, k: int) -> list[int]:
        return sorted(v for u, v in self.edges if u == k)

    def topological_order(self) -> list[int] | None:
        """Kahn's algorithm; returns None if a cycle is present."""
        indeg = [0] * self.m
        out: dict[int, list[int]] = {k: [] for k in range(self.m)}
        for u, v in self.edges:
            indeg[v] += 1
            out[u].append(v)
        ready = sorted(k for k in range(self.m) if indeg[k] == 0)
        order: list[int] = []
        while ready:
            k = ready.pop(0)
            order.append(k)
            for v in sorted(out[k]):
                indeg[v] -= 1
                if indeg[v] == 0:
                    ready.append(v)
            ready.sort()
        return order if len(order) == self.m else None


@dataclass(frozen=True)
class BasisSpec:
    """Per-column monomial expansion up to ``degree`` (1 = identity)."""

    degree: int = 1

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")

    def output_dim(self, p: int) -> int:
        return p * self.degree


def compute_ranks(y: np.ndarray) -> np.ndarray:
    """Ranks of y: ranks[i] = #{j : y_j <= y_i}, a permutation of 1..n.

    Raises TiesPresent on exact ties; the model assumes continuous data, so
    ties signal invalid input rather than something to break silently.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("y must be 1-d")
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    order = np.argsort(y, kind="stable")
    if y.size > 1 and np.any(np.diff(y[order]) == 0.0):
        raise TiesPresent("exact ties in y; pass jittered data if this is intended")
    ranks = np.empty(y.size, dtype=np.int64)
    ranks[order] = np.arange(1, y.size + 1)
    return ranks


def jitter_ties(y: np.ndarray, seed: int, magnitude: float = 1e-12) -> np.ndarray:
    """Deterministic tie-breaking jitter of size magnitude * data range.

    Opt-in escape hatch for data with exact ties; the perturbation is a pure
    function of ``seed`` so downstream results stay reproducible.
    """
    from .rng import substream

    y = np.asarray(y, dtype=np.float64)
    scale = float(np.max(y) - np.min(y)) or 1.0
    u = substream(seed, 0xA55).random_open(y.size)
    return y + (2.0 * u - 1.0) * magnitude * scale


def expand_basis(x: np.ndarray, spec: BasisSpec) -> np.ndarray:
    """Monomial expansion: [x_j, x_j^2, ..., x_j^degree] per column, column-major blocks.

    No cross terms and no intercept column.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("x must be 2-d")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    n, p = x.shape
    out = np.empty((n, p * spec.degree), dtype=np.float64)
    for j in range(p):
        col = x[:, j]
        acc = col.copy()
        out[:, j * spec.degree] = acc
        for d in range(1, spec.degree):
            acc = acc * col
            out[:, j * spec.degree + d] = acc
    return out


def read_csv(path) -> Dataset:
    """Read a comma-separated file with a header row into a Dataset."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise ParseError(path, 1, 1, "empty file")
        names = header.rstrip("\n").split(",")
        for j, name in enumerate(names):
            if not _NAME_RE.match(name):
                raise ParseError(path, 1, j + 1, f"invalid column name {name!r}")
        rows = []
        for i, line in enumerate(fh, start=2):
            cells = line.rstrip("\n").split(",")
            if len(cells) != len(names):
                raise ParseError(path, i, 1, f"expected {len(names)} cells, got {len(cells)}")
            row = np.empty(len(names), dtype=np.float64)
            for j, cell in enumerate(cells):
                try:
                    row[j] = float(cell)
                except ValueError:
                    raise ParseError(path, i, j + 1, f"cannot parse {cell!r} as a real number")
                if not np.isfinite(row[j]):
                    raise NonFinite(path, i, j + 1)
            rows.append(row)
    if len(rows) < 2:
        raise ParseError(path, len(rows) + 1, 1, "need at least 2 data rows")
    return Dataset(np.vstack(rows), tuple(names))


def write_csv(dataset: Dataset, path) -> None:
    """Write a Dataset with shortest-round-trip float formatting (LF endings)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(dataset.column_names) + "\n")
        for row in dataset.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")

"""Finite measure spaces carried by weighted graphs.

A :class:`StateSpace` is the discrete stand-in for a Riemannian manifold
``(M, g, mu_g)``: vertices carry a reference measure ``mu``, edges carry a
conductance ``w`` (the metric weight entering the energy) and a geometric
length used for geodesic distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra


class StateSpaceError(ValueError):
    """Invalid state-space data."""


class DistanceUndefinedError(StateSpaceError):
    """Raised when two vertices lie in different connected components."""


class ParseError(StateSpaceError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Vertices with measure ``mu`` and undirected weighted edges.

    Edges are stored as parallel arrays ``(edge_i, edge_j, weights, lengths)``
    with ``edge_i < edge_j``. Instances are immutable; all arrays are
    read-only.
    """

    mu: np.ndarray
    edge_i: np.ndarray
    edge_j: np.ndarray
    weights: np.ndarray
    lengths: np.ndarray
    coords: Optional[np.ndarray] = None
    name: str = field(default="graph", compare=False)

    def __post_init__(self):
        mu = _frozen(self.mu)
        ei = np.asarray(self.edge_i, dtype=np.int64)
        ej = np.asarray(self.edge_j, dtype=np.int64)
        w = _frozen(self.weights)
        ln = _frozen(self.lengths)
        if mu.ndim != 1 or mu.size == 0:
            raise StateSpaceError("mu must be a non-empty vector")
        if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
            raise StateSpaceError("vertex measure must be finite and strictly positive")
        if not (ei.shape == ej.shape == w.shape == ln.shape) or ei.ndim != 1:
            raise StateSpaceError("edge arrays must be 1-d and of equal length")
        n = mu.size
        if ei.size:
            if ei.min() < 0 or ej.min() < 0 or ei.max() >= n or ej.max() >= n:
                raise StateSpaceError("edge endpoint out of range")
            if np.any(ei == ej):
                raise StateSpaceError("self-loops are not allowed")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise StateSpaceError("conductances must be finite and nonnegative")
            if not np.all(np.isfinite(ln)) or np.any(ln <= 0):
                raise StateSpaceError("edge lengths must be finite and positive")
        lo, hi = np.minimum(ei, ej), np.maximum(ei, ej)
        keys = lo * n + hi
        if np.unique(keys).size != keys.size:
            raise StateSpaceError("at most one edge per unordered vertex pair")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "edge_i", _frozen(lo, np.int64))
        object.__setattr__(self, "edge_j", _frozen(hi, np.int64))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lengths", ln)
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            if c.ndim == 1:
                c = c[:, None]
            if c.shape[0] != n:
                raise StateSpaceError("coords must have one row per vertex")
            object.__setattr__(self, "coords", _frozen(c))

    @classmethod
    def from_edges(cls, mu, edges: Sequence[tuple], coords=None, name="graph"):
        """Build from an iterable of ``(i, j, w, length)`` tuples."""
        edges = list(edges)
        if edges:
            ei, ej, w, ln = (np.array(col) for col in zip(*edges))
        else:
            ei = ej = np.zeros(0, dtype=np.int64)
            w = ln = np.zeros(0)
        return cls(mu, ei, ej, w, ln, coords=coords, name=name)

    @property
    def n(self) -> int:
        return int(self.mu.size)

    @property
    def n_edges(self) -> int:
        return int(self.edge_i.size)

    @property
    def edges(self):
        return list(zip(self.edge_i.tolist(), self.edge_j.tolist(),
                        self.weights.tolist(), self.lengths.tolist()))

    @property
    def total_measure(self) -> float:
        return math.fsum(self.mu)

    def inner(self, f, g) -> float:
        """The ``L^2(mu)`` inner product."""
        return float(np.dot(self.mu * np.asarray(f, float), np.asarray(g, float)))

    def norm(self, f) -> float:
        return math.sqrt(max(self.inner(f, f), 0.0))

    def function(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if v.shape != (self.n,):
            raise StateSpaceError(f"function must have length {self.n}, got shape {v.shape}")
        return v

    def with_measure(self, mu, weights, name=None) -> "StateSpace":
        """Same graph, new vertex measure and conductances."""
        return StateSpace(mu, self.edge_i, self.edge_j, weights, self.lengths,
                          coords=self.coords, name=name or self.name)

    def _adjacency(self, values, mask):
        n = self.n
        return coo_matrix((values[mask], (self.edge_i[mask], self.edge_j[mask])),
                          shape=(n, n)).tocsr()

    @cached_property
    def _components(self):
        adj = self._adjacency(np.ones(self.n_edges), self.weights > 0)
        ncomp, labels = connected_components(adj, directed=False)
        return ncomp, labels

    @property
    def connected(self) -> bool:
        return self._components[0] == 1

    @property
    def component_labels(self) -> np.ndarray:
        return self._components[1]

    def distances_from(self, p: int) -> np.ndarray:
        """Shortest-path distances from ``p`` along conducting edges (inf if unreachable)."""
        self._check_vertex(p)
        adj = self._adjacency(self.lengths, self.weights > 0)
        return dijkstra(adj, directed=False, indices=int(p))

    def _check_vertex(self, v):
        if not (0 <= int(v) < self.n):
            raise StateSpaceError(f"vertex {v} out of range 0..{self.n - 1}")


def build_line_grid(a: float, b: float, n: int) -> StateSpace:
    """Uniform grid on ``[a, b]`` with trapezoidal vertex weights.

    Nearest neighbours are joined with conductance ``1/h`` and length ``h``.
    The resulting energy imposes no boundary condition, so the induced
    generator is the Neumann second-difference operator.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise StateSpaceError("grid bounds must be finite")
    if not a < b:
        raise StateSpaceError("need a < b")
    if int(n) != n or n < 2:
        raise StateSpaceError("need at least 2 grid points")
    n = int(n)
    h = (b - a) / (n - 1)
    x = a + h * np.arange(n)
    mu = np.full(n, h)
    mu[0] = mu[-1] = h / 2
    idx = np.arange(n - 1)
    return StateSpace(mu, idx, idx + 1, np.full(n - 1, 1.0 / h), np.full(n - 1, h),
                      coords=x, name=f"line[{a:g},{b:g}]x{n}")


def build_circle_grid(circumference: float, n: int) -> StateSpace:
    """Periodic nearest-neighbour grid; coordinates are arc-length positions."""
    if not math.isfinite(circumference) or circumference <= 0:
        raise StateSpaceError("circumference must be positive and finite")
    if int(n) != n or n < 3:
        raise StateSpaceError("need at least 3 grid points on a circle")
    n = int(n)
    h = circumference / n
    idx = np.arange(n)
    return StateSpace(np.full(n, h), idx, (idx + 1) % n, np.full(n, 1.0 / h),
                      np.full(n, h), coords=h * idx, name=f"circle[{circumference:g}]x{n}")


def geodesic_distance(space: StateSpace, p: int, q: int) -> float:
    space._check_vertex(q)
    d = space.distances_from(p)[int(q)]
    if not np.isfinite(d):
        raise DistanceUndefinedError(f"vertices {p} and {q} are not connected")
    return float(d)


# -- text format -------------------------------------------------------------
#
#   n <N> [dim <d>] [psi]
#   <index> <mu> [<psi>] [<coord> ...]      (N lines)
#   <i> <j> <w> <len>                       (remaining lines)
#
# Blank lines and anything after '#' are ignored.

def dumps_state_space(space: StateSpace, psi=None) -> str:
    dim = 0 if space.coords is None else space.coords.shape[1]
    head = f"n {space.n}"
    if dim:
        head += f" dim {dim}"
    if psi is not None:
        head += " psi"
    lines = [f"# {space.name}", head]
    for i in range(space.n):
        row = [str(i), repr(float(space.mu[i]))]
        if psi is not None:
            row.append(repr(float(psi[i])))
        if dim:
            row.extend(repr(float(c)) for c in space.coords[i])
        lines.append(" ".join(row))
    for i, j, w, ln in space.edges:
        lines.append(f"{i} {j} {w!r} {ln!r}")
    return "\n".join(lines) + "\n"


def loads_state_space(text: str):
    """Parse the text format; returns ``(space, psi_or_None)``."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))
    if not rows:
        raise ParseError(1, "empty state-space file")

    lineno, head = rows[0]
    if len(head) < 2 or head[0] != "n":
        raise ParseError(lineno, "header must start with 'n <count>'")
    try:
        n = int(head[1])
    except ValueError:
        raise ParseError(lineno, f"bad vertex count {head[1]!r}") from None
    dim, has_psi, k = 0, False, 2
    while k < len(head):
        if head[k] == "dim" and k + 1 < len(head):
            dim = int(head[k + 1])
            k += 2
        elif head[k] == "psi":
            has_psi = True
            k += 1
        else:
            raise ParseError(lineno, f"unknown header token {head[k]!r}")
    if n < 1 or len(rows) < 1 + n:
        raise ParseError(lineno, f"expected {n} vertex lines")

    width = 2 + int(has_psi) + dim
    mu = np.empty(n)
    psi = np.empty(n) if has_psi else None
    coords = np.empty((n, dim)) if dim else None
    seen = set()
    for lineno, tok in rows[1:1 + n]:
        if len(tok) != width:
            raise ParseError(lineno, f"vertex line needs {width} fields, got {len(tok)}")
        try:
            i = int(tok[0])
            vals = [float(t) for t in tok[1:]]
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
        if not 0 <= i < n or i in seen:
            raise ParseError(lineno, f"bad or duplicate vertex index {i}")
        seen.add(i)
        if not vals[0] > 0:
            raise ParseError(lineno, f"vertex measure must be positive, got {vals[0]}")
        mu[i] = vals[0]
        off = 1
        if has_psi:
            psi[i] = vals[1]
            off = 2
        if dim:
            coords[i] = vals[off:]

    edges = []
    for lineno, tok in rows[1 + n:]:
        if len(tok) != 4:
            raise ParseError(lineno, f"edge line needs 4 fields, got {len(tok)}")
        try:
            i, j = int(tok[0]), int(tok[1])
            w, ln = float(tok[2]), float(tok[3])
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
        if w < 0:
            raise ParseError(lineno, f"negative conductance {w}")
        if not ln > 0:
            raise ParseError(lineno, f"edge length must be positive, got {ln}")
        edges.append((i, j, w, ln))
    try:
        space = StateSpace.from_edges(mu, edges, coords=coords)
    except StateSpaceError as exc:
        raise ParseError(rows[-1][0], str(exc)) from None
    return space, psi


def read_state_space(path):
    return loads_state_space(Path(path).read_text())


def write_state_space(space: StateSpace, path, psi=None) -> None:
    Path(path).write_text(dumps_state_space(space, psi))

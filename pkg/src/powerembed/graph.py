"""Undirected graph storage and the three message-passing operators.

The operators are

* ``ADJACENCY``      raw ``A`` (no self-loops),
* ``SYM_LAPLACIAN``  ``D~^{-1/2} (A + I) D~^{-1/2}`` with ``D~ = D + I``,
* ``RANDOM_WALK``    ``D~^{-1} (A + I)``.

All products are computed sparsely from the CSR adjacency; the dense
form exists only as a testing oracle for small graphs.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .errors import InvalidEdge, ShapeError, TooLarge

DENSE_LIMIT = 5000


class OperatorKind(enum.Enum):
    ADJACENCY = "adj"
    SYM_LAPLACIAN = "lap"
    RANDOM_WALK = "rw"

    @classmethod
    def parse(cls, value) -> "OperatorKind":
        if isinstance(value, cls):
            return value
        aliases = {
            "adj": cls.ADJACENCY, "a": cls.ADJACENCY, "adjacency": cls.ADJACENCY,
            "lap": cls.SYM_LAPLACIAN, "sym": cls.SYM_LAPLACIAN,
            "symlaplacian": cls.SYM_LAPLACIAN, "sym_laplacian": cls.SYM_LAPLACIAN,
            "rw": cls.RANDOM_WALK, "randomwalk": cls.RANDOM_WALK,
            "random_walk": cls.RANDOM_WALK,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown operator kind {value!r}") from None


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph.

    ``edges`` holds each undirected edge once as ``(u, v)`` with ``u < v``,
    sorted lexicographically. ``csr`` is the symmetric 0/1 adjacency.
    """

    n: int
    edges: np.ndarray
    csr: sp.csr_matrix = field(repr=False)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def permute(self, perm) -> "Graph":
        """Relabel nodes so that old node ``i`` becomes ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        return graph_from_edge_list(self.n, perm[self.edges])

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))


def graph_from_edge_list(n: int, pairs: Iterable) -> Graph:
    """Build a graph, dropping self-loops and collapsing duplicates.

    Raises
    ------
    InvalidEdge
        If any endpoint lies outside ``[0, n)``.
    """
    if n < 0:
        raise InvalidEdge(f"node count must be non-negative, got {n}")
    arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs,
                     dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidEdge("pairs must be a sequence of (u, v) tuples")
    bad = (arr < 0) | (arr >= n)
    if bad.any():
        row = arr[np.nonzero(bad.any(axis=1))[0][0]]
        raise InvalidEdge(f"edge ({row[0]}, {row[1]}) out of range for n={n}")
    arr = arr[arr[:, 0] != arr[:, 1]]
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    edges = np.unique(np.stack([lo, hi], axis=1), axis=0) if len(arr) else arr
    edges = np.ascontiguousarray(edges, dtype=np.int64).reshape(-1, 2)

    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = np.ones(len(rows), dtype=np.float64)
    csr = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    csr.sort_indices()
    return Graph(n=n, edges=edges, csr=csr)


def degrees(g: Graph) -> np.ndarray:
    return np.diff(g.csr.indptr).astype(np.int64)


def _normalizer(kind: OperatorKind, g: Graph):
    d = degrees(g).astype(np.float64) + 1.0
    if kind is OperatorKind.SYM_LAPLACIAN:
        return 1.0 / np.sqrt(d)
    return 1.0 / d


def apply_operator(kind, g: Graph, M) -> np.ndarray:
    """Return ``S @ M`` for the operator ``kind`` of ``g``, computed sparsely."""
    kind = OperatorKind.parse(kind)
    M = np.asarray(M, dtype=np.float64)
    vector = M.ndim == 1
    if vector:
        M = M[:, None]
    if M.ndim != 2 or M.shape[0] != g.n:
        raise ShapeError(f"operand has {M.shape[0]} rows, graph has {g.n} nodes")

    if kind is OperatorKind.ADJACENCY:
        out = g.csr @ M
    elif kind is OperatorKind.SYM_LAPLACIAN:
        s = _normalizer(kind, g)[:, None]
        sm = s * M
        out = s * (g.csr @ sm + sm)
    else:
        out = _normalizer(kind, g)[:, None] * (g.csr @ M + M)
    out = np.asarray(out)
    return out[:, 0] if vector else out


def operator_sparse(kind, g: Graph) -> sp.csr_matrix:
    """Sparse matrix of the operator; used where an explicit ``S`` is handy."""
    kind = OperatorKind.parse(kind)
    if kind is OperatorKind.ADJACENCY:
        return g.csr.copy()
    a_tilde = (g.csr + sp.identity(g.n, format="csr")).tocsr()
    s = _normalizer(kind, g)
    if kind is OperatorKind.SYM_LAPLACIAN:
        out = sp.diags(s) @ a_tilde @ sp.diags(s)
    else:
        out = sp.diags(s) @ a_tilde
    out = out.tocsr()
    out.sort_indices()
    return out


def operator_dense(kind, g: Graph, limit: int | None = None) -> np.ndarray:
    """Dense ``n x n`` operator, for oracles and small graphs only."""
    kind = OperatorKind.parse(kind)
    limit = DENSE_LIMIT if limit is None else limit
    if g.n > limit:
        raise TooLarge(f"n={g.n} exceeds dense limit {limit}")
    A = g.csr.toarray()
    if kind is OperatorKind.ADJACENCY:
        return A
    d = degrees(g).astype(np.float64) + 1.0
    A_tilde = A + np.eye(g.n)
    if kind is OperatorKind.SYM_LAPLACIAN:
        s = 1.0 / np.sqrt(d)
        S = s[:, None] * A_tilde * s[None, :]
        return 0.5 * (S + S.T)
    return A_tilde / d[:, None]


def is_connected(g: Graph) -> bool:
    if g.n == 0:
        return True
    ncomp, _ = sp.csgraph.connected_components(g.csr, directed=False)
    return ncomp == 1


# -- edge-list text format -------------------------------------------------

def read_edge_list(path) -> Graph:
    """Read the ``n m`` header + ``u v`` lines format. ``#`` starts a comment."""
    header = None
    pairs = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two integers, got {line!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer token in {line!r}") from None
            if header is None:
                header = (a, b)
            else:
                pairs.append((a, b))
    if header is None:
        raise ValueError(f"{path}: missing 'n m' header")
    n, m = header
    if len(pairs) != m:
        raise ValueError(f"{path}: header declares {m} edges, found {len(pairs)}")
    return graph_from_edge_list(n, pairs)


def write_edge_list(g: Graph, path) -> None:
    with open(os.fspath(path), "w") as fh:
        fh.write(f"{g.n} {g.num_edges}\n")
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")

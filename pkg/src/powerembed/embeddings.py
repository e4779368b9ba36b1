"""PowerEmbed, its unnormalized counterparts, and spectral embeddings.

PowerEmbed runs message passing ``U~ = S U`` followed by the Gram-inverse
step ``U = U~ (U~^T U~)^{-1}``. Its iterates converge to the top-``k``
eigenspace of ``S``, and the whole list ``[X, h1, ..., hL]`` is returned so
a classifier can use local and global features together.
"""
from __future__ import annotations

import enum
import json
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import EigGapWarning, RankDeficient, ShapeError
from .graph import Graph, OperatorKind, apply_operator, degrees, operator_dense
from .linalg import (
    column_normalize,
    fix_signs,
    gram_inverse_normalize,
    pca_reduce,
    sym_eig,
)

EIG_TIE_TOL = 1e-10


@dataclass(frozen=True)
class EmbeddingList:
    """Ordered feature blocks ``[X, h1, ..., hL]`` plus provenance.

    ``indices`` records which iteration each block came from, so a
    selection such as "last only" still knows it is iteration ``L``.
    """

    blocks: tuple
    method: str
    operator: str | None
    L: int
    k: int
    indices: tuple = field(default=())

    def __post_init__(self):
        blocks = tuple(np.asarray(b, dtype=np.float64) for b in self.blocks)
        if not blocks:
            raise ShapeError("an embedding list needs at least one block")
        n = blocks[0].shape[0]
        if any(b.ndim != 2 or b.shape[0] != n for b in blocks):
            raise ShapeError("all blocks must be 2-D with the same row count")
        object.__setattr__(self, "blocks", blocks)
        if not self.indices:
            object.__setattr__(self, "indices", tuple(range(len(blocks))))

    @property
    def n(self) -> int:
        return self.blocks[0].shape[0]

    def __len__(self):
        return len(self.blocks)

    def __getitem__(self, i):
        return self.blocks[i]

    def rows(self, idx) -> list:
        """Row-restricted blocks, e.g. the training view ``P_Omega``."""
        return [b[idx] for b in self.blocks]

    def widths(self) -> list:
        return [b.shape[1] for b in self.blocks]

    # -- directory serialization ------------------------------------------

    def save(self, path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        meta = {
            "method": self.method,
            "operator": self.operator,
            "L": self.L,
            "k": self.k,
            "n": self.n,
            "indices": list(self.indices),
            "num_blocks": len(self.blocks),
        }
        (path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
        for i, b in enumerate(self.blocks):
            write_matrix(path / f"block_{i:03d}.txt", b)

    @classmethod
    def load(cls, path) -> "EmbeddingList":
        path = Path(path)
        meta = json.loads((path / "meta.json").read_text())
        blocks = [read_matrix(path / f"block_{i:03d}.txt")
                  for i in range(meta["num_blocks"])]
        return cls(blocks=tuple(blocks), method=meta["method"],
                   operator=meta["operator"], L=meta["L"], k=meta["k"],
                   indices=tuple(meta["indices"]))


def write_matrix(path, M) -> None:
    """Text matrix: ``rows cols`` header, then one row per line (exact repr)."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    with open(os.fspath(path), "w") as fh:
        fh.write(f"{M.shape[0]} {M.shape[1]}\n")
        for row in M:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_matrix(path) -> np.ndarray:
    with open(os.fspath(path)) as fh:
        rows, cols = (int(t) for t in fh.readline().split())
        data = np.loadtxt(fh, dtype=np.float64, ndmin=2) if rows and cols else None
    if data is None:
        return np.zeros((rows, cols))
    if data.shape != (rows, cols):
        raise ShapeError(f"{path}: header says {rows}x{cols}, found {data.shape}")
    return data


class FeatureSelection(enum.Enum):
    ALL = "all"
    LAST_ONLY = "last"
    INPUT_PLUS_LAST = "input-last"

    @classmethod
    def parse(cls, value) -> "FeatureSelection":
        if isinstance(value, cls):
            return value
        v = str(value).lower().replace("_", "-")
        for member in cls:
            if v in (member.value, member.name.lower().replace("_", "-")):
                return member
        raise ValueError(f"unknown feature selection {value!r}")


# -- message passing ---------------------------------------------------------

def _matmul_for(S) -> Callable[[np.ndarray], np.ndarray]:
    if callable(S):
        return S
    return lambda M: np.asarray(S @ M)


def power_iterates(S, X, L: int, qr_fallback: bool = False) -> list:
    """Raw PowerEmbed states ``[U(0), ..., U(L)]`` for any operator ``S``.

    ``S`` may be a dense array, a sparse matrix, or a callable computing
    ``S @ M``. The states are *not* column normalized.

    Raises
    ------
    RankDeficient
        When an iterate loses column rank; ``exc.iteration`` is the step.
    """
    matmul = _matmul_for(S)
    U = np.asarray(X, dtype=np.float64)
    if U.ndim != 2:
        raise ShapeError("features must be a 2-D matrix")
    if U.shape[1] > U.shape[0]:
        raise ShapeError(f"k={U.shape[1]} exceeds n={U.shape[0]}")
    states = [U]
    for t in range(L):
        U_tilde = matmul(U)
        try:
            U = gram_inverse_normalize(U_tilde, qr_fallback=qr_fallback)
        except RankDeficient as exc:
            raise RankDeficient(f"rank collapse at iteration {t}: {exc}", iteration=t) from None
        states.append(U)
    return states


def power_embed_operator(S, X, L: int, qr_fallback: bool = False,
                         operator: str | None = None) -> EmbeddingList:
    states = power_iterates(S, X, L, qr_fallback=qr_fallback)
    blocks = [states[0]] + [column_normalize(U) for U in states[1:]]
    return EmbeddingList(blocks=tuple(blocks), method="power", operator=operator,
                         L=L, k=states[0].shape[1])


def power_embed(kind, g: Graph, X, L: int, qr_fallback: bool = False) -> EmbeddingList:
    """PowerEmbed on a graph operator.

    Returns ``L + 1`` blocks: ``X`` followed by the column-normalized
    iterates. The recursion itself runs on the un-normalized iterates.
    """
    kind = OperatorKind.parse(kind)
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != g.n:
        raise ShapeError(f"X has {X.shape[0]} rows, graph has {g.n} nodes")
    return power_embed_operator(lambda M: apply_operator(kind, g, M), X, L,
                                qr_fallback=qr_fallback, operator=kind.value)


def _safe_column_normalize(U: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(U, axis=0)
    return U / np.where(norms > 0, norms, 1.0)


def unnormalized_embed(kind, g: Graph, X, L: int) -> EmbeddingList:
    """Blocks ``S^t X`` for ``t = 0..L`` (SIGN with ``rw``, SGC(Incep) with ``lap``).

    Appended blocks are column normalized, like PowerEmbed's, so the two
    differ only in the recursion.
    """
    kind = OperatorKind.parse(kind)
    U = np.asarray(X, dtype=np.float64)
    if U.shape[0] != g.n:
        raise ShapeError(f"X has {U.shape[0]} rows, graph has {g.n} nodes")
    blocks = [U]
    for _ in range(L):
        U = apply_operator(kind, g, U)
        # positive per-column rescaling is invisible after column normalization;
        # it only keeps S^t X inside floating-point range for large t
        big = np.max(np.abs(U), axis=0)
        scale = np.where((big > 1e100) | ((big < 1e-100) & (big > 0)), big, 1.0)
        U = U / scale
        blocks.append(_safe_column_normalize(U))
    method = {OperatorKind.RANDOM_WALK: "sign",
              OperatorKind.SYM_LAPLACIAN: "sgc"}.get(kind, "unnormalized")
    return EmbeddingList(blocks=tuple(blocks), method=method, operator=kind.value,
                         L=L, k=blocks[0].shape[1])


# -- spectral embeddings -----------------------------------------------------

def _warn_if_tied(values: np.ndarray, k: int, what: str) -> bool:
    if k < len(values) and abs(abs(values[k - 1]) - abs(values[k])) <= EIG_TIE_TOL:
        warnings.warn(f"{what}: |lambda_{k}| and |lambda_{k + 1}| are tied "
                      f"({values[k - 1]:.6g} vs {values[k]:.6g})",
                      EigGapWarning, stacklevel=3)
        return True
    return False


def ase(g: Graph, k: int) -> np.ndarray:
    """Adjacency spectral embedding: top-``k`` eigenvectors of ``A`` by ``|lambda|``.

    Emits :class:`EigGapWarning` when the ``k``-th eigenvalue magnitude is
    tied with the next one.
    """
    eig = sym_eig(operator_dense(OperatorKind.ADJACENCY, g))
    _warn_if_tied(eig.values, k, "ase")
    return eig.vectors[:, :k].copy()


def cov_embed(X, k: int) -> np.ndarray:
    return pca_reduce(X, k)


def a_x_embed(g: Graph, X, k: int) -> np.ndarray:
    return np.hstack([ase(g, k), cov_embed(X, k)])


def oracle_eigen(kind, g: Graph, k: int | None = None):
    """Exact leading eigenpairs of a graph operator, by ``|lambda|``.

    ``A_rw`` is not symmetric, but it shares eigenvalues with the symmetric
    Laplacian and its eigenvectors are ``D~^{-1/2} w``; that mapping is
    used here. Returns ``(values, vectors)``.
    """
    kind = OperatorKind.parse(kind)
    if kind is OperatorKind.RANDOM_WALK:
        eig = sym_eig(operator_dense(OperatorKind.SYM_LAPLACIAN, g))
        d = degrees(g).astype(np.float64) + 1.0
        vecs = fix_signs((eig.vectors / np.sqrt(d)[:, None]))
        vecs = vecs / np.linalg.norm(vecs, axis=0)
    else:
        eig = sym_eig(operator_dense(kind, g))
        vecs = eig.vectors
    k = len(eig.values) if k is None else k
    return eig.values[:k].copy(), vecs[:, :k].copy()


# -- ablation selections -----------------------------------------------------

def select_features(P: EmbeddingList, sel) -> EmbeddingList:
    """All blocks, the last block, or the input plus the last block.

    For ``L = 0`` the input and last block coincide and appear once.
    """
    sel = FeatureSelection.parse(sel)
    last = len(P.blocks) - 1
    if sel is FeatureSelection.ALL:
        keep = list(range(len(P.blocks)))
    elif sel is FeatureSelection.LAST_ONLY:
        keep = [last]
    else:
        keep = sorted({0, last})
    return EmbeddingList(blocks=tuple(P.blocks[i] for i in keep), method=P.method,
                         operator=P.operator, L=P.L, k=P.k,
                         indices=tuple(P.indices[i] for i in keep))


# -- over-squashing probe ----------------------------------------------------

def oversquash_sensitivity(pipeline: Callable[[np.ndarray], np.ndarray], X,
                           i: int, s: int, eps: float = 1e-6) -> float:
    """Frobenius norm of ``d h_i / d x_s`` by central differences.

    ``pipeline`` maps the full feature matrix to the final embedding
    (``n x d``); only row ``i`` of its output is differentiated.
    """
    X = np.asarray(X, dtype=np.float64)
    m = X.shape[1]
    cols = []
    for b in range(m):
        Xp = X.copy()
        Xm = X.copy()
        Xp[s, b] += eps
        Xm[s, b] -= eps
        hp = np.asarray(pipeline(Xp))[i]
        hm = np.asarray(pipeline(Xm))[i]
        cols.append((hp - hm) / (2 * eps))
    return float(np.linalg.norm(np.stack(cols, axis=1)))


def embed(method: str, g: Graph, X, L: int = 0, k: int | None = None,
          kind=None, qr_fallback: bool = False) -> EmbeddingList:
    """Dispatch by method name: ``power``, ``sign``, ``sgc``, ``unnormalized``,
    ``ase``, ``cov``, ``a_x``.

    Spectral methods return a single-block list.
    """
    method = method.lower()
    X = np.asarray(X, dtype=np.float64)
    if method == "power":
        return power_embed(kind or OperatorKind.ADJACENCY, g, X, L, qr_fallback)
    if method == "sign":
        return unnormalized_embed(kind or OperatorKind.RANDOM_WALK, g, X, L)
    if method == "sgc":
        return unnormalized_embed(kind or OperatorKind.SYM_LAPLACIAN, g, X, L)
    if method == "unnormalized":
        return unnormalized_embed(kind or OperatorKind.ADJACENCY, g, X, L)
    k = k or X.shape[1]
    if method == "ase":
        h = ase(g, k)
    elif method == "cov":
        h = cov_embed(X, k)
    elif method in ("a_x", "ax"):
        h = a_x_embed(g, X, k)
    else:
        raise ValueError(f"unknown embedding method {method!r}")
    return EmbeddingList(blocks=(h,), method=method, operator=None, L=0, k=h.shape[1])


def stack_blocks(blocks: Sequence[np.ndarray]) -> np.ndarray:
    return np.hstack(list(blocks))

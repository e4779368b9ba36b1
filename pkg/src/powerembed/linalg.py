"""Dense linear algebra helpers.

Symmetric eigendecomposition is backed by LAPACK (``numpy.linalg.eigh``);
this module adds the ordering, sign convention and residual contract the
rest of the package relies on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import EigFailed, NotSymmetric, RankDeficient, ShapeError, ZeroColumn

GRAM_COND_LIMIT = 1e12


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs sorted by descending ``|value|``.

    Ties in magnitude are broken by descending signed value, so for
    ``[[0, 1], [1, 0]]`` the order is ``[1, -1]``.
    """

    values: np.ndarray
    vectors: np.ndarray

    def top(self, k: int) -> np.ndarray:
        return self.vectors[:, :k]


def fix_signs(V: np.ndarray, tie_tol: float = 1e-10) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive.

    Magnitudes within ``tie_tol`` (relative) of the column maximum count as
    tied; the lowest row index among them decides the sign.
    """
    V = np.array(V, dtype=np.float64, copy=True)
    if V.size == 0:
        return V
    mag = np.abs(V)
    near_max = mag >= mag.max(axis=0) * (1 - tie_tol)
    idx = np.argmax(near_max, axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _eig_order(values: np.ndarray) -> np.ndarray:
    # lexsort uses the last key as primary
    return np.lexsort((np.arange(len(values)), -values, -np.abs(values)))


def sym_eig(S, symmetry_tol: float = 1e-10) -> EigenDecomposition:
    """Eigendecomposition of a real symmetric matrix.

    Raises
    ------
    NotSymmetric
        If ``max|S - S^T|`` exceeds ``symmetry_tol`` (scaled by ``max(1, max|S|)``).
    EigFailed
        If LAPACK fails or the result violates the residual contract.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {S.shape}")
    n = S.shape[0]
    if n == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)))
    scale = max(1.0, float(np.max(np.abs(S))))
    asym = float(np.max(np.abs(S - S.T)))
    if asym > symmetry_tol * scale:
        raise NotSymmetric(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    if not np.all(np.isfinite(S)):
        raise EigFailed("matrix has non-finite entries")
    try:
        w, V = np.linalg.eigh(0.5 * (S + S.T))
    except np.linalg.LinAlgError as exc:
        raise EigFailed(str(exc)) from exc

    order = _eig_order(w)
    w, V = w[order], fix_signs(V[:, order])

    resid = np.linalg.norm(S @ V - V * w, axis=0)
    if np.any(resid > 1e-8 * (1.0 + np.abs(w)) * scale):
        raise EigFailed(f"eigen residual too large ({resid.max():.3g})")
    return EigenDecomposition(values=w, vectors=V)


def gram_inverse_normalize(U_tilde, qr_fallback: bool = False) -> np.ndarray:
    """Return ``U~ (U~^T U~)^{-1}`` using a ``k x k`` Cholesky solve.

    With ``qr_fallback=True`` a Gram matrix whose condition number exceeds
    ``GRAM_COND_LIMIT`` is handled by returning the thin-QR orthonormal
    factor instead of raising.
    """
    U = np.asarray(U_tilde, dtype=np.float64)
    if U.ndim != 2:
        raise ShapeError("expected a 2-D matrix")
    G = U.T @ U
    G = 0.5 * (G + G.T)
    ev = np.linalg.eigvalsh(G) if G.size else np.ones(1)
    if not np.all(np.isfinite(ev)) or ev[0] <= 0 or ev[-1] / ev[0] > GRAM_COND_LIMIT:
        if qr_fallback:
            Q, _ = np.linalg.qr(U)
            return Q
        cond = np.inf if ev[0] <= 0 else ev[-1] / ev[0]
        raise RankDeficient(f"Gram matrix condition number {cond:.3g} exceeds limit")
    c = scipy.linalg.cho_factor(G)
    return scipy.linalg.cho_solve(c, U.T).T


def column_normalize(U) -> np.ndarray:
    U = np.asarray(U, dtype=np.float64)
    norms = np.linalg.norm(U, axis=0)
    if np.any(norms == 0):
        raise ZeroColumn(f"column {int(np.argmin(norms))} is all zeros")
    return U / norms


def orthonormal_basis(U, rank_tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of ``range(U)`` via SVD; raises if rank-deficient."""
    U = np.asarray(U, dtype=np.float64)
    if U.ndim == 1:
        U = U[:, None]
    Q, s, _ = np.linalg.svd(U, full_matrices=False)
    if s.size and (s[0] == 0 or s[-1] <= rank_tol * s[0]):
        raise RankDeficient("input does not have full column rank")
    return Q


def principal_angles(U, V) -> np.ndarray:
    """Principal angles between ``range(U)`` and ``range(V)``, ascending.

    Small angles are taken from the sines (``arcsin``) and large ones from
    the cosines (``arccos``); using cosines alone cannot resolve angles
    below about ``1e-8``.
    """
    Qu = orthonormal_basis(U)
    Qv = orthonormal_basis(V)
    if Qu.shape[0] != Qv.shape[0]:
        raise ShapeError("subspaces live in different ambient dimensions")
    if Qu.shape[1] < Qv.shape[1]:
        Qu, Qv = Qv, Qu
    # Qv is now the smaller basis; there are Qv.shape[1] angles
    M = Qu.T @ Qv
    cos = np.clip(np.linalg.svd(M, compute_uv=False), 0.0, 1.0)  # descending
    B = Qv - Qu @ M
    sin = np.clip(np.linalg.svd(B, compute_uv=False)[::-1], 0.0, 1.0)  # ascending
    small = cos ** 2 >= 0.5
    return np.where(small, np.arcsin(sin), np.arccos(cos))


def subspace_error(U, V) -> float:
    """Largest principal angle; the scalar error reported by experiments."""
    return float(principal_angles(U, V)[-1])


def pca_reduce(X, k: int) -> np.ndarray:
    """Top-``k`` left singular vectors of ``X`` (eigenvectors of ``X X^T``).

    Works through the smaller of the two Gram matrices.
    """
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if k < 1 or k > min(n, p):
        raise RankDeficient(f"k={k} is not in [1, min(n, p)={min(n, p)}]")
    if p < n:
        eig = sym_eig(X.T @ X)
        lam = eig.values[:k]
        V = eig.vectors[:, :k]
    else:
        eig = sym_eig(X @ X.T)
        lam = eig.values[:k]
    lam_max = eig.values[0] if eig.values.size else 0.0
    if lam_max <= 0 or lam[-1] <= max(n, p) * np.finfo(float).eps * lam_max:
        raise RankDeficient(f"X has rank below k={k}")
    if p < n:
        U = (X @ V) / np.sqrt(lam)
        # one re-orthonormalization pass cleans up Gram-squared rounding
        U, _ = np.linalg.qr(U)
    else:
        U = eig.vectors[:, :k]
    return fix_signs(U)

"""Stochastic block models and Gaussian-mixture node features.

All sampling takes an explicit :class:`numpy.random.Generator`. Use
:func:`make_rng` to get the package's reproducible generator (Philox, a
counter-based bit generator), so one integer seed pins an experiment.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, NotPSD, TooLarge
from .graph import DENSE_LIMIT, Graph, graph_from_edge_list


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class SbmParams:
    n: int
    K: int
    memberships: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.memberships, dtype=np.int64)
        B = np.asarray(self.B, dtype=np.float64)
        if z.shape != (self.n,):
            raise InvalidParams(f"memberships must have length n={self.n}")
        if B.shape != (self.K, self.K):
            raise InvalidParams(f"B must be {self.K}x{self.K}")
        if self.n and (z.min() < 0 or z.max() >= self.K):
            raise InvalidParams("block id out of range")
        if not np.array_equal(B, B.T):
            raise InvalidParams("B must be symmetric")
        if np.any(B < 0) or np.any(B > 1):
            raise InvalidParams("B entries must lie in [0, 1]")
        object.__setattr__(self, "memberships", z)
        object.__setattr__(self, "B", B)


@dataclass(frozen=True)
class GaussianMixtureParams:
    means: np.ndarray        # (K, m)
    covariances: np.ndarray  # (K, m, m)

    @classmethod
    def isotropic(cls, means, scale: float = 1.0) -> "GaussianMixtureParams":
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        K, m = means.shape
        covs = np.broadcast_to(scale * np.eye(m), (K, m, m)).copy()
        return cls(means=means, covariances=covs)


def make_2b_sbm(n: int, p: float, q: float) -> SbmParams:
    """Balanced two-block SBM with ``B = [[p, q], [q, p]]``.

    The first ``n/2`` nodes form block 0. ``p < q`` gives the
    heterophilous variant.
    """
    if n % 2 or n <= 0:
        raise InvalidParams(f"n must be a positive even number, got {n}")
    if not (0 < p < 1 and 0 < q < 1):
        raise InvalidParams("p and q must lie in (0, 1)")
    if p == q:
        raise InvalidParams("p == q makes B rank-deficient")
    z = np.repeat(np.array([0, 1], dtype=np.int64), n // 2)
    return SbmParams(n=n, K=2, memberships=z, B=np.array([[p, q], [q, p]]))


def membership_matrix(params: SbmParams) -> np.ndarray:
    Z = np.zeros((params.n, params.K))
    Z[np.arange(params.n), params.memberships] = 1.0
    return Z


def expected_adjacency(params: SbmParams, limit: int | None = None) -> np.ndarray:
    """``P = Z B Z^T`` as a dense matrix."""
    limit = DENSE_LIMIT if limit is None else limit
    if params.n > limit:
        raise TooLarge(f"n={params.n} exceeds dense limit {limit}")
    z = params.memberships
    return params.B[z[:, None], z[None, :]]


def sample_sbm(params: SbmParams, rng: np.random.Generator) -> Graph:
    """Draw each pair ``i < j`` independently with probability ``P[i, j]``.

    The diagonal is never sampled. Uniforms are consumed in row-major
    upper-triangle order, one row at a time.
    """
    n, z, B = params.n, params.memberships, params.B
    us, vs = [], []
    for i in range(n - 1):
        probs = B[z[i], z[i + 1:]]
        hits = np.nonzero(rng.random(n - i - 1) < probs)[0]
        if hits.size:
            us.append(np.full(hits.size, i, dtype=np.int64))
            vs.append(hits + i + 1)
    if us:
        pairs = np.stack([np.concatenate(us), np.concatenate(vs)], axis=1)
    else:
        pairs = np.zeros((0, 2), dtype=np.int64)
    return graph_from_edge_list(n, pairs)


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    # singular but PSD covariances (e.g. all zeros) still have a square root
    w, V = np.linalg.eigh(0.5 * (cov + cov.T))
    tol = 1e-10 * max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.size and w.min() < -tol:
        raise NotPSD(f"covariance has negative eigenvalue {w.min():.3g}")
    return V * np.sqrt(np.clip(w, 0.0, None))


def sample_features(memberships, gm: GaussianMixtureParams,
                    rng: np.random.Generator) -> np.ndarray:
    """Row ``i`` is drawn from ``N(means[z_i], covariances[z_i])``."""
    z = np.asarray(memberships, dtype=np.int64)
    means = np.atleast_2d(np.asarray(gm.means, dtype=np.float64))
    covs = np.asarray(gm.covariances, dtype=np.float64)
    factors = np.stack([_psd_factor(c) for c in covs])
    eps = rng.standard_normal((len(z), means.shape[1]))
    return means[z] + np.einsum("nij,nj->ni", factors[z], eps)


def sample_2b_sbm_dataset(n: int, p: float, q: float, seed: int,
                          mean=(1.0, 1.0), covariance_scale: float = 1.0):
    """Graph, features and labels for a two-block SBM with Gaussian features.

    Block means are ``mean`` and ``-mean``. Returns ``(graph, X, labels)``.
    """
    params = make_2b_sbm(n, p, q)
    rng = make_rng(seed)
    g = sample_sbm(params, rng)
    mu = np.asarray(mean, dtype=np.float64)
    gm = GaussianMixtureParams.isotropic(np.stack([mu, -mu]), covariance_scale)
    X = sample_features(params.memberships, gm, rng)
    return g, X, params.memberships.copy()

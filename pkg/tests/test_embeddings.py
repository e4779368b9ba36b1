import warnings
from math import erf

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from powerembed import (
    EigGapWarning,
    EmbeddingList,
    FeatureSelection,
    OperatorKind,
    RankDeficient,
    a_x_embed,
    apply_operator,
    ase,
    cov_embed,
    degrees,
    embed,
    expected_adjacency,
    graph_from_edge_list,
    make_2b_sbm,
    make_rng,
    operator_dense,
    oracle_eigen,
    oversquash_sensitivity,
    power_embed,
    power_embed_operator,
    power_iterates,
    principal_angles,
    sample_2b_sbm_dataset,
    select_features,
    subspace_error,
    sym_eig,
    unnormalized_embed,
)
from conftest import random_graph

SINGLE_EDGE = graph_from_edge_list(2, [(0, 1)])
KINDS = list(OperatorKind)


def cosines_to(blocks, direction):
    d = direction / np.linalg.norm(direction)
    B = blocks / np.linalg.norm(blocks, axis=0)
    return np.abs(d @ B)


@pytest.fixture(scope="module")
def dense_sbm():
    return sample_2b_sbm_dataset(500, 0.5, 0.25, seed=3)


def test_power_embed_hand_example():
    P = power_embed("lap", SINGLE_EDGE, [[1.0], [0.0]], L=1)
    assert len(P) == 2
    np.testing.assert_array_equal(P[0], [[1.0], [0.0]])
    np.testing.assert_allclose(P[1], [[1 / np.sqrt(2)], [1 / np.sqrt(2)]], atol=1e-15)
    raw = power_iterates(operator_dense("lap", SINGLE_EDGE), [[1.0], [0.0]], 1)
    np.testing.assert_allclose(raw[1], [[1.0], [1.0]], atol=1e-14)


def test_power_embed_l0(rng):
    X = rng.standard_normal((5, 2))
    g = graph_from_edge_list(5, [(0, 1), (1, 2)])
    P = power_embed("adj", g, X, 0)
    assert len(P) == 1 and np.array_equal(P[0], X)


def test_power_embed_bipartite_oscillation():
    P = power_embed("adj", SINGLE_EDGE, [[1.0], [0.0]], L=4)
    e1, e2 = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])
    for t in range(1, 5):
        np.testing.assert_allclose(P[t], e2 if t % 2 else e1, atol=1e-15)


def test_power_embed_unit_columns(dense_sbm):
    g, X, _ = dense_sbm
    P = power_embed("lap", g, X, 5)
    assert P.widths() == [2] * 6
    for b in P.blocks[1:]:
        np.testing.assert_allclose(np.linalg.norm(b, axis=0), 1.0, atol=1e-12)


def test_power_embed_recurses_on_raw_state(rng):
    g = random_graph(rng, 40, 0.2)
    X = rng.standard_normal((40, 3))
    S = operator_dense("adj", g)
    U = X
    expected = []
    for _ in range(4):
        Ut = S @ U
        U = Ut @ np.linalg.inv(Ut.T @ Ut)
        expected.append(U / np.linalg.norm(U, axis=0))
    P = power_embed("adj", g, X, 4)
    for got, want in zip(P.blocks[1:], expected):
        np.testing.assert_allclose(got, want, atol=1e-10)


def test_rank_collapse_reports_iteration():
    g = graph_from_edge_list(4, [])  # adjacency is zero
    with pytest.raises(RankDeficient) as info:
        power_embed("adj", g, np.eye(4)[:, :2], 3)
    assert info.value.iteration == 0
    P = power_embed("adj", g, np.eye(4)[:, :2], 3, qr_fallback=True)
    assert len(P) == 4


def test_unnormalized_matches_dense_powers(rng):
    g = random_graph(rng, 30, 0.2)
    X = rng.standard_normal((30, 2))
    for kind in KINDS:
        S = operator_dense(kind, g)
        P = unnormalized_embed(kind, g, X, 2)
        want = S @ (S @ X)
        np.testing.assert_allclose(P[2], want / np.linalg.norm(want, axis=0), atol=1e-10)


def test_unnormalized_method_tags(rng):
    g = random_graph(rng, 10, 0.3)
    X = rng.standard_normal((10, 2))
    assert unnormalized_embed("rw", g, X, 1).method == "sign"
    assert unnormalized_embed("lap", g, X, 1).method == "sgc"


def test_unnormalized_rw_limit_is_constant(dense_sbm):
    g, X, _ = dense_sbm
    P = unnormalized_embed("rw", g, X, 400)
    assert np.all(cosines_to(P[400], np.ones(g.n)) > 1 - 1e-6)


def test_unnormalized_lap_limit_is_top_eigenvector(dense_sbm):
    g, X, _ = dense_sbm
    P = unnormalized_embed("lap", g, X, 400)
    _, v = oracle_eigen("lap", g, 1)
    assert np.all(cosines_to(P[400], v[:, 0]) > 1 - 1e-6)
    # the top eigenvector of the symmetric Laplacian is D~^{1/2} 1
    d = degrees(g) + 1.0
    assert np.all(cosines_to(P[400], np.sqrt(d)) > 1 - 1e-6)


def test_oversmoothing_contrast(dense_sbm):
    g, X, _ = dense_sbm
    _, V = oracle_eigen("rw", g, 2)
    unnorm = unnormalized_embed("rw", g, X, 50)[50]
    power = power_embed("rw", g, X, 50)[50]
    assert subspace_error(power, V) < 1e-3
    # both unnormalized columns collapse onto the leading direction
    assert np.all(cosines_to(unnorm, V[:, 0]) > 1 - 1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_convergence_rate_bound(seed):
    g, X, _ = sample_2b_sbm_dataset(80, 0.5, 0.2, seed=seed)
    k = 2
    w, V = oracle_eigen("adj", g, None)
    r = abs(w[k] / w[k - 1])
    assert r < 0.95
    P = power_embed("adj", g, X, 30)
    t0 = np.tan(min(subspace_error(X, V[:, :k]), np.pi / 2 - 1e-12))
    for t in (10, 20, 30):
        tan_t = np.tan(subspace_error(P[t], V[:, :k]))
        assert tan_t <= r ** t * t0 * (1 + 1e-6) + 1e-12


def test_gram_cross_product_limit(rng):
    # consecutive raw iterates satisfy Phi(L+1) Phi(L)^T = Lambda^{-1},
    # with Phi(t) = V1^T U(t)
    A = rng.standard_normal((60, 60))
    Q = np.linalg.qr(A)[0]
    lam = np.concatenate([[5.0, 3.0, 2.0], rng.uniform(0, 0.5, 57)])
    S = (Q * lam) @ Q.T
    S = (S + S.T) / 2
    U = power_iterates(S, rng.standard_normal((60, 3)), 61)
    V1 = sym_eig(S).top(3)
    prod = (V1.T @ U[61]) @ (V1.T @ U[60]).T
    np.testing.assert_allclose(prod, np.diag(1 / lam[:3]), atol=1e-12)
    G = (U[60].T @ U[60]) @ (U[61].T @ U[61])
    np.testing.assert_allclose(np.sort(np.linalg.eigvals(G).real), np.sort(1 / lam[:3] ** 2),
                               rtol=1e-9)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(KINDS))
def test_permutation_equivariance(seed, kind):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 60))
    g = random_graph(rng, n, 0.3)
    X = rng.standard_normal((n, 2))
    perm = rng.permutation(n)
    Xp = np.empty_like(X)
    Xp[perm] = X
    gp = g.permute(perm)
    for fn in (power_embed, unnormalized_embed):
        try:
            a = fn(kind, g, X, 4)
        except RankDeficient:
            continue
        b = fn(kind, gp, Xp, 4)
        for ba, bb in zip(a.blocks, b.blocks):
            np.testing.assert_allclose(bb[perm], ba, atol=1e-10)


def test_spectral_equivariance(rng):
    g = random_graph(rng, 40, 0.3)
    X = rng.standard_normal((40, 5))
    perm = rng.permutation(40)
    Xp = np.empty_like(X)
    Xp[perm] = X
    gp = g.permute(perm)
    Pi = np.zeros((40, 40))
    Pi[perm, np.arange(40)] = 1.0
    assert subspace_error(ase(gp, 2), Pi @ ase(g, 2)) < 1e-8
    assert subspace_error(cov_embed(Xp, 2), Pi @ cov_embed(X, 2)) < 1e-8
    assert subspace_error(a_x_embed(gp, Xp, 2), Pi @ a_x_embed(g, X, 2)) < 1e-8


def test_ase_complete_graph():
    g = graph_from_edge_list(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
    np.testing.assert_allclose(ase(g, 1), np.full((4, 1), 0.5), atol=1e-12)


def test_ase_empty_graph_warns():
    with pytest.warns(EigGapWarning):
        ase(graph_from_edge_list(5, []), 2)


def test_ase_concentrates(dense_sbm):
    g, _, _ = dense_sbm
    oracle = sym_eig(expected_adjacency(make_2b_sbm(500, 0.5, 0.25))).top(2)
    assert subspace_error(ase(g, 2), oracle) < 0.2


def test_cov_embed_separates_blocks(dense_sbm):
    _, X, y = dense_sbm
    h = cov_embed(X, 1)[:, 0]
    agree = np.mean((h > 0) == (y == 0))
    # Bayes rate for means +-(1,1) with identity covariance is Phi(sqrt 2)
    bayes = 0.5 * (1 + erf(1.0))
    assert abs(max(agree, 1 - agree) - bayes) < 3 * np.sqrt(bayes * (1 - bayes) / 500)
    with pytest.raises(RankDeficient):
        cov_embed(X, 3)


def test_a_x_embed(dense_sbm):
    g, X, _ = dense_sbm
    h = a_x_embed(g, X, 2)
    assert h.shape == (500, 4)
    np.testing.assert_array_equal(h[:, :2], ase(g, 2))


def test_oracle_eigen_random_walk(rng):
    g = random_graph(rng, 30, 0.3)
    w, V = oracle_eigen("rw", g, 3)
    S = operator_dense("rw", g)
    np.testing.assert_allclose(S @ V, V * w, atol=1e-10)


def test_select_features(rng):
    g = random_graph(rng, 10, 0.4)
    P = power_embed("lap", g, rng.standard_normal((10, 2)), 3)
    assert len(select_features(P, FeatureSelection.ALL)) == 4
    last = select_features(P, "last")
    assert len(last) == 1 and last.indices == (3,)
    both = select_features(P, "input-last")
    assert both.indices == (0, 3)
    P0 = power_embed("lap", g, rng.standard_normal((10, 2)), 0)
    assert len(select_features(P0, FeatureSelection.INPUT_PLUS_LAST)) == 1
    with pytest.raises(ValueError):
        FeatureSelection.parse("middle")


def test_oversquash_examples(rng):
    X = rng.standard_normal((4, 3))
    assert oversquash_sensitivity(lambda Z: Z, X, 1, 1) == pytest.approx(np.sqrt(3))
    assert oversquash_sensitivity(lambda Z: Z, X, 0, 2) == 0.0
    step = lambda Z: apply_operator("rw", SINGLE_EDGE, Z)  # noqa: E731
    val = oversquash_sensitivity(step, [[1.0], [2.0]], 0, 1)
    assert val == pytest.approx(operator_dense("rw", SINGLE_EDGE)[0, 1], abs=1e-9)


def test_embedding_roundtrip(tmp_path, rng):
    g = random_graph(rng, 12, 0.3)
    P = select_features(power_embed("rw", g, rng.standard_normal((12, 2)), 3), "input-last")
    P.save(tmp_path / "emb")
    Q = EmbeddingList.load(tmp_path / "emb")
    assert (Q.method, Q.operator, Q.L, Q.k, Q.indices) == (P.method, P.operator, 3, 2, (0, 3))
    for a, b in zip(P.blocks, Q.blocks):
        np.testing.assert_array_equal(a, b)


def test_embed_dispatch(rng):
    g = random_graph(rng, 20, 0.3)
    X = rng.standard_normal((20, 2))
    assert len(embed("power", g, X, L=3, kind="lap")) == 4
    assert embed("sign", g, X, L=2).operator == "rw"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EigGapWarning)
        assert embed("a_x", g, X, k=2)[0].shape == (20, 4)
    with pytest.raises(ValueError):
        embed("spectral-magic", g, X)


def test_power_embed_operator_accepts_dense(rng):
    S = np.diag([3.0, 2.0, 1.0, 0.5])
    P = power_embed_operator(S, rng.standard_normal((4, 2)), 40)
    assert principal_angles(P[40], np.eye(4)[:, :2]).max() < 1e-6

import itertools
import math

import numpy as np
import pytest

from twobody import kernels
from twobody.decoder import (IsingModel, best_bitstring, chain_rng, coupling_scale, default_sweeps,
                             fit_maxent_ising, gibbs_sample, gibbs_trace, nearest_rank_quantile, qubo_to_spin,
                             robust_ising_from_qubo, SampleBatch)
from twobody.instance import Graph, QuboInstance, generate_er, maxcut_to_qubo
from twobody.moments import PseudoMoments

EDGE_Q = QuboInstance(2, np.zeros(2), np.array([0]), np.array([1]), np.array([1.0]))


def pair(mi, mj, v):
    return PseudoMoments(np.array([mi, mj], float), np.array([[0.0, v], [v, 0.0]]))


def enumerate_model(model):
    states = np.array(list(itertools.product((-1.0, 1.0), repeat=model.n)))
    w = np.exp(model.log_weight(states))
    return states, w / w.sum()


def free_model(n, h=None, edges=(), beta=1.0):
    rows = np.array([e[0] for e in edges], np.int64)
    cols = np.array([e[1] for e in edges], np.int64)
    J = np.array([e[2] for e in edges], float)
    return IsingModel(n, np.zeros(n) if h is None else np.asarray(h, float), rows, cols, J, beta)


def test_single_edge_exactness():
    m = fit_maxent_ising(pair(0.5, 0.5, 0.4), EDGE_Q)
    assert m.J[0] == pytest.approx(math.log(2), abs=1e-14)
    assert np.allclose(m.h, 0.0, atol=1e-14)
    states, p = enumerate_model(m)
    assert p[states[:, 0] == 1].sum() == pytest.approx(0.5, abs=1e-14)
    assert p[(states[:, 0] == 1) & (states[:, 1] == 1)].sum() == pytest.approx(0.4, abs=1e-14)


@pytest.mark.parametrize("v", [0.05, 0.2, 0.25, 0.33, 0.49])
def test_centered_edges_reproduce_marginals(v):
    states, p = enumerate_model(fit_maxent_ising(pair(0.5, 0.5, v), EDGE_Q))
    assert p[states[:, 1] == 1].sum() == pytest.approx(0.5, abs=1e-13)
    assert p[(states[:, 0] == 1) & (states[:, 1] == 1)].sum() == pytest.approx(v, abs=1e-13)


def test_coupling_is_log_odds_of_table():
    rng = np.random.default_rng(0)
    for _ in range(20):
        mi, mj = rng.uniform(0.1, 0.9, 2)
        lo, hi = max(0, mi + mj - 1), min(mi, mj)
        v = rng.uniform(lo + 1e-3, hi - 1e-3)
        p11, p10, p01, p00 = v, mi - v, mj - v, 1 - mi - mj + v
        m = fit_maxent_ising(pair(mi, mj, v), EDGE_Q)
        assert m.J[0] == pytest.approx(0.25 * math.log(p11 * p00 / (p10 * p01)), rel=1e-12)
        want_h0 = 0.5 * math.log(mi / (1 - mi)) - m.J[0] * (2 * mj - 1)
        assert m.h[0] == pytest.approx(want_h0, rel=1e-12, abs=1e-14)


def test_fit_masks_to_q_pattern_and_clips():
    q = QuboInstance(3, np.zeros(3), np.array([0, 1]), np.array([1, 2]), np.array([1.0, 0.0]))
    mu = np.array([0.5, 0.5, 0.5])
    nu = np.full((3, 3), 0.5)
    np.fill_diagonal(nu, 0)
    m = fit_maxent_ising(PseudoMoments(mu, nu), q)
    assert list(zip(m.rows, m.cols)) == [(0, 1)]
    assert np.isfinite(m.J).all() and m.J[0] > 0  # P10 = P01 = 0 are clipped


def test_heat_bath_two_spin_distribution():
    model = free_model(2, h=[0.3, -0.2], edges=[(0, 1, 0.7)])
    states, p = enumerate_model(model)
    sweeps = 1_000_000
    tr = gibbs_trace(model, sweeps, chains=1, seed=11)[0]
    code = ((tr[:, 0] > 0) * 2 + (tr[:, 1] > 0)).astype(np.int64)
    want = {int((s[0] > 0) * 2 + (s[1] > 0)): pk for s, pk in zip(states, p)}
    batches = code.reshape(1000, -1)
    for k in range(4):
        freq = np.mean(code == k)
        bm = np.mean(batches == k, axis=1)
        sigma = bm.std(ddof=1) / math.sqrt(bm.size)
        assert abs(freq - want[k]) < 4 * sigma, (k, freq, want[k], sigma)


def test_zero_field_update_is_half():
    model = free_model(1)
    chains = 20000
    b = gibbs_sample(model, 1, chains=chains, seed=3)
    u = []
    for c in range(chains):
        r = chain_rng(3, c)
        r.integers(0, 2, size=1)
        u.append(r.random((1, 1))[0, 0])
    assert np.array_equal(b.bitstrings[:, 0], (np.array(u) < 0.5).astype(np.int8))
    assert abs(b.bitstrings.mean() - 0.5) < 4 * 0.5 / math.sqrt(chains)


def test_strong_field_pins_spins():
    b = gibbs_sample(free_model(6, h=np.full(6, 10.0)), 5, chains=8, seed=0)
    assert np.all(b.bitstrings == 1)


def test_determinism_and_seed_sensitivity():
    q = maxcut_to_qubo(generate_er(30, 4, 1))
    m = robust_ising_from_qubo(q)
    a = gibbs_sample(m, 20, 8, seed=5, q=q)
    b = gibbs_sample(m, 20, 8, seed=5, q=q)
    c = gibbs_sample(m, 20, 8, seed=6, q=q)
    assert np.array_equal(a.bitstrings, b.bitstrings) and np.array_equal(a.energies, b.energies)
    assert not np.array_equal(a.bitstrings, c.bitstrings)


def test_chain_count_does_not_change_earlier_chains():
    q = maxcut_to_qubo(generate_er(20, 3, 2))
    m = robust_ising_from_qubo(q)
    a = gibbs_sample(m, 10, 3, seed=1, q=q)
    b = gibbs_sample(m, 10, 8, seed=1, q=q)
    assert np.array_equal(a.bitstrings, b.bitstrings[:3])


def test_heat_bath_backends_identical():
    q = maxcut_to_qubo(generate_er(40, 5, 3))
    m = robust_ising_from_qubo(q)
    csr = m.coupling_csr()
    args = (csr.indptr.astype(np.int64), csr.indices.astype(np.int64), csr.data, 1.0)
    rng = np.random.default_rng(0)
    s0 = rng.choice([-1.0, 1.0], size=(4, 40))
    f0 = m.h[None, :] + (csr @ s0.T).T
    u = rng.random((4, 30, 40))
    out = []
    for fn in (kernels.heat_bath_sweeps_nb, kernels.heat_bath_sweeps_np):
        s, f = s0.copy(), f0.copy()
        tr = np.zeros((4, 30, 40), np.int8)
        fn(*args, s, f, u, tr)
        out.append((s, f, tr))
    assert np.array_equal(out[0][0], out[1][0])
    assert np.allclose(out[0][1], out[1][1], atol=1e-12)
    assert np.array_equal(out[0][2], out[1][2])
    # incremental fields equal recomputed fields
    assert np.allclose(out[0][1], m.h[None, :] + (csr @ out[0][0].T).T, atol=1e-12)


def test_energies_scored_on_qubo():
    q = maxcut_to_qubo(generate_er(12, 3, 4))
    b = gibbs_sample(robust_ising_from_qubo(q), 10, 4, seed=0, q=q)
    x = b.bitstrings.astype(float)
    assert np.allclose(b.energies, np.einsum("bi,ij,bj->b", x, q.to_dense(), x))
    bits, e = best_bitstring(b)
    assert e == b.energies.min()
    with pytest.raises(ValueError):
        best_bitstring(SampleBatch(np.zeros((0, 3), np.int8), np.zeros(0)))


def test_spin_form_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(2, 13))
        a = rng.integers(-5, 6, size=(n, n)).astype(float)
        a = np.triu(a) + np.triu(a, 1).T
        q = QuboInstance.from_dense(a)
        model, const = qubo_to_spin(q)
        x = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(float)
        e = np.einsum("bi,ij,bj->b", x, a, x)
        # integer data and dyadic coefficients make this exact
        assert np.array_equal(const - model.log_weight(2 * x - 1), e)


def test_nearest_rank_quantile():
    assert nearest_rank_quantile(np.arange(1, 21), 0.95) == 19
    assert nearest_rank_quantile(np.arange(1, 101), 0.95) == 95
    assert nearest_rank_quantile([5.0], 0.95) == 5.0
    assert nearest_rank_quantile([3, 1, 2], 0.5) == 2
    with pytest.raises(ValueError):
        nearest_rank_quantile([], 0.5)


def test_robust_scale_on_constructed_rows():
    # star graph: row |J| sums are known in closed form
    n = 21
    edges = [(0, k, 2.0) for k in range(1, n)]
    g_rows = np.zeros(n)
    for u, v, w in edges:
        g_rows[u] += w / 2
        g_rows[v] += w / 2
    q = maxcut_to_qubo(Graph.from_edges(n, edges))
    model, _ = qubo_to_spin(q)
    r = coupling_scale(model)
    # 20 leaves with row sum 1 and a hub with 20; nearest rank 0.95 of 21 values is the 20th
    assert r == nearest_rank_quantile(g_rows, 0.95) == 1.0
    rob = robust_ising_from_qubo(q)
    assert np.allclose(rob.J, model.J / r) and np.allclose(rob.h, model.h / r)


def test_robust_rejects_zero_q():
    with pytest.raises(ValueError):
        robust_ising_from_qubo(QuboInstance.from_dense(np.zeros((3, 3))))


def test_default_sweeps():
    assert default_sweeps(16) == 64
    assert default_sweeps(800) == math.ceil(800 * math.log2(800))
    assert default_sweeps(1) == 1


def test_model_validation():
    with pytest.raises(ValueError):
        free_model(2, beta=0.0)
    with pytest.raises(ValueError):
        IsingModel(2, np.zeros(2), np.array([1]), np.array([0]), np.array([1.0]))

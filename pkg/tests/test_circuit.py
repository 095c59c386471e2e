import numpy as np
import pytest

from twobody import kernels
from twobody.circuit import (CircuitConfig, CircuitState, apply_cnot, apply_h, apply_ry, born_probabilities,
                             brickwork_pairs, prepare_state)

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
I2 = np.eye(2)


def ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]])


def on_qubit(op, q, nq):
    # qubit 0 is the most significant bit, so it is the leftmost kron factor
    out = np.array([[1.0]])
    for k in range(nq):
        out = np.kron(out, op if k == q else I2)
    return out


def cnot_dense(c, t, nq):
    dim = 1 << nq
    m = np.zeros((dim, dim))
    for x in range(dim):
        y = x ^ (1 << (nq - 1 - t)) if (x >> (nq - 1 - c)) & 1 else x
        m[y, x] = 1
    return m


def dense_circuit(cfg, theta):
    nq = cfg.n_qubits
    u = np.eye(1 << nq)
    for q in range(nq):
        u = on_qubit(H, q, nq) @ u
    even, odd = brickwork_pairs(nq)
    for d in range(cfg.depth):
        for q in range(nq):
            u = on_qubit(ry(theta[d, q]), q, nq) @ u
        for c, t in even + odd:
            u = cnot_dense(c, t, nq) @ u
    return u


@pytest.mark.parametrize("n, depth", [(2, 0), (2, 1), (3, 2), (4, 3)])
def test_matches_dense_unitary(n, depth):
    cfg = CircuitConfig(n, depth)
    assert cfg.n_qubits <= 6
    theta = np.random.default_rng(n + depth).uniform(-np.pi, np.pi, cfg.theta_shape)
    psi0 = np.zeros(cfg.dim)
    psi0[0] = 1
    want = dense_circuit(cfg, theta) @ psi0
    got = prepare_state(cfg, theta)
    assert np.allclose(got.amplitudes, want, atol=1e-12)
    assert got.norm_sq == pytest.approx(1.0, abs=1e-12)


def test_register_sizes_and_gate_counts():
    cfg = CircuitConfig(800, 2)
    assert (cfg.addr_bits, cfg.n_qubits, cfg.two_qubit_gates) == (10, 22, 42)
    assert CircuitConfig(16, 2).n_qubits == 10
    assert CircuitConfig(13, 1).n_qubits == 10
    assert CircuitConfig(2, 0).two_qubit_gates == 0
    for nq_n in (5, 9, 100):
        c = CircuitConfig(nq_n, 3)
        even, odd = brickwork_pairs(c.n_qubits)
        assert c.two_qubit_gates == 3 * (len(even) + len(odd))


def test_born_table_index_layout():
    # set amplitude at (i, a, j, b) = (2, 1, 3, 0) with K = 4
    cfg = CircuitConfig(4, 0)
    a = np.zeros(cfg.dim)
    a[((2 * 2 + 1) * 4 + 3) * 2 + 0] = 1.0
    p = born_probabilities(CircuitState(a, cfg.n_qubits))
    assert p.shape == (4, 2, 4, 2)
    assert p[2, 1, 3, 0] == 1.0 and p.sum() == 1.0


def test_gate_wrappers_match_dense():
    nq = 4
    rng = np.random.default_rng(5)
    v = rng.normal(size=16)
    s = CircuitState(v.copy(), nq)
    apply_h(s, 1)
    apply_ry(s, 3, 0.7)
    apply_cnot(s, 2, 0)
    want = cnot_dense(2, 0, nq) @ on_qubit(ry(0.7), 3, nq) @ on_qubit(H, 1, nq) @ v
    assert np.allclose(s.amplitudes, want)


def test_gate_bounds():
    s = CircuitState(np.ones(8) / np.sqrt(8), 3)
    with pytest.raises(IndexError):
        apply_ry(s, 3, 0.1)
    with pytest.raises(ValueError):
        apply_cnot(s, 1, 1)


def test_theta_validation():
    cfg = CircuitConfig(4, 1)
    with pytest.raises(ValueError):
        prepare_state(cfg, np.zeros((2, cfg.n_qubits)))
    with pytest.raises(ValueError):
        prepare_state(cfg, np.full(cfg.theta_shape, np.nan))
    with pytest.raises(ValueError):
        CircuitConfig(1, 1)


@pytest.mark.parametrize("q", range(6))
def test_kernel_backends_agree(q):
    nq = 6
    rng = np.random.default_rng(q)
    base = rng.normal(size=1 << nq)
    adj = rng.normal(size=1 << nq)
    for nb, npf, args in ((kernels.apply_ry_nb, kernels.apply_ry_np, (0.3, -0.95)),
                          (kernels.apply_h_nb, kernels.apply_h_np, ())):
        a, b = base.copy(), base.copy()
        nb(a, nq, q, *args)
        npf(b, nq, q, *args)
        assert np.allclose(a, b, atol=1e-14)
    for t in range(nq):
        if t == q:
            continue
        a, b = base.copy(), base.copy()
        kernels.apply_cnot_nb(a, nq, q, t)
        kernels.apply_cnot_np(b, nq, q, t)
        assert np.array_equal(a, b)
    assert kernels.ry_grad_nb(base, adj, nq, q) == pytest.approx(kernels.ry_grad_np(base, adj, nq, q), rel=1e-12)


def test_hadamard_kernel_gives_uniform():
    nq = 5
    a = np.zeros(1 << nq)
    a[0] = 1
    for q in range(nq):
        kernels.apply_h(a, nq, q)
    assert np.allclose(a, 2 ** (-nq / 2))


def test_float32_mode_close_to_float64():
    c64, c32 = CircuitConfig(6, 2), CircuitConfig(6, 2, "float32")
    th = np.random.default_rng(0).normal(size=c64.theta_shape)
    a, b = prepare_state(c64, th), prepare_state(c32, th)
    assert b.amplitudes.dtype == np.float32
    assert np.allclose(a.amplitudes, b.amplitudes, atol=1e-5)


def test_state_dump_load(tmp_path):
    cfg = CircuitConfig(5, 1)
    s = prepare_state(cfg, np.ones(cfg.theta_shape))
    s.dump(tmp_path / "s.bin")
    r = CircuitState.load(tmp_path / "s.bin", cfg.n_qubits)
    assert np.array_equal(r.amplitudes, s.amplitudes)
    with pytest.raises(ValueError):
        CircuitState.load(tmp_path / "s.bin", cfg.n_qubits + 1)

"""Numba vs numpy kernels: gate application, R_y gradient contraction and heat-bath sweeps.

Both kernel families are called directly, so the result does not depend on
TWOBODY_DISABLE_NUMBA. Outputs are checked for agreement before timing.

    python benchmarks/bench_backends.py [--qubits 16] [--n 800] [--sweeps 200] [--repeat 5]
"""
import argparse
import time

import numpy as np

from twobody import kernels
from twobody.decoder import robust_ising_from_qubo
from twobody.instance import generate_er, maxcut_to_qubo


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def gate_layer(ry, cnot, nq):
    def run(state):
        for q in range(nq):
            ry(state, nq, q, 0.8, 0.6)
        for q in range(0, nq - 1, 2):
            cnot(state, nq, q, q + 1)
        for q in range(1, nq - 1, 2):
            cnot(state, nq, q, q + 1)
    return run


def bench_gates(nq, repeat):
    rng = np.random.default_rng(0)
    psi = rng.normal(size=1 << nq)
    psi /= np.linalg.norm(psi)
    a, b = psi.copy(), psi.copy()
    gate_layer(kernels.apply_ry_nb, kernels.apply_cnot_nb, nq)(a)
    gate_layer(kernels.apply_ry_np, kernels.apply_cnot_np, nq)(b)
    assert np.allclose(a, b, atol=1e-12), "gate kernels disagree"
    out = {}
    for name, ry, cx in (("numba", kernels.apply_ry_nb, kernels.apply_cnot_nb),
                         ("numpy", kernels.apply_ry_np, kernels.apply_cnot_np)):
        layer = gate_layer(ry, cx, nq)
        s = psi.copy()
        out[name] = best_of(lambda: layer(s), repeat)
    return out


def bench_grad(nq, repeat):
    rng = np.random.default_rng(1)
    psi, lam = rng.normal(size=(2, 1 << nq))
    g1 = [kernels.ry_grad_nb(psi, lam, nq, q) for q in range(nq)]
    g2 = [kernels.ry_grad_np(psi, lam, nq, q) for q in range(nq)]
    assert np.allclose(g1, g2, rtol=1e-10, atol=1e-10), "gradient kernels disagree"
    return {name: best_of(lambda: [fn(psi, lam, nq, q) for q in range(nq)], repeat)
            for name, fn in (("numba", kernels.ry_grad_nb), ("numpy", kernels.ry_grad_np))}


def bench_gibbs(n, sweeps, chains, repeat):
    q = maxcut_to_qubo(generate_er(n, 6.0, 0))
    model = robust_ising_from_qubo(q)
    csr = model.coupling_csr()
    indptr, indices, data = csr.indptr.astype(np.int64), csr.indices.astype(np.int64), csr.data
    rng = np.random.default_rng(2)
    spins0 = rng.choice([-1.0, 1.0], size=(chains, n))
    fields0 = model.h[None, :] + (csr @ spins0.T).T
    u = rng.random((chains, sweeps, n))
    trace = np.zeros((chains, 0, n), np.int8)

    def run(fn):
        s, f = spins0.copy(), fields0.copy()
        fn(indptr, indices, data, 1.0, s, f, u, trace)
        return s

    assert np.array_equal(run(kernels.heat_bath_sweeps_nb), run(kernels.heat_bath_sweeps_np)), \
        "heat-bath kernels disagree"
    return {name: best_of(lambda: run(fn), repeat)
            for name, fn in (("numba", kernels.heat_bath_sweeps_nb), ("numpy", kernels.heat_bath_sweeps_np))}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits", type=int, default=16)
    ap.add_argument("--n", type=int, default=800)
    ap.add_argument("--sweeps", type=int, default=200)
    ap.add_argument("--chains", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args()

    rows = [
        (f"HEA layer, {a.qubits} qubits", bench_gates(a.qubits, a.repeat)),
        (f"R_y gradients, {a.qubits} qubits", bench_grad(a.qubits, a.repeat)),
        (f"heat bath, n={a.n}, {a.chains}x{a.sweeps} sweeps", bench_gibbs(a.n, a.sweeps, a.chains, a.repeat)),
    ]
    print(f"{'kernel':<40}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, t in rows:
        print(f"{name:<40}{t['numba']:>12.5f}{t['numpy']:>12.5f}{t['numpy'] / t['numba']:>10.1f}")


if __name__ == "__main__":
    main()

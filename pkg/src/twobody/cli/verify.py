"""Fast built-in oracle and property checks behind ``twobody verify``.

Each check returns ``(ok, detail)``. These are smaller versions of the
test-suite checks, meant to run in seconds on an installed package.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from ..circuit import CircuitConfig, born_probabilities, prepare_state
from ..decoder import IsingModel, chain_rng, fit_maxent_ising, gibbs_sample, nearest_rank_quantile, qubo_to_spin
from ..instance import QuboInstance
from ..moments import PseudoMoments, accumulate_moments
from ..sa2 import bf_interval, ipf_project, kink_margin, nu_box_snap, pairwise_table, violation_mass
from ..train import evaluate, lambda_kl, learning_rate


def _pair(mi, mj, v):
    return PseudoMoments(np.array([mi, mj]), np.array([[0.0, v], [v, 0.0]]))


def check_ipf_example():
    out, _ = ipf_project(_pair(0.1, 0.1, 0.8), rho=0.6, iters=1)
    got = (out.mu[0], out.mu[1], out.nu[0, 1])
    err = max(abs(a - b) for a, b in zip(got, (0.268, 0.268, 0.38)))
    return err < 1e-9, f"max err {err:.1e}"


def check_hadamard_moments():
    worst = 0.0
    for n in (4, 8, 13):
        for d in (0, 2):
            cfg = CircuitConfig(n, d)
            m = accumulate_moments(born_probabilities(prepare_state(cfg, np.zeros(cfg.theta_shape))), n)
            off = ~np.eye(n, dtype=bool)
            worst = max(worst, np.max(np.abs(m.mu - 0.5)), np.max(np.abs(m.nu[off] - 0.25)))
    return worst < 1e-6, f"max dev {worst:.1e}"


def check_contraction(trials=50, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(3, 8))
        mu = rng.random(n)
        nu = rng.random((n, n))
        nu = np.triu(nu, 1) + np.triu(nu, 1).T
        m = PseudoMoments(mu, nu)
        before = violation_mass(m)
        if before == 0:
            continue
        for rho in (0.1, 0.5, 1.0):
            after = violation_mass(PseudoMoments(mu, nu_box_snap(mu, nu, rho)))
            worst = max(worst, abs(after - (1 - rho) * before) / before)
    return worst < 1e-10, f"max rel err {worst:.1e}"


def check_bf_equivalence(count=20000, seed=2):
    rng = np.random.default_rng(seed)
    mi, mj, v = rng.random((3, count))
    lo, hi = bf_interval(mi, mj)
    table_ok = np.all(pairwise_table(mi, mj, v) >= 0, axis=-1)
    bad = int(np.sum(table_ok != ((v >= lo) & (v <= hi))))
    return bad == 0, f"{bad} counterexamples"


def check_gradient(probes=12, seed=3, h=1e-6):
    rng = np.random.default_rng(seed)
    worst, done = 0.0, 0
    while done < probes:
        n = int(rng.integers(2, 7))
        cfg = CircuitConfig(n, int(rng.integers(1, 3)))
        a = rng.normal(size=(n, n))
        q = QuboInstance.from_dense(a + a.T)
        rho = float(rng.choice([0.0, 0.5]))
        lam = float(rng.choice([0.0, 0.2]))
        th = rng.uniform(-np.pi, np.pi, cfg.theta_shape)
        raw = accumulate_moments(born_probabilities(prepare_state(cfg, th)), n)
        if kink_margin(raw, rho) < 1e-6:
            continue
        g = evaluate(th, q, cfg, rho, lam).grad
        fd = np.zeros_like(th)
        for idx in np.ndindex(th.shape):
            e = np.zeros_like(th)
            e[idx] = h
            fd[idx] = (evaluate(th + e, q, cfg, rho, lam, need_grad=False).loss.total
                       - evaluate(th - e, q, cfg, rho, lam, need_grad=False).loss.total) / (2 * h)
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
        done += 1
    return worst < 1e-4, f"max rel err {worst:.1e}"


def check_maxent_edge():
    q = QuboInstance(2, np.zeros(2), np.array([0]), np.array([1]), np.array([1.0]))
    model = fit_maxent_ising(_pair(0.5, 0.5, 0.4), q)
    w = {s: math.exp(model.log_weight(np.array(s, dtype=float))) for s in itertools.product((-1, 1), repeat=2)}
    z = sum(w.values())
    mu = sum(p for s, p in w.items() if s[0] == 1) / z
    nu = w[(1, 1)] / z
    err = max(abs(model.J[0] - math.log(2)), np.max(np.abs(model.h)), abs(mu - 0.5), abs(nu - 0.4))
    return err < 1e-12, f"max err {err:.1e}"


def check_gibbs_half():
    m = IsingModel(1, np.zeros(1), np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
    b = gibbs_sample(m, 1, chains=4000, seed=5)
    u = []
    for c in range(4000):
        r = chain_rng(5, c)
        r.integers(0, 2, size=1)  # initial spin
        u.append(r.random((1, 1))[0, 0])
    u = np.array(u)
    expect = (u < 0.5).astype(np.int8)
    ok = np.array_equal(b.bitstrings[:, 0], expect)
    return ok, "update threshold is exactly 1/2" if ok else "threshold mismatch"


def check_ising_equivalence(trials=5, seed=4):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 9))
        a = rng.integers(-3, 4, size=(n, n)).astype(float)
        q = QuboInstance.from_dense(a + a.T)
        model, const = qubo_to_spin(q)
        x = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(float)
        e = np.einsum("bi,ij,bj->b", x, q.to_dense(), x)
        worst = max(worst, np.max(np.abs(const - model.log_weight(2 * x - 1) - e)))
    r = nearest_rank_quantile(np.arange(1, 21, dtype=float), 0.95)
    return worst < 1e-9 and r == 19.0, f"max err {worst:.1e}, quantile {r:g}"


def check_schedules():
    T = 300
    vals = (lambda_kl(0, T), lambda_kl(T, T), learning_rate(0, T), learning_rate(0.3 * T, T), learning_rate(T, T))
    ok = vals == (0.10, 0.30, 0.03, 0.10, 0.01)
    return ok, ", ".join(f"{v:g}" for v in vals)


CHECKS = [
    ("ipf worked example", check_ipf_example),
    ("hadamard-init moments", check_hadamard_moments),
    ("nu-snap contraction", check_contraction),
    ("boole-frechet equivalence", check_bf_equivalence),
    ("gradient vs finite differences", check_gradient),
    ("maxent single edge", check_maxent_edge),
    ("gibbs f=0 update", check_gibbs_half),
    ("qubo/ising equivalence", check_ising_equivalence),
    ("schedule endpoints", check_schedules),
]


def run_checks(out):
    failed = 0
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=out)
    print(f"{len(CHECKS) - failed}/{len(CHECKS)} checks passed", file=out)
    return failed == 0

import numpy as np
import pytest

from twobody.circuit import CircuitConfig, born_probabilities, prepare_state
from twobody.instance import QuboInstance, brute_force_maxcut, generate_er, maxcut_to_qubo
from twobody.moments import accumulate_moments
from twobody.sa2 import kink_margin
from twobody.train import (AdamState, KlRampSchedule, LrSchedule, TrainConfig, adam_step, decode_epochs,
                           default_epochs, evaluate, gradient, init_theta, lambda_kl, learning_rate, loss,
                           qubo_moment_energy, train)


# ---------------------------------------------------------------- schedules

def test_schedule_endpoints_exact():
    T = 300
    assert lambda_kl(0, T) == 0.10
    assert lambda_kl(T, T) == 0.30
    assert learning_rate(0, T) == 0.03
    assert learning_rate(0.1 * T, T) == 0.10
    assert learning_rate(0.5 * T - 1, T) == 0.10
    assert learning_rate(T, T) == 0.01


def test_kl_ramp_shape():
    T = 100
    vals = [lambda_kl(t, T) for t in range(T + 1)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert lambda_kl(15, T) == pytest.approx(0.10)
    assert lambda_kl(50, T) == pytest.approx(0.10 + 0.2 * 35 / 70)
    assert lambda_kl(85, T) == 0.30


def test_lr_shape():
    T = 200
    vals = [learning_rate(t, T) for t in range(T + 1)]
    assert max(vals) == 0.10
    peak = [t for t, v in enumerate(vals) if v == 0.10]
    assert peak[0] == 20 and peak[-1] == 100
    assert all(b <= a for a, b in zip(vals[100:], vals[101:]))
    # exponential: log-linear over the decay window
    logs = np.log(vals[100:200])
    assert np.allclose(np.diff(logs), np.diff(logs)[0])


def test_custom_schedules():
    s = LrSchedule(eta_start=0.1, eta_peak=0.2, eta_end=0.05, f_warm=0.2, f_hold=0.8)
    assert learning_rate(50, 100, s) == 0.2
    k = KlRampSchedule(lambda_start=0.0, lambda_end=1.0, f_start=0.0, f_end=1.0)
    assert lambda_kl(25, 100, k) == pytest.approx(0.25)


# --------------------------------------------------------------------- Adam

def reference_adam(theta, grads, eta, b1=0.9, b2=0.999, eps=1e-8):
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    for t, g in enumerate(grads, 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g ** 2
        theta = theta - eta * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return theta


def test_adam_matches_reference():
    rng = np.random.default_rng(0)
    th0 = rng.normal(size=(2, 3))
    grads = [rng.normal(size=(2, 3)) for _ in range(7)]
    th, st = th0, AdamState.zeros_like(th0)
    for g in grads:
        th, st = adam_step(th, st, g, 0.05)
    assert np.allclose(th, reference_adam(th0, grads, 0.05), rtol=1e-14, atol=1e-15)
    assert st.step == 7


def test_adam_zero_grad_and_first_step():
    th = np.array([1.0, -2.0])
    st = AdamState.zeros_like(th)
    t2, _ = adam_step(th, st, np.zeros(2), 0.1)
    assert np.array_equal(t2, th)
    t3, _ = adam_step(th, st, np.array([3.0, -0.5]), 0.1)
    assert np.allclose(th - t3, [0.1, -0.1], rtol=1e-7)


def test_adam_shape_and_purity():
    th = np.zeros(3)
    st = AdamState.zeros_like(th)
    with pytest.raises(ValueError):
        adam_step(th, st, np.zeros(4), 0.1)
    a = adam_step(th, st, np.ones(3), 0.1)
    b = adam_step(th, st, np.ones(3), 0.1)
    assert np.array_equal(a[0], b[0]) and st.step == 0


# --------------------------------------------------------------- loss, grad

def rand_qubo(n, rng):
    a = rng.normal(size=(n, n))
    return QuboInstance.from_dense(a + a.T)


def test_moment_energy_matches_dense():
    rng = np.random.default_rng(1)
    q = rand_qubo(5, rng)
    mu = rng.random(5)
    nu = rng.random((5, 5))
    nu = (nu + nu.T) / 2
    np.fill_diagonal(nu, 0)
    Q = q.to_dense()
    want = np.diag(Q) @ mu + np.sum((Q - np.diag(np.diag(Q))) * nu)
    assert qubo_moment_energy(q, mu, nu) == pytest.approx(want, rel=1e-13)


def test_moment_energy_of_integral_point_is_qubo_energy():
    g = generate_er(8, 3, 0)
    q = maxcut_to_qubo(g)
    x = np.array([1, 0, 1, 1, 0, 0, 1, 0], float)
    assert qubo_moment_energy(q, x, np.outer(x, x)) == pytest.approx(x @ q.to_dense() @ x)


def test_rho_zero_is_unprojected_control():
    rng = np.random.default_rng(2)
    n = 6
    q = rand_qubo(n, rng)
    cfg = CircuitConfig(n, 2)
    th = rng.normal(size=cfg.theta_shape)
    raw = accumulate_moments(born_probabilities(prepare_state(cfg, th)), n)
    lb = loss(th, q, cfg, rho=0.0, lam=0.3)
    assert lb.kl == 0.0
    assert lb.total == pytest.approx(qubo_moment_energy(q, raw.mu, raw.nu), rel=1e-13)


@pytest.mark.parametrize("rho, lam", [(0.0, 0.0), (0.5, 0.0), (0.5, 0.2), (0.0, 0.2)])
def test_gradient_matches_finite_differences(rho, lam):
    rng = np.random.default_rng(int(10 * rho + 100 * lam))
    checked = 0
    while checked < 4:
        n = int(rng.integers(2, 9))
        cfg = CircuitConfig(n, int(rng.integers(1, 4)))
        q = rand_qubo(n, rng)
        th = rng.uniform(-np.pi, np.pi, cfg.theta_shape)
        raw = accumulate_moments(born_probabilities(prepare_state(cfg, th)), n)
        if kink_margin(raw, rho) < 1e-6:
            continue
        checked += 1
        g = gradient(th, q, cfg, rho, lam)
        fd = np.zeros_like(th)
        h = 1e-6  # inside the kink margin
        for idx in np.ndindex(th.shape):
            e = np.zeros_like(th)
            e[idx] = h
            fd[idx] = (loss(th + e, q, cfg, rho, lam).total - loss(th - e, q, cfg, rho, lam).total) / (2 * h)
        assert np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12) < 1e-4


def test_evaluate_rejects_size_mismatch():
    with pytest.raises(ValueError):
        evaluate(np.zeros((1, 8)), rand_qubo(5, np.random.default_rng(0)), CircuitConfig(4, 1))


# -------------------------------------------------------------------- loop

def test_decode_epochs():
    assert decode_epochs(150) == [30, 60, 90, 120, 130, 140, 150]
    assert decode_epochs(300) == [30, 60, 90, 120, 150, 180, 210, 240, 270, 280, 290, 300]
    assert decode_epochs(7) == [7]
    assert decode_epochs(45)[-1] == 45


def test_default_epochs():
    assert default_epochs(800) == 300 and default_epochs(1000) == 300 and default_epochs(2000) == 330


def test_train_config_validation():
    for bad in (dict(depth=-1), dict(rho=1.5), dict(epochs=0), dict(init="ones"), dict(chains=0),
                dict(decode_every=0)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_init_theta():
    cfg = CircuitConfig(8, 2)
    assert np.array_equal(init_theta(cfg, TrainConfig()), np.zeros(cfg.theta_shape))
    g = init_theta(cfg, TrainConfig(init="gaussian", seed=3))
    assert g.shape == cfg.theta_shape and 0.002 < g.std() < 0.03
    assert np.array_equal(g, init_theta(cfg, TrainConfig(init="gaussian", seed=3)))


@pytest.fixture(scope="module")
def er16():
    g = generate_er(16, 4, 0)
    return g, maxcut_to_qubo(g), brute_force_maxcut(g)[0]


def test_train_is_deterministic_and_monotone(er16):
    g, q, best = er16
    tc = TrainConfig(depth=2, epochs=60, seed=1)
    a = train(q, tc, graph=g, best_known=best)
    b = train(q, tc, graph=g, best_known=best)
    strip = lambda rec: [{k: v for k, v in e.items() if k != "wall_time"} for e in rec.epochs]  # noqa: E731
    assert strip(a) == strip(b) and a.decodes == b.decodes
    inc = [d["best_cut"] for d in a.decodes]
    assert inc == sorted(inc)
    assert [d["epoch"] for d in a.decodes] == decode_epochs(60)
    assert 0 < a.r_star <= 1
    assert a.best_cut == max(d["cut"] for d in a.decodes)


def test_callback_sees_every_epoch(er16):
    g, q, _ = er16
    seen = []
    train(q, TrainConfig(epochs=5), graph=g, callback=seen.append)
    assert [e["epoch"] for e in seen] == [1, 2, 3, 4, 5]


def test_loss_decreases_early():
    drops = 0
    for s in range(5):
        g = generate_er(16, 4, s)
        rec = train(maxcut_to_qubo(g), TrainConfig(depth=2, epochs=150, seed=s), graph=g)
        tot = [e["total"] for e in rec.epochs]
        drops += tot[49] < tot[0]
    assert drops >= 4


def test_cut_without_graph_is_minus_energy(er16):
    g, q, _ = er16
    rec = train(q, TrainConfig(epochs=30, seed=0))
    d = rec.decodes[-1]
    assert d["cut"] == -d["energy"]

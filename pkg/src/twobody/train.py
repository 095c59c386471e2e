"""Training: projected-energy loss with KL penalty, its exact gradient, Adam, schedules.

Forward chain per evaluation::

    theta -> statevector -> Born table -> (mu_hat, nu_hat) -> IPF -> (mu, nu)
    loss = E_QUBO(mu, nu) + lambda * KL((mu, nu) || (mu_hat, nu_hat))

The gradient is reverse mode through every stage: KL and energy, the recorded
IPF clips, the moment quotients, ``p = a**2`` and finally an adjoint sweep of
the circuit.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .circuit import CircuitConfig, born_probabilities, prepare_state, theta_gradient
from .decoder import DEFAULT_CHAINS, best_bitstring, default_sweeps, fit_maxent_ising, gibbs_sample
from .instance import Graph, QuboInstance, cut_value
from .moments import accumulate_moments, moments_backward
from .sa2 import (EPS_CLIP, FeasibleMoments, IpfReport, IpfTape, ipf_backward, ipf_project,
                  kl_gap_grad, violation_mass)

log = logging.getLogger(__name__)


# ----------------------------------------------------------------- schedules

@dataclass(frozen=True)
class KlRampSchedule:
    lambda_start: float = 0.10
    lambda_end: float = 0.30
    f_start: float = 0.15
    f_end: float = 0.85


@dataclass(frozen=True)
class LrSchedule:
    eta_start: float = 0.03
    eta_peak: float = 0.10
    eta_end: float = 0.01
    f_warm: float = 0.10
    f_hold: float = 0.40


def lambda_kl(t, T, s: KlRampSchedule = KlRampSchedule()):
    """Piecewise-linear KL weight: flat, linear ramp between f_start and f_end, flat."""
    x = t / T
    if x < s.f_start:
        return s.lambda_start
    if x < s.f_end:
        slope = (s.lambda_end - s.lambda_start) / (s.f_end - s.f_start)
        return s.lambda_start + slope * (x - s.f_start)
    return s.lambda_end


def learning_rate(t, T, s: LrSchedule = LrSchedule()):
    """Linear warm-up, hold at the peak, exponential decay reaching eta_end at t = T."""
    x = t / T
    if x < s.f_warm:
        return s.eta_start + (s.eta_peak - s.eta_start) * x / s.f_warm
    knee = s.f_warm + s.f_hold
    if x < knee or knee >= 1.0:
        return s.eta_peak
    if x >= 1.0:
        return s.eta_end
    kappa = math.log(s.eta_peak / s.eta_end)
    return s.eta_peak * math.exp(-kappa * (x - knee) / (1.0 - knee))


# ---------------------------------------------------------------------- Adam

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, theta, **kw):
        return cls(np.zeros_like(theta, dtype=np.float64), np.zeros_like(theta, dtype=np.float64), **kw)


def adam_step(theta, state: AdamState, grad, eta):
    """Bias-corrected Adam update; returns ``(new_theta, new_state)``."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.m.shape:
        raise ValueError("gradient shape does not match optimizer state")
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** step)
    v_hat = v / (1.0 - state.beta2 ** step)
    new_theta = np.asarray(theta, dtype=np.float64) - eta * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_theta, AdamState(m, v, step, state.beta1, state.beta2, state.eps)


# ---------------------------------------------------------------------- loss

@dataclass
class LossBreakdown:
    energy: float
    kl: float
    lam: float

    @property
    def total(self):
        return self.energy + self.lam * self.kl


@dataclass
class Evaluation:
    loss: LossBreakdown
    grad: np.ndarray
    raw: object
    repaired: FeasibleMoments
    report: IpfReport


def qubo_moment_energy(q: QuboInstance, mu, nu):
    """``sum_i Q_ii mu_i + 2 sum_{i<j} Q_ij nu_ij`` on Q's stored pattern."""
    return float(q.diag @ mu + 2.0 * np.sum(q.vals * nu[q.rows, q.cols]))


def evaluate(theta, q: QuboInstance, cfg: CircuitConfig, rho=0.5, lam=0.0,
             iters=1, tol=1e-6, eps=EPS_CLIP, need_grad=True) -> Evaluation:
    if cfg.n != q.n:
        raise ValueError(f"circuit is sized for n={cfg.n} but QUBO has n={q.n}")
    state = prepare_state(cfg, theta)
    p = born_probabilities(state)
    raw = accumulate_moments(p, q.n)
    if rho > 0:
        tape = IpfTape(rho, eps, raw.mu, raw.nu) if need_grad else None
        rep, report = ipf_project(raw, rho, iters, tol, eps, tape=tape)
        kl = report.kl_gap
    else:
        rep = FeasibleMoments(raw.mu.copy(), raw.nu.copy())
        v = violation_mass(raw)
        report = IpfReport(0, 0.0, v, v)
        kl = 0.0
    loss = LossBreakdown(qubo_moment_energy(q, rep.mu, rep.nu), kl, float(lam))
    if not need_grad:
        return Evaluation(loss, None, raw, rep, report)

    g_mu = q.diag.copy()
    g_nu = np.zeros((q.n, q.n))
    np.add.at(g_nu, (q.rows, q.cols), 2.0 * q.vals)
    if rho > 0:
        g_raw_mu = np.zeros(q.n)
        g_raw_nu = np.zeros((q.n, q.n))
        if lam != 0.0:
            (gr_mu, gr_nu), (gw_mu, gw_nu) = kl_gap_grad(rep, raw, eps)
            g_mu += lam * gr_mu
            g_nu += lam * gr_nu
            g_raw_mu += lam * gw_mu
            g_raw_nu += lam * gw_nu
        b_mu, b_nu = ipf_backward(tape, g_mu, g_nu)
        g_mu, g_nu = b_mu + g_raw_mu, b_nu + g_raw_nu
    g_p = moments_backward(p, q.n, g_mu, g_nu)
    g_amp = 2.0 * state.amplitudes.astype(np.float64) * g_p.reshape(-1)
    grad = theta_gradient(cfg, theta, state, g_amp)
    return Evaluation(loss, grad, raw, rep, report)


def loss(theta, q, cfg, rho=0.5, lam=0.0, **kw) -> LossBreakdown:
    return evaluate(theta, q, cfg, rho, lam, need_grad=False, **kw).loss


def gradient(theta, q, cfg, rho=0.5, lam=0.0, **kw) -> np.ndarray:
    return evaluate(theta, q, cfg, rho, lam, need_grad=True, **kw).grad


# --------------------------------------------------------------------- loop

def default_epochs(n):
    return 300 if n <= 1000 else 330


@dataclass
class TrainConfig:
    depth: int = 2
    rho: float = 0.5
    epochs: int = None
    seed: int = 0
    kl: KlRampSchedule = field(default_factory=KlRampSchedule)
    lr: LrSchedule = field(default_factory=LrSchedule)
    ipf_iters: int = 1
    ipf_tol: float = 1e-6
    chains: int = DEFAULT_CHAINS
    sweeps: int = None
    decode_every: int = 30
    decode_final_every: int = 10
    decode_final_window: int = 40
    init: str = "zeros"
    init_scale: float = 0.01
    precision: str = "float64"

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.epochs is not None and self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.init not in ("zeros", "gaussian"):
            raise ValueError("init must be 'zeros' or 'gaussian'")
        if self.chains < 1 or (self.sweeps is not None and self.sweeps < 1):
            raise ValueError("chains and sweeps must be positive")
        if min(self.decode_every, self.decode_final_every) < 1 or self.decode_final_window < 0:
            raise ValueError("decode cadence must be positive")


def decode_epochs(T, every=30, final_every=10, final_window=40):
    """1-based epochs at which the decoder runs; always includes the last epoch."""
    out = []
    for e in range(1, T + 1):
        if e % every == 0 or (e > T - final_window and e % final_every == 0) or e == T:
            out.append(e)
    return out


@dataclass
class RunRecord:
    epochs: list = field(default_factory=list)
    decodes: list = field(default_factory=list)
    best_cut: float = None
    best_energy: float = None
    best_bits: np.ndarray = None
    best_known: float = None
    wall_time: float = 0.0

    @property
    def r_star(self):
        if self.best_known is None or self.best_cut is None:
            return None
        return self.best_cut / self.best_known

    @property
    def final_cut(self):
        return self.decodes[-1]["cut"] if self.decodes else None

    @property
    def r_final(self):
        if self.best_known is None or not self.decodes:
            return None
        return self.final_cut / self.best_known


def _decode_seed(seed, epoch):
    return int(np.random.SeedSequence([int(seed), int(epoch)]).generate_state(1)[0])


def init_theta(cfg: CircuitConfig, tc: TrainConfig):
    if tc.init == "zeros":
        return np.zeros(cfg.theta_shape)
    return np.random.default_rng(tc.seed).normal(0.0, tc.init_scale, cfg.theta_shape)


def train(q: QuboInstance, tc: TrainConfig = TrainConfig(), graph: Graph = None,
          best_known=None, callback=None) -> RunRecord:
    """Run one training job; decode on schedule and track the anytime incumbent.

    Cuts are measured on ``graph`` when given, otherwise as ``-energy``.
    """
    cfg = CircuitConfig(q.n, tc.depth, tc.precision)
    T = tc.epochs or default_epochs(q.n)
    sweeps = tc.sweeps or default_sweeps(q.n)
    decode_at = set(decode_epochs(T, tc.decode_every, tc.decode_final_every, tc.decode_final_window))
    theta = init_theta(cfg, tc)
    opt = AdamState.zeros_like(theta)
    rec = RunRecord(best_known=best_known)
    t_start = time.perf_counter()

    for t in range(T):
        t0 = time.perf_counter()
        lam = lambda_kl(t, T, tc.kl)
        eta = learning_rate(t, T, tc.lr)
        ev = evaluate(theta, q, cfg, tc.rho, lam, tc.ipf_iters, tc.ipf_tol)
        theta, opt = adam_step(theta, opt, ev.grad, eta)
        entry = {
            "epoch": t + 1,
            "energy": ev.loss.energy,
            "kl": ev.loss.kl,
            "lambda": lam,
            "total": ev.loss.total,
            "eta": eta,
            "violation": ev.report.violation_before,
            "violation_after": ev.report.violation_after,
        }
        if t + 1 in decode_at:
            model = fit_maxent_ising(ev.repaired, q)
            batch = gibbs_sample(model, sweeps, tc.chains, _decode_seed(tc.seed, t + 1), q)
            bits, energy = best_bitstring(batch)
            chain = int(np.argmin(batch.energies))
            cut = cut_value(graph, bits) if graph is not None else -energy
            if rec.best_cut is None or cut > rec.best_cut:
                rec.best_cut, rec.best_energy, rec.best_bits = cut, energy, bits
            rec.decodes.append({
                "epoch": t + 1,
                "cut": cut,
                "energy": energy,
                "chain": chain,
                "best_cut": rec.best_cut,
                "incumbent_ratio": rec.r_star,
            })
            log.debug("epoch %d decode cut=%s incumbent=%s", t + 1, cut, rec.best_cut)
        entry["wall_time"] = time.perf_counter() - t0
        rec.epochs.append(entry)
        if callback is not None:
            callback(entry)
    rec.wall_time = time.perf_counter() - t_start
    return rec

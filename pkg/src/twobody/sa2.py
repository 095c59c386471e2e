"""Boole–Fréchet / SA(2) geometry and the rho-damped IPF repair.

The repair alternates two clips per iteration:

* nu-snap: ``nu <- (1-rho) nu + rho clip(nu, L_ij(mu), U_ij(mu))``
* mu-snap: ``mu <- (1-rho) mu + rho clamp01(clip(mu, L_i, U_i))`` with
  ``L_i = max_j nu_ij`` and ``U_i = min_j (1 + nu_ij - mu_j)``, using the
  freshly snapped ``nu`` and the pre-snap ``mu``.

Everything is piecewise linear, so :func:`ipf_backward` propagates exact
(sub)gradients through a recorded forward pass.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .moments import PseudoMoments

EPS_CLIP = 1e-7
_TINY = 1e-300


class FeasibleMoments(PseudoMoments):
    """Moments after the IPF repair (same layout as :class:`PseudoMoments`)."""


@dataclass
class IpfReport:
    iterations_used: int
    kl_gap: float
    violation_before: float
    violation_after: float

    def to_json(self):
        return asdict(self)


# ----------------------------------------------------------------- geometry

def bf_interval(mu_i, mu_j):
    """Boole–Fréchet interval ``[max(0, mu_i+mu_j-1), min(mu_i, mu_j)]``."""
    lo = np.maximum(0.0, np.add(mu_i, mu_j) - 1.0)
    hi = np.minimum(mu_i, mu_j)
    if np.ndim(lo) == 0:
        return float(lo), float(hi)
    return lo, hi


def pairwise_table(mu_i, mu_j, nu_ij):
    """Joint table ``(P00, P01, P10, P11)`` implied by the two-body moments.

    Negative entries mean the moments are not realizable by any distribution.
    """
    p11 = np.asarray(nu_ij, dtype=np.float64)
    p10 = mu_i - p11
    p01 = mu_j - p11
    p00 = 1.0 - mu_i - mu_j + p11
    return np.stack(np.broadcast_arrays(p00, p01, p10, p11), axis=-1)


def _pair_bounds(mu):
    lo = np.maximum(0.0, mu[:, None] + mu[None, :] - 1.0)
    hi = np.minimum(mu[:, None], mu[None, :])
    return lo, hi


def violation_mass(m: PseudoMoments) -> float:
    """Total Boole–Fréchet violation summed over unordered pairs."""
    lo, hi = _pair_bounds(m.mu)
    iu, ju = np.triu_indices(m.n, 1)
    nu = m.nu[iu, ju]
    v = np.maximum(nu - hi[iu, ju], 0.0) + np.maximum(lo[iu, ju] - nu, 0.0)
    return float(v.sum())


def nu_box_snap(mu, nu, rho):
    """One damped nu-snap at fixed mu; returns the new symmetric nu."""
    lo, hi = _pair_bounds(mu)
    snap = np.minimum(np.maximum(nu, lo), hi)
    snap = 0.5 * (snap + snap.T)
    np.fill_diagonal(snap, 0.0)
    out = (1.0 - rho) * nu + rho * snap
    np.fill_diagonal(out, 0.0)
    return out


# -------------------------------------------------------------------- KL gap

def _bregman(x, y):
    xs = np.maximum(x, _TINY)
    return np.where(x > 0, x * np.log(xs / y), 0.0) - x + y


def _clip01(a, eps):
    return np.clip(a, eps, 1.0 - eps)


def kl_gap(repaired: PseudoMoments, raw: PseudoMoments, eps=EPS_CLIP) -> float:
    """Generalized KL (negative-entropy Bregman) divergence, repaired vs raw.

    Sums over all singletons and over unordered pairs ``i < j``; the raw
    moments are clipped to ``[eps, 1-eps]`` first.
    """
    if repaired.mu.shape != raw.mu.shape or repaired.nu.shape != raw.nu.shape:
        raise ValueError("moment shapes differ")
    iu, ju = np.triu_indices(raw.n, 1)
    d_mu = _bregman(repaired.mu, _clip01(raw.mu, eps))
    d_nu = _bregman(repaired.nu[iu, ju], _clip01(raw.nu[iu, ju], eps))
    return float(max(d_mu.sum() + d_nu.sum(), 0.0))


def kl_gap_grad(repaired: PseudoMoments, raw: PseudoMoments, eps=EPS_CLIP):
    """Gradients of :func:`kl_gap` w.r.t. (repaired mu, nu) and (raw mu, nu)."""
    n = raw.n
    iu, ju = np.triu_indices(n, 1)
    ymu = _clip01(raw.mu, eps)
    ynu = _clip01(raw.nu[iu, ju], eps)
    xmu = repaired.mu
    xnu = repaired.nu[iu, ju]

    g_rep_mu = np.log(np.maximum(xmu, _TINY) / ymu)
    g_raw_mu = (1.0 - xmu / ymu) * ((raw.mu > eps) & (raw.mu < 1.0 - eps))
    g_rep_nu = np.zeros((n, n))
    g_raw_nu = np.zeros((n, n))
    g_rep_nu[iu, ju] = np.log(np.maximum(xnu, _TINY) / ynu)
    rnu = raw.nu[iu, ju]
    g_raw_nu[iu, ju] = (1.0 - xnu / ynu) * ((rnu > eps) & (rnu < 1.0 - eps))
    return (g_rep_mu, g_rep_nu), (g_raw_mu, g_raw_nu)


# ----------------------------------------------------------------------- IPF

@dataclass
class _Step:
    mu: np.ndarray
    nu: np.ndarray
    nu_lo_active: np.ndarray
    nu_below: np.ndarray
    nu_above: np.ndarray
    nu_inside: np.ndarray
    hi_share: np.ndarray
    arg_lo: np.ndarray
    arg_hi: np.ndarray
    mu_below: np.ndarray
    mu_above: np.ndarray
    mu_inside: np.ndarray
    crossed: np.ndarray
    clamp_in: np.ndarray


@dataclass
class IpfTape:
    """Forward record needed by :func:`ipf_backward`."""

    rho: float
    eps: float
    mu_hat: np.ndarray
    nu_hat: np.ndarray
    steps: list = field(default_factory=list)


def _iterate(mu, nu, rho, tape):
    n = mu.shape[0]
    diag = np.eye(n, dtype=bool)
    lo, hi = _pair_bounds(mu)
    below = nu < lo
    above = nu > hi
    snap = np.where(below, lo, np.where(above, hi, nu))
    snap = 0.5 * (snap + snap.T)
    snap[diag] = 0.0
    nu_new = (1.0 - rho) * nu + rho * snap
    nu_new[diag] = 0.0

    masked = np.where(diag, -np.inf, nu_new)
    arg_lo = np.argmax(masked, axis=1)
    lo_i = masked[np.arange(n), arg_lo]
    cand = np.where(diag, np.inf, 1.0 + nu_new - mu[None, :])
    arg_hi = np.argmin(cand, axis=1)
    hi_i = cand[np.arange(n), arg_hi]

    crossed = lo_i > hi_i
    mu_below = ~crossed & (mu < lo_i)
    mu_above = ~crossed & (mu > hi_i)
    mu_inside = ~crossed & ~mu_below & ~mu_above
    target = np.where(crossed, 0.5 * (lo_i + hi_i),
                      np.where(mu_below, lo_i, np.where(mu_above, hi_i, mu)))
    clamp_in = (target >= 0.0) & (target <= 1.0)
    target = np.clip(target, 0.0, 1.0)
    mu_new = (1.0 - rho) * mu + rho * target

    if tape is not None:
        share = (mu[:, None] < mu[None, :]) + 0.5 * (mu[:, None] == mu[None, :])
        tape.steps.append(_Step(
            mu=mu, nu=nu,
            nu_lo_active=(mu[:, None] + mu[None, :] - 1.0) > 0.0,
            nu_below=below, nu_above=above, nu_inside=~below & ~above,
            hi_share=share, arg_lo=arg_lo, arg_hi=arg_hi,
            mu_below=mu_below, mu_above=mu_above, mu_inside=mu_inside,
            crossed=crossed, clamp_in=clamp_in,
        ))
    return mu_new, nu_new


def ipf_project(m: PseudoMoments, rho=0.5, iters=1, tol=1e-6, eps=EPS_CLIP, tape=None):
    """Damped IPF repair toward SA(2).

    Returns ``(FeasibleMoments, IpfReport)``. Pass an :class:`IpfTape` as
    ``tape`` to record what :func:`ipf_backward` needs. ``rho = 0`` returns
    the clipped input unchanged.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if iters < 1:
        raise ValueError("iters must be at least 1")
    mu = _clip01(np.asarray(m.mu, dtype=np.float64), eps)
    nu = _clip01(np.asarray(m.nu, dtype=np.float64), eps)
    nu = 0.5 * (nu + nu.T)
    np.fill_diagonal(nu, 0.0)
    if tape is not None:
        tape.rho, tape.eps = rho, eps
        tape.mu_hat = np.array(m.mu, dtype=np.float64)
        tape.nu_hat = np.array(m.nu, dtype=np.float64)
        tape.steps = []

    used = 0
    if rho > 0.0:
        for _ in range(iters):
            mu_new, nu = _iterate(mu, nu, rho, tape)
            used += 1
            delta = np.max(np.abs(mu_new - mu)) if mu.size else 0.0
            mu = mu_new
            if delta < tol:
                break

    out = FeasibleMoments(mu, nu)
    report = IpfReport(
        iterations_used=used,
        kl_gap=kl_gap(out, m, eps),
        violation_before=violation_mass(m),
        violation_after=violation_mass(out),
    )
    return out, report


def ipf_backward(tape: IpfTape, g_mu, g_nu):
    """Pull gradients on the repaired (mu, full nu) back to the raw input."""
    rho = tape.rho
    g_mu = np.array(g_mu, dtype=np.float64)
    g_nu = np.array(g_nu, dtype=np.float64)
    for st in reversed(tape.steps):
        n = st.mu.shape[0]
        rows = np.arange(n)
        # mu-snap
        g_in_mu = (1.0 - rho) * g_mu
        gt = rho * g_mu * st.clamp_in
        g_lo = gt * st.mu_below + 0.5 * gt * st.crossed
        g_hi = gt * st.mu_above + 0.5 * gt * st.crossed
        g_in_mu += gt * st.mu_inside
        g_nu_new = g_nu.copy()
        np.add.at(g_nu_new, (rows, st.arg_lo), g_lo)
        np.add.at(g_nu_new, (rows, st.arg_hi), g_hi)
        np.add.at(g_in_mu, st.arg_hi, -g_hi)
        # nu-snap
        g_in_nu = (1.0 - rho) * g_nu_new
        g_sym = rho * g_nu_new
        np.fill_diagonal(g_sym, 0.0)
        g_snap = 0.5 * (g_sym + g_sym.T)
        g_in_nu += g_snap * st.nu_inside
        g_lo_pair = g_snap * st.nu_below * st.nu_lo_active
        g_hi_pair = g_snap * st.nu_above
        g_in_mu += g_lo_pair.sum(axis=1) + g_lo_pair.sum(axis=0)
        g_in_mu += (g_hi_pair * st.hi_share).sum(axis=1) + (g_hi_pair * (1.0 - st.hi_share)).sum(axis=0)
        g_mu, g_nu = g_in_mu, g_in_nu
    # initial clip + symmetrization
    eps = tape.eps
    g_mu = g_mu * ((tape.mu_hat > eps) & (tape.mu_hat < 1.0 - eps))
    np.fill_diagonal(g_nu, 0.0)
    g_nu = 0.5 * (g_nu + g_nu.T) * ((tape.nu_hat > eps) & (tape.nu_hat < 1.0 - eps))
    return g_mu, g_nu


def kink_margin(m: PseudoMoments, rho=0.5, iters=1, tol=1e-6, eps=EPS_CLIP):
    """Smallest distance from any clip/max/min decision of the repair to its switch point.

    Gradients are exact away from these switch points; finite-difference checks
    should discard inputs whose margin is tiny.
    """
    mu = np.asarray(m.mu, dtype=np.float64)
    nu = np.asarray(m.nu, dtype=np.float64)
    n = mu.shape[0]
    off = ~np.eye(n, dtype=bool)
    gaps = [np.abs(mu - eps), np.abs(mu - 1 + eps), np.abs(nu[off] - eps), np.abs(nu[off] - 1 + eps)]
    if rho > 0:
        tape = IpfTape(rho, eps, mu, nu)
        ipf_project(m, rho, iters, tol, eps, tape=tape)
        mu_c = _clip01(mu, eps)
        nu_c = _clip01(nu, eps)
        nu_c = 0.5 * (nu_c + nu_c.T)
        np.fill_diagonal(nu_c, 0.0)
        cur_mu, cur_nu = mu_c, nu_c
        for _ in tape.steps:
            lo, hi = _pair_bounds(cur_mu)
            s = cur_mu[:, None] + cur_mu[None, :] - 1.0
            gaps += [np.abs(cur_nu - lo)[off], np.abs(cur_nu - hi)[off], np.abs(s)[off],
                     np.abs(cur_mu[:, None] - cur_mu[None, :])[off]]
            new_mu, new_nu = _iterate(cur_mu, cur_nu, rho, None)
            if n > 2:
                masked = np.where(off, new_nu, -np.inf)
                top2 = np.sort(masked, axis=1)[:, -2:]
                gaps.append(top2[:, 1] - top2[:, 0])
                cand = np.where(off, 1.0 + new_nu - cur_mu[None, :], np.inf)
                low2 = np.sort(cand, axis=1)[:, :2]
                gaps.append(low2[:, 1] - low2[:, 0])
            masked = np.where(off, new_nu, -np.inf)
            cand = np.where(off, 1.0 + new_nu - cur_mu[None, :], np.inf)
            lo_i, hi_i = masked.max(axis=1), cand.min(axis=1)
            gaps += [np.abs(cur_mu - lo_i), np.abs(cur_mu - hi_i), np.abs(lo_i - hi_i)]
            # pre-clamp target, mirroring _iterate
            target = np.where(lo_i > hi_i, 0.5 * (lo_i + hi_i), np.clip(cur_mu, lo_i, np.maximum(lo_i, hi_i)))
            gaps += [np.abs(target), np.abs(target - 1.0)]
            cur_mu, cur_nu = new_mu, new_nu
    return float(min(np.min(g) if np.size(g) else np.inf for g in gaps))

"""Address-conditioned pseudo-moments from the Born table ``p[i, a, j, b]``.

``mu_i`` is the probability that the readout attached to address ``i`` is 1,
given that ``i`` is observed together with some ``j != i`` in either address
slot; ``nu_ij`` is the probability that both readouts are 1 given the
unordered pair ``{i, j}`` is observed. Addresses ``>= n`` and self-pairs
never enter any sum.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

DEN_FLOOR = 1e-30
MU_NEUTRAL = 0.5
NU_NEUTRAL = 0.25


@dataclass
class PseudoMoments:
    mu: np.ndarray
    nu: np.ndarray

    @property
    def n(self):
        return self.mu.shape[0]

    def copy(self):
        return PseudoMoments(self.mu.copy(), self.nu.copy())

    def to_json(self):
        iu, ju = np.triu_indices(self.n, 1)
        return {
            "mu": self.mu.tolist(),
            "nu_entries": [[int(i), int(j), float(v)] for i, j, v in zip(iu, ju, self.nu[iu, ju])],
        }

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        mu = np.asarray(obj["mu"], dtype=np.float64)
        nu = np.zeros((mu.size, mu.size))
        for i, j, v in obj["nu_entries"]:
            nu[i, j] = nu[j, i] = v
        return cls(mu, nu)


def _blocks(p, n):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 4 or p.shape[1] != 2 or p.shape[3] != 2 or p.shape[0] != p.shape[2]:
        raise ValueError("probability table must have shape (K, 2, K, 2)")
    if n > p.shape[0]:
        raise ValueError(f"n={n} exceeds address range {p.shape[0]}")
    t = p[:n, :, :n, :]
    off = ~np.eye(n, dtype=bool)
    return [[t[:, a, :, b] * off for b in (0, 1)] for a in (0, 1)], off


def _forward(p, n):
    (t00, t01), (t10, t11) = _blocks(p, n)[0]
    s = t00 + t01 + t10 + t11
    pair_mass = s + s.T
    den = pair_mass.sum(axis=1)
    num = (t10 + t11).sum(axis=1) + (t01 + t11).sum(axis=0)
    both = t11 + t11.T

    ok_mu = den > DEN_FLOOR
    ok_nu = pair_mass > DEN_FLOOR
    np.fill_diagonal(ok_nu, False)
    mu = np.full(n, MU_NEUTRAL)
    mu[ok_mu] = num[ok_mu] / den[ok_mu]
    nu = np.full((n, n), NU_NEUTRAL)
    nu[ok_nu] = both[ok_nu] / pair_mass[ok_nu]
    np.fill_diagonal(nu, 0.0)
    cache = (den, pair_mass, ok_mu, ok_nu)
    return PseudoMoments(mu, nu), cache


def accumulate_moments(p, n) -> PseudoMoments:
    """Pseudo-moments (mu, nu) for the first ``n`` addresses of table ``p``.

    Conditioning events with mass below ``DEN_FLOOR`` fall back to the
    uniform values ``mu = 1/2`` and ``nu = 1/4``.
    """
    return _forward(p, n)[0]


def moments_backward(p, n, g_mu, g_nu):
    """Pull gradients on (mu, full nu matrix) back to the Born table."""
    p = np.asarray(p, dtype=np.float64)
    m, (den, pair_mass, ok_mu, ok_nu) = _forward(p, n)
    off = ~np.eye(n, dtype=bool)

    g_num = np.zeros(n)
    g_den = np.zeros(n)
    g_num[ok_mu] = g_mu[ok_mu] / den[ok_mu]
    g_den[ok_mu] = -g_mu[ok_mu] * m.mu[ok_mu] / den[ok_mu]

    g_both = np.zeros((n, n))
    g_pm = np.zeros((n, n))
    g_both[ok_nu] = g_nu[ok_nu] / pair_mass[ok_nu]
    g_pm[ok_nu] = -g_nu[ok_nu] * m.nu[ok_nu] / pair_mass[ok_nu]

    g_s = (g_pm + g_pm.T + g_den[:, None] + g_den[None, :]) * off
    g_row = np.broadcast_to(g_num[:, None], (n, n)) * off
    g_col = np.broadcast_to(g_num[None, :], (n, n)) * off
    g_t11_pair = (g_both + g_both.T) * off

    out = np.zeros_like(p)
    out[:n, 0, :n, 0] = g_s
    out[:n, 0, :n, 1] = g_s + g_col
    out[:n, 1, :n, 0] = g_s + g_row
    out[:n, 1, :n, 1] = g_s + g_row + g_col + g_t11_pair
    return out

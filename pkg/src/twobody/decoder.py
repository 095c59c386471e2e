"""MaxEnt Ising surrogate, heat-bath Gibbs decoding and the direct QUBO→Ising baseline.

Spin convention: ``sigma = 2x - 1`` and
``p(sigma) ∝ exp(beta * (sum_i h_i sigma_i + sum_{i<j} J_ij sigma_i sigma_j))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .instance import QuboInstance, qubo_energy_bits
from .moments import PseudoMoments

DEFAULT_CHAINS = 8
MAXENT_EPS = 1e-12
ROBUST_QUANTILE = 0.95
_BLOCK_FLOATS = 1 << 21


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Fields ``h`` plus couplings ``J`` on the pairs ``rows[k] < cols[k]``."""

    n: int
    h: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    J: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if np.any(self.rows >= self.cols):
            raise ValueError("couplings must be stored with rows < cols")

    def coupling_csr(self):
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        d = np.concatenate([self.J, self.J])
        m = sp.csr_matrix((d, (r, c)), shape=(self.n, self.n))
        m.sort_indices()
        return m

    def dense_couplings(self):
        J = np.zeros((self.n, self.n))
        J[self.rows, self.cols] = self.J
        J[self.cols, self.rows] = self.J
        return J

    def log_weight(self, spins):
        """Unnormalized log-probability ``beta * (h.s + sum_{i<j} J s_i s_j)``."""
        s = np.asarray(spins, dtype=np.float64)
        return self.beta * (s @ self.h + np.sum(self.J * s[..., self.rows] * s[..., self.cols], axis=-1))


@dataclass
class SampleBatch:
    bitstrings: np.ndarray
    energies: np.ndarray

    @property
    def chains(self):
        return self.bitstrings.shape[0]


def default_sweeps(n):
    """``ceil(n log2 n)`` sweeps per chain."""
    return max(1, math.ceil(n * math.log2(max(n, 2))))


# ---------------------------------------------------------------- MaxEnt fit

def fit_maxent_ising(m: PseudoMoments, q: QuboInstance, eps=MAXENT_EPS) -> IsingModel:
    """Edgewise log-odds couplings on Q's nonzero pattern, fields from magnetizations."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    keep = q.vals != 0
    rows, cols = q.rows[keep], q.cols[keep]
    mu, nu = np.asarray(m.mu, dtype=np.float64), np.asarray(m.nu, dtype=np.float64)
    mi, mj, v = mu[rows], mu[cols], nu[rows, cols]
    p11 = np.maximum(v, eps)
    p10 = np.maximum(mi - v, eps)
    p01 = np.maximum(mj - v, eps)
    p00 = np.maximum(1.0 - mi - mj + v, eps)
    J = 0.25 * np.log(p11 * p00 / (p10 * p01))

    mc = np.clip(mu, eps, 1.0 - eps)
    mag = 2.0 * mc - 1.0
    h = 0.5 * np.log(mc / (1.0 - mc))
    np.subtract.at(h, rows, J * mag[cols])
    np.subtract.at(h, cols, J * mag[rows])
    return IsingModel(m.n, h, rows.copy(), cols.copy(), J, 1.0)


# --------------------------------------------------------------- heat bath

def chain_rng(seed, chain):
    """Counter-based stream for one chain: Philox keyed by SeedSequence(seed, spawn_key=(chain,))."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(chain),))))


def _run_chains(model: IsingModel, sweeps, chains, seed, record=False):
    if sweeps < 1 or chains < 1:
        raise ValueError("sweeps and chains must be at least 1")
    n = model.n
    csr = model.coupling_csr()
    indptr = csr.indptr.astype(np.int64)
    indices = csr.indices.astype(np.int64)
    data = csr.data.astype(np.float64)
    rngs = [chain_rng(seed, c) for c in range(chains)]
    spins = np.stack([2.0 * r.integers(0, 2, size=n) - 1.0 for r in rngs]) if n else np.zeros((chains, 0))
    fields = model.h[None, :] + (csr @ spins.T).T
    trace = np.zeros((chains, sweeps if record else 0, n), dtype=np.int8)
    block = max(1, min(sweeps, _BLOCK_FLOATS // max(1, chains * n)))
    done = 0
    while done < sweeps:
        b = min(block, sweeps - done)
        u = np.stack([r.random((b, n)) for r in rngs])
        view = trace[:, done:done + b, :] if record else trace
        kernels.heat_bath_sweeps(indptr, indices, data, float(model.beta), spins, fields, u, view)
        done += b
    return spins, trace


def gibbs_sample(model: IsingModel, sweeps, chains=DEFAULT_CHAINS, seed=0, q: QuboInstance = None) -> SampleBatch:
    """Independent heat-bath chains from uniform random spins; final states scored on ``q``.

    Sites are updated in index order each sweep; local fields are maintained
    incrementally, so a sweep costs O(n + |E|).
    """
    spins, _ = _run_chains(model, sweeps, chains, seed)
    bits = ((spins + 1.0) * 0.5).astype(np.int8)
    if q is not None:
        energies = np.atleast_1d(qubo_energy_bits(q, bits)).astype(np.float64)
    else:
        energies = -np.atleast_1d(model.log_weight(spins)).astype(np.float64)
    return SampleBatch(bits, energies)


def gibbs_trace(model: IsingModel, sweeps, chains=1, seed=0):
    """Spin configuration after every sweep, shape (chains, sweeps, n), int8 ±1."""
    return _run_chains(model, sweeps, chains, seed, record=True)[1]


def best_bitstring(batch: SampleBatch):
    if batch.bitstrings.shape[0] == 0:
        raise ValueError("empty sample batch")
    k = int(np.argmin(batch.energies))
    return batch.bitstrings[k].copy(), float(batch.energies[k])


# ------------------------------------------------------ direct Ising baseline

def qubo_to_spin(q: QuboInstance):
    """Exact spin form of ``x^T Q x`` under ``x = (1 + sigma) / 2``.

    Returns ``(model, const)`` with ``x^T Q x == const - model.log_weight(sigma)``
    for every sigma (``beta = 1``), so sampling the model favors low energy.
    """
    row_off = np.zeros(q.n)
    np.add.at(row_off, q.rows, q.vals)
    np.add.at(row_off, q.cols, q.vals)
    h = -0.5 * (q.diag + row_off)
    J = -0.5 * q.vals
    const = 0.5 * q.diag.sum() + 0.5 * q.vals.sum()
    return IsingModel(q.n, h, q.rows.copy(), q.cols.copy(), J, 1.0), float(const)


def nearest_rank_quantile(values, level):
    """Smallest value with at least ``level`` of the sample at or below it."""
    v = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    if v.size == 0:
        raise ValueError("empty sample")
    k = math.ceil(level * v.size - 1e-9)
    return float(v[min(max(k, 1), v.size) - 1])


def coupling_scale(model: IsingModel, level=ROBUST_QUANTILE):
    abs_rows = np.zeros(model.n)
    np.add.at(abs_rows, model.rows, np.abs(model.J))
    np.add.at(abs_rows, model.cols, np.abs(model.J))
    return nearest_rank_quantile(abs_rows, level)


def robust_ising_from_qubo(q: QuboInstance, level=ROBUST_QUANTILE) -> IsingModel:
    """Spin form of Q with h and J divided by the quantile of row |J| sums.

    A zero scale (no couplings) leaves the model unscaled.
    """
    if q.is_zero:
        raise ValueError("QUBO matrix is all zero")
    model, _ = qubo_to_spin(q)
    r = coupling_scale(model, level)
    if r <= 0:
        r = 1.0
    return IsingModel(q.n, model.h / r, model.rows, model.cols, model.J / r, 1.0)

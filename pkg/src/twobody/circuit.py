"""Real-amplitude statevector simulator for the log-width (I, A, J, B) ansatz.

Register layout, most significant qubit first: ``addr_bits`` qubits for the
address ``I``, one readout qubit ``A``, ``addr_bits`` qubits for ``J`` and one
readout qubit ``B``. Basis index ``((i*2 + a)*K + j)*2 + b`` with
``K = 2**addr_bits``.

The gate set {H, R_y, CNOT} is real orthogonal, so amplitudes stay real.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

_DTYPES = {"float64": np.float64, "float32": np.float32}


@dataclass(frozen=True)
class CircuitConfig:
    n: int
    depth: int
    precision: str = "float64"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("circuit needs n >= 2 problem variables")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if self.precision not in _DTYPES:
            raise ValueError(f"precision must be one of {sorted(_DTYPES)}")

    @property
    def addr_bits(self):
        return math.ceil(math.log2(self.n))

    @property
    def n_qubits(self):
        return 2 * (self.addr_bits + 1)

    @property
    def dim(self):
        return 1 << self.n_qubits

    @property
    def dtype(self):
        return _DTYPES[self.precision]

    @property
    def two_qubit_gates(self):
        nq = self.n_qubits
        return self.depth * (nq // 2 + (nq - 1) // 2)

    @property
    def physical_depth(self):
        return 3 * self.depth + 1

    @property
    def theta_shape(self):
        return (self.depth, self.n_qubits)


@dataclass
class CircuitState:
    """Amplitude vector owned by a single run; gate wrappers mutate it."""

    amplitudes: np.ndarray
    n_qubits: int

    @property
    def norm_sq(self):
        a = self.amplitudes.astype(np.float64, copy=False)
        return float(a @ a)

    def dump(self, path):
        """Raw little-endian float64 amplitudes in index order."""
        self.amplitudes.astype("<f8").tofile(path)

    @classmethod
    def load(cls, path, n_qubits):
        a = np.fromfile(path, dtype="<f8")
        if a.size != 1 << n_qubits:
            raise ValueError("state file size does not match qubit count")
        return cls(a.astype(np.float64), n_qubits)


def _check_qubit(state, *qubits):
    for q in qubits:
        if not 0 <= q < state.n_qubits:
            raise IndexError(f"qubit {q} out of range for {state.n_qubits} qubits")


def apply_h(state: CircuitState, q):
    _check_qubit(state, q)
    kernels.apply_h(state.amplitudes, state.n_qubits, q)


def apply_ry(state: CircuitState, q, angle):
    _check_qubit(state, q)
    kernels.apply_ry(state.amplitudes, state.n_qubits, q, math.cos(angle / 2), math.sin(angle / 2))


def apply_cnot(state: CircuitState, ctrl, tgt):
    _check_qubit(state, ctrl, tgt)
    if ctrl == tgt:
        raise ValueError("control and target must differ")
    kernels.apply_cnot(state.amplitudes, state.n_qubits, ctrl, tgt)


def brickwork_pairs(n_qubits):
    even = [(q, q + 1) for q in range(0, n_qubits - 1, 2)]
    odd = [(q, q + 1) for q in range(1, n_qubits - 1, 2)]
    return even, odd


def _check_theta(cfg, theta):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != cfg.theta_shape:
        raise ValueError(f"theta has shape {theta.shape}, expected {cfg.theta_shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    return theta


def prepare_state(cfg: CircuitConfig, theta) -> CircuitState:
    """Hadamard layer on |0...0>, then ``depth`` blocks of R_y + two CNOT brickworks."""
    theta = _check_theta(cfg, theta)
    nq = cfg.n_qubits
    # H on every qubit of |0...0> is the uniform state
    amps = np.full(cfg.dim, 2.0 ** (-nq / 2), dtype=cfg.dtype)
    even, odd = brickwork_pairs(nq)
    for d in range(cfg.depth):
        for q in range(nq):
            ang = theta[d, q]
            kernels.apply_ry(amps, nq, q, math.cos(ang / 2), math.sin(ang / 2))
        for c, t in even:
            kernels.apply_cnot(amps, nq, c, t)
        for c, t in odd:
            kernels.apply_cnot(amps, nq, c, t)
    return CircuitState(amps, nq)


def born_probabilities(state: CircuitState) -> np.ndarray:
    """Table ``p[i, a, j, b]`` of shape (K, 2, K, 2)."""
    k = 1 << ((state.n_qubits - 2) // 2)
    a = state.amplitudes.astype(np.float64, copy=False)
    return (a * a).reshape(k, 2, k, 2)


def theta_gradient(cfg: CircuitConfig, theta, final: CircuitState, grad_amps) -> np.ndarray:
    """Adjoint pass: d loss / d theta from d loss / d amplitudes.

    Walks the circuit backwards, uncomputing the state alongside the adjoint
    vector, so no intermediate states are stored.
    """
    theta = _check_theta(cfg, theta)
    nq = cfg.n_qubits
    psi = final.amplitudes.astype(np.float64)
    lam = np.asarray(grad_amps, dtype=np.float64).reshape(-1).copy()
    even, odd = brickwork_pairs(nq)
    grad = np.zeros(cfg.theta_shape)
    for d in reversed(range(cfg.depth)):
        for c, t in reversed(odd):
            kernels.apply_cnot(psi, nq, c, t)
            kernels.apply_cnot(lam, nq, c, t)
        for c, t in reversed(even):
            kernels.apply_cnot(psi, nq, c, t)
            kernels.apply_cnot(lam, nq, c, t)
        for q in reversed(range(nq)):
            grad[d, q] = kernels.ry_grad(psi, lam, nq, q)
            ang = theta[d, q]
            cs, sn = math.cos(ang / 2), -math.sin(ang / 2)
            kernels.apply_ry(psi, nq, q, cs, sn)
            kernels.apply_ry(lam, nq, q, cs, sn)
    return grad

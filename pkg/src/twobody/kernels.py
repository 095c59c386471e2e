"""Hot loops: in-place gate application and heat-bath sweeps.

Each kernel has a numba implementation (``*_nb``) and a numpy one (``*_np``).
The unsuffixed names dispatch according to :data:`twobody._jit.USE_NUMBA`.

State vectors use qubit 0 as the most significant bit of the basis index.
"""
import math

import numpy as np

from ._jit import USE_NUMBA, njit

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


# --------------------------------------------------------------------- gates

@njit(cache=True)
def apply_ry_nb(state, n_qubits, qubit, c, s):
    stride = 1 << (n_qubits - 1 - qubit)
    size = state.shape[0]
    for base in range(0, size, 2 * stride):
        for k in range(base, base + stride):
            a0 = state[k]
            a1 = state[k + stride]
            state[k] = c * a0 - s * a1
            state[k + stride] = s * a0 + c * a1


@njit(cache=True)
def apply_h_nb(state, n_qubits, qubit):
    stride = 1 << (n_qubits - 1 - qubit)
    size = state.shape[0]
    r = 0.7071067811865476
    for base in range(0, size, 2 * stride):
        for k in range(base, base + stride):
            a0 = state[k]
            a1 = state[k + stride]
            state[k] = r * (a0 + a1)
            state[k + stride] = r * (a0 - a1)


@njit(cache=True)
def apply_cnot_nb(state, n_qubits, ctrl, tgt):
    cbit = 1 << (n_qubits - 1 - ctrl)
    tbit = 1 << (n_qubits - 1 - tgt)
    for k in range(state.shape[0]):
        if (k & cbit) != 0 and (k & tbit) == 0:
            j = k | tbit
            tmp = state[k]
            state[k] = state[j]
            state[j] = tmp


@njit(cache=True)
def ry_grad_nb(state, adj, n_qubits, qubit):
    # 0.5 * <adj| [[0,-1],[1,0]]_q |state>, both taken after the rotation
    stride = 1 << (n_qubits - 1 - qubit)
    size = state.shape[0]
    acc = 0.0
    for base in range(0, size, 2 * stride):
        for k in range(base, base + stride):
            acc += adj[k + stride] * state[k] - adj[k] * state[k + stride]
    return 0.5 * acc


def _split(state, n_qubits, qubit):
    return state.reshape(1 << qubit, 2, 1 << (n_qubits - 1 - qubit))


def apply_ry_np(state, n_qubits, qubit, c, s):
    v = _split(state, n_qubits, qubit)
    a0 = v[:, 0, :].copy()
    a1 = v[:, 1, :]
    v[:, 0, :] = c * a0 - s * a1
    v[:, 1, :] = s * a0 + c * a1


def apply_h_np(state, n_qubits, qubit):
    v = _split(state, n_qubits, qubit)
    a0 = v[:, 0, :].copy()
    a1 = v[:, 1, :]
    v[:, 0, :] = _INV_SQRT2 * (a0 + a1)
    v[:, 1, :] = _INV_SQRT2 * (a0 - a1)


def apply_cnot_np(state, n_qubits, ctrl, tgt):
    lo, hi = min(ctrl, tgt), max(ctrl, tgt)
    v = state.reshape(1 << lo, 2, 1 << (hi - lo - 1), 2, 1 << (n_qubits - 1 - hi))
    if ctrl == lo:
        sub = v[:, 1]
        tmp = sub[:, :, 0].copy()
        sub[:, :, 0] = sub[:, :, 1]
        sub[:, :, 1] = tmp
    else:
        sub = v[:, :, :, 1]
        tmp = sub[:, 0].copy()
        sub[:, 0] = sub[:, 1]
        sub[:, 1] = tmp


def ry_grad_np(state, adj, n_qubits, qubit):
    v = _split(state, n_qubits, qubit)
    w = _split(adj, n_qubits, qubit)
    return 0.5 * float(np.sum(w[:, 1, :] * v[:, 0, :]) - np.sum(w[:, 0, :] * v[:, 1, :]))


# ------------------------------------------------------------------- sampling

@njit(cache=True)
def heat_bath_sweeps_nb(indptr, indices, data, beta, spins, fields, uniforms, trace):
    """Run ``uniforms.shape[1]`` sequential sweeps on every chain, in place.

    spins, fields: (chains, n) float64; uniforms: (chains, sweeps, n);
    trace: (chains, sweeps, n) int8 or any array with trace.shape[1] == 0.
    """
    chains, sweeps, n = uniforms.shape
    record = trace.shape[1] == sweeps and sweeps > 0
    for c in range(chains):
        for t in range(sweeps):
            for i in range(n):
                p = 0.5 * (1.0 + math.tanh(beta * fields[c, i]))
                new = 1.0 if uniforms[c, t, i] < p else -1.0
                delta = new - spins[c, i]
                if delta != 0.0:
                    spins[c, i] = new
                    for k in range(indptr[i], indptr[i + 1]):
                        fields[c, indices[k]] += data[k] * delta
            if record:
                for i in range(n):
                    trace[c, t, i] = np.int8(spins[c, i])


def heat_bath_sweeps_np(indptr, indices, data, beta, spins, fields, uniforms, trace):
    chains, sweeps, n = uniforms.shape
    record = trace.shape[1] == sweeps and sweeps > 0
    nbrs = [indices[indptr[i]:indptr[i + 1]] for i in range(n)]
    wts = [data[indptr[i]:indptr[i + 1]] for i in range(n)]
    for t in range(sweeps):
        for i in range(n):
            p = 0.5 * (1.0 + np.tanh(beta * fields[:, i]))
            new = np.where(uniforms[:, t, i] < p, 1.0, -1.0)
            delta = new - spins[:, i]
            spins[:, i] = new
            if nbrs[i].size:
                moved = delta != 0.0
                if moved.any():
                    rows = np.flatnonzero(moved)
                    fields[np.ix_(rows, nbrs[i])] += delta[rows, None] * wts[i][None, :]
        if record:
            trace[:, t, :] = spins.astype(np.int8)


if USE_NUMBA:
    apply_ry, apply_h, apply_cnot, ry_grad = apply_ry_nb, apply_h_nb, apply_cnot_nb, ry_grad_nb
    heat_bath_sweeps = heat_bath_sweeps_nb
else:
    apply_ry, apply_h, apply_cnot, ry_grad = apply_ry_np, apply_h_np, apply_cnot_np, ry_grad_np
    heat_bath_sweeps = heat_bath_sweeps_np

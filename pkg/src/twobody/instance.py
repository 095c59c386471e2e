"""Graphs, QUBO matrices, instance generation and exact bitstring scoring.

Energy convention: minimize ``E(x) = x^T Q x`` with ``Q`` symmetric. A
:class:`QuboInstance` stores the diagonal and each off-diagonal pair once
(``i < j``), so ``E(x) = sum_i Q_ii x_i + 2 sum_{i<j} Q_ij x_i x_j``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class GsetParseError(ValueError):
    """Malformed GSET text; the message names the offending line."""


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected weighted graph on vertices ``0..n-1``.

    ``u``, ``v``, ``w`` are parallel arrays, one entry per edge. Construction
    validates bounds, self-loops and duplicate unordered pairs.
    """

    n: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValueError(f"graph needs at least one vertex, got n={n}")
        u = _frozen(self.u, np.int64).reshape(-1)
        v = _frozen(self.v, np.int64).reshape(-1)
        w = _frozen(self.w, np.float64).reshape(-1)
        if not (u.shape == v.shape == w.shape):
            raise ValueError("edge arrays must have equal length")
        if u.size:
            if min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n:
                raise ValueError(f"edge endpoint out of range [0, {n})")
            if np.any(u == v):
                raise ValueError("self-loops are not allowed")
            key = np.minimum(u, v) * n + np.maximum(u, v)
            if np.unique(key).size != key.size:
                raise ValueError("duplicate edge")
            if not np.all(np.isfinite(w)):
                raise ValueError("edge weights must be finite")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)

    @classmethod
    def from_edges(cls, n, edges):
        edges = list(edges)
        if not edges:
            return cls(n, np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
        u, v, w = zip(*edges)
        return cls(n, u, v, w)

    @property
    def num_edges(self):
        return int(self.u.size)

    @property
    def edges(self):
        return [(int(a), int(b), float(c)) for a, b, c in zip(self.u, self.v, self.w)]

    def to_json(self):
        return {"n": self.n, "edges": [[a, b, c] for a, b, c in self.edges]}

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        return cls.from_edges(int(obj["n"]), [tuple(e) for e in obj["edges"]])


@dataclass(frozen=True, eq=False)
class QuboInstance:
    """Symmetric QUBO matrix in split storage.

    ``diag`` holds ``Q_ii``; ``rows``/``cols``/``vals`` hold ``Q_ij`` for
    ``i < j`` exactly once per unordered pair.
    """

    n: int
    diag: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    def __post_init__(self):
        n = int(self.n)
        diag = _frozen(self.diag, np.float64).reshape(-1)
        r = _frozen(self.rows, np.int64).reshape(-1)
        c = _frozen(self.cols, np.int64).reshape(-1)
        vals = _frozen(self.vals, np.float64).reshape(-1)
        if diag.size != n:
            raise ValueError("diagonal length must equal n")
        if not (r.shape == c.shape == vals.shape):
            raise ValueError("off-diagonal arrays must have equal length")
        if r.size:
            if np.any(r >= c) or r.min() < 0 or c.max() >= n:
                raise ValueError("off-diagonal entries must satisfy 0 <= i < j < n")
            if np.unique(r * n + c).size != r.size:
                raise ValueError("duplicate off-diagonal entry")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "rows", r)
        object.__setattr__(self, "cols", c)
        object.__setattr__(self, "vals", vals)

    @classmethod
    def from_dense(cls, Q):
        Q = np.asarray(Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if not np.array_equal(Q, Q.T):
            raise ValueError("Q must be symmetric")
        r, c = np.nonzero(np.triu(Q, 1))
        return cls(Q.shape[0], np.diag(Q).copy(), r, c, Q[r, c])

    def to_dense(self):
        Q = np.diag(self.diag)
        Q[self.rows, self.cols] = self.vals
        Q[self.cols, self.rows] = self.vals
        return Q

    def to_csr(self):
        """Full symmetric matrix (both triangles plus diagonal) as CSR."""
        idx = np.arange(self.n)
        r = np.concatenate([self.rows, self.cols, idx])
        c = np.concatenate([self.cols, self.rows, idx])
        d = np.concatenate([self.vals, self.vals, self.diag])
        return sp.csr_matrix((d, (r, c)), shape=(self.n, self.n))

    @property
    def is_zero(self):
        return not (np.any(self.diag != 0) or np.any(self.vals != 0))

    def to_json(self):
        return {
            "n": self.n,
            "diag": self.diag.tolist(),
            "entries": [[int(i), int(j), float(v)] for i, j, v in zip(self.rows, self.cols, self.vals)],
        }


# -------------------------------------------------------------------- GSET io

def parse_gset(text) -> Graph:
    """Parse GSET text (``n m`` header, then ``m`` lines of 1-based ``u v w``)."""
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("ascii")
    lines = [(k + 1, ln.split()) for k, ln in enumerate(text.splitlines())]
    lines = [(k, tok) for k, tok in lines if tok]
    if not lines:
        raise GsetParseError("line 1: empty input")
    lineno, head = lines[0]
    try:
        if len(head) != 2:
            raise ValueError
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise GsetParseError(f"line {lineno}: header must be 'n m'") from None
    if n < 1 or m < 0:
        raise GsetParseError(f"line {lineno}: invalid header values n={n}, m={m}")
    body = lines[1:]
    if len(body) != m:
        where = body[m][0] if len(body) > m else (body[-1][0] + 1 if body else lineno + 1)
        raise GsetParseError(f"line {where}: expected {m} edge lines, found {len(body)}")
    u = np.empty(m, np.int64)
    v = np.empty(m, np.int64)
    w = np.empty(m, np.float64)
    seen = set()
    for k, (lineno, tok) in enumerate(body):
        try:
            if len(tok) != 3:
                raise ValueError
            a, b, c = int(tok[0]), int(tok[1]), int(tok[2])
        except ValueError:
            raise GsetParseError(f"line {lineno}: expected 'u v w' with integer fields") from None
        if not (1 <= a <= n and 1 <= b <= n):
            raise GsetParseError(f"line {lineno}: vertex index out of range [1, {n}]")
        if a == b:
            raise GsetParseError(f"line {lineno}: self-loop on vertex {a}")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise GsetParseError(f"line {lineno}: duplicate edge {key[0]} {key[1]}")
        seen.add(key)
        u[k], v[k], w[k] = a - 1, b - 1, c
    return Graph(n, u, v, w)


def serialize_gset(g: Graph) -> str:
    out = [f"{g.n} {g.num_edges}"]
    for a, b, c in zip(g.u, g.v, g.w):
        if not float(c).is_integer():
            raise ValueError("GSET format only carries integer weights")
        out.append(f"{a + 1} {b + 1} {int(c)}")
    return "\n".join(out) + "\n"


def load_graph(path) -> Graph:
    """Load a graph from GSET text or the JSON form ``{n, edges}``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw.lstrip()[:1] == b"{":
        return Graph.from_json(raw)
    return parse_gset(raw)


# ---------------------------------------------------------------- generators

def generate_er(n, alpha, seed) -> Graph:
    """Erdős–Rényi G(n, p) with ``p = alpha / (n - 1)`` and unit weights."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    p = alpha / (n - 1)
    if p > 1:
        raise ValueError(f"edge probability {p} exceeds 1")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return Graph(n, iu[keep], ju[keep], np.ones(int(keep.sum())))


# ----------------------------------------------------------------- reductions

def maxcut_to_qubo(g: Graph) -> QuboInstance:
    """QUBO whose energy equals minus the cut weight of every bitstring."""
    diag = np.zeros(g.n)
    np.add.at(diag, g.u, -g.w)
    np.add.at(diag, g.v, -g.w)
    lo = np.minimum(g.u, g.v)
    hi = np.maximum(g.u, g.v)
    order = np.lexsort((hi, lo))
    return QuboInstance(g.n, diag, lo[order], hi[order], g.w[order])


def _as_bits(x, n):
    x = np.asarray(x)
    if x.shape[-1] != n:
        raise ValueError(f"bitstring length {x.shape[-1]} does not match n={n}")
    return x.astype(np.float64)


def cut_value(g: Graph, x):
    x = _as_bits(x, g.n)
    c = np.sum(g.w * (x[..., g.u] != x[..., g.v]), axis=-1)
    return float(c) if np.ndim(c) == 0 else c


def qubo_energy_bits(q: QuboInstance, x):
    """Exact ``x^T Q x``; accepts a single bitstring or a (batch, n) array."""
    x = _as_bits(x, q.n)
    e = x @ q.diag + 2.0 * np.sum(q.vals * x[..., q.rows] * x[..., q.cols], axis=-1)
    return float(e) if np.ndim(e) == 0 else e


def brute_force_maxcut(g: Graph):
    """Exhaustive Max-Cut for small graphs; returns (best_cut, bits)."""
    if g.n > 24:
        raise ValueError("exhaustive search limited to n <= 24")
    # vertex n-1 fixed to 0 by symmetry
    m = g.n - 1
    best, arg = -np.inf, None
    block = 1 << min(m, 16)
    for start in range(0, 1 << m, block):
        idx = np.arange(start, min(start + block, 1 << m), dtype=np.int64)
        bits = ((idx[:, None] >> np.arange(g.n, dtype=np.int64)[None, :]) & 1).astype(np.int8)
        cuts = np.sum(g.w[None, :] * (bits[:, g.u] != bits[:, g.v]), axis=1)
        k = int(np.argmax(cuts))
        if cuts[k] > best:
            best, arg = float(cuts[k]), bits[k].copy()
    return best, arg

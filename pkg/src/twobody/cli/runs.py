"""Run execution and on-disk artifacts for ``solve`` and ``baseline-ising``.

Layout under the output directory::

    <instance>/D<depth>_rho<rho>/seed<k>/  records.jsonl summary.json anytime.csv timing.json
    <instance>/baseline/seed<k>/           summary.json timing.json

Everything except ``timing.json`` is a deterministic function of the
effective config, so reruns are byte-identical.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources

import numpy as np

from .._jit import backend_name
from ..circuit import CircuitConfig
from ..decoder import best_bitstring, default_sweeps, gibbs_sample, robust_ising_from_qubo
from ..instance import brute_force_maxcut, cut_value, generate_er, load_graph, maxcut_to_qubo
from ..train import KlRampSchedule, LrSchedule, TrainConfig, default_epochs, train
from .config import instance_name

RECORD_SCHEMA = "twobody.record/1"
SUMMARY_SCHEMA = "twobody.summary/1"
BASELINE_SCHEMA = "twobody.baseline/1"
ANYTIME_SCHEMA = "twobody.anytime/1"
TIMING_SCHEMA = "twobody.timing/1"
EXHAUSTIVE_MAX_N = 24


def atomic_write(path, text):
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def gset_reference():
    with resources.files("twobody").joinpath("data/gset_reference.json").open() as fh:
        return json.load(fh)


def load_instance(cfg):
    kind, val = next(iter(cfg["instance"].items()))
    if kind == "er":
        return generate_er(val["n"], val["alpha"], val.get("seed", 0))
    return load_graph(val)


def best_known_for(cfg, graph):
    """``(value, source)``; source is 'config', 'reference', 'exhaustive' or None."""
    if cfg.get("best_known") is not None:
        return float(cfg["best_known"]), "config"
    ref = gset_reference()["instances"].get(instance_name(cfg).lower())
    if ref is not None and ref["n"] == graph.n and ref["edges"] == graph.num_edges:
        return float(ref["best_known"]), "reference"
    if graph.n <= EXHAUSTIVE_MAX_N and graph.num_edges:
        return brute_force_maxcut(graph)[0], "exhaustive"
    return None, None


def budget_for(cfg, graph):
    """Epoch and sweep budget; named GSET instances use their tabulated budget."""
    ref = gset_reference()["instances"].get(instance_name(cfg).lower())
    if ref is not None and ref["n"] != graph.n:
        ref = None
    epochs = cfg["epochs"] or (ref["epochs"] if ref else default_epochs(graph.n))
    sweeps = cfg["decode"]["sweeps"] or (ref["sweeps"] if ref else default_sweeps(graph.n))
    return epochs, sweeps


def _ratio(cut, bk):
    return None if bk is None or cut is None else cut / bk


def _bits_str(bits):
    return "".join(str(int(b)) for b in bits)


def solve_dir(cfg, seed):
    return os.path.join(cfg["output"], instance_name(cfg), f"D{cfg['depth']}_rho{cfg['rho']:g}", f"seed{seed}")


def baseline_dir(cfg, seed):
    return os.path.join(cfg["output"], instance_name(cfg), "baseline", f"seed{seed}")


def train_config(cfg, seed, epochs, sweeps):
    dec = cfg["decode"]
    return TrainConfig(
        depth=cfg["depth"], rho=float(cfg["rho"]), epochs=epochs, seed=seed,
        kl=KlRampSchedule(**cfg["schedules"]["kl"]), lr=LrSchedule(**cfg["schedules"]["lr"]),
        ipf_iters=cfg["ipf"]["iters"], ipf_tol=cfg["ipf"]["tol"],
        chains=dec["chains"], sweeps=sweeps, decode_every=dec["every"],
        decode_final_every=dec["final_every"], decode_final_window=dec["final_window"],
        init=cfg["init"], precision=cfg["precision"])


def run_solve(cfg, seed):
    """Train one seed and write its artifacts; returns the summary dict."""
    graph = load_instance(cfg)
    if graph.num_edges == 0:
        raise ValueError("instance has no edges")
    q = maxcut_to_qubo(graph)
    bk, bk_src = best_known_for(cfg, graph)
    epochs, sweeps = budget_for(cfg, graph)
    tc = train_config(cfg, seed, epochs, sweeps)
    rec = train(q, tc, graph=graph, best_known=bk)
    circ = CircuitConfig(graph.n, cfg["depth"])
    out = solve_dir(cfg, seed)

    lines = []
    for e in rec.epochs:
        lines.append({"schema": RECORD_SCHEMA, "kind": "epoch",
                      **{k: v for k, v in e.items() if k != "wall_time"}})
    for d in rec.decodes:
        lines.append({"schema": RECORD_SCHEMA, "kind": "decode", **d})
    lines.sort(key=lambda r: (r["epoch"], r["kind"] != "epoch"))
    records = "".join(json.dumps(r, sort_keys=True) + "\n" for r in lines)

    buf = io.StringIO()
    buf.write(f"# schema: {ANYTIME_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "cut", "best_cut", "incumbent_ratio"])
    for d in rec.decodes:
        r = d["incumbent_ratio"]
        w.writerow([d["epoch"], repr(float(d["cut"])), repr(float(d["best_cut"])), "" if r is None else repr(r)])

    r_final = rec.r_final
    summary = {
        "schema": SUMMARY_SCHEMA,
        "kind": "solve",
        "instance": instance_name(cfg),
        "n": graph.n,
        "edges": graph.num_edges,
        "D": cfg["depth"],
        "rho": float(cfg["rho"]),
        "seed": seed,
        "epochs": epochs,
        "sweeps": sweeps,
        "chains": cfg["decode"]["chains"],
        "n_qubits": circ.n_qubits,
        "two_qubit_gates": circ.two_qubit_gates,
        "best_cut": rec.best_cut,
        "final_cut": rec.final_cut,
        "best_known": bk,
        "best_known_source": bk_src,
        "r_star": rec.r_star,
        "r_final": r_final,
        "gap_final": None if r_final is None else 1.0 - r_final,
        "best_bits": _bits_str(rec.best_bits),
    }
    timing = {"schema": TIMING_SCHEMA, "wall_time_s": rec.wall_time, "backend": backend_name(),
              "epoch_wall_time_s": [e["wall_time"] for e in rec.epochs]}
    atomic_write(os.path.join(out, "records.jsonl"), records)
    atomic_write(os.path.join(out, "anytime.csv"), buf.getvalue())
    atomic_write(os.path.join(out, "timing.json"), dump_json(timing))
    atomic_write(os.path.join(out, "summary.json"), dump_json(summary))
    return summary


def run_baseline(cfg, seed):
    """Direct QUBO→Ising baseline with the solver's chain and sweep budget."""
    graph = load_instance(cfg)
    if graph.num_edges == 0:
        raise ValueError("instance has no edges")
    q = maxcut_to_qubo(graph)
    bk, bk_src = best_known_for(cfg, graph)
    _, sweeps = budget_for(cfg, graph)
    chains = cfg["decode"]["chains"]
    t0 = time.perf_counter()
    model = robust_ising_from_qubo(q)
    batch = gibbs_sample(model, sweeps, chains, seed, q)
    bits, energy = best_bitstring(batch)
    wall = time.perf_counter() - t0
    cut = cut_value(graph, bits)
    summary = {
        "schema": BASELINE_SCHEMA,
        "kind": "baseline-ising",
        "instance": instance_name(cfg),
        "n": graph.n,
        "edges": graph.num_edges,
        "seed": seed,
        "sweeps": sweeps,
        "chains": chains,
        "best_cut": cut,
        "energy": energy,
        "best_known": bk,
        "best_known_source": bk_src,
        "r_star": _ratio(cut, bk),
        "chain_cuts": [float(c) for c in -np.asarray(batch.energies)],
        "best_bits": _bits_str(bits),
    }
    out = baseline_dir(cfg, seed)
    atomic_write(os.path.join(out, "timing.json"),
                 dump_json({"schema": TIMING_SCHEMA, "wall_time_s": wall, "backend": backend_name()}))
    atomic_write(os.path.join(out, "summary.json"), dump_json(summary))
    return summary


def fan_out(fn, cfg, workers):
    """Run ``fn(cfg, seed)`` for every seed, in a bounded process pool when workers > 1."""
    seeds = cfg["seeds"]
    if workers <= 1 or len(seeds) == 1:
        return [fn(cfg, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
        return list(pool.map(fn, [cfg] * len(seeds), seeds))

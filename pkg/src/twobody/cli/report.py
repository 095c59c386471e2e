"""Aggregate run summaries into a benchmark table and a plot-ready CSV."""
from __future__ import annotations

import csv
import io
import json
import os
import statistics

from .runs import BASELINE_SCHEMA, SUMMARY_SCHEMA, TIMING_SCHEMA

REPORT_SCHEMA = "twobody.report/1"
COLUMNS = ["kind", "instance", "n", "edges", "D", "rho", "runs", "best_r", "median_r", "mean_r",
           "median_gap_final", "mean_gap_final", "is_dstar", "mean_wall_time_s"]


class ReportError(ValueError):
    pass


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ReportError(f"missing run file: {path}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ReportError(f"corrupt run file: {path} ({exc})") from None


def find_summaries(paths):
    """All ``summary.json`` files under the given run or output directories, sorted."""
    found = []
    for p in paths:
        if not os.path.isdir(p):
            raise ReportError(f"not a directory: {p}")
        hits = [os.path.join(root, "summary.json") for root, _, files in os.walk(p) if "summary.json" in files]
        if not hits:
            raise ReportError(f"no completed runs under {p}")
        found.extend(hits)
    return sorted(set(found))


_REQUIRED = {
    SUMMARY_SCHEMA: ("instance", "n", "edges", "D", "rho", "seed", "r_star", "gap_final"),
    BASELINE_SCHEMA: ("instance", "n", "edges", "seed", "r_star"),
}


def load_runs(paths, timing=False):
    runs = []
    for path in find_summaries(paths):
        s = _read_json(path)
        schema = s.get("schema") if isinstance(s, dict) else None
        if schema not in _REQUIRED:
            raise ReportError(f"corrupt run file: {path} (unknown schema {schema!r})")
        missing = [k for k in _REQUIRED[schema] if k not in s]
        if missing:
            raise ReportError(f"corrupt run file: {path} (missing {', '.join(missing)})")
        if timing:
            t = _read_json(os.path.join(os.path.dirname(path), "timing.json"))
            if t.get("schema") != TIMING_SCHEMA:
                raise ReportError(f"corrupt timing file next to {path}")
            s = {**s, "wall_time_s": t["wall_time_s"]}
        runs.append(s)
    return runs


def _stats(vals):
    vals = [v for v in vals if v is not None]
    if not vals:
        return None, None, None
    return max(vals), statistics.median(vals), statistics.fmean(vals)


def aggregate(runs, timing=False):
    """Rows per (instance, D) for solver runs and per instance for baselines."""
    groups = {}
    for s in runs:
        if s["schema"] == SUMMARY_SCHEMA:
            key = ("solve", s["instance"], s["D"], float(s["rho"]))
        else:
            key = ("baseline-ising", s["instance"], None, None)
        groups.setdefault(key, []).append(s)

    rows = []
    for (kind, inst, D, rho), group in sorted(groups.items(), key=lambda kv: (kv[0][0] != "solve", kv[0][1],
                                                                          kv[0][2] or 0, kv[0][3] or 0)):
        seeds = [g["seed"] for g in group]
        if len(set(seeds)) != len(seeds):
            raise ReportError(f"duplicate seed in group {inst} D={D}")
        best, med, mean = _stats([g["r_star"] for g in group])
        _, gmed, gmean = _stats([g.get("gap_final") for g in group])
        rows.append({
            "kind": kind, "instance": inst, "n": group[0]["n"], "edges": group[0]["edges"],
            "D": D, "rho": rho, "runs": len(group),
            "best_r": best, "median_r": med, "mean_r": mean,
            "median_gap_final": gmed, "mean_gap_final": gmean, "is_dstar": False,
            "mean_wall_time_s": statistics.fmean(g["wall_time_s"] for g in group) if timing else None,
        })

    # D* = depth with the best median ratio; ties go to the shallower circuit
    for inst in {r["instance"] for r in rows if r["kind"] == "solve"}:
        cands = [r for r in rows if r["kind"] == "solve" and r["instance"] == inst and r["median_r"] is not None]
        if cands:
            top = max(cands, key=lambda r: (r["median_r"], -r["D"], -r["rho"]))
            top["is_dstar"] = True
    return rows


def _fmt(v, digits=4):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.{digits}f}" if digits else repr(v)
    return str(v)


def to_csv(rows):
    buf = io.StringIO()
    buf.write(f"# schema: {REPORT_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c], 0) for c in COLUMNS])
    return buf.getvalue()


def to_text(rows, timing=False):
    cols = [c for c in COLUMNS if timing or c != "mean_wall_time_s"]
    head = {"median_gap_final": "gap_med", "mean_gap_final": "gap_mean", "mean_wall_time_s": "wall_s"}
    table = [[head.get(c, c) for c in cols]]
    for r in rows:
        table.append(["*" if (c == "is_dstar" and r[c]) else ("" if c == "is_dstar" else _fmt(r[c], 2 if c == "mean_wall_time_s" else 4))
                      for c in cols])
    widths = [max(len(row[k]) for row in table) for k in range(len(cols))]
    lines = ["  ".join(cell.rjust(wd) for cell, wd in zip(row, widths)).rstrip() for row in table]
    return "\n".join(lines) + "\n"

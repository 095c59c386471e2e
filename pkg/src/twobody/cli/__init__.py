"""``twobody`` command line: solve, baseline-ising, gen-er, report, verify.

Exit status is 0 on success, 1 when a run, report or check fails and 2 for
usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from ..instance import GsetParseError, generate_er, serialize_gset
from .config import ConfigError, dump_config, instance_name, load_config, validate
from .report import ReportError, aggregate, load_runs, to_csv, to_text
from .runs import atomic_write, baseline_dir, fan_out, run_baseline, run_solve, solve_dir

log = logging.getLogger("twobody")


def _seed_list(text):
    try:
        out = []
        for part in text.split(","):
            if "-" in part:
                a, b = part.split("-")
                out.extend(range(int(a), int(b) + 1))
            elif part:
                out.append(int(part))
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r} (use e.g. 0,1,2 or 0-4)") from None


def _instance_args(p):
    g = p.add_argument_group("instance (overrides the config file)")
    g.add_argument("--gset", help="GSET text file")
    g.add_argument("--graph-json", help="graph in the JSON form {n, edges}")
    g.add_argument("--er-n", type=int, help="generate an ER graph with this many vertices")
    g.add_argument("--er-alpha", type=float, default=None, help="ER mean degree (default 4)")
    g.add_argument("--er-seed", type=int, default=None, help="ER generator seed (default 0)")
    g.add_argument("--name", help="instance name used for output paths and best-known lookup")


def _run_args(p, solver=True):
    p.add_argument("-c", "--config", help="JSON run configuration")
    _instance_args(p)
    if solver:
        p.add_argument("--depth", type=int)
        p.add_argument("--rho", type=float)
        p.add_argument("--epochs", type=int)
        p.add_argument("--init", choices=("zeros", "gaussian"))
        p.add_argument("--precision", choices=("float64", "float32"))
    p.add_argument("--seeds", type=_seed_list, help="comma list or range, e.g. 0,1,2 or 0-4")
    p.add_argument("--chains", type=int)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--best-known", type=float)
    p.add_argument("-o", "--output", help="output root directory")
    p.add_argument("-j", "--workers", type=int, help="parallel seeds (process pool)")


def _effective_config(args, solver=True):
    cfg = load_config(args.config) if args.config else {}
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    srcs = [k for k in ("gset", "graph_json", "er_n") if getattr(args, k) is not None]
    if len(srcs) > 1:
        raise ConfigError("give only one of --gset, --graph-json, --er-n")
    if args.gset:
        cfg["instance"] = {"gset": args.gset}
    elif args.graph_json:
        cfg["instance"] = {"json": args.graph_json}
    elif args.er_n is not None:
        cfg["instance"] = {"er": {"n": args.er_n, "alpha": 4.0 if args.er_alpha is None else args.er_alpha,
                                  "seed": 0 if args.er_seed is None else args.er_seed}}
    elif (args.er_alpha is not None or args.er_seed is not None):
        er = dict(cfg.get("instance", {}).get("er") or {})
        if not er:
            raise ConfigError("--er-alpha/--er-seed need an ER instance")
        if args.er_alpha is not None:
            er["alpha"] = args.er_alpha
        if args.er_seed is not None:
            er["seed"] = args.er_seed
        cfg["instance"] = {"er": er}
    flat = {"name": "name", "seeds": "seeds", "best_known": "best_known", "output": "output", "workers": "workers"}
    if solver:
        flat.update(depth="depth", rho="rho", epochs="epochs", init="init", precision="precision")
    for attr, key in flat.items():
        val = getattr(args, attr)
        if val is not None:
            cfg[key] = val
    for attr in ("chains", "sweeps"):
        val = getattr(args, attr)
        if val is not None:
            cfg.setdefault("decode", {})[attr] = val
    return validate(cfg)


def cmd_solve(args):
    cfg = _effective_config(args)
    group = os.path.dirname(solve_dir(cfg, 0))
    atomic_write(os.path.join(group, "config.json"), dump_config(cfg))
    for s in fan_out(run_solve, cfg, cfg["workers"]):
        r = "n/a" if s["r_star"] is None else f"{s['r_star']:.4f}"
        print(f"{s['instance']} D={s['D']} seed={s['seed']}: best_cut={s['best_cut']:g} r*={r} "
              f"n_q={s['n_qubits']} 2q={s['two_qubit_gates']}")
    print(f"results in {group}")
    return 0


def cmd_baseline(args):
    cfg = _effective_config(args, solver=False)
    group = os.path.dirname(baseline_dir(cfg, 0))
    atomic_write(os.path.join(group, "config.json"), dump_config(cfg))
    for s in fan_out(run_baseline, cfg, cfg["workers"]):
        r = "n/a" if s["r_star"] is None else f"{s['r_star']:.4f}"
        print(f"{s['instance']} baseline seed={s['seed']}: best_cut={s['best_cut']:g} r={r}")
    print(f"results in {group}")
    return 0


def cmd_gen_er(args):
    g = generate_er(args.n, args.alpha, args.seed)
    fmt = args.format
    if fmt is None:
        fmt = "json" if (args.output or "").endswith(".json") else "gset"
    text = serialize_gset(g) if fmt == "gset" else json.dumps(g.to_json(), sort_keys=True) + "\n"
    if args.output:
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_report(args):
    rows = aggregate(load_runs(args.dirs, args.timing), args.timing)
    text = to_text(rows, args.timing)
    out = args.output or args.dirs[0]
    atomic_write(os.path.join(out, "report.csv"), to_csv(rows))
    atomic_write(os.path.join(out, "report.txt"), text)
    sys.stdout.write(text)
    return 0


def cmd_verify(args):
    from .verify import run_checks
    return 0 if run_checks(sys.stdout) else 1


def build_parser():
    p = argparse.ArgumentParser(prog="twobody", description="Log-width two-body Max-Cut/QUBO solver.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="train and decode, one run per seed")
    _run_args(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("baseline-ising", help="direct QUBO->Ising baseline decoded by Gibbs sampling")
    _run_args(b, solver=False)
    b.set_defaults(func=cmd_baseline)

    g = sub.add_parser("gen-er", help="write an Erdos-Renyi graph")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--alpha", type=float, default=4.0, help="mean degree; p = alpha/(n-1)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", choices=("gset", "json"))
    g.add_argument("-o", "--output", help="output file (stdout when omitted)")
    g.set_defaults(func=cmd_gen_er)

    r = sub.add_parser("report", help="aggregate run directories into a table and CSV")
    r.add_argument("dirs", nargs="+", help="run or output directories")
    r.add_argument("-o", "--output", help="where report.csv/report.txt go (default: first dir)")
    r.add_argument("--timing", action="store_true", help="include wall-time columns")
    r.set_defaults(func=cmd_report)

    v = sub.add_parser("verify", help="run the built-in oracle checks")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, argparse.ArgumentTypeError) as exc:
        print(f"twobody: config error: {exc}", file=sys.stderr)
        return 2
    except (ReportError, GsetParseError, ValueError, OSError) as exc:
        print(f"twobody: error: {exc}", file=sys.stderr)
        return 1


__all__ = ["main", "build_parser", "instance_name"]

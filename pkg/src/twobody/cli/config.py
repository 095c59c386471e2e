"""Run configuration: a JSON document, validated strictly, overridable from the command line.

Example::

    {
      "instance": {"er": {"n": 16, "alpha": 4, "seed": 0}},
      "depth": 2, "rho": 0.5, "epochs": 150, "seeds": [0, 1, 2],
      "schedules": {"kl": {"lambda_end": 0.3}, "lr": {"eta_peak": 0.1}},
      "decode": {"chains": 8, "sweeps": null},
      "output": "runs/er16"
    }

``instance`` takes exactly one of ``gset`` (path to GSET text), ``json``
(path to ``{n, edges}``) or ``er`` (generator parameters).
"""
from __future__ import annotations

import copy
import json
import os
from dataclasses import fields

from ..train import KlRampSchedule, LrSchedule

SCHEMA = "twobody.config/1"


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "name": None,
    "instance": None,
    "depth": 2,
    "rho": 0.5,
    "epochs": None,
    "seeds": [0],
    "schedules": {"kl": {}, "lr": {}},
    "decode": {"chains": 8, "sweeps": None, "every": 30, "final_every": 10, "final_window": 40},
    "ipf": {"iters": 1, "tol": 1e-6},
    "init": "zeros",
    "precision": "float64",
    "best_known": None,
    "output": "runs",
    "workers": 1,
}


def _reject_unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _merge(base, over, where):
    _reject_unknown(over, base, where)
    out = copy.deepcopy(base)
    for k, v in over.items():
        # empty defaults (instance, schedule overrides) are checked later, not here
        if isinstance(base.get(k), dict) and base[k]:
            out[k] = _merge(base[k], v, f"{where}.{k}")
        else:
            out[k] = v
    return out


def _check_instance(inst):
    if inst is None:
        raise ConfigError("no instance given (use gset, json or er)")
    _reject_unknown(inst, ("gset", "json", "er"), "instance")
    if len(inst) != 1:
        raise ConfigError("instance must name exactly one source")
    kind, val = next(iter(inst.items()))
    if kind == "er":
        _reject_unknown(val, ("n", "alpha", "seed"), "instance.er")
        for k in ("n", "alpha"):
            if k not in val:
                raise ConfigError(f"instance.er.{k} is required")
        if not isinstance(val["n"], int) or val["n"] < 2:
            raise ConfigError("instance.er.n must be an integer >= 2")
        if val["alpha"] < 0:
            raise ConfigError("instance.er.alpha must be nonnegative")
    elif not isinstance(val, str):
        raise ConfigError(f"instance.{kind} must be a file path")


def _positive_int(cfg, key, allow_none=False):
    v = cfg[key]
    if v is None and allow_none:
        return
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ConfigError(f"{key} must be a positive integer")


def validate(cfg):
    """Return a fully-populated config dict or raise :class:`ConfigError`."""
    cfg = _merge(DEFAULTS, cfg, "config")
    _check_instance(cfg["instance"])
    if not isinstance(cfg["depth"], int) or cfg["depth"] < 0:
        raise ConfigError("depth must be a nonnegative integer")
    if not 0.0 <= float(cfg["rho"]) <= 1.0:
        raise ConfigError("rho must lie in [0, 1]")
    _positive_int(cfg, "epochs", allow_none=True)
    _positive_int(cfg, "workers")
    seeds = cfg["seeds"]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise ConfigError("seeds must be a nonempty list of nonnegative integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    for key, cls in (("kl", KlRampSchedule), ("lr", LrSchedule)):
        _reject_unknown(cfg["schedules"][key], [f.name for f in fields(cls)], f"schedules.{key}")
    kl = KlRampSchedule(**cfg["schedules"]["kl"])
    if not (0.0 <= kl.f_start <= kl.f_end <= 1.0):
        raise ConfigError("KL ramp needs 0 <= f_start <= f_end <= 1")
    lr = LrSchedule(**cfg["schedules"]["lr"])
    if min(lr.eta_start, lr.eta_peak, lr.eta_end) <= 0 or lr.f_warm <= 0 or lr.f_hold < 0:
        raise ConfigError("learning-rate schedule values must be positive")
    dec = cfg["decode"]
    if not isinstance(dec["chains"], int) or dec["chains"] < 1:
        raise ConfigError("decode.chains must be a positive integer")
    if dec["sweeps"] is not None and (not isinstance(dec["sweeps"], int) or dec["sweeps"] < 1):
        raise ConfigError("decode.sweeps must be a positive integer or null")
    if cfg["ipf"]["iters"] < 1:
        raise ConfigError("ipf.iters must be at least 1")
    if cfg["init"] not in ("zeros", "gaussian"):
        raise ConfigError("init must be 'zeros' or 'gaussian'")
    if cfg["precision"] not in ("float64", "float32"):
        raise ConfigError("precision must be 'float64' or 'float32'")
    if cfg["best_known"] is not None and cfg["best_known"] <= 0:
        raise ConfigError("best_known must be positive")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(obj, dict):
        obj.pop("schema", None)
    return obj


def instance_name(cfg):
    if cfg.get("name"):
        return cfg["name"]
    kind, val = next(iter(cfg["instance"].items()))
    if kind == "er":
        return f"er_n{val['n']}_a{val['alpha']:g}_s{val.get('seed', 0)}"
    return os.path.splitext(os.path.basename(val))[0]


def dump_config(cfg):
    return json.dumps({"schema": SCHEMA, **cfg}, indent=2, sort_keys=True) + "\n"

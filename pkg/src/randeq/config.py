"""Run configuration: a YAML key/value tree with dotted-path overrides.

Example::

    system: scalar-ou                # preset name, {preset: ..., overrides} or an inline definition
    seeds: [0, 1, 2]                 # or {start: 0, count: 10}
    path: {step: 0.001, past: 25, future: 5}
    schedule: {kind: geometric, t0: 1.0, rho: 1.3, t_max: 20}
    checks: [equilibrium, uniqueness, invariance]

Every section has defaults (see :data:`DEFAULTS`); unknown keys are errors.
"""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass

import yaml

from .stationary import default_burn_in
from .systems import PRESETS, SystemSpec, spec_from_config

__all__ = ["ConfigError", "RunConfig", "DEFAULTS", "CHECKS", "load_config", "apply_override", "parse_config"]

CHECKS = ("h1", "h2", "equilibrium", "invariance", "uniqueness", "birkhoff", "lyapunov", "selfconv")

DEFAULTS = {
    "system": None,
    "seeds": [0],
    "path": {"step": 1e-3, "past": None, "future": None},
    "schedule": {"kind": "geometric", "t0": 1.0, "rho": 1.3, "t_max": 30.0, "times": None},
    "checks": None,
    "method": None,
    "initial": None,
    "tolerances": {
        "equilibrium": 1e-6,
        "uniqueness": 1e-6,
        "invariance": 1e-2,
        "h1_slack": 0.1,
        "lyapunov_band": 0.05,
        "birkhoff_sigmas": 3.0,
    },
    "h1": {"transient": 1.0, "other": None, "eps0": None, "eps2": None},
    "h2": {"lambda0": None, "gamma_grid": None},
    "invariance": {"s": [0.5, 1.0, 2.0], "depth": 20.0},
    "uniqueness": {"points": None, "radius": 5.0, "depth": 20.0, "relative": True},
    "birkhoff": {"T": [100.0, 1000.0]},
    "lyapunov": {"T": 100.0, "renorm": 1.0},
    "selfconv": {"op": None, "levels": 4, "t1": 1.0, "step": 0.015625, "extra": 4, "burn_in": 10.0},
    "output": {"dir": "reports", "csv": True},
    "workers": 1,
}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-3`` (no dot) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)?(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789."),
)


def yaml_load(text):
    return yaml.load(text, Loader=_Loader)


class ConfigError(ValueError):
    """A config file or override does not match the schema."""


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    spec: SystemSpec
    seeds: tuple
    checks: tuple

    def section(self, name):
        return self.raw[name]


def _merge(default, node, where):
    if not isinstance(default, dict):
        return copy.deepcopy(node)
    if node is None:
        return copy.deepcopy(default)
    if not isinstance(node, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(node).__name__}")
    out = copy.deepcopy(default)
    for k, v in node.items():
        if k not in default:
            raise ConfigError(f"{where + '.' if where else ''}{k}: unknown key (allowed: {', '.join(default)})")
        out[k] = _merge(default[k], v, f"{where + '.' if where else ''}{k}") if isinstance(default[k], dict) else v
    return out


def apply_override(tree: dict, assignment: str) -> dict:
    """Apply ``a.b.c=value``; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} must look like key.path=value")
    key, text = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = tree
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    try:
        node[parts[-1]] = yaml_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {key}: cannot parse value {text!r}: {exc}") from None
    return tree


def load_config(fname, overrides=()) -> RunConfig:
    try:
        with open(fname) as fh:
            tree = yaml_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{fname}: {exc}") from None
    if not isinstance(tree, dict):
        raise ConfigError(f"{fname}: top level must be a mapping")
    for o in overrides:
        apply_override(tree, o)
    return parse_config(tree)


def _seeds(node):
    if isinstance(node, int) and not isinstance(node, bool):
        return (node,)
    if isinstance(node, dict):
        extra = set(node) - {"start", "count"}
        if extra or "count" not in node:
            raise ConfigError("seeds: mapping form needs 'count' and optional 'start'")
        start = int(node.get("start", 0))
        return tuple(range(start, start + int(node["count"])))
    if isinstance(node, list) and node and all(isinstance(s, int) and not isinstance(s, bool) for s in node):
        if len(set(node)) != len(node):
            raise ConfigError("seeds: duplicate entries")
        return tuple(node)
    raise ConfigError(f"seeds: expected an int, a nonempty list of ints or {{start, count}}, got {node!r}")


def _positive(value, where):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0 or not math.isfinite(value):
        raise ConfigError(f"{where}: expected a positive number, got {value!r}")
    return float(value)


def parse_config(tree: dict) -> RunConfig:
    raw = _merge(DEFAULTS, tree, "")
    if raw["system"] is None:
        raise ConfigError("system: required (preset name, {preset: ...} or inline definition)")
    node = raw["system"]
    if isinstance(node, str):
        node = {"preset": node}
    try:
        spec = spec_from_config(node)
    except KeyError as exc:
        raise ConfigError(f"system: {exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"system: {exc}") from None
    checks = raw["checks"]
    if not checks:
        raise ConfigError(f"checks: at least one check is required (choose from {', '.join(CHECKS)})")
    if isinstance(checks, str):
        checks = [checks]
    bad = [c for c in checks if c not in CHECKS]
    if bad:
        raise ConfigError(f"checks: unknown {bad} (choose from {', '.join(CHECKS)})")
    if len(set(checks)) != len(checks):
        raise ConfigError("checks: duplicate entries")
    seeds = _seeds(raw["seeds"])
    if any(s < 0 for s in seeds):
        raise ConfigError("seeds: must be nonnegative")
    _positive(raw["path"]["step"], "path.step")
    if raw["initial"] is not None and len(list(raw["initial"])) != spec.n:
        raise ConfigError(f"initial: expected {spec.n} components, got {raw['initial']!r}")
    if "birkhoff" in checks and spec.kind != "stratonovich-dissipative":
        raise ConfigError("checks: birkhoff averages u^c and needs a stratonovich-dissipative system")
    if "lyapunov" in checks and spec.kind not in ("additive-lipschitz", "multiplicative-lipschitz"):
        raise ConfigError("checks: lyapunov needs a system with a linear part A")
    if not isinstance(raw["workers"], int) or raw["workers"] < 1:
        raise ConfigError(f"workers: expected a positive int, got {raw['workers']!r}")
    cfg = RunConfig(raw, spec, seeds, tuple(checks))
    _fill_horizons(cfg)
    return cfg


def schedule_of(cfg: RunConfig) -> list:
    from .pullback import default_schedule

    s = cfg.raw["schedule"]
    step = cfg.raw["path"]["step"]
    if s["kind"] == "geometric":
        return default_schedule(_positive(s["t_max"], "schedule.t_max"), step,
                                _positive(s["t0"], "schedule.t0"), _positive(s["rho"], "schedule.rho"))
    if s["kind"] == "list":
        times = s["times"]
        if not times or any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("schedule.times: need a nonempty increasing list")
        return [_positive(t, "schedule.times") for t in times]
    raise ConfigError(f"schedule.kind: expected 'geometric' or 'list', got {s['kind']!r}")


def required_horizons(cfg: RunConfig) -> dict:
    """Past and future horizon each check needs, keyed by check."""
    raw, step = cfg.raw, cfg.raw["path"]["step"]
    conj = (cfg.raw["method"] or "") == "conjugate"
    pad = default_burn_in(1.0, step) if conj else 0.0
    need = {}
    for c in cfg.checks:
        if c in ("h1", "h2", "equilibrium"):
            need[c] = (max(schedule_of(cfg)) + pad, 0.0)
        elif c == "invariance":
            s = [float(v) for v in raw["invariance"]["s"]]
            if any(v < 0 for v in s):
                raise ConfigError("invariance.s: times must be nonnegative")
            depth = _positive(raw["invariance"]["depth"], "invariance.depth")
            need[c] = (depth + pad, max(s, default=0.0) + pad)
        elif c == "uniqueness":
            need[c] = (_positive(raw["uniqueness"]["depth"], "uniqueness.depth") + pad, 0.0)
        elif c == "lyapunov":
            need[c] = (0.0, _positive(raw["lyapunov"]["T"], "lyapunov.T"))
        elif c == "birkhoff":
            Ts = [_positive(t, "birkhoff.T") for t in raw["birkhoff"]["T"]]
            need[c] = (max(Ts) + default_burn_in(1.0, step), 0.0)
        elif c == "selfconv":
            # runs on its own coarse paths, see the selfconv section
            sc = raw["selfconv"]
            _positive(sc["burn_in"], "selfconv.burn_in")
            _positive(sc["t1"], "selfconv.t1")
            _positive(sc["step"], "selfconv.step")
    return need


def _fill_horizons(cfg: RunConfig) -> None:
    need = required_horizons(cfg)
    past = max((p for p, _ in need.values()), default=0.0)
    future = max((f for _, f in need.values()), default=0.0)
    p = cfg.raw["path"]
    short = []
    if p["past"] is None:
        p["past"] = past
    elif p["past"] < past:
        short += [f"{c} needs T- >= {v[0]:g}" for c, v in need.items() if v[0] > p["past"]]
    if p["future"] is None:
        p["future"] = future
    elif p["future"] < future:
        short += [f"{c} needs T+ >= {v[1]:g}" for c, v in need.items() if v[1] > p["future"]]
    if short:
        raise ConfigError(f"path: horizon too short (T- = {p['past']:g}, T+ = {p['future']:g}): " + "; ".join(short))
    for key in ("past", "future"):
        p[key] = float(math.ceil(p[key] / p["step"] - 1e-9) * p["step"])


def preset_names() -> list:
    return sorted(PRESETS)

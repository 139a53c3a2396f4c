"""JSON scenario and sweep configuration.

Keys mirror the dataclass fields of `ScenarioConfig` and its parts; unknown
keys are rejected so that typos surface instead of silently using defaults.
Relative file paths are resolved against the config file's directory.
"""
from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .economics import Policy, PricingParams
from .engine import DemandSpec, DriverSpec, NetworkSpec, ScenarioConfig
from .shareability import TravellerPrefs

SECTIONS = {
    "network": NetworkSpec,
    "demand": DemandSpec,
    "drivers": DriverSpec,
    "pricing": PricingParams,
    "traveller": TravellerPrefs,
}
TOP_LEVEL = {"max_degree", "pooling_window", "horizon", "seed"}
PATH_FIELDS = {("network", "nodes_file"), ("network", "edges_file"), ("demand", "file")}
TUPLE_FIELDS = {("drivers", "pooling_multiplier"), ("drivers", "positions")}


class ConfigError(ValueError):
    def __init__(self, message, line=None, path=None):
        self.message = message
        self.line = line
        self.path = path
        loc = f"{path}:" if path else ""
        loc += f"{line}:" if line else ""
        super().__init__(f"{loc} {message}" if loc else message)


class _Locator:
    """Best-effort mapping from a key to the line where it first appears."""

    def __init__(self, text):
        self.text = text

    def line_of(self, key, default=None):
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        if not m:
            return default
        return self.text.count("\n", 0, m.start()) + 1


def _load_json(text, path=None):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", e.lineno, path) from None


def _check_type(name, value, expected, loc):
    if expected is bool:
        ok = isinstance(value, bool)
    elif expected in (int,):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif expected is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    else:
        ok = isinstance(value, expected)
    if not ok:
        raise ConfigError(f"field '{name}' must be {expected.__name__}, got {value!r}",
                          loc.line_of(name.split(".")[-1]))


_FIELD_TYPES = {
    "rows": int, "cols": int, "edge_len": float, "speed_kmh": float,
    "nodes_file": str, "edges_file": str, "file": str,
    "rate": float, "patience": float,
    "count": int, "cost_per_km": float, "value_of_time": float, "choice_mode": str,
    "mnl_scale": float, "decline_allowed": bool, "pooling_multiplier": list, "positions": list,
    "fare_per_km": float, "discount": float, "commission": float, "policy": str,
    "willingness_to_share": float,
    "max_degree": int, "pooling_window": float, "horizon": float, "seed": int,
}


def _section(name, cls, data, loc, base_dir):
    if not isinstance(data, dict):
        raise ConfigError(f"section '{name}' must be an object", loc.line_of(name))
    allowed = {f.name for f in dataclasses.fields(cls)} - {"driver_id"}
    kwargs = {}
    for key, value in data.items():
        if key not in allowed:
            raise ConfigError(f"unknown key '{name}.{key}'", loc.line_of(key, loc.line_of(name)))
        if value is None:
            continue
        _check_type(f"{name}.{key}", value, _FIELD_TYPES[key], loc)
        if (name, key) in PATH_FIELDS and base_dir is not None:
            value = str((base_dir / value)) if not Path(value).is_absolute() else value
        if (name, key) in TUPLE_FIELDS:
            value = tuple(value)
        kwargs[key] = value
    return kwargs


def parse_scenario(data, text="", base_dir=None, require_policy=True, path=None) -> ScenarioConfig:
    loc = _Locator(text)
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", 1, path)
    try:
        parts = {}
        top = {}
        for key, value in data.items():
            if key in SECTIONS:
                parts[key] = _section(key, SECTIONS[key], value, loc, base_dir)
            elif key in TOP_LEVEL:
                _check_type(key, value, _FIELD_TYPES[key], loc)
                top[key] = value
            else:
                raise ConfigError(f"unknown key '{key}'", loc.line_of(key))
        pricing = parts.get("pricing", {})
        if require_policy and "policy" not in pricing:
            raise ConfigError("missing required field 'pricing.policy'",
                              loc.line_of("pricing", 1))
        if "policy" in pricing:
            try:
                Policy(pricing["policy"])
            except ValueError:
                raise ConfigError(
                    f"field 'pricing.policy' must be one of {', '.join(p.value for p in Policy)}, "
                    f"got {pricing['policy']!r}", loc.line_of("policy")) from None
        try:
            built = {k: SECTIONS[k](**v) for k, v in parts.items()}
            return ScenarioConfig(**built, **top)
        except (ValueError, TypeError) as e:
            raise ConfigError(str(e), 1) from None
    except ConfigError as e:
        e.path = path
        e.args = (f"{path}:{e.line}: {e.message}" if path else str(e),)
        raise


def load_scenario(path, policy=None, seed=None) -> ScenarioConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    data = _load_json(text, path)
    if isinstance(data, dict):
        if policy is not None:
            data.setdefault("pricing", {})
            if isinstance(data["pricing"], dict):
                data["pricing"]["policy"] = str(policy)
        if seed is not None:
            data["seed"] = seed
    return parse_scenario(data, text, path.parent, path=path)


def with_overrides(cfg: ScenarioConfig, policy=None, n_drivers=None, rate=None, seed=None):
    if policy is not None:
        cfg = dataclasses.replace(cfg, pricing=dataclasses.replace(cfg.pricing, policy=Policy(policy)))
    if n_drivers is not None:
        drivers = dataclasses.replace(cfg.drivers, count=n_drivers)
        if drivers.positions is not None and len(drivers.positions) != n_drivers:
            drivers = dataclasses.replace(drivers, positions=None)
        cfg = dataclasses.replace(cfg, drivers=drivers)
    if rate is not None:
        cfg = dataclasses.replace(cfg, demand=dataclasses.replace(cfg.demand, rate=rate))
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg


@dataclass(frozen=True)
class SweepSpec:
    drivers: tuple
    rates: tuple
    policies: tuple
    seeds: int = 1
    base: ScenarioConfig = field(default_factory=ScenarioConfig)

    def cells(self):
        """(policy, n_drivers, rate, seed) in output order."""
        seeds = [self.base.seed + k for k in range(self.seeds)]
        keys = [(Policy(p), n, r, s) for p in self.policies for n in self.drivers
                for r in self.rates for s in seeds]
        return sorted(set(keys), key=lambda c: (c[0].value, c[1], c[2], c[3]))


def load_sweep(path) -> SweepSpec:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    data = _load_json(text, path)
    loc = _Locator(text)
    if not isinstance(data, dict):
        raise ConfigError("sweep must be a JSON object", 1, path)
    allowed = {"drivers", "rates", "policies", "seeds", "base"}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}'", loc.line_of(key), path)
    for key in ("drivers", "rates", "policies"):
        value = data.get(key)
        if not isinstance(value, list) or not value:
            raise ConfigError(f"'{key}' must be a non-empty list", loc.line_of(key, 1), path)
    if not all(isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in data["drivers"]):
        raise ConfigError("'drivers' entries must be positive integers", loc.line_of("drivers"), path)
    if not all(isinstance(r, (int, float)) and not isinstance(r, bool) and r > 0 for r in data["rates"]):
        raise ConfigError("'rates' entries must be positive numbers", loc.line_of("rates"), path)
    for p in data["policies"]:
        try:
            Policy(p)
        except ValueError:
            raise ConfigError(f"unknown policy {p!r}", loc.line_of("policies"), path) from None
    seeds = data.get("seeds", 1)
    if not isinstance(seeds, int) or isinstance(seeds, bool) or seeds < 1:
        raise ConfigError("'seeds' must be an integer >= 1", loc.line_of("seeds", 1), path)
    base = parse_scenario(data.get("base", {}), text, path.parent, require_policy=False, path=path)
    return SweepSpec(tuple(data["drivers"]), tuple(float(r) for r in data["rates"]),
                     tuple(data["policies"]), seeds, base)

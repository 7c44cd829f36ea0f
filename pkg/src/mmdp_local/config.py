"""YAML run configuration: schema checks and scenario construction."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError
from .local_search import SearchConfig
from .scenarios import GridConfig, PatrolConfig, build_grid, build_patrol, random_mmdp

SCHEMA_VERSION = 1

_SCENARIO_KEYS = {
    "grid": (("n_robots", "grid_side", "targets", "starts", "c", "delta_scenario", "K", "eta"), ()),
    "patrol": (("n_units", "n_adversaries", "n_locations", "c", "d", "delta_scenario", "beta", "eta"),
               ("unit_spread", "adversary_policy")),
    "random": (("state_sizes", "action_sizes", "coupling", "seed"), ("n_targets", "reward")),
}
_TOP_KEYS = {"schema_version", "seed", "trials", "solver", "analysis", "scenario", "rows",
             "baseline_cache"}
_SOLVER_KEYS = {"tol", "max_iter", "epsilon", "max_rounds", "companion_mode",
                "n_companion_samples", "refresh_transition", "improvement_atol"}
_ANALYSIS_KEYS = {"delta_mode", "delta_budget", "lambda_samples", "oracle", "oracle_cap"}


@dataclass(frozen=True)
class Analysis:
    delta_mode: str = "exhaustive"
    delta_budget: int = 4096
    lambda_samples: int = 200
    oracle: bool = False
    oracle_cap: int = 1_000_000


@dataclass(frozen=True)
class RunConfig:
    """Validated contents of a config file."""

    seed: int
    trials: int
    tol: float
    max_iter: int
    search: SearchConfig
    analysis: Analysis
    scenario: dict | None
    rows: list = field(default_factory=list)
    baseline_cache: str | None = None


def _check_keys(section, allowed, where):
    if not isinstance(section, dict):
        raise ConfigError(where or "<root>", "expected a mapping")
    for k in section:
        if k not in allowed:
            raise ConfigError(f"{where}.{k}" if where else k, "unknown key")


def _typed(section, key, kind, where, default=None, required=False):
    path = f"{where}.{key}" if where else key
    if key not in section:
        if required:
            raise ConfigError(path, "missing required key")
        return default
    val = section[key]
    try:
        if kind is bool:
            if not isinstance(val, bool):
                raise TypeError
            return val
        if kind is int:
            if isinstance(val, bool) or float(val) != int(val):
                raise TypeError
            return int(val)
        if kind is float:
            if isinstance(val, bool):
                raise TypeError
            return float(val)
        if kind is str:
            if not isinstance(val, str):
                raise TypeError
            return val
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected {kind.__name__}, got {val!r}") from None
    return val


def parse_config(raw: dict) -> RunConfig:
    """Validate a parsed YAML document. Raises :class:`ConfigError` naming the field."""
    if raw is None:
        raw = {}
    _check_keys(raw, _TOP_KEYS, "")
    version = _typed(raw, "schema_version", int, "", required=True)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version}")
    seed = _typed(raw, "seed", int, "", default=0)
    trials = _typed(raw, "trials", int, "", default=100)
    if trials < 1:
        raise ConfigError("trials", "must be >= 1")
    solver = raw.get("solver") or {}
    _check_keys(solver, _SOLVER_KEYS, "solver")
    tol = _typed(solver, "tol", float, "solver", default=1e-9)
    if not tol > 0:
        raise ConfigError("solver.tol", "must be > 0")
    max_iter = _typed(solver, "max_iter", int, "solver", default=100_000)
    try:
        search = SearchConfig(
            epsilon=_typed(solver, "epsilon", float, "solver", default=0.0),
            max_rounds=_typed(solver, "max_rounds", int, "solver", default=500),
            companion_mode=_typed(solver, "companion_mode", str, "solver", default="uniform"),
            tol=tol,
            seed=seed,
            n_companion_samples=_typed(solver, "n_companion_samples", int, "solver"),
            refresh_transition=_typed(solver, "refresh_transition", bool, "solver", default=False),
            improvement_atol=_typed(solver, "improvement_atol", float, "solver", default=1e-8),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("solver", str(exc)) from None
    an = raw.get("analysis") or {}
    _check_keys(an, _ANALYSIS_KEYS, "analysis")
    analysis = Analysis(
        delta_mode=_typed(an, "delta_mode", str, "analysis", default="exhaustive"),
        delta_budget=_typed(an, "delta_budget", int, "analysis", default=4096),
        lambda_samples=_typed(an, "lambda_samples", int, "analysis", default=200),
        oracle=_typed(an, "oracle", bool, "analysis", default=False),
        oracle_cap=_typed(an, "oracle_cap", int, "analysis", default=1_000_000),
    )
    if analysis.delta_mode not in ("exhaustive", "sampled"):
        raise ConfigError("analysis.delta_mode", "must be 'exhaustive' or 'sampled'")
    scenario = raw.get("scenario")
    if scenario is not None:
        check_scenario(scenario, "scenario")
    rows = raw.get("rows") or []
    if not isinstance(rows, list):
        raise ConfigError("rows", "expected a list")
    for k, row in enumerate(rows):
        check_scenario(row, f"rows[{k}]")
    cache = _typed(raw, "baseline_cache", str, "")
    return RunConfig(seed, trials, tol, max_iter, search, analysis, scenario, rows, cache)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    return parse_config(raw)


def check_scenario(section, where):
    """Validate a scenario mapping by building its config object."""
    _check_keys(section, {"kind"} | _all_keys(section, where), where)
    required, _ = _SCENARIO_KEYS[section["kind"]]
    for k in required:
        if k not in section:
            raise ConfigError(f"{where}.{k}", "missing required key")
    _scenario_config(section, where)


def _all_keys(section, where):
    if not isinstance(section, dict):
        raise ConfigError(where, "expected a mapping")
    kind = section.get("kind")
    if kind not in _SCENARIO_KEYS:
        raise ConfigError(f"{where}.kind", f"must be one of {sorted(_SCENARIO_KEYS)}, got {kind!r}")
    req, opt = _SCENARIO_KEYS[kind]
    return set(req) | set(opt)


def _scenario_config(section, where):
    kind = section["kind"]
    args = {k: v for k, v in section.items() if k != "kind"}
    try:
        if kind == "grid":
            for k in ("n_robots", "grid_side", "K"):
                args[k] = _typed(section, k, int, where, required=True)
            for k in ("c", "delta_scenario", "eta"):
                args[k] = _typed(section, k, float, where, required=True)
            for k in ("targets", "starts"):
                if not isinstance(section[k], (list, tuple)):
                    raise ConfigError(f"{where}.{k}", "expected a list of cell indices")
            return GridConfig(**args)
        if kind == "patrol":
            for k in ("n_units", "n_adversaries", "n_locations"):
                args[k] = _typed(section, k, int, where, required=True)
            for k in ("c", "d", "delta_scenario", "beta", "eta"):
                args[k] = _typed(section, k, float, where, required=True)
            return PatrolConfig(**args)
        # random
        for k in ("state_sizes", "action_sizes"):
            v = section[k]
            if not isinstance(v, list) or not v or any(not isinstance(x, int) or x < 1 for x in v):
                raise ConfigError(f"{where}.{k}", "expected a non-empty list of positive integers")
        if len(section["state_sizes"]) != len(section["action_sizes"]):
            raise ConfigError(f"{where}.action_sizes", "length must match state_sizes")
        coupling = _typed(section, "coupling", float, where, required=True)
        if not 0 <= coupling <= 1:
            raise ConfigError(f"{where}.coupling", "must lie in [0, 1]")
        _typed(section, "seed", int, where, required=True)
        if section.get("reward", "coverage") not in ("coverage", "random"):
            raise ConfigError(f"{where}.reward", "must be 'coverage' or 'random'")
        return dict(section)
    except ConfigError as exc:
        if exc.field.startswith(where):
            raise
        raise ConfigError(f"{where}.{exc.field}", str(exc).split(": ", 1)[-1]) from None


def build_scenario(section, where="scenario"):
    """``(mdp, spec)`` for a validated scenario mapping."""
    cfg = _scenario_config(section, where)
    if isinstance(cfg, GridConfig):
        return build_grid(cfg)
    if isinstance(cfg, PatrolConfig):
        return build_patrol(cfg)
    rng = np.random.default_rng(cfg["seed"])
    mdp, spec, _, _ = random_mmdp(rng, tuple(cfg["state_sizes"]), tuple(cfg["action_sizes"]),
                                  coupling=cfg["coupling"], n_targets=cfg.get("n_targets", 2),
                                  reward=cfg.get("reward", "coverage"))
    return mdp, spec


def describe(section) -> str:
    """Short human-readable label for a scenario row."""
    kind = section["kind"]
    if kind == "grid":
        return (f"grid N={section['n_robots']} B={len(section['targets'])} "
                f"L={section['grid_side']} targets={tuple(section['targets'])} "
                f"starts={tuple(section['starts'])}")
    if kind == "patrol":
        return (f"patrol U={section['n_units']} V={section['n_adversaries']} "
                f"L={section['n_locations']}")
    return f"random sizes={tuple(section['state_sizes'])} coupling={section['coupling']}"


def scenario_key(section) -> str:
    """Stable hash of a scenario mapping, used to key cached baselines."""
    blob = json.dumps(section, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]

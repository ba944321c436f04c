"""
This module provides helper functions for the DP-GD lab,
primarily for resolving experiment configurations and guarding compute budgets.
"""
import copy
import math
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import yaml

# Use absolute imports for better testability
try:
    from .presets import BASE_CONFIG, DEFAULT_PRESETS, EXPERIMENT_PRESETS
    from .config import Config
    from .errors import ComputeBudgetError, ConfigError
except ImportError:
    # Fallback for when running tests
    import sys
    sys.path.insert(0, str(Path(__file__).parent))
    from presets import BASE_CONFIG, DEFAULT_PRESETS, EXPERIMENT_PRESETS
    from config import Config
    from errors import ComputeBudgetError, ConfigError


def deep_merge(base: Mapping[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively merge ``update`` into a copy of ``base``."""
    merged = copy.deepcopy(dict(base))
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config_file(path: Path) -> Dict[str, Any]:
    """
    Load a YAML (or JSON) experiment configuration.
    A ``config.json`` written by a previous run is unwrapped to its ``config`` entry.
    """
    try:
        with open(path, "r", encoding="utf-8") as file:
            loaded = yaml.safe_load(file)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as e:
        raise ConfigError(f"could not parse {path}: {e}")
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"{path} must contain a mapping at the top level")
    if "config" in loaded and "config_hash" in loaded:
        return loaded["config"]
    return loaded


def apply_override(config: Dict[str, Any], assignment: str) -> Dict[str, Any]:
    """
    Apply one ``key.path=value`` override. The value is parsed as YAML,
    so numbers, lists and null work as expected.
    """
    if "=" not in assignment:
        raise ConfigError(f"override '{assignment}' must look like key.path=value")
    key_path, raw = assignment.split("=", 1)
    keys = [k for k in key_path.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override '{assignment}' has an empty key")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"could not parse value in override '{assignment}': {e}")

    node = config
    for key in keys[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[keys[-1]] = value
    return config


def resolve_config(experiment: str, preset: Optional[str] = None, config_path: Optional[Path] = None,
                   overrides: Optional[Mapping[str, Any]] = None,
                   assignments: Optional[List[str]] = None) -> Dict[str, Any]:
    """
    Build the full configuration for one experiment:
    base <- preset <- config file <- CLI overrides <- --set assignments.

    Raises:
        ConfigError: For an unknown preset or a preset of another experiment kind
    """
    if experiment not in Config.EXPERIMENT_KINDS:
        raise ConfigError(f"Unknown experiment kind: {experiment}")

    resolved = deep_merge(BASE_CONFIG, {"experiment": experiment})
    if preset is None and config_path is None:
        preset = DEFAULT_PRESETS.get(experiment)
    if preset is not None:
        if preset not in EXPERIMENT_PRESETS:
            raise ConfigError(f"No preset found for name: {preset}")
        preset_config = EXPERIMENT_PRESETS[preset]
        if preset_config.get("experiment", experiment) != experiment:
            raise ConfigError(f"preset '{preset}' belongs to '{preset_config['experiment']}', not '{experiment}'")
        resolved = deep_merge(resolved, preset_config)
        logging.info("[Helper] Applied preset: %s", preset)
    if config_path is not None:
        resolved = deep_merge(resolved, load_config_file(config_path))
        logging.info("[Helper] Loaded config file: %s", config_path)
    if overrides:
        resolved = deep_merge(resolved, overrides)
    for assignment in assignments or []:
        apply_override(resolved, assignment)
    resolved["experiment"] = experiment
    return resolved


def _ode_steps(config: Mapping[str, Any]) -> int:
    # Lower bound: the stability limit can only refine the grid
    return int(math.ceil(1.0 / float(config["ode"]["dt"]) - 1e-9))


def _eta0_searches(config: Mapping[str, Any]) -> int:
    """Integrations spent by one optimize_eta0 call."""
    return int(config["search"]["grid_points"]) + Config.ETA0_REFINE_EVALS


def _harmonic_tunings(config: Mapping[str, Any]) -> int:
    """Integrations spent by one tune_harmonic call, or by the theory defaults."""
    if config["search"].get("theory_defaults"):
        return 1
    return Config.HARMONIC_GRID_POINTS ** 2 + 2 + 24


def estimate_cost(config: Mapping[str, Any]) -> float:
    """
    Estimated work of an experiment in mode-steps.

    Simulation counts samples x dimension x trials; each ODE integration counts
    dimension x time steps, with the step count taken at its 1/dt lower bound.
    """
    kind = config["experiment"]
    trials = int(config["sim"]["trials"])
    gamma = float(config["model"]["gamma"])
    d = int(config["model"]["d"])
    steps = _ode_steps(config)

    if kind == "ode-vs-sim":
        section = config["ode_vs_sim"]
        alphas = len(section["alphas"])
        sim = sum(alphas * trials * dim * round(dim / gamma) for dim in section["dims"])
        ode = sum(alphas * dim * steps for dim in section["dims"])
        return float(sim + ode)
    if kind == "heatmap":
        section = config["heatmap"]
        maps = len(section["alphas"]) * len(section["gammas"])
        cells = int(section["points"]) ** 2 + 1
        if section["engine"] == "sim":
            return float(sum(len(section["alphas"]) * cells * trials * d * round(d / float(g))
                             for g in section["gammas"]))
        return float(maps * cells * d * steps)
    if kind == "schedules-compare":
        section = config["schedules"]
        per_n = len(section["alphas"]) * _eta0_searches(config)
        if section["harmonic"]:
            per_n += _harmonic_tunings(config)
        cost = len(section["n_factors"]) * per_n * d * steps
        if section["engine"] == "sim":
            runs = len(section["alphas"]) + (1 if section["harmonic"] else 0)
            cost += sum(runs * trials * d * int(f) * d for f in section["n_factors"])
        return float(cost)
    if kind == "scaling-law":
        section = config["scaling"]
        sweeps = len(section["cases"]) * int(section["points"])
        return float(sweeps * _eta0_searches(config) * d * steps)
    return 0.0


def _is_within_budget(cost: float, budget: float = Config.COMPUTE_BUDGET) -> bool:
    """Return True if the estimated cost fits in the compute budget."""
    return cost <= budget


def check_budget(cost: float, force: bool = False, budget: float = Config.COMPUTE_BUDGET) -> None:
    """
    Refuse runs whose estimated cost exceeds the budget unless forced.

    Raises:
        ComputeBudgetError: If the run is too large and ``force`` is False
    """
    if _is_within_budget(cost, budget):
        logging.debug("[Helper] Estimated cost %.3e within budget %.3e", cost, budget)
        return
    if force:
        logging.warning("[Helper] Estimated cost %.3e exceeds budget %.3e; continuing (--force)", cost, budget)
        return
    raise ComputeBudgetError(
        f"Estimated cost {cost:.3e} exceeds the compute budget {budget:.3e}; pass --force to run anyway.")

"""
Configuration validation for the DP-GD lab.
"""
import math
from pathlib import Path
from typing import Any, List, Mapping, Optional, Tuple

# Use absolute imports for better testability
try:
    from .config import Config
    from .logging_config import get_logger
    from .modul_schedule import SCHEDULE_VARIANTS
    from .modul_spectrum import ENERGY_MODES, SPECTRUM_VARIANTS
except ImportError:
    # Fallback for when running tests
    import sys
    sys.path.insert(0, str(Path(__file__).parent))
    from config import Config
    from logging_config import get_logger
    from modul_schedule import SCHEDULE_VARIANTS
    from modul_spectrum import ENERGY_MODES, SPECTRUM_VARIANTS


def validate_config() -> List[Tuple[str, str]]:
    """
    Validate the configuration settings.

    Returns:
        List of tuples containing (validation_type, message) for any issues found
    """
    issues = []

    # Validate required directories and files
    required_paths = [
        ("OUTPUT_DIR", Config.OUTPUT_DIR),
        ("LOGS_DIR", Config.LOGS_DIR),
        ("LOG_FILE", Config.LOG_FILE)
    ]

    for path_name, path in required_paths:
        if not isinstance(path, Path):
            issues.append(("CONFIG", f"{path_name} is not a Path object"))
        elif not path.is_absolute():
            issues.append(("CONFIG", f"{path_name} is not an absolute path"))

    # Validate numeric values
    numeric_configs = [
        ("MC_SAMPLES", Config.MC_SAMPLES, 10**4, 10**8),
        ("RECORD_GRID", Config.RECORD_GRID, 2, 10**6),
        ("ETA0_GRID_POINTS", Config.ETA0_GRID_POINTS, 1, 10**4),
        ("N_JOBS", Config.N_JOBS, -1, 1024)
    ]

    for config_name, value, min_val, max_val in numeric_configs:
        if not isinstance(value, int):
            issues.append(("CONFIG", f"{config_name} is not an integer"))
        elif not min_val <= value <= max_val:
            issues.append(("CONFIG", f"{config_name} ({value}) is outside valid range [{min_val}, {max_val}]"))

    positive_configs = [
        ("ODE_DT", Config.ODE_DT),
        ("COMPUTE_BUDGET", Config.COMPUTE_BUDGET),
        ("HEATMAP_CAP", Config.HEATMAP_CAP)
    ]

    for config_name, value in positive_configs:
        if not isinstance(value, (int, float)) or not value > 0:
            issues.append(("CONFIG", f"{config_name} must be a positive number"))

    if abs(sum(Config.DEFAULT_SPLIT) - 1.0) > 1e-9:
        issues.append(("CONFIG", "DEFAULT_SPLIT does not sum to 1"))

    return issues


def _number(value: Any) -> Optional[float]:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", ".inf", "infinity"):
        return math.inf
    return None


def validate_experiment_config(config: Mapping[str, Any]) -> List[Tuple[str, str]]:
    """
    Validate a resolved experiment configuration.

    Returns:
        List of tuples containing (validation_type, message) for any issues found
    """
    issues = []

    kind = config.get("experiment")
    if kind not in Config.EXPERIMENT_KINDS:
        issues.append(("EXPERIMENT", f"Unknown experiment kind: {kind}"))

    privacy = config.get("privacy", {})
    rho = _number(privacy.get("rho"))
    if rho is None or not rho > 0:
        issues.append(("PRIVACY", f"rho must be positive, got {privacy.get('rho')!r}"))
    c = _number(privacy.get("c"))
    if c is None or not c > 0:
        issues.append(("PRIVACY", f"c must be positive or inf, got {privacy.get('c')!r}"))
    for delta in privacy.get("deltas", []):
        value = _number(delta)
        if value is None or not 0 < value < 1:
            issues.append(("PRIVACY", f"delta must lie in (0, 1), got {delta!r}"))

    model = config.get("model", {})
    zeta = _number(model.get("zeta"))
    if zeta is None or zeta < 0 or math.isinf(zeta):
        issues.append(("MODEL", f"zeta must be finite and >= 0, got {model.get('zeta')!r}"))
    d = model.get("d")
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        issues.append(("MODEL", f"d must be a positive integer, got {d!r}"))
    gamma = _number(model.get("gamma"))
    if gamma is None or not 0 < gamma < math.inf:
        issues.append(("MODEL", f"gamma must be positive and finite, got {model.get('gamma')!r}"))

    schedule = config.get("schedule", {})
    if schedule.get("variant") not in SCHEDULE_VARIANTS:
        issues.append(("SCHEDULE", f"Unknown schedule variant: {schedule.get('variant')}"))

    spectrum = config.get("spectrum", {})
    if spectrum.get("variant") not in SPECTRUM_VARIANTS:
        issues.append(("SPECTRUM", f"Unknown spectrum variant: {spectrum.get('variant')}"))
    target = config.get("target", {})
    if target.get("mode") not in ENERGY_MODES:
        issues.append(("SPECTRUM", f"Unknown target mode: {target.get('mode')}"))

    split = config.get("data", {}).get("split", Config.DEFAULT_SPLIT)
    fractions = [_number(s) for s in split] if isinstance(split, (list, tuple)) else []
    if len(fractions) != 3 or any(f is None or not f > 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        issues.append(("DATA", f"split must be three positive fractions summing to 1, got {split!r}"))

    trials = config.get("sim", {}).get("trials")
    if not isinstance(trials, int) or isinstance(trials, bool) or trials < 1:
        issues.append(("SIM", f"trials must be a positive integer, got {trials!r}"))

    return issues


def run_validations(experiment_config: Optional[Mapping[str, Any]] = None) -> bool:
    """
    Run all validations and log any issues.

    Returns:
        True if all validations pass, False otherwise
    """
    logger = get_logger(__name__)

    # Run configuration validation
    all_issues = validate_config()
    if experiment_config is not None:
        all_issues += validate_experiment_config(experiment_config)

    if all_issues:
        logger.warning("Configuration validation found %d issues:", len(all_issues))
        for issue_type, message in all_issues:
            logger.warning("  [%s] %s", issue_type, message)
        return False
    else:
        logger.info("All configuration validations passed")
        return True

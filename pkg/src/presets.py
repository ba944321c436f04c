"""
This module defines the named experiment presets of the DP-GD lab.

Every experiment starts from BASE_CONFIG; a preset is a partial mapping merged
on top of it. The fig* presets carry the reference parameter choices,
the smoke presets are tiny instances for quick checks.
"""

# Base configuration shared by every experiment kind. ``None`` means "derive
# from the rest of the configuration".
BASE_CONFIG = {
    "experiment": "ode-vs-sim",
    "seed": 0,
    "output_dir": None,
    "spectrum": {"variant": "identity", "phi": 0.0, "values_csv": None},
    "target": {"mode": "isotropic", "psi": 0.0, "norm_sq": 1.0},
    "schedule": {"variant": "polynomial", "alpha": 0.0, "eta0": 3.0},
    "model": {"d": 1000, "gamma": 0.1, "zeta": 0.3},
    "privacy": {"rho": 1.0, "c": 1.0, "deltas": [1e-5, 1e-6, 1e-8]},
    "ode": {"dt": 1e-3},
    "sim": {"trials": 10, "record_grid": 200},
    "search": {"grid_points": 40, "eta_min": 0.1, "theory_defaults": False},
    "ode_vs_sim": {"dims": [10, 100, 1000], "alphas": [0.0, 0.5]},
    "heatmap": {
        "gammas": [0.01, 0.001], "alphas": [0.0, 0.5],
        "c_min": 0.01, "c_max": 10.0, "eta0_min": 0.1, "eta0_max": None,
        "points": 15, "cap": 1.0, "engine": "ode",
    },
    "schedules": {"n_factors": [10, 100, 1000, 10000], "alphas": [0.0, 0.5, 1.0, 2.0],
                  "harmonic": True, "engine": "ode"},
    "scaling": {
        "cases": [[0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.5], [0.25, 0.5, 0.0, 0.0], [0.25, 0.5, 0.0, 0.5]],
        "log10_gamma": [-3.5, -1.5], "points": 7, "tolerance": 0.05,
    },
    "privacy_report": {"n": 1000},
    "data": {"path": None, "label_column": None, "split": [0.6, 0.2, 0.2]},
}

# Named presets; the key "experiment" selects the subcommand they belong to.
EXPERIMENT_PRESETS = {
    "fig1": {
        "experiment": "ode-vs-sim",
        "model": {"d": 1000, "gamma": 0.1, "zeta": 0.3},
        "privacy": {"rho": 1.0, "c": 1.0},
        "schedule": {"variant": "polynomial", "eta0": 3.0},
        "sim": {"trials": 10},
        "ode_vs_sim": {"dims": [10, 100, 1000], "alphas": [0.0, 0.5]},
    },
    "fig1-uniform": {
        "experiment": "ode-vs-sim",
        "spectrum": {"variant": "uniform_0_2"},
        "model": {"d": 1000, "gamma": 0.1, "zeta": 0.3},
        "privacy": {"rho": 1.0, "c": 1.0},
        "schedule": {"variant": "polynomial", "eta0": 3.0},
        "ode_vs_sim": {"dims": [1000], "alphas": [0.0, 0.5]},
    },
    "fig3": {
        "experiment": "scaling-law",
        "spectrum": {"variant": "power_law"},
        "target": {"mode": "power_aligned"},
        "model": {"d": 100000, "zeta": 0.3},
        "privacy": {"c": 0.1},
        "search": {"grid_points": 16},
    },
    "fig4": {
        "experiment": "scaling-law",
        "spectrum": {"variant": "power_law"},
        "target": {"mode": "power_aligned"},
        "model": {"d": 10000, "zeta": 0.3},
        "privacy": {"c": 0.1},
        "search": {"grid_points": 16},
        "scaling": {"cases": [[0.8, 0.0, 10.0, 0.5], [0.8, 0.0, 1.0, 0.5], [0.8, 0.0, 2.0, 0.5]],
                    "tolerance": 0.07},
    },
    "fig5": {
        "experiment": "schedules-compare",
        "model": {"d": 100, "zeta": 0.3},
        "privacy": {"rho": 0.1, "c": 1.0},
        "schedules": {"n_factors": [10, 100, 1000, 10000]},
    },
    "fig6": {
        "experiment": "heatmap",
        "model": {"d": 100, "zeta": 0.3},
        "privacy": {"rho": 0.1},
        "heatmap": {"gammas": [0.01, 0.001], "alphas": [0.0, 0.5], "points": 15},
    },
    "privacy": {
        "experiment": "privacy-report",
        "schedule": {"variant": "polynomial", "alpha": 0.5, "eta0": 3.0},
        "privacy": {"rho": 1.0},
        "privacy_report": {"n": 1000},
    },
    "smoke-ode-vs-sim": {
        "experiment": "ode-vs-sim",
        "sim": {"trials": 2, "record_grid": 50},
        "ode_vs_sim": {"dims": [10], "alphas": [0.0, 0.5]},
    },
    "smoke-heatmap": {
        "experiment": "heatmap",
        "model": {"d": 10, "zeta": 0.3},
        "privacy": {"rho": 0.1},
        "heatmap": {"gammas": [0.1], "alphas": [0.0], "points": 2},
    },
    "smoke-schedules": {
        "experiment": "schedules-compare",
        "model": {"d": 10, "zeta": 0.3},
        "privacy": {"rho": 0.1},
        "search": {"grid_points": 8},
        "schedules": {"n_factors": [10], "alphas": [0.0, 0.5]},
    },
    "smoke-scaling": {
        "experiment": "scaling-law",
        "spectrum": {"variant": "power_law"},
        "target": {"mode": "power_aligned"},
        "model": {"d": 200, "zeta": 0.3},
        "privacy": {"c": 0.1},
        "search": {"grid_points": 8},
        "scaling": {"cases": [[0.0, 0.0, 0.0, 0.0]], "log10_gamma": [-2.0, -1.0], "points": 3},
    },
}

# Preset used by each subcommand when neither --preset nor --config is given.
DEFAULT_PRESETS = {
    "ode-vs-sim": "fig1",
    "heatmap": "fig6",
    "schedules-compare": "fig5",
    "scaling-law": "fig3",
    "privacy-report": "privacy",
    "real-data": None,
}

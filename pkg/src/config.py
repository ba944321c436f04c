"""
This module provides the centralized configuration for the DP-GD lab.
It defines file paths, numerical defaults and CLI exit codes.
"""
import os
from pathlib import Path

class Config:
    """Centralized configuration for the DP-GD lab"""

    # --- Core Paths ---
    BASE_DIR = Path(__file__).parent.parent.resolve()
    OUTPUT_DIR = BASE_DIR / "results"
    LOGS_DIR = BASE_DIR / "logs"
    LOG_FILE = LOGS_DIR / "dpgd_lab.log"

    # --- Reproducibility ---
    DEFAULT_SEED = 0
    N_JOBS = int(os.environ.get("DPGD_N_JOBS", "1"))

    # --- Clipping factors ---
    MC_SAMPLES = 10**6

    # --- ODE engine ---
    ODE_DT = 1e-3
    ODE_STABILITY_LIMIT = 2.5   # RK4 real-axis stability is ~2.78
    NEGATIVE_ENERGY_TOL = 1e-10

    # --- Simulation ---
    RECORD_GRID = 200
    SIM_BLOCK_SIZE = 512
    DEFAULT_SPLIT = (0.6, 0.2, 0.2)

    # --- Hyper-parameter search ---
    ETA0_GRID_POINTS = 40
    ETA0_GRID_MIN = 0.1
    ETA0_REFINE_EVALS = 12
    ETA0_REFINE_XATOL = 1e-3
    HARMONIC_GRID_POINTS = 9
    SLOPE_TOLERANCE = 0.05
    SLOW_FIT_DIMENSION = 10**5

    # --- Experiments ---
    HEATMAP_CAP = 1.0
    COMPUTE_BUDGET = 1e9
    EXPERIMENT_KINDS = [
        "ode-vs-sim", "heatmap", "schedules-compare",
        "scaling-law", "privacy-report", "real-data",
    ]

    # --- Exit codes ---
    EXIT_OK = 0
    EXIT_CONFIG_ERROR = 2
    EXIT_NUMERICAL_ERROR = 3

    @classmethod
    def setup_directories(cls):
        """Create necessary directories if they don't exist."""
        cls.OUTPUT_DIR.mkdir(exist_ok=True)
        cls.LOGS_DIR.mkdir(exist_ok=True)

"""
Deterministic-equivalent risk dynamics of clipped DP-GD.

The engine integrates d coupled mode-energy ODEs

    dD_i/dt = -2 lambda_i eta_bar mu_c(R) D_i
              + lambda_i eta_bar^2 nu_c(R) (R + zeta^2/2) gamma
              + 2 c^2 gamma^2 noise_rate(t) / rho^2,

with R = (1/d) sum lambda_i D_i and eta_bar = min(eta~, 2/gamma), using a
classical fixed-step RK4 scheme. Gamma(t) = int eta_bar mu_c(R) ds is carried
as an extra state through the same stages.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import pandas as pd

try:
    from .config import Config
    from .errors import DomainError, OdeInstabilityError
    from .modul_clipping import mu_c, nu_c
    from .modul_schedule import Schedule, crossing_time, eta_tilde, eta_tilde_sq, noise_rate
    from .modul_spectrum import initial_risk, kernels
except ImportError:
    import sys
    from pathlib import Path
    sys.path.insert(0, str(Path(__file__).parent))
    from config import Config
    from errors import DomainError, OdeInstabilityError
    from modul_clipping import mu_c, nu_c
    from modul_schedule import Schedule, crossing_time, eta_tilde, eta_tilde_sq, noise_rate
    from modul_spectrum import initial_risk, kernels


@dataclass(frozen=True, eq=False)
class OdeProblem:
    """Everything the deterministic equivalent needs, with gamma = d/n supplied by the caller."""
    lam: np.ndarray
    D0: np.ndarray
    schedule: Schedule
    c: float
    rho: float
    gamma: float
    zeta: float

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"clipping constant must be positive, got {self.c}")
        if not self.rho > 0:
            raise DomainError(f"rho must be positive, got {self.rho}")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise DomainError(f"gamma must be finite and non-negative, got {self.gamma}")
        if self.zeta < 0:
            raise DomainError(f"zeta must be non-negative, got {self.zeta}")
        if np.shape(self.lam) != np.shape(self.D0):
            raise DomainError("eigenvalues and mode energies must have the same length")

    @property
    def d(self) -> int:
        return int(np.size(self.lam))

    @property
    def step_cap(self) -> float:
        """Upper bound 2/gamma on the effective learning rate."""
        return math.inf if self.gamma == 0 else 2.0 / self.gamma

    @property
    def noise_coefficient(self) -> float:
        """2 c^2 gamma^2 / rho^2, the weight of the noise rate in every mode."""
        if math.isinf(self.rho):
            return 0.0
        if math.isinf(self.c):
            raise DomainError("unclipped runs have unbounded privacy noise; use rho = inf")
        return 2.0 * self.c ** 2 * self.gamma ** 2 / self.rho ** 2

    def with_schedule(self, schedule: Schedule) -> "OdeProblem":
        return OdeProblem(self.lam, self.D0, schedule, self.c, self.rho, self.gamma, self.zeta)


@dataclass(frozen=True, eq=False)
class RiskCurve:
    """Risk R(t_j) and Gamma(t_j) on a time grid, plus the risk of the released iterate."""
    grid: np.ndarray
    R: np.ndarray
    Gamma: np.ndarray
    final_private_risk: float

    def resample(self, times: np.ndarray) -> "RiskCurve":
        times = np.asarray(times, dtype=float)
        return RiskCurve(times, np.interp(times, self.grid, self.R),
                         np.interp(times, self.grid, self.Gamma), self.final_private_risk)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.grid, "R": self.R, "Gamma": self.Gamma})


def final_private_risk(R1: float, schedule: Schedule, c: float, gamma: float, rho: float) -> float:
    """
    Risk of the released iterate: R(1) + 2 c^2 eta~(1)^2 gamma^2 / rho^2.

    The last noise injection is macroscopic whenever eta~(1) > 0.
    """
    eta_end = eta_tilde(schedule, 1.0)
    if eta_end == 0 or math.isinf(rho):
        return float(R1)
    return float(R1 + 2.0 * c ** 2 * eta_end ** 2 * gamma ** 2 / rho ** 2)


def default_grid(problem: OdeProblem, dt: float = Config.ODE_DT) -> np.ndarray:
    """
    Uniform grid on [0, 1] with step at most ``dt``, refined for RK4 stability and
    with a node at the kink of eta_bar = min(eta~, 2/gamma).
    """
    if not dt > 0:
        raise DomainError(f"time step must be positive, got {dt}")
    eta_max = min(problem.schedule.eta0, problem.step_cap)
    mu_max = 1.0 if problem.zeta == 0 else mu_c(problem.c, 0.0, problem.zeta)
    stiffness = 2.0 * float(np.max(problem.lam)) * eta_max * mu_max
    step = dt
    if stiffness > 0:
        step = min(dt, Config.ODE_STABILITY_LIMIT / stiffness)
    steps = max(1, int(math.ceil(1.0 / step - 1e-9)))
    grid = np.linspace(0.0, 1.0, steps + 1)

    kink = crossing_time(problem.schedule, problem.step_cap)
    if kink is not None:
        grid = np.union1d(grid, [kink])
        logging.debug("[ODE] kink of eta_bar at t=%.6f added to the grid", kink)
    if step < dt:
        logging.debug("[ODE] step reduced from %.2e to %.2e for stability", dt, step)
    return grid


def _check_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise DomainError("time grid needs at least two points")
    if grid[0] != 0.0 or abs(grid[-1] - 1.0) > 1e-12:
        raise DomainError("time grid must start at 0 and end at 1")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("time grid must be strictly ascending")
    grid = grid.copy()
    grid[-1] = 1.0
    return grid


def _noise_rates(schedule: Schedule, start: np.ndarray, end: np.ndarray, times: np.ndarray) -> np.ndarray:
    """noise_rate at ``times``; non-finite values fall back to the step average."""
    rates = np.asarray(noise_rate(schedule, times), dtype=float)
    bad = ~np.isfinite(rates)
    if np.any(bad):
        average = (np.asarray(eta_tilde_sq(schedule, start)) - np.asarray(eta_tilde_sq(schedule, end))) / (end - start)
        rates = np.where(bad, average, rates)
    return rates


def _stage_tables(problem: OdeProblem, grid: np.ndarray):
    start, end = grid[:-1], grid[1:]
    mid = 0.5 * (start + end)
    cap = problem.step_cap
    eta_bar = [np.minimum(np.asarray(eta_tilde(problem.schedule, t)), cap) for t in (start, mid, end)]
    coef = problem.noise_coefficient
    if coef == 0.0:
        noise = [np.zeros_like(start)] * 3
    else:
        noise = [coef * _noise_rates(problem.schedule, start, end, t) for t in (start, mid, end)]
    return eta_bar, noise


Drift = Callable[[np.ndarray, float, float], Tuple[np.ndarray, float]]


def _rk4(problem: OdeProblem, grid: np.ndarray, y0: np.ndarray, drift: Drift,
         observe: Callable[[np.ndarray], float]) -> Tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 for (y, Gamma). Returns observe(y) and Gamma at every grid node."""
    (eb0, ebm, eb1), (nz0, nzm, nz1) = _stage_tables(problem, grid)
    steps = grid.size - 1
    risk = np.empty(grid.size)
    gamma_acc = np.empty(grid.size)

    y = np.array(y0, dtype=float)
    big_gamma = 0.0
    risk[0] = observe(y)
    gamma_acc[0] = 0.0
    tol = Config.NEGATIVE_ENERGY_TOL * max(1.0, float(np.max(np.abs(y))))

    for j in range(steps):
        h = grid[j + 1] - grid[j]
        k1, g1 = drift(y, eb0[j], nz0[j])
        k2, g2 = drift(y + 0.5 * h * k1, ebm[j], nzm[j])
        k3, g3 = drift(y + 0.5 * h * k2, ebm[j], nzm[j])
        k4, g4 = drift(y + h * k3, eb1[j], nz1[j])
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        big_gamma += (h / 6.0) * (g1 + 2.0 * g2 + 2.0 * g3 + g4)

        lowest = float(np.min(y))
        if not np.all(np.isfinite(y)) or lowest < -tol:
            raise OdeInstabilityError(
                f"mode energy became {lowest:.3e} at t={grid[j + 1]:.6f}; retry with a smaller time step")
        if lowest < 0:
            y = np.maximum(y, 0.0)
        risk[j + 1] = observe(y)
        gamma_acc[j + 1] = big_gamma
        if j % 1000 == 0:
            logging.debug("[ODE] step %d/%d R=%.6e", j, steps, risk[j + 1])
    return risk, gamma_acc


def _factors(problem: OdeProblem, R: float) -> Tuple[float, float]:
    R = max(R, 0.0)
    return mu_c(problem.c, R, problem.zeta), nu_c(problem.c, R, problem.zeta)


def integrate(problem: OdeProblem, grid: Optional[np.ndarray] = None, dt: float = Config.ODE_DT) -> RiskCurve:
    """
    Integrate the mode-energy system and assemble the risk curve.

    Args:
        problem: Spectrum, schedule and privacy parameters
        grid: Ascending time grid from 0 to 1 (default: ``default_grid(problem, dt)``)
        dt: Target step when no grid is given

    Returns:
        RiskCurve on the integration grid

    Raises:
        OdeInstabilityError: If the step drives a mode energy negative
    """
    grid = default_grid(problem, dt) if grid is None else _check_grid(grid)
    lam = np.asarray(problem.lam, dtype=float)
    d = lam.size
    half_zeta_sq = 0.5 * problem.zeta ** 2
    gamma = problem.gamma

    def observe(D: np.ndarray) -> float:
        return float(np.sum(lam * D)) / d

    def drift(D: np.ndarray, eta_bar: float, noise: float):
        R = observe(D)
        mu, nu = _factors(problem, R)
        variance = eta_bar * eta_bar * nu * (R + half_zeta_sq) * gamma
        dD = -2.0 * eta_bar * mu * lam * D + variance * lam + noise
        return dD, eta_bar * mu

    logging.debug("[ODE] integrating d=%d modes over %d steps, schedule %s",
                  d, grid.size - 1, problem.schedule.describe())
    risk, big_gamma = _rk4(problem, grid, problem.D0, drift, observe)
    final = final_private_risk(risk[-1], problem.schedule, problem.c, gamma, problem.rho)
    return RiskCurve(grid, risk, big_gamma, final)


def _scalar_bound(problem: OdeProblem, grid: np.ndarray, descent_weight: float, variance_weight: float) -> RiskCurve:
    half_zeta_sq = 0.5 * problem.zeta ** 2
    gamma = problem.gamma

    def drift(y: np.ndarray, eta_bar: float, noise: float):
        R = float(y[0])
        mu, nu = _factors(problem, R)
        dR = (-2.0 * descent_weight * eta_bar * mu * R
              + variance_weight * eta_bar * eta_bar * nu * (R + half_zeta_sq) * gamma + noise)
        return np.array([dR]), eta_bar * mu

    r0 = initial_risk(problem.lam, problem.D0)
    risk, big_gamma = _rk4(problem, grid, np.array([r0]), drift, lambda y: float(y[0]))
    final = final_private_risk(risk[-1], problem.schedule, problem.c, gamma, problem.rho)
    return RiskCurve(grid, risk, big_gamma, final)


def sandwich_bounds(problem: OdeProblem, grid: Optional[np.ndarray] = None,
                    dt: float = Config.ODE_DT) -> Tuple[RiskCurve, RiskCurve]:
    """
    Scalar upper and lower bounds on the risk curve.

    The upper bound decays at rate lambda_min and inflates the variance by
    lambda_max; the lower bound decays at rate lambda_max with unit variance
    weight. Both start from R(0).
    """
    grid = default_grid(problem, dt) if grid is None else _check_grid(grid)
    lam = np.asarray(problem.lam, dtype=float)
    if not np.min(lam) > 0:
        raise DomainError("sandwich bounds need a strictly positive spectrum")
    lam_min, lam_max = float(np.min(lam)), float(np.max(lam))
    upper = _scalar_bound(problem, grid, lam_min, lam_max)
    lower = _scalar_bound(problem, grid, lam_max, 1.0)
    return upper, lower


def implicit_residual(curve: RiskCurve, problem: OdeProblem) -> float:
    """
    Sup-norm residual of the implicit risk equation on the curve's grid:

        R(t) - F(Gamma(t)) - int_0^t [S(s) K(Gamma(t) - Gamma(s))
                                      + N(s) J(Gamma(t) - Gamma(s))] ds,

    with S = eta_bar^2 nu_c(R) (R + zeta^2/2) gamma and N the noise term. The
    integrals use the trapezoid rule on the grid, accumulated mode by mode.
    """
    grid = np.asarray(curve.grid, dtype=float)
    lam = np.asarray(problem.lam, dtype=float)
    d = lam.size
    eta_bar = np.minimum(np.asarray(eta_tilde(problem.schedule, grid)), problem.step_cap)
    half_zeta_sq = 0.5 * problem.zeta ** 2

    forcing = np.empty(grid.size)
    for j, R in enumerate(curve.R):
        _, nu = _factors(problem, float(R))
        forcing[j] = eta_bar[j] ** 2 * nu * (max(float(R), 0.0) + half_zeta_sq) * problem.gamma

    coef = problem.noise_coefficient
    noise = np.zeros(grid.size)
    if coef > 0:
        rates = np.asarray(noise_rate(problem.schedule, grid), dtype=float)
        bad = ~np.isfinite(rates)
        if np.any(bad):
            sq = np.asarray(eta_tilde_sq(problem.schedule, grid))
            seg = -np.diff(sq) / np.diff(grid)
            neighbour = np.concatenate([seg[:1], seg])
            rates = np.where(bad, neighbour, rates)
        noise = coef * rates

    accumulated = np.zeros(d)
    worst = abs(float(curve.R[0]) - kernels(lam, problem.D0, float(curve.Gamma[0]))[0])
    for j in range(grid.size - 1):
        h = grid[j + 1] - grid[j]
        decay = np.exp(-2.0 * lam * (curve.Gamma[j + 1] - curve.Gamma[j]))
        left = lam * forcing[j] + noise[j]
        right = lam * forcing[j + 1] + noise[j + 1]
        accumulated = decay * (accumulated + 0.5 * h * left) + 0.5 * h * right
        predicted = kernels(lam, problem.D0, float(curve.Gamma[j + 1]))[0] + float(np.sum(lam * accumulated)) / d
        worst = max(worst, abs(float(curve.R[j + 1]) - predicted))
    logging.debug("[ODE] implicit residual %.3e over %d nodes", worst, grid.size)
    return worst


def surrogate_constant_risk(initial: float, gamma: float, rho: float, c: float, eta0: float) -> float:
    """
    Closed-form risk of the simplified linear dynamics for a constant schedule on
    an isotropic problem, with v = c eta0:

        (R0 - gamma v) exp(-v) + gamma v + v^2 gamma^2 / rho^2
    """
    v = c * eta0
    return (initial - gamma * v) * math.exp(-v) + gamma * v + (v * gamma / rho) ** 2

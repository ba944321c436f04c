"""
Learning-rate schedules, the matching noise schedule and the zCDP accountant.

A schedule is the continuous profile eta~(t) on [0, 1]; step k of an n-step run
uses eta_k = eta~(k/n)/n. The noise schedule is chosen so that every sample is
protected by exactly the target zCDP level rho, which makes rho^2 sigma_k^2 a
backward difference of eta_k^2.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from scipy import optimize

try:
    from .errors import DomainError, InfinitePrivacyLossError, NegativeVarianceError
except ImportError:
    import sys
    from pathlib import Path
    sys.path.insert(0, str(Path(__file__).parent))
    from errors import DomainError, InfinitePrivacyLossError, NegativeVarianceError

ArrayLike = Union[float, np.ndarray]

SCHEDULE_VARIANTS = ("constant", "polynomial", "harmonic", "table")


@dataclass(frozen=True)
class Schedule:
    """
    Continuous learning-rate profile.

    ``eta0`` is eta~(0). Harmonic schedules store (beta, tau) and derive
    eta0 = beta / tau; table schedules store eta~ sampled on a uniform grid of
    [0, 1] and interpolate eta~^2 linearly.
    """
    variant: str
    eta0: float
    alpha: float = 0.0
    beta: float = 0.0
    tau: float = 0.0
    values: Tuple[float, ...] = field(default=())

    # --- Constructors ---

    @classmethod
    def constant(cls, eta0: float) -> "Schedule":
        _check_positive("eta0", eta0)
        return cls("constant", float(eta0))

    @classmethod
    def polynomial(cls, eta0: float, alpha: float) -> "Schedule":
        _check_positive("eta0", eta0)
        if not alpha >= 0:
            raise DomainError(f"polynomial exponent alpha must be >= 0, got {alpha}")
        if alpha == 0:
            return cls.constant(eta0)
        return cls("polynomial", float(eta0), alpha=float(alpha))

    @classmethod
    def harmonic(cls, beta: float, tau: float) -> "Schedule":
        _check_positive("beta", beta)
        _check_positive("tau", tau)
        return cls("harmonic", float(beta) / float(tau), beta=float(beta), tau=float(tau))

    @classmethod
    def table(cls, values: Iterable[float]) -> "Schedule":
        vals = tuple(float(v) for v in values)
        if len(vals) < 2:
            raise DomainError("table schedules need at least two samples")
        if any(v < 0 or not math.isfinite(v) for v in vals):
            raise DomainError("table schedule values must be finite and non-negative")
        if vals[0] <= 0:
            raise DomainError("table schedule must start with a positive learning rate")
        if any(b > a for a, b in zip(vals, vals[1:])):
            raise NegativeVarianceError("table schedule increases somewhere; noise variance would be negative")
        return cls("table", vals[0], values=vals)

    # --- Transformations ---

    def with_eta0(self, eta0: float) -> "Schedule":
        """Same shape, rescaled so that eta~(0) = eta0."""
        _check_positive("eta0", eta0)
        if self.variant == "harmonic":
            return Schedule.harmonic(eta0 * self.tau, self.tau)
        if self.variant == "table":
            factor = eta0 / self.eta0
            return Schedule.table(v * factor for v in self.values)
        return replace(self, eta0=float(eta0))

    # --- Serialization ---

    def to_dict(self) -> Dict[str, Any]:
        if self.variant == "harmonic":
            return {"variant": "harmonic", "beta": self.beta, "tau": self.tau}
        if self.variant == "table":
            return {"variant": "table", "values": list(self.values)}
        if self.variant == "polynomial":
            return {"variant": "polynomial", "alpha": self.alpha, "eta0": self.eta0}
        return {"variant": "constant", "eta0": self.eta0}

    @classmethod
    def from_dict(cls, record: Dict[str, Any]) -> "Schedule":
        variant = record.get("variant", "polynomial")
        if variant == "constant":
            return cls.constant(record["eta0"])
        if variant == "polynomial":
            return cls.polynomial(record["eta0"], record.get("alpha", 0.0))
        if variant == "harmonic":
            return cls.harmonic(record["beta"], record["tau"])
        if variant == "table":
            return cls.table(record["values"])
        raise DomainError(f"unknown schedule variant: {variant}")

    def describe(self) -> str:
        if self.variant == "polynomial":
            return f"polynomial(alpha={self.alpha:g}, eta0={self.eta0:g})"
        if self.variant == "harmonic":
            return f"harmonic(beta={self.beta:g}, tau={self.tau:g})"
        if self.variant == "table":
            return f"table({len(self.values)} points, eta0={self.eta0:g})"
        return f"constant(eta0={self.eta0:g})"


@dataclass(frozen=True)
class PrivacyBudget:
    """Target zCDP level and the per-step learning rates and noise multipliers of one run."""
    rho: float
    eta: np.ndarray
    sigma: np.ndarray

    @property
    def n(self) -> int:
        return int(self.eta.size)


def _check_positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be positive and finite, got {value}")


def _check_time(t: np.ndarray) -> None:
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError("schedule time must lie in [0, 1]")


def _as_output(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


def eta_tilde_sq(schedule: Schedule, t: ArrayLike) -> ArrayLike:
    """eta~(t)^2, the quantity the noise schedule differences."""
    tt = np.asarray(t, dtype=float)
    _check_time(tt)
    if schedule.variant == "constant":
        out = np.full_like(tt, schedule.eta0 ** 2)
    elif schedule.variant == "polynomial":
        out = schedule.eta0 ** 2 * (1.0 - tt) ** (2.0 * schedule.alpha)
    elif schedule.variant == "harmonic":
        out = schedule.beta ** 2 / (tt + schedule.tau) ** 2
    elif schedule.variant == "table":
        knots = np.linspace(0.0, 1.0, len(schedule.values))
        out = np.interp(tt, knots, np.square(schedule.values))
    else:
        raise DomainError(f"unknown schedule variant: {schedule.variant}")
    return _as_output(np.asarray(out, dtype=float), tt.ndim == 0)


def eta_tilde(schedule: Schedule, t: ArrayLike) -> ArrayLike:
    """
    Continuous learning-rate profile eta~(t).

    Raises:
        DomainError: If t lies outside [0, 1]
    """
    sq = np.asarray(eta_tilde_sq(schedule, t), dtype=float)
    return _as_output(np.sqrt(sq), sq.ndim == 0)


def noise_rate(schedule: Schedule, t: ArrayLike) -> ArrayLike:
    """
    Continuous noise rate -d(eta~^2)/dt, which equals rho^2 sigma~^2(t).

    For polynomial schedules with 0 < alpha < 1/2 the rate is infinite at t = 1.
    Table schedules return the slope of the segment starting at t (the last
    segment at t = 1).
    """
    tt = np.asarray(t, dtype=float)
    _check_time(tt)
    if schedule.variant == "constant":
        out = np.zeros_like(tt)
    elif schedule.variant == "polynomial":
        alpha = schedule.alpha
        with np.errstate(divide="ignore"):
            out = 2.0 * alpha * schedule.eta0 ** 2 * (1.0 - tt) ** (2.0 * alpha - 1.0)
    elif schedule.variant == "harmonic":
        out = 2.0 * schedule.beta ** 2 / (tt + schedule.tau) ** 3
    elif schedule.variant == "table":
        sq = np.square(schedule.values)
        segments = len(sq) - 1
        slopes = -(np.diff(sq)) * segments
        idx = np.minimum(np.floor(tt * segments).astype(int), segments - 1)
        out = slopes[idx]
    else:
        raise DomainError(f"unknown schedule variant: {schedule.variant}")
    return _as_output(np.asarray(out, dtype=float), tt.ndim == 0)


def crossing_time(schedule: Schedule, level: float) -> Optional[float]:
    """
    First time in (0, 1) where eta~ drops to ``level``, or None if it never does.

    Used to place a grid point at the kink of min(eta~(t), level).
    """
    if schedule.eta0 <= level:
        return None
    if schedule.variant == "constant":
        return None
    if schedule.variant == "polynomial":
        t_star = 1.0 - (level / schedule.eta0) ** (1.0 / schedule.alpha)
    elif schedule.variant == "harmonic":
        t_star = schedule.beta / level - schedule.tau
    else:
        if eta_tilde(schedule, 1.0) > level:
            return None
        t_star = optimize.brentq(lambda s: eta_tilde(schedule, s) - level, 0.0, 1.0, xtol=1e-14)
    if 0.0 < t_star < 1.0:
        return float(t_star)
    return None


def discrete_noise_schedule(schedule: Schedule, n: int, rho: float) -> PrivacyBudget:
    """
    Per-step noise multipliers that make an n-step run exactly (rho^2/2)-zCDP.

    rho^2 sigma_k^2 = eta_k^2 - eta_{k+1}^2 for k < n and rho^2 sigma_n^2 = eta_n^2.

    Raises:
        NegativeVarianceError: If the schedule increases between two steps
    """
    if n < 1:
        raise DomainError(f"number of steps must be >= 1, got {n}")
    _check_positive("rho", rho)
    steps = np.arange(1, n + 1, dtype=float) / n
    eta = np.asarray(eta_tilde(schedule, steps), dtype=float) / n
    eta_sq = eta * eta

    variance = np.empty(n)
    variance[:-1] = eta_sq[:-1] - eta_sq[1:]
    variance[-1] = eta_sq[-1]
    tolerance = 1e-12 * eta_sq[:-1] if n > 1 else np.zeros(0)
    if n > 1 and np.any(variance[:-1] < -tolerance):
        k = int(np.argmax(variance[:-1] < -tolerance)) + 1
        raise NegativeVarianceError(f"learning rate increases after step {k}; schedules must be non-increasing")
    variance = np.maximum(variance, 0.0)

    sigma = np.sqrt(variance) / rho
    logging.debug("[Privacy] noise schedule for %s, n=%d, rho=%g", schedule.describe(), n, rho)
    return PrivacyBudget(rho=float(rho), eta=eta, sigma=sigma)


def accountant_rho(eta: np.ndarray, sigma: np.ndarray) -> float:
    """
    zCDP parameter of a run: rho = max_k eta_k / sqrt(sum_{j >= k} sigma_j^2).

    Steps with eta_k = 0 leak nothing. A run in which every step has eta_k = 0
    returns 0.

    Raises:
        InfinitePrivacyLossError: If some eta_k > 0 has no noise after it
    """
    eta = np.asarray(eta, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if eta.shape != sigma.shape:
        raise DomainError("eta and sigma must have the same length")
    suffix = np.cumsum((sigma * sigma)[::-1])[::-1]
    active = eta > 0
    if np.any(active & (suffix <= 0)):
        k = int(np.argmax(active & (suffix <= 0))) + 1
        raise InfinitePrivacyLossError(f"step {k} is not protected by any subsequent noise")
    if not np.any(active):
        return 0.0
    return float(np.max(eta[active] / np.sqrt(suffix[active])))


def zcdp_to_approx_dp(rho: float, delta: float) -> float:
    """
    Convert (rho^2/2)-zCDP to (epsilon, delta)-DP.

    Returns:
        epsilon = rho^2/2 + rho sqrt(2 ln(1/delta))
    """
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if rho < 0:
        raise DomainError(f"rho must be non-negative, got {rho}")
    return 0.5 * rho * rho + rho * math.sqrt(2.0 * math.log(1.0 / delta))


def approx_dp_table(rho: float, deltas: Iterable[float]) -> List[Dict[str, float]]:
    """(epsilon, delta) rows plus the 2 rho sqrt(ln 1/delta) simplification."""
    rows = []
    for delta in deltas:
        log_inv = math.log(1.0 / delta) if 0.0 < delta < 1.0 else float("nan")
        rows.append({
            "delta": float(delta),
            "epsilon": zcdp_to_approx_dp(rho, delta),
            "epsilon_simplified": 2.0 * rho * math.sqrt(log_inv),
            "simplified_valid": bool(rho <= math.sqrt(log_inv)),
        })
    return rows


def harmonic_heuristic(c: float, gamma: float, initial_risk: float) -> Schedule:
    """Pointwise-optimal harmonic profile eta~(t) c = 2 / (t + 4 gamma / R(0))."""
    _check_positive("c", c)
    _check_positive("gamma", gamma)
    _check_positive("initial risk", initial_risk)
    return Schedule.harmonic(2.0 / c, 4.0 * gamma / initial_risk)

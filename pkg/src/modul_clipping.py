"""
Clipping reduction factors for DP-GD on Gaussian linear regression.

With Gaussian data the residual of a fresh sample is Gaussian, so the effect of
per-sample gradient clipping on the descent direction and on the gradient second
moment depends only on the clipping constant c and the total risk
P = R + zeta^2/2. This module gives the closed forms of both factors and a
Monte-Carlo estimate of the defining expectations used to check them.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import special

try:
    from .config import Config
    from .errors import DegenerateRiskError, DomainError
except ImportError:
    import sys
    from pathlib import Path
    sys.path.insert(0, str(Path(__file__).parent))
    from config import Config
    from errors import DegenerateRiskError, DomainError

ArrayLike = Union[float, np.ndarray]

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class ClippingFactors:
    """Descent factor mu and variance factor nu, with optional standard errors."""
    mu: float
    nu: float
    mu_se: Optional[float] = None
    nu_se: Optional[float] = None


def erf(x: ArrayLike) -> ArrayLike:
    """Error function, accurate to double precision (scipy's Cephes implementation)."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("erf expects finite input")
    out = special.erf(arr)
    return float(out) if np.ndim(out) == 0 else out


def _total_risk(c: float, risk: float, zeta: float) -> float:
    if not c > 0:
        raise DomainError(f"clipping constant must be positive, got {c}")
    if risk < 0 or zeta < 0:
        raise DomainError(f"risk and zeta must be non-negative, got R={risk}, zeta={zeta}")
    total = risk + 0.5 * zeta * zeta
    if total <= 0 and math.isfinite(c):
        raise DegenerateRiskError("clipping factors need R + zeta^2/2 > 0")
    return total


def _gaussian_tail_term(z: float) -> float:
    # E[rho^2 ; |rho| < z] for a standard normal rho
    return float(special.erf(z / math.sqrt(2.0))) - SQRT_2_OVER_PI * z * math.exp(-0.5 * z * z)


def mu_c(c: float, risk: float, zeta: float) -> float:
    """
    Descent reduction factor mu_c(R) = erf(c / (2 sqrt(P))).

    Args:
        c: Clipping constant (dimension free), may be ``math.inf``
        risk: Excess risk R >= 0
        zeta: Label-noise level

    Returns:
        Factor in (0, 1]; exactly 1 when clipping is disabled
    """
    if math.isinf(c) and c > 0:
        return 1.0
    total = _total_risk(c, risk, zeta)
    return float(special.erf(c / (2.0 * math.sqrt(total))))


def nu_c(c: float, risk: float, zeta: float) -> float:
    """
    Variance reduction factor
    nu_c(R) = (c^2 / 2P) (1 - erf(c / (2 sqrt(P)))) + F(c / sqrt(2P)).
    """
    if math.isinf(c) and c > 0:
        return 1.0
    total = _total_risk(c, risk, zeta)
    z = c / math.sqrt(2.0 * total)
    outside = (c * c / (2.0 * total)) * float(special.erfc(c / (2.0 * math.sqrt(total))))
    return outside + _gaussian_tail_term(z)


def clipping_factors(c: float, risk: float, zeta: float) -> ClippingFactors:
    """Both closed-form factors at once."""
    return ClippingFactors(mu=mu_c(c, risk, zeta), nu=nu_c(c, risk, zeta))


def mc_clipping_oracle(c: float, risk: float, zeta: float,
                       samples: int = Config.MC_SAMPLES, seed: int = Config.DEFAULT_SEED) -> ClippingFactors:
    """
    Monte-Carlo estimate of the factors from their defining expectations.

    With s = sqrt(2P) and a standard normal residual rho, the estimates are
    E[clip_c(s rho) rho] / s and E[clip_c(s rho)^2] / s^2.
    """
    if samples < 10**4:
        raise DomainError(f"Monte-Carlo oracle needs at least 1e4 samples, got {samples}")
    if not c > 0:
        raise DomainError(f"clipping constant must be positive, got {c}")
    total = risk + 0.5 * zeta * zeta
    if total <= 0:
        raise DegenerateRiskError("clipping factors need R + zeta^2/2 > 0")

    rng = np.random.Generator(np.random.Philox(seed))
    scale = math.sqrt(2.0 * total)
    residual = rng.standard_normal(samples)
    clipped = np.clip(scale * residual, -c, c)

    descent = clipped * residual / scale
    second_moment = clipped * clipped / (scale * scale)
    root_n = math.sqrt(samples)
    factors = ClippingFactors(
        mu=float(descent.mean()),
        nu=float(second_moment.mean()),
        mu_se=float(descent.std(ddof=1) / root_n),
        nu_se=float(second_moment.std(ddof=1) / root_n),
    )
    logging.debug("[Clipping] MC oracle c=%g R=%g zeta=%g -> mu=%.6f nu=%.6f",
                  c, risk, zeta, factors.mu, factors.nu)
    return factors

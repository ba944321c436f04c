"""
Covariance spectra, initial mode energies and the kernels of the implicit risk equation.

Covariances are represented by their eigenvalues only; every computation in the
package works in the eigenbasis.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

try:
    from .errors import AlignmentExponentError, DomainError, IngestionError, InvalidExponentError
except ImportError:
    import sys
    sys.path.insert(0, str(Path(__file__).parent))
    from errors import AlignmentExponentError, DomainError, IngestionError, InvalidExponentError

SPECTRUM_VARIANTS = ("identity", "uniform_0_2", "power_law", "explicit")
ENERGY_MODES = ("power_aligned", "isotropic")


@dataclass(frozen=True)
class SpectrumModel:
    """Eigenvalue distribution of the data covariance in dimension d."""
    variant: str
    d: int
    phi: float = 0.0
    values: Tuple[float, ...] = field(default=())

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "SpectrumModel":
        """Explicit spectrum from a one-column CSV of eigenvalues."""
        try:
            frame = pd.read_csv(path, header=None)
        except (OSError, pd.errors.ParserError) as e:
            raise IngestionError(f"could not read eigenvalues from {path}: {e}")
        column = pd.to_numeric(frame.iloc[:, 0], errors="coerce")
        bad = column.isna().to_numpy()
        if bad.any():
            raise IngestionError("non-numeric eigenvalue", row=int(np.argmax(bad)))
        values = tuple(float(v) for v in column)
        return cls("explicit", len(values), values=values)


@dataclass(frozen=True)
class ModeEnergies:
    """Initial mode energies D_i(0) = d (omega_i . theta*)^2 / 2."""
    D0: np.ndarray
    psi: float = 0.0
    mode: str = "power_aligned"


def power_law_constant(phi: float) -> float:
    """C_phi = (2 - phi) / (1 - phi), the upper edge of the power-law support."""
    return (2.0 - phi) / (1.0 - phi)


def eigenvalues(model: SpectrumModel) -> np.ndarray:
    """
    Eigenvalues in descending order, rescaled so that they sum to d.

    Raises:
        InvalidExponentError: If a power-law spectrum has phi >= 1
    """
    d = model.d
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    quantiles = (np.arange(1, d + 1, dtype=float) - 0.5) / d

    if model.variant == "identity":
        lam = np.ones(d)
    elif model.variant == "uniform_0_2":
        lam = 2.0 * quantiles
    elif model.variant == "power_law":
        if not model.phi < 1.0:
            raise InvalidExponentError(f"power-law exponent phi must be < 1, got {model.phi}")
        lam = power_law_constant(model.phi) * quantiles ** (1.0 / (1.0 - model.phi))
    elif model.variant == "explicit":
        lam = np.asarray(model.values, dtype=float)
        if lam.size != d:
            raise DomainError(f"explicit spectrum has {lam.size} values, expected d={d}")
        if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
            raise DomainError("explicit eigenvalues must be finite and positive")
    else:
        raise DomainError(f"unknown spectrum variant: {model.variant}")

    lam = np.sort(lam)[::-1]
    return lam * (d / np.sum(lam))


def mode_energies(lam: np.ndarray, psi: float = 0.0, mode: str = "power_aligned",
                  norm_sq: float = 1.0, phi: Optional[float] = None) -> ModeEnergies:
    """
    Initial mode energies for a target vector.

    ``power_aligned`` sets D_i(0) = lambda_i^(-psi); ``isotropic`` sets
    D_i(0) = norm_sq / 2 so that ||theta*||^2 = norm_sq.

    Raises:
        AlignmentExponentError: If psi >= 1 - phi for a power-law spectrum
    """
    lam = np.asarray(lam, dtype=float)
    if mode == "power_aligned":
        if phi is not None and not psi < 1.0 - phi:
            raise AlignmentExponentError(f"alignment exponent psi={psi} must be < 1 - phi = {1.0 - phi}")
        D0 = lam ** (-psi)
    elif mode == "isotropic":
        if not norm_sq > 0:
            raise DomainError(f"target norm must be positive, got {norm_sq}")
        D0 = np.full(lam.shape, 0.5 * norm_sq)
        psi = 0.0
    else:
        raise DomainError(f"unknown mode-energy variant: {mode}")
    return ModeEnergies(D0=D0, psi=float(psi), mode=mode)


def initial_risk(lam: np.ndarray, D0: np.ndarray) -> float:
    """R(0) = (1/d) sum lambda_i D_i(0)."""
    return float(np.mean(np.asarray(lam) * np.asarray(D0)))


def target_vector(D0: np.ndarray) -> np.ndarray:
    """theta* in the eigenbasis: theta*_i = sqrt(2 D_i(0) / d), all signs positive."""
    D0 = np.asarray(D0, dtype=float)
    return np.sqrt(2.0 * D0 / D0.size)


def kernels(lam: np.ndarray, D0: np.ndarray, x: Union[float, np.ndarray]):
    """
    Kernels of the implicit risk equation at x >= 0:

        F(x) = (1/d) sum D_i(0) lambda_i exp(-2 lambda_i x)
        K(x) = (1/d) sum lambda_i^2 exp(-2 lambda_i x)
        J(x) = (1/d) sum lambda_i exp(-2 lambda_i x)

    Returns floats for scalar x, arrays for array x.
    """
    lam = np.asarray(lam, dtype=float)
    D0 = np.asarray(D0, dtype=float)
    xx = np.asarray(x, dtype=float)
    if np.any(xx < 0):
        raise DomainError("kernel argument must be non-negative")
    decay = np.exp(-2.0 * np.multiply.outer(xx, lam))
    d = lam.size
    F = decay @ (D0 * lam) / d
    K = decay @ (lam * lam) / d
    J = decay @ lam / d
    if xx.ndim == 0:
        return float(F), float(K), float(J)
    return F, K, J


def kernel_slopes(lam: np.ndarray, D0: np.ndarray, x_min: float = 10.0,
                  x_max: float = 1e3, points: int = 25) -> Tuple[float, float, float]:
    """Log-log slopes of (F, K, J) fitted over x in [x_min, x_max]."""
    xs = np.geomspace(x_min, x_max, points)
    F, K, J = kernels(lam, D0, xs)
    log_x = np.log(xs)
    slopes = tuple(float(np.polyfit(log_x, np.log(vals), 1)[0]) for vals in (F, K, J))
    logging.debug("[Spectrum] kernel slopes on [%g, %g]: %s", x_min, x_max, slopes)
    return slopes


def expected_kernel_slopes(phi: float, psi: float) -> Tuple[float, float, float]:
    """Large-x decay exponents of (F, K, J) for a power-law spectrum."""
    return -(2.0 - phi - psi), -(3.0 - phi), -(2.0 - phi)

"""
One-pass DP-GD with per-sample clipping and an adaptive step.

Synthetic runs draw Gaussian samples x = sqrt(lambda) * z in the eigenbasis of
the covariance, one fresh sample per step, and evaluate the population risk
R(theta) = 1/2 sum lambda_i (theta_i - theta*_i)^2 exactly. Dataset runs stream
the rows of a standardized training split once.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

try:
    from .config import Config
    from .errors import DivergenceError, DomainError, IngestionError
    from .modul_schedule import Schedule, discrete_noise_schedule, eta_tilde
    from .modul_spectrum import initial_risk, target_vector
except ImportError:
    import sys
    sys.path.insert(0, str(Path(__file__).parent))
    from config import Config
    from errors import DivergenceError, DomainError, IngestionError
    from modul_schedule import Schedule, discrete_noise_schedule, eta_tilde
    from modul_spectrum import initial_risk, target_vector


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Parameters of a synthetic DP-GD run; the dimension d is the spectrum length."""
    n: int
    lam: np.ndarray
    D0: np.ndarray
    zeta: float
    c: float
    schedule: Schedule
    rho: float
    seed: int = Config.DEFAULT_SEED
    trials: int = 1
    record_grid: int = Config.RECORD_GRID

    def __post_init__(self):
        if self.n < 0:
            raise DomainError(f"number of samples must be >= 0, got {self.n}")
        if np.size(self.lam) < 1:
            raise DomainError("dimension must be >= 1")
        if self.trials < 1:
            raise DomainError(f"trials must be >= 1, got {self.trials}")
        if self.record_grid < 2:
            raise DomainError("record grid needs at least two points")
        if not self.c > 0 or not self.rho > 0 or self.zeta < 0:
            raise DomainError("need c > 0, rho > 0 and zeta >= 0")
        if math.isinf(self.c) and not math.isinf(self.rho):
            raise DomainError("unclipped runs have unbounded privacy noise; use rho = inf")

    @property
    def d(self) -> int:
        return int(np.size(self.lam))

    @property
    def gamma(self) -> float:
        return self.d / self.n if self.n else math.inf

    @property
    def clip_norm(self) -> float:
        """C_clip = c sqrt(d)."""
        return self.c * math.sqrt(self.d)


@dataclass(eq=False)
class TrajectoryStats:
    """Per-trial risks on the record grid and the risks of the last two iterates."""
    times: np.ndarray
    risks: np.ndarray
    prefinal_risks: np.ndarray
    final_risks: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return self.risks.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.risks.std(axis=0)

    @property
    def final_mean(self) -> float:
        return float(self.final_risks.mean())

    @property
    def final_std(self) -> float:
        return float(self.final_risks.std())

    def to_frame(self) -> pd.DataFrame:
        trials, points = self.risks.shape
        return pd.DataFrame({
            "trial": np.repeat(np.arange(trials), points),
            "t": np.tile(self.times, trials),
            "risk": self.risks.reshape(-1),
        })


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream owned by one trial."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial,))))


def clip_gradient(g: np.ndarray, clip_norm: float) -> np.ndarray:
    """g * min(1, C / ||g||)."""
    norm = float(np.linalg.norm(g))
    if norm <= clip_norm:
        return g
    return g * (clip_norm / norm)


def adaptive_step(eta: float, x_norm_sq: float) -> float:
    """min(eta, 2 / ||x||^2)."""
    if x_norm_sq <= 0:
        return eta
    return min(eta, 2.0 / x_norm_sq)


def private_noise(b: np.ndarray, clip_norm: float, sigma: float) -> np.ndarray:
    """Privacy noise 2 C sigma b for a standard normal draw b."""
    return (2.0 * clip_norm * sigma) * b


def _step_sizes(schedule: Schedule, n: int, rho: float) -> Tuple[np.ndarray, np.ndarray]:
    if math.isinf(rho):
        eta = np.asarray(eta_tilde(schedule, np.arange(1, n + 1) / n), dtype=float) / n
        return eta, np.zeros(n)
    budget = discrete_noise_schedule(schedule, n, rho)
    return budget.eta, budget.sigma


def _population_risk(lam: np.ndarray, theta: np.ndarray, theta_star: np.ndarray) -> float:
    diff = theta - theta_star
    return 0.5 * float(np.sum(lam * diff * diff))


def _record_steps(n: int, times: np.ndarray) -> np.ndarray:
    return np.minimum(np.floor(times * n).astype(int), max(n - 1, 0))


def _block_size(d: int) -> int:
    return max(1, min(Config.SIM_BLOCK_SIZE, (1 << 20) // d))


def _run_trial(config: RunConfig, eta: np.ndarray, sigma: np.ndarray, trial: int):
    lam = np.asarray(config.lam, dtype=float)
    d = lam.size
    n = config.n
    sqrt_lam = np.sqrt(lam)
    theta_star = target_vector(config.D0)
    theta = np.zeros(d)
    clip_norm = config.clip_norm
    noisy = not math.isinf(config.rho)

    times = np.linspace(0.0, 1.0, config.record_grid)
    record_at = _record_steps(n, times)
    risks = np.empty(times.size)
    start_risk = _population_risk(lam, theta, theta_star)
    risks[record_at == 0] = start_risk
    prefinal = start_risk
    targets = {int(s): np.flatnonzero(record_at == s) for s in np.unique(record_at) if s > 0}

    rng = trial_rng(config.seed, trial)
    block = _block_size(d)
    for offset in range(0, n, block):
        size = min(block, n - offset)
        z = rng.standard_normal((size, d))
        w = rng.standard_normal(size)
        b = rng.standard_normal((size, d))
        for i in range(size):
            k = offset + i
            x = sqrt_lam * z[i]
            x_norm_sq = float(x @ x)
            residual = float(x @ theta) - (float(x @ theta_star) + config.zeta * w[i])
            if not math.isfinite(residual):
                raise DivergenceError("non-finite iterate", step=k)
            g = residual * x
            if not math.isinf(clip_norm):
                g = clip_gradient(g, clip_norm)
            theta = theta - adaptive_step(eta[k], x_norm_sq) * g
            if noisy and sigma[k] > 0:
                theta = theta + private_noise(b[i], clip_norm, sigma[k])

            done = k + 1
            if done == n - 1:
                prefinal = _population_risk(lam, theta, theta_star)
            hits = targets.get(done)
            if hits is not None:
                risks[hits] = _population_risk(lam, theta, theta_star)

    final = _population_risk(lam, theta, theta_star)
    if not math.isfinite(final):
        raise DivergenceError("non-finite iterate", step=n)
    logging.debug("[SIM] trial %d finished: final risk %.6f", trial, final)
    return risks, prefinal, final


def run_dpgd(config: RunConfig, n_jobs: Optional[int] = None) -> TrajectoryStats:
    """
    Run one-pass DP-GD for every trial and collect the risk trajectories.

    Raises:
        DivergenceError: If an iterate becomes non-finite
    """
    times = np.linspace(0.0, 1.0, config.record_grid)
    if config.n == 0:
        r0 = initial_risk(config.lam, config.D0)
        flat = np.full((config.trials, times.size), r0)
        return TrajectoryStats(times, flat, np.full(config.trials, r0), np.full(config.trials, r0))

    eta, sigma = _step_sizes(config.schedule, config.n, config.rho)
    logging.info("[SIM] d=%d n=%d trials=%d schedule %s", config.d, config.n, config.trials,
                 config.schedule.describe())
    results = Parallel(n_jobs=n_jobs or Config.N_JOBS)(
        delayed(_run_trial)(config, eta, sigma, trial) for trial in range(config.trials))
    risks = np.vstack([r[0] for r in results])
    prefinal = np.array([r[1] for r in results])
    final = np.array([r[2] for r in results])
    return TrajectoryStats(times, risks, prefinal, final)


def predicted_jump(schedule: Schedule, c: float, gamma: float, rho: float) -> float:
    """2 c^2 eta~(1)^2 gamma^2 / rho^2."""
    return 2.0 * c ** 2 * eta_tilde(schedule, 1.0) ** 2 * gamma ** 2 / rho ** 2


def last_step_jump(config: RunConfig, stats: Optional[TrajectoryStats] = None) -> Tuple[float, float]:
    """
    Mean risk increase of the final noisy update, measured and predicted.

    Returns:
        (empirical mean of R(theta_n) - R(theta_{n-1}), 2 c^2 eta~(1)^2 gamma^2 / rho^2)
    """
    stats = stats or run_dpgd(config)
    empirical = float(np.mean(stats.final_risks - stats.prefinal_risks))
    predicted = predicted_jump(config.schedule, config.c, config.gamma, config.rho)
    logging.info("[SIM] last-step jump: empirical %.4f, predicted %.4f", empirical, predicted)
    return empirical, predicted


# --- Dataset runs ---

@dataclass(frozen=True)
class DatasetConfig:
    """DP-GD parameters for a dataset run; d and n come from the data."""
    c: float
    rho: float
    schedule: Schedule
    seed: int = Config.DEFAULT_SEED
    trials: int = 1
    split: Tuple[float, float, float] = Config.DEFAULT_SPLIT


@dataclass
class PreparedData:
    """Standardized splits of a dataset."""
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    features: List[str]
    dropped: List[str] = field(default_factory=list)


@dataclass
class DatasetResult:
    """Validation losses of every trial on one dataset."""
    gamma: float
    n_train: int
    d: int
    losses: np.ndarray
    diverged: np.ndarray
    baseline_loss: float
    dropped: List[str]

    @property
    def mean_loss(self) -> float:
        ok = ~self.diverged
        return float(self.losses[ok].mean()) if np.any(ok) else math.nan

    @property
    def std_loss(self) -> float:
        ok = ~self.diverged
        return float(self.losses[ok].std()) if np.any(ok) else math.nan


def load_dataset(path: Union[str, Path], label_column: str) -> pd.DataFrame:
    """
    Read a headed CSV and check that every field is numeric.

    Raises:
        IngestionError: On a missing label column or a non-numeric field
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestionError(f"could not read {path}: {e}")
    return validate_frame(frame, label_column)


def validate_frame(frame: pd.DataFrame, label_column: str) -> pd.DataFrame:
    if label_column not in frame.columns:
        raise IngestionError(f"label column '{label_column}' not found; columns are {list(frame.columns)}")
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna()
    if bad.to_numpy().any():
        row = int(np.argmax(bad.to_numpy().any(axis=1)))
        column = bad.columns[bad.iloc[row].to_numpy()][0]
        raise IngestionError(f"non-numeric value in column '{column}'", row=row)
    return numeric.astype(float)


def split_indices(rows: int, split: Sequence[float], seed: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Disjoint train / normalization / validation index sets from a seeded permutation."""
    if len(split) != 3 or any(s <= 0 for s in split) or abs(sum(split) - 1.0) > 1e-9:
        raise DomainError(f"split must be three positive fractions summing to 1, got {split}")
    n_train = int(math.floor(split[0] * rows))
    n_norm = int(math.floor(split[1] * rows))
    if n_train < 1 or n_norm < 2 or rows - n_train - n_norm < 1:
        raise DomainError(f"{rows} rows are too few for split {tuple(split)}")
    order = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed))).permutation(rows)
    return order[:n_train], order[n_train:n_train + n_norm], order[n_train + n_norm:]


def prepare_dataset(frame: pd.DataFrame, label_column: str, split: Sequence[float], seed: int) -> PreparedData:
    """Split and standardize features and labels with normalization-subset statistics."""
    train_idx, norm_idx, val_idx = split_indices(len(frame), split, seed)
    features = [col for col in frame.columns if col != label_column]
    x = frame[features].to_numpy(dtype=float)
    y = frame[label_column].to_numpy(dtype=float)

    mean = x[norm_idx].mean(axis=0)
    std = x[norm_idx].std(axis=0)
    constant = std == 0
    dropped = [features[i] for i in np.flatnonzero(constant)]
    if dropped:
        logging.warning("[Data] dropping zero-variance features: %s", ", ".join(dropped))
    keep = ~constant
    if not np.any(keep):
        raise IngestionError("no feature varies on the normalization subset")
    x = (x[:, keep] - mean[keep]) / std[keep]

    y_mean = y[norm_idx].mean()
    y_std = y[norm_idx].std()
    if y_std == 0:
        logging.warning("[Data] label is constant on the normalization subset; centering without scaling")
        y = y - y_mean
    else:
        y = (y - y_mean) / y_std

    kept = [f for f, k in zip(features, keep) if k]
    return PreparedData(x[train_idx], y[train_idx], x[val_idx], y[val_idx], kept, dropped)


def _dataset_trial(data: PreparedData, config: DatasetConfig, eta: np.ndarray, sigma: np.ndarray, trial: int):
    n, d = data.train_x.shape
    clip_norm = config.c * math.sqrt(d)
    noisy = not math.isinf(config.rho)
    theta = np.zeros(d)
    rng = trial_rng(config.seed, trial)
    try:
        for k in range(n):
            x = data.train_x[k]
            residual = float(x @ theta) - data.train_y[k]
            if not math.isfinite(residual):
                raise DivergenceError("non-finite iterate", step=k)
            g = residual * x
            if not math.isinf(clip_norm):
                g = clip_gradient(g, clip_norm)
            theta = theta - adaptive_step(eta[k], float(x @ x)) * g
            b = rng.standard_normal(d)
            if noisy and sigma[k] > 0:
                theta = theta + private_noise(b, clip_norm, sigma[k])
        errors = data.val_x @ theta - data.val_y
        loss = 0.5 * float(np.mean(errors * errors))
        if not math.isfinite(loss):
            raise DivergenceError("non-finite validation loss", step=n)
    except DivergenceError as e:
        logging.warning("[Data] trial %d diverged: %s", trial, e)
        return math.inf, True
    return loss, False


def run_on_dataset(frame: pd.DataFrame, label_column: str, config: DatasetConfig,
                   n_jobs: Optional[int] = None) -> DatasetResult:
    """
    Run DP-GD once over the training split and report the validation loss
    (mean squared error / 2) of the released iterate for every trial.
    """
    frame = validate_frame(frame, label_column)
    data = prepare_dataset(frame, label_column, config.split, config.seed)
    n, d = data.train_x.shape
    eta, sigma = _step_sizes(config.schedule, n, config.rho)
    logging.info("[Data] n_train=%d d=%d gamma=%.4f trials=%d", n, d, d / n, config.trials)

    results = Parallel(n_jobs=n_jobs or Config.N_JOBS)(
        delayed(_dataset_trial)(data, config, eta, sigma, trial) for trial in range(config.trials))
    losses = np.array([r[0] for r in results])
    diverged = np.array([r[1] for r in results], dtype=bool)
    baseline = 0.5 * float(np.mean(data.val_y ** 2))
    if np.any(diverged):
        logging.warning("[Data] %d of %d trials diverged", int(diverged.sum()), config.trials)
    return DatasetResult(d / n, n, d, losses, diverged, baseline, data.dropped)

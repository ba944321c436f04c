"""
Experiment recipes of the DP-GD lab.

Each ``cmd_*`` function takes a resolved configuration mapping and a
ResultStore, runs one experiment and writes its CSV/JSON outputs. The functions
return the summary that was written, so callers and tests can inspect it.
"""
import logging
import math
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

try:
    from .config import Config
    from .errors import ConfigError, NumericalError
    from .modul_helper import check_budget
    from .modul_ode import OdeProblem, implicit_residual, integrate, sandwich_bounds, surrogate_constant_risk
    from .modul_results import ResultStore
    from .modul_scaling import (ScalingCase, gamma_sweep, optimize_eta0,
                                theory_harmonic_defaults, tune_harmonic)
    from .modul_schedule import (Schedule, accountant_rho, approx_dp_table, discrete_noise_schedule)
    from .modul_sim import DatasetConfig, RunConfig, last_step_jump, load_dataset, run_dpgd, run_on_dataset
    from .modul_spectrum import SpectrumModel, eigenvalues, initial_risk, mode_energies
except ImportError:
    import sys
    from pathlib import Path
    sys.path.insert(0, str(Path(__file__).parent))
    from config import Config
    from errors import ConfigError, NumericalError
    from modul_helper import check_budget
    from modul_ode import OdeProblem, implicit_residual, integrate, sandwich_bounds, surrogate_constant_risk
    from modul_results import ResultStore
    from modul_scaling import (ScalingCase, gamma_sweep, optimize_eta0,
                               theory_harmonic_defaults, tune_harmonic)
    from modul_schedule import (Schedule, accountant_rho, approx_dp_table, discrete_noise_schedule)
    from modul_sim import DatasetConfig, RunConfig, last_step_jump, load_dataset, run_dpgd, run_on_dataset
    from modul_spectrum import SpectrumModel, eigenvalues, initial_risk, mode_energies


# --- Builders ---

def as_float(value: Any) -> float:
    """Numbers from a config file; accepts 'inf' spelled as a string."""
    if isinstance(value, str):
        value = value.strip().lower()
        if value in ("inf", "+inf", "infinity", ".inf"):
            return math.inf
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}")


def build_spectrum(config: Mapping[str, Any], d: Optional[int] = None,
                   phi: Optional[float] = None, psi: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and initial mode energies described by the config."""
    spec = config["spectrum"]
    target = config["target"]
    phi = as_float(spec.get("phi", 0.0)) if phi is None else phi
    if spec["variant"] == "explicit":
        if not spec.get("values_csv"):
            raise ConfigError("explicit spectra need spectrum.values_csv")
        model = SpectrumModel.from_csv(spec["values_csv"])
    else:
        model = SpectrumModel(spec["variant"], int(d or config["model"]["d"]), phi=phi)
    lam = eigenvalues(model)
    psi = as_float(target.get("psi", 0.0)) if psi is None else psi
    energies = mode_energies(lam, psi=psi, mode=target["mode"], norm_sq=as_float(target.get("norm_sq", 1.0)),
                             phi=phi if model.variant == "power_law" else None)
    return lam, energies.D0


def build_schedule(config: Mapping[str, Any], alpha: Optional[float] = None) -> Schedule:
    record = dict(config["schedule"])
    if alpha is not None:
        record["variant"] = "polynomial"
        record["alpha"] = alpha
    return Schedule.from_dict(record)


def _privacy(config: Mapping[str, Any]) -> Tuple[float, float]:
    return as_float(config["privacy"]["c"]), as_float(config["privacy"]["rho"])


def _schedule_runs(config: Mapping[str, Any], alphas: List[float]) -> List[Tuple[str, Schedule]]:
    if config["schedule"]["variant"] == "polynomial":
        return [(f"alpha={a:g}", build_schedule(config, alpha=as_float(a))) for a in alphas]
    schedule = build_schedule(config)
    return [(schedule.describe(), schedule)]


# --- ode-vs-sim ---

def cmd_ode_vs_sim(config: Mapping[str, Any], store: ResultStore) -> Dict[str, Any]:
    """Simulate DP-GD at several dimensions and overlay the deterministic equivalent."""
    gamma = as_float(config["model"]["gamma"])
    zeta = as_float(config["model"]["zeta"])
    c, rho = _privacy(config)
    dt = as_float(config["ode"]["dt"])
    trials = int(config["sim"]["trials"])
    section = config["ode_vs_sim"]

    overlay, curves, summary_rows = [], [], []
    for label, schedule in _schedule_runs(config, section["alphas"]):
        for d in section["dims"]:
            d = int(d)
            n = max(1, int(round(d / gamma)))
            lam, D0 = build_spectrum(config, d=d)
            problem = OdeProblem(lam, D0, schedule, c, rho, d / n, zeta)
            logging.info("[Experiment] ode-vs-sim %s d=%d n=%d", label, d, n)

            curve = integrate(problem, dt=dt)
            upper, lower = sandwich_bounds(problem, grid=curve.grid)
            run = RunConfig(n, lam, D0, zeta, c, schedule, rho, seed=int(config["seed"]), trials=trials,
                            record_grid=int(config["sim"]["record_grid"]))
            stats = run_dpgd(run)
            jump, predicted = last_step_jump(run, stats)

            on_grid = curve.resample(stats.times)
            deviation = np.abs(stats.mean - on_grid.R)
            inside = stats.times < 1.0
            overlay.append(pd.DataFrame({
                "schedule": label, "d": d, "t": stats.times,
                "R_ode": on_grid.R,
                "R_upper": np.interp(stats.times, upper.grid, upper.R),
                "R_lower": np.interp(stats.times, lower.grid, lower.R),
                "sim_mean": stats.mean, "sim_std": stats.std, "deviation": deviation,
            }))
            frame = curve.to_frame()
            frame.insert(0, "d", d)
            frame.insert(0, "schedule", label)
            curves.append(frame)
            summary_rows.append({
                "schedule": label, "d": d, "n": n, "gamma": d / n,
                "sup_deviation": float(np.max(deviation[inside])),
                "ode_R1": float(curve.R[-1]), "ode_final_private_risk": curve.final_private_risk,
                "sim_final_mean": stats.final_mean, "sim_final_std": stats.final_std,
                "jump_empirical": jump, "jump_predicted": predicted,
                "implicit_residual": implicit_residual(curve, problem),
            })

    summary = pd.DataFrame(summary_rows)
    store.write_csv("overlay.csv", pd.concat(overlay, ignore_index=True))
    store.write_csv("ode_curves.csv", pd.concat(curves, ignore_index=True))
    store.write_csv("summary.csv", summary)

    monotone = {}
    for label, group in summary.groupby("schedule", sort=False):
        devs = group.sort_values("d")["sup_deviation"].to_numpy()
        monotone[label] = bool(np.all(np.diff(devs) < 0))
    payload = {"runs": summary_rows, "deviation_decreases_with_d": monotone}
    store.write_json("summary.json", payload)
    return payload


# --- heatmap ---

def _cell_risk(problem: OdeProblem, engine: str, run: Optional[RunConfig], dt: float) -> float:
    try:
        if engine == "sim":
            return run_dpgd(run, n_jobs=1).final_mean
        return integrate(problem, dt=dt).final_private_risk
    except NumericalError as e:
        logging.debug("[Experiment] heatmap cell failed: %s", e)
        return math.inf


def cmd_heatmap(config: Mapping[str, Any], store: ResultStore) -> Dict[str, Any]:
    """Final risk over a log grid of (c, eta~(0)), capped for display."""
    section = config["heatmap"]
    d = int(config["model"]["d"])
    zeta = as_float(config["model"]["zeta"])
    rho = as_float(config["privacy"]["rho"])
    dt = as_float(config["ode"]["dt"])
    engine = section.get("engine", "ode")
    if engine not in ("ode", "sim"):
        raise ConfigError(f"heatmap engine must be 'ode' or 'sim', got {engine}")
    points = int(section["points"])
    cap = as_float(section["cap"])
    lam, D0 = build_spectrum(config, d=d)
    r0 = initial_risk(lam, D0)

    rows, maps = [], []
    for gamma in section["gammas"]:
        gamma = as_float(gamma)
        n = max(1, int(round(d / gamma)))
        c_grid = np.geomspace(as_float(section["c_min"]), as_float(section["c_max"]), points)
        eta_top = as_float(section["eta0_max"]) if section.get("eta0_max") is not None else 4.0 / gamma
        eta_grid = np.geomspace(as_float(section["eta0_min"]), eta_top, points)
        for alpha in section["alphas"]:
            alpha = as_float(alpha)
            cells = [(c, eta) for c in c_grid for eta in eta_grid]
            logging.info("[Experiment] heatmap gamma=%g alpha=%g: %d cells (%s engine)",
                         gamma, alpha, len(cells), engine)

            def problem_for(c: float, eta: float) -> OdeProblem:
                return OdeProblem(lam, D0, Schedule.polynomial(eta, alpha), c, rho, gamma, zeta)

            def run_for(c: float, eta: float) -> Optional[RunConfig]:
                if engine != "sim":
                    return None
                return RunConfig(n, lam, D0, zeta, c, Schedule.polynomial(eta, alpha), rho,
                                 seed=int(config["seed"]), trials=int(config["sim"]["trials"]), record_grid=2)

            risks = Parallel(n_jobs=Config.N_JOBS)(
                delayed(_cell_risk)(problem_for(c, e), engine, run_for(c, e), dt) for c, e in cells)
            risks = np.array(risks, dtype=float)
            for (c, eta), risk in zip(cells, risks):
                rows.append({"gamma": gamma, "alpha": alpha, "c": c, "eta0": eta,
                             "final_risk": risk, "capped_risk": min(risk, cap)})

            best = int(np.argmin(risks))
            c_star, eta_star = cells[best]
            risk_wide_clip = _cell_risk(problem_for(10.0 * c_star, eta_star), engine,
                                        run_for(10.0 * c_star, eta_star), dt)
            entry = {
                "gamma": gamma, "alpha": alpha,
                "argmin": {"c": c_star, "eta0": eta_star, "final_risk": float(risks[best])},
                "risk_at_10c_star": risk_wide_clip,
                "reference_curves": {"c": 1.0, "eta0": 2.0 / gamma, "c_eta0": math.log(1.0 / gamma)},
            }
            if alpha == 0.0 and config["spectrum"]["variant"] == "identity":
                v_grid = np.geomspace(1e-3, 2.0 / gamma, 400)
                guide = [surrogate_constant_risk(r0, gamma, rho, 1.0, v) for v in v_grid]
                entry["surrogate_c_eta0"] = float(v_grid[int(np.argmin(guide))])
            maps.append(entry)

    store.write_csv("heatmap.csv", pd.DataFrame(rows))
    payload = {"engine": engine, "cap": cap, "maps": maps}
    store.write_json("heatmap.json", payload)
    return payload


# --- schedules-compare ---

def cmd_schedules_compare(config: Mapping[str, Any], store: ResultStore) -> Dict[str, Any]:
    """Optimally tuned final risk of polynomial and harmonic schedules across n."""
    section = config["schedules"]
    d = int(config["model"]["d"])
    zeta = as_float(config["model"]["zeta"])
    c, rho = _privacy(config)
    dt = as_float(config["ode"]["dt"])
    search = config["search"]
    engine = section.get("engine", "ode")
    lam, D0 = build_spectrum(config, d=d)

    rows = []
    for factor in section["n_factors"]:
        n = int(factor) * d
        gamma = d / n
        base = OdeProblem(lam, D0, Schedule.constant(1.0), c, rho, gamma, zeta)
        candidates = []
        for alpha in section["alphas"]:
            alpha = as_float(alpha)
            found = optimize_eta0(base.with_schedule(Schedule.polynomial(1.0, alpha)),
                                  grid_points=int(search["grid_points"]), eta_min=as_float(search["eta_min"]), dt=dt)
            candidates.append((f"alpha={alpha:g}", Schedule.polynomial(found.eta0_star, alpha), c, found.R_star))
        if section.get("harmonic", True):
            if search.get("theory_defaults"):
                theory = theory_harmonic_defaults(base)
                problem = OdeProblem(lam, D0, Schedule.harmonic(theory["beta"], theory["tau"]),
                                     theory["c"], rho, gamma, zeta)
                candidates.append(("harmonic-theory", problem.schedule, theory["c"],
                                   integrate(problem, dt=dt).final_private_risk))
            else:
                tuned = tune_harmonic(base, dt=dt)
                candidates.append(("harmonic", Schedule.harmonic(tuned.beta_star, tuned.tau_star), c, tuned.R_star))

        # Ratios are taken against the constant schedule, or the first candidate without one
        reference = next((risk for label, _, _, risk in candidates if label == "alpha=0"), candidates[0][3])
        for label, schedule, c_used, risk in candidates:
            row = {"n": n, "gamma": gamma, "schedule": label, "c": c_used, "eta0": schedule.eta0,
                   "beta": schedule.beta if schedule.variant == "harmonic" else math.nan,
                   "tau": schedule.tau if schedule.variant == "harmonic" else math.nan,
                   "R_star": risk, "ratio_to_constant": risk / reference}
            if engine == "sim":
                run = RunConfig(n, lam, D0, zeta, c_used, schedule, rho, seed=int(config["seed"]),
                                trials=int(config["sim"]["trials"]), record_grid=2)
                row["sim_final_mean"] = run_dpgd(run).final_mean
            rows.append(row)
        logging.info("[Experiment] schedules n=%d: %s", n,
                     ", ".join(f"{label}={risk:.4g}" for label, _, _, risk in candidates))

    frame = pd.DataFrame(rows)
    store.write_csv("schedules.csv", frame)
    best_rows = []
    for n, group in frame.groupby("n", sort=True):
        poly = group[group["schedule"].str.startswith("alpha=")]
        harmonic = group[group["schedule"].str.startswith("harmonic")]
        best_poly = float(poly["R_star"].min())
        best_rows.append({
            "n": int(n), "best_polynomial": poly.loc[poly["R_star"].idxmin(), "schedule"],
            "best_polynomial_risk": best_poly,
            "harmonic_ratio": float(harmonic["R_star"].min()) / best_poly if len(harmonic) else None,
        })
    payload = {"per_n": best_rows, "engine": engine}
    store.write_json("schedules.json", payload)
    return payload


# --- scaling-law ---

def cmd_scaling_law(config: Mapping[str, Any], store: ResultStore) -> Dict[str, Any]:
    """Gamma sweeps for every (phi, psi, alpha, b) case, fitted slopes against predictions."""
    section = config["scaling"]
    d = int(config["model"]["d"])
    zeta = as_float(config["model"]["zeta"])
    c = as_float(config["privacy"]["c"])
    dt = as_float(config["ode"]["dt"])
    lo, hi = (as_float(v) for v in section["log10_gamma"])
    gammas = np.logspace(lo, hi, int(section["points"]))
    search = config["search"]

    point_rows, slope_rows = [], []
    for phi, psi, alpha, b in section["cases"]:
        case = ScalingCase(as_float(phi), as_float(psi), as_float(alpha), as_float(b))
        lam, D0 = build_spectrum({**config, "spectrum": {**config["spectrum"], "variant": "power_law"},
                                  "target": {**config["target"], "mode": "power_aligned"}},
                                 d=d, phi=case.phi, psi=case.psi)

        def factory(gamma: float, lam=lam, D0=D0, case=case) -> OdeProblem:
            return OdeProblem(lam, D0, Schedule.polynomial(1.0, case.alpha), c, gamma ** case.b, gamma, zeta)

        result = gamma_sweep(case, d, gammas, c=c, zeta=zeta, tolerance=as_float(section["tolerance"]),
                             dt=dt, problem_factory=factory, grid_points=int(search["grid_points"]),
                             eta_min=as_float(search["eta_min"]))
        for row in result.rows():
            point_rows.append({"phi": case.phi, "psi": case.psi, "alpha": case.alpha, "b": case.b, **row})
        slope_rows.append(result.summary())

    store.write_csv("sweep_points.csv", pd.DataFrame(point_rows))
    store.write_csv("slopes.csv", pd.DataFrame(slope_rows))
    payload = {"d": d, "c": c, "zeta": zeta, "cases": slope_rows}
    store.write_json("scaling.json", payload)
    return payload


# --- privacy-report ---

def cmd_privacy_report(config: Mapping[str, Any], store: ResultStore) -> Dict[str, Any]:
    """Noise schedule, verified zCDP level and (epsilon, delta) conversions."""
    schedule = build_schedule(config)
    rho = as_float(config["privacy"]["rho"])
    n = int(config["privacy_report"]["n"])
    budget = discrete_noise_schedule(schedule, n, rho)
    verified = accountant_rho(budget.eta, budget.sigma)
    table = approx_dp_table(rho, [as_float(x) for x in config["privacy"]["deltas"]])

    steps = np.arange(1, n + 1)
    store.write_csv("noise_schedule.csv", pd.DataFrame({
        "k": steps, "t": steps / n, "eta_k": budget.eta, "sigma_k": budget.sigma}))
    store.write_csv("epsilon.csv", pd.DataFrame(table))

    nonzero = int(np.count_nonzero(budget.sigma))
    logging.info("[Privacy] %s, n=%d: %d non-zero noise steps, max sigma %.4g",
                 schedule.describe(), n, nonzero, float(np.max(budget.sigma)))
    logging.info("[Privacy] target rho=%.6g, verified rho=%.6g", rho, verified)
    for row in table:
        logging.info("[Privacy] delta=%.1e -> epsilon=%.4f", row["delta"], row["epsilon"])

    payload = {"schedule": schedule.to_dict(), "n": n, "rho_target": rho, "rho_verified": verified,
               "nonzero_noise_steps": nonzero, "epsilon": table}
    store.write_json("privacy.json", payload)
    return payload


# --- real-data ---

def cmd_real_data(config: Mapping[str, Any], store: ResultStore, force: bool = False) -> Dict[str, Any]:
    """DP-GD on a CSV dataset with train / normalization / validation splits."""
    data = config["data"]
    if not data.get("path"):
        raise ConfigError("real-data needs a dataset path (data.path or --data)")
    if not data.get("label_column"):
        raise ConfigError("real-data needs a label column (data.label_column or --label-column)")
    c, rho = _privacy(config)
    frame = load_dataset(data["path"], data["label_column"])
    split = tuple(as_float(s) for s in data["split"])
    trials = int(config["sim"]["trials"])
    check_budget(float(len(frame) * split[0] * (frame.shape[1] - 1) * trials), force=force)

    result = run_on_dataset(frame, data["label_column"],
                            DatasetConfig(c, rho, build_schedule(config), seed=int(config["seed"]),
                                          trials=trials, split=split))
    store.write_csv("trials.csv", pd.DataFrame({
        "trial": np.arange(trials), "validation_loss": result.losses, "diverged": result.diverged}))
    payload = {
        "gamma": result.gamma, "n_train": result.n_train, "d": result.d,
        "mean": result.mean_loss, "std": result.std_loss, "final_private_risk": result.mean_loss,
        "baseline_loss": result.baseline_loss, "dropped_features": result.dropped,
        "diverged_trials": int(result.diverged.sum()),
    }
    store.write_json("summary.json", payload)
    return payload


COMMANDS = {
    "ode-vs-sim": cmd_ode_vs_sim,
    "heatmap": cmd_heatmap,
    "schedules-compare": cmd_schedules_compare,
    "scaling-law": cmd_scaling_law,
    "privacy-report": cmd_privacy_report,
}

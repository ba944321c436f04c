"""
This is the main entry point for the DP-GD lab.
It handles logging setup, configuration resolution and dispatches the experiment subcommands.
"""
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import typer

try:
    from .config import Config
    from .logging_config import attach_run_log, detach_run_log, setup_logging
    from .config_validator import run_validations, validate_experiment_config
    from .errors import ConfigError, NumericalError
    from .modul_experiments import COMMANDS, cmd_real_data
    from .modul_helper import check_budget, estimate_cost, resolve_config
    from .modul_results import ResultStore
except ImportError:
    import sys
    sys.path.insert(0, str(Path(__file__).parent))
    from config import Config
    from logging_config import attach_run_log, detach_run_log, setup_logging
    from config_validator import run_validations, validate_experiment_config
    from errors import ConfigError, NumericalError
    from modul_experiments import COMMANDS, cmd_real_data
    from modul_helper import check_budget, estimate_cost, resolve_config
    from modul_results import ResultStore

app = typer.Typer(add_completion=False, help="Differentially private one-pass GD: simulator, ODE engine, scaling laws.")

ConfigOption = typer.Option(None, "--config", help="YAML/JSON experiment configuration.")
OutOption = typer.Option(None, "--out", help="Output directory.")
SeedOption = typer.Option(None, "--seed", help="Master random seed.")
PresetOption = typer.Option(None, "--preset", help="Named preset to start from.")
ForceOption = typer.Option(False, "--force", help="Run even if the compute budget is exceeded.")
SetOption = typer.Option(None, "--set", help="Override a config entry, e.g. --set privacy.rho=0.5")
DimOption = typer.Option(None, "--d", help="Dimension override.")
TrialsOption = typer.Option(None, "--trials", help="Number of simulation trials.")


def setup_logging_wrapper():
    """Configures logging to file and console."""
    Config.setup_directories() # Ensure output and logs directories exist
    setup_logging(Config.LOG_FILE, logging.INFO)


def _flag_overrides(kind: str, seed: Optional[int], out: Optional[Path], d: Optional[int],
                    trials: Optional[int]) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if seed is not None:
        overrides["seed"] = seed
    if out is not None:
        overrides["output_dir"] = str(out)
    if d is not None:
        overrides["model"] = {"d": d}
        if kind == "ode-vs-sim":
            overrides["ode_vs_sim"] = {"dims": [d]}
    if trials is not None:
        overrides["sim"] = {"trials": trials}
    return overrides


def run_experiment(kind: str, config_path: Optional[Path], out: Optional[Path], seed: Optional[int],
                   preset: Optional[str], force: bool, assignments: Optional[List[str]],
                   overrides: Optional[Dict[str, Any]] = None) -> int:
    """
    Resolve, validate and run one experiment.

    Returns:
        Process exit code
    """
    setup_logging_wrapper()
    run_log = None

    try:
        logging.info("🚀 Starting experiment '%s'...", kind)

        # 1. Resolve configuration
        logging.info("⚙️ Resolving configuration...")
        merged = dict(overrides or {})
        for key, value in _flag_overrides(kind, seed, out, None, None).items():
            merged.setdefault(key, value)
        config = resolve_config(kind, preset=preset, config_path=config_path,
                                overrides=merged, assignments=assignments)

        # 2. Validate configuration
        logging.info("🔍 Validating configuration...")
        if not run_validations():
            logging.warning("⚠️  Configuration validation issues found. Continuing anyway.")
        issues = validate_experiment_config(config)
        if issues:
            for issue_type, message in issues:
                logging.error("  [%s] %s", issue_type, message)
            raise ConfigError(f"experiment configuration has {len(issues)} issue(s)")

        # 3. Guard the compute budget
        check_budget(estimate_cost(config), force=force)

        # 4. Run and persist
        output_dir = Path(config["output_dir"] or Config.OUTPUT_DIR / kind)
        store = ResultStore(output_dir, config)
        run_log = attach_run_log(output_dir)
        store.write_config()
        if kind == "real-data":
            cmd_real_data(config, store, force=force)
        else:
            COMMANDS[kind](config, store)

        logging.info("✅ Experiment '%s' finished; outputs in %s (config %s)",
                     kind, output_dir, store.config_hash[:12])
        return Config.EXIT_OK

    except ConfigError as err:
        logging.error("❌ Configuration error: %s", err)
        return Config.EXIT_CONFIG_ERROR
    except NumericalError as err:
        logging.error("❌ Numerical failure: %s", err)
        return Config.EXIT_NUMERICAL_ERROR
    except Exception as err: # pylint: disable=broad-exception-caught
        logging.critical("❌ An unexpected critical error occurred: %s", err, exc_info=True)
        return 1
    finally:
        if run_log is not None:
            detach_run_log(run_log)


def _finish(code: int) -> None:
    if code != Config.EXIT_OK:
        raise typer.Exit(code=code)


def _command(kind: str) -> Callable:
    def command(config: Optional[Path] = ConfigOption, out: Optional[Path] = OutOption,
                seed: Optional[int] = SeedOption, preset: Optional[str] = PresetOption,
                force: bool = ForceOption, set_: Optional[List[str]] = SetOption,
                d: Optional[int] = DimOption, trials: Optional[int] = TrialsOption):
        _finish(run_experiment(kind, config, out, seed, preset, force, set_,
                               _flag_overrides(kind, None, None, d, trials)))
    command.__doc__ = f"Run the {kind} experiment."
    return command


for _kind in ("ode-vs-sim", "heatmap", "scaling-law", "privacy-report"):
    app.command(name=_kind)(_command(_kind))


@app.command(name="schedules-compare")
def schedules_compare(config: Optional[Path] = ConfigOption, out: Optional[Path] = OutOption,
                      seed: Optional[int] = SeedOption, preset: Optional[str] = PresetOption,
                      force: bool = ForceOption, set_: Optional[List[str]] = SetOption,
                      d: Optional[int] = DimOption, trials: Optional[int] = TrialsOption,
                      theory_defaults: bool = typer.Option(False, "--theory-defaults",
                                                           help="Use the conservative harmonic parameters instead of tuning.")):
    """Compare tuned polynomial and harmonic schedules across n."""
    overrides = _flag_overrides("schedules-compare", None, None, d, trials)
    if theory_defaults:
        overrides["search"] = {"theory_defaults": True}
    _finish(run_experiment("schedules-compare", config, out, seed, preset, force, set_, overrides))


@app.command(name="real-data")
def real_data(data: Optional[Path] = typer.Option(None, "--data", help="CSV dataset with a header row."),
              label_column: Optional[str] = typer.Option(None, "--label-column", help="Target column."),
              split: Optional[str] = typer.Option(None, "--split", help="Fractions, e.g. 0.6,0.2,0.2"),
              config: Optional[Path] = ConfigOption, out: Optional[Path] = OutOption,
              seed: Optional[int] = SeedOption, preset: Optional[str] = PresetOption,
              force: bool = ForceOption, set_: Optional[List[str]] = SetOption,
              trials: Optional[int] = TrialsOption):
    """Run DP-GD on a CSV dataset."""
    overrides = _flag_overrides("real-data", None, None, None, trials)
    section: Dict[str, Any] = {}
    if data is not None:
        section["path"] = str(data)
    if label_column is not None:
        section["label_column"] = label_column
    if split is not None:
        try:
            section["split"] = [float(s) for s in split.split(",")]
        except ValueError:
            typer.echo(f"Invalid --split value: {split}", err=True)
            raise typer.Exit(code=Config.EXIT_CONFIG_ERROR)
    if section:
        overrides["data"] = section
    _finish(run_experiment("real-data", config, out, seed, preset, force, set_, overrides))


def main():
    """
    The sole entry point for the DP-GD lab command line.
    """
    app()


if __name__ == "__main__":
    main()

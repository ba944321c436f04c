"""
Logging configuration for the DP-GD lab.

One file handler for the lab log plus stdout; each experiment run can add a
``run.log`` next to its outputs.
"""
import logging
import sys
from pathlib import Path

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Worker pools and numexpr chatter at INFO on every joblib dispatch
QUIET_LOGGERS = ('joblib', 'numexpr', 'matplotlib')


def setup_logging(log_file_path: Path, log_level: int = logging.INFO) -> None:
    """
    Configure logging to file and console.

    Args:
        log_file_path: Path to the lab log file
        log_level: Logging level (default: INFO)
    """
    log_file_path.parent.mkdir(parents=True, exist_ok=True)

    logging.basicConfig(
        level=log_level,
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(log_file_path, encoding='utf-8'),
            logging.StreamHandler(sys.stdout)
        ],
        force=True
    )

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)


def attach_run_log(output_dir: Path, log_level: int = logging.INFO) -> logging.Handler:
    """
    Mirror the root logger into ``output_dir/run.log`` for the duration of one experiment.

    Returns:
        The handler; pass it to detach_run_log when the run ends
    """
    output_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(output_dir / "run.log", mode='w', encoding='utf-8')
    handler.setLevel(log_level)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.getLogger().addHandler(handler)
    return handler


def detach_run_log(handler: logging.Handler) -> None:
    logging.getLogger().removeHandler(handler)
    handler.close()


def get_logger(name: str) -> logging.Logger:
    """Logger for a lab module."""
    return logging.getLogger(name)

"""
This module handles the persistence of experiment outputs: the resolved
configuration with its hash, CSV tables and JSON summaries.
"""
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Mapping, Union

import numpy as np
import pandas as pd

# Use absolute imports for better testability
try:
    from .errors import ConfigError
except ImportError:
    # Fallback for when running tests
    import sys
    sys.path.insert(0, str(Path(__file__).parent))
    from errors import ConfigError

CSV_FLOAT_FORMAT = "%.10g"


def _plain(value: Any) -> Any:
    """Convert numpy and non-finite values into JSON-friendly Python objects."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return None
        return value
    if isinstance(value, Path):
        return str(value)
    return value


def config_hash(config: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a configuration."""
    canonical = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResultStore:
    """
    Writes the outputs of one experiment into a directory.
    """
    def __init__(self, output_dir: Union[str, Path], config: Mapping[str, Any]):
        self.output_dir = Path(output_dir)
        self.config = _plain(config)
        self.config_hash = config_hash(self.config)
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"cannot create output directory {self.output_dir}: {e}")

    def write_config(self) -> Path:
        """Save the resolved configuration, its seed and hash to config.json."""
        record = {"config": self.config, "seed": self.config.get("seed"), "config_hash": self.config_hash}
        return self.write_json("config.json", record)

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        """Save a table as CSV with a fixed float format."""
        path = self.output_dir / name
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        logging.info("[Results] Wrote %s (%d rows)", path, len(frame))
        return path

    def write_json(self, name: str, payload: Mapping[str, Any]) -> Path:
        """Save a JSON sidecar; every sidecar except config.json carries the config hash."""
        record = dict(payload)
        if name != "config.json":
            record.setdefault("config_hash", self.config_hash)
        path = self.output_dir / name
        try:
            with open(path, "w", encoding="utf-8") as file:
                json.dump(_plain(record), file, indent=2, sort_keys=True)
                file.write("\n")
        except IOError as e:
            logging.error("[Results] Error saving %s: %s", path, e)
            raise
        logging.info("[Results] Wrote %s", path)
        return path


def load_json(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a JSON sidecar back."""
    with open(path, "r", encoding="utf-8") as file:
        return json.load(file)

"""
Unit tests for the ResultStore class.
"""
import math
import tempfile
import unittest
import sys
from pathlib import Path

import numpy as np
import pandas as pd

# Add src to path so we can import modul_results
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

# Import the module directly to avoid relative import issues
import modul_results

class TestResultStore(unittest.TestCase):
    """Test cases for the ResultStore class."""

    def setUp(self):
        """Set up test fixtures."""
        # Create a temporary directory for testing
        self.temp_dir = tempfile.TemporaryDirectory()
        self.output_dir = Path(self.temp_dir.name) / "run"
        self.config = {"experiment": "privacy-report", "seed": 3, "privacy": {"rho": math.inf, "c": 1.0}}

    def tearDown(self):
        """Tear down test fixtures."""
        self.temp_dir.cleanup()

    def test_store_initialization(self):
        """Test that the store creates its directory and hashes the config."""
        store = modul_results.ResultStore(self.output_dir, self.config)
        self.assertTrue(self.output_dir.is_dir())
        self.assertEqual(len(store.config_hash), 64)
        self.assertEqual(store.config["privacy"]["rho"], "inf")

    def test_config_hash_is_canonical(self):
        """Test that key order does not change the hash but values do."""
        reordered = {"privacy": {"c": 1.0, "rho": math.inf}, "seed": 3, "experiment": "privacy-report"}
        self.assertEqual(modul_results.config_hash(self.config), modul_results.config_hash(reordered))
        changed = dict(self.config, seed=4)
        self.assertNotEqual(modul_results.config_hash(self.config), modul_results.config_hash(changed))

    def test_write_config(self):
        """Test that config.json records the config, seed and hash."""
        store = modul_results.ResultStore(self.output_dir, self.config)
        record = modul_results.load_json(store.write_config())
        self.assertEqual(record["seed"], 3)
        self.assertEqual(record["config_hash"], store.config_hash)
        self.assertEqual(record["config"]["experiment"], "privacy-report")

    def test_write_json_adds_hash(self):
        """Test that sidecars carry the config hash and JSON-safe values."""
        store = modul_results.ResultStore(self.output_dir, self.config)
        payload = {"value": np.float64(0.5), "count": np.int64(3), "missing": math.nan,
                   "flags": np.array([True, False]), "big": -math.inf}
        record = modul_results.load_json(store.write_json("summary.json", payload))
        self.assertEqual(record["config_hash"], store.config_hash)
        self.assertEqual(record["value"], 0.5)
        self.assertEqual(record["count"], 3)
        self.assertIsNone(record["missing"])
        self.assertEqual(record["flags"], [True, False])
        self.assertEqual(record["big"], "-inf")

    def test_write_csv(self):
        """Test that tables are written without an index and with a fixed float format."""
        store = modul_results.ResultStore(self.output_dir, self.config)
        path = store.write_csv("table.csv", pd.DataFrame({"k": [1, 2], "x": [1.0 / 3.0, 2.0]}))
        lines = path.read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "k,x")
        self.assertEqual(lines[1], "1,0.3333333333")
        self.assertEqual(lines[2], "2,2")

if __name__ == '__main__':
    unittest.main()

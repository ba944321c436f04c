"""
Unit tests for the modul_clipping module.
"""
import math
import unittest
import sys
from pathlib import Path

import numpy as np

# Add src to path so we can import modul_clipping
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import modul_clipping
from errors import DegenerateRiskError, DomainError


def c_for_ratio(ratio, risk, zeta):
    """Clipping constant with c / sqrt(2P) equal to ``ratio``."""
    return ratio * math.sqrt(2.0 * (risk + 0.5 * zeta * zeta))


class TestClosedForms(unittest.TestCase):
    """Test cases for the closed-form clipping factors."""

    def test_erf_reference_values(self):
        """Test erf against tabulated values."""
        self.assertAlmostEqual(modul_clipping.erf(0.0), 0.0, places=15)
        self.assertAlmostEqual(modul_clipping.erf(1.0), 0.8427007929497149, places=14)
        self.assertAlmostEqual(modul_clipping.erf(-0.5), -0.5204998778130465, places=14)
        values = modul_clipping.erf(np.array([0.0, 2.0]))
        self.assertEqual(values.shape, (2,))

    def test_erf_rejects_non_finite_input(self):
        """Test that NaN input is a domain error."""
        with self.assertRaises(DomainError):
            modul_clipping.erf(float("nan"))

    def test_mu_at_unit_argument(self):
        """Test that mu equals erf(1) when c / (2 sqrt(P)) = 1."""
        risk, zeta = 0.5, 0.3
        c = 2.0 * math.sqrt(risk + 0.5 * zeta * zeta)
        self.assertAlmostEqual(modul_clipping.mu_c(c, risk, zeta), 0.84270, places=5)

    def test_nu_at_unit_scaled_clip(self):
        """Test that nu equals 1 - sqrt(2/(pi e)) at c / sqrt(2P) = 1."""
        expected = 1.0 - math.sqrt(2.0 / (math.pi * math.e))
        for risk, zeta in [(0.5, 0.3), (2.0, 0.0), (0.0, 1.0)]:
            with self.subTest(risk=risk, zeta=zeta):
                c = c_for_ratio(1.0, risk, zeta)
                self.assertAlmostEqual(modul_clipping.nu_c(c, risk, zeta), 0.516060, delta=1e-6)
                self.assertAlmostEqual(modul_clipping.nu_c(c, risk, zeta), expected, places=12)

    def test_unclipped_factors_are_one(self):
        """Test that c = inf short-circuits to (1, 1), even at zero risk."""
        factors = modul_clipping.clipping_factors(math.inf, 0.0, 0.0)
        self.assertEqual((factors.mu, factors.nu), (1.0, 1.0))

    def test_factors_lie_in_unit_interval(self):
        """Test that both factors lie in (0, 1] and grow with c."""
        previous = (0.0, 0.0)
        for c in [0.01, 0.1, 1.0, 10.0, 100.0]:
            with self.subTest(c=c):
                factors = modul_clipping.clipping_factors(c, 0.5, 0.3)
                self.assertGreater(factors.mu, 0.0)
                self.assertLessEqual(factors.mu, 1.0)
                self.assertGreater(factors.nu, 0.0)
                self.assertLessEqual(factors.nu, 1.0)
                self.assertGreater(factors.mu, previous[0])
                self.assertGreater(factors.nu, previous[1])
                previous = (factors.mu, factors.nu)

    def test_aggressive_clipping_limit(self):
        """Test mu ~ sqrt(2/pi) c / zeta for c much smaller than zeta."""
        mu = modul_clipping.mu_c(0.01, 0.0, 1.0)
        self.assertAlmostEqual(mu, modul_clipping.SQRT_2_OVER_PI * 0.01, delta=1e-6)

    def test_small_clip_limits(self):
        """Test mu <= sqrt(2/pi) c' and nu <= c'^2 with c' = c / sqrt(2P), tightening as c shrinks."""
        risk, zeta = 0.5, 0.3
        scale = math.sqrt(2.0 * (risk + 0.5 * zeta * zeta))
        mu_gaps, nu_gaps = [], []
        for c in np.geomspace(1e-3, 1e3, 13):
            with self.subTest(c=c):
                ratio = c / scale
                factors = modul_clipping.clipping_factors(float(c), risk, zeta)
                self.assertGreater(factors.mu, 0.0)
                self.assertGreater(factors.nu, 0.0)
                self.assertLessEqual(factors.mu, min(1.0, modul_clipping.SQRT_2_OVER_PI * ratio) + 1e-15)
                self.assertLessEqual(factors.nu, min(1.0, ratio * ratio) * (1.0 + 1e-12))
                mu_gaps.append(1.0 - factors.mu / (modul_clipping.SQRT_2_OVER_PI * ratio))
                nu_gaps.append(1.0 - factors.nu / (ratio * ratio))
        self.assertTrue(np.all(np.diff(mu_gaps) > 0))
        self.assertTrue(np.all(np.diff(nu_gaps) > 0))
        self.assertLess(mu_gaps[0], 1e-6)
        self.assertLess(nu_gaps[0], 2e-3)
        self.assertAlmostEqual(modul_clipping.mu_c(1e3, risk, zeta), 1.0, places=12)
        self.assertAlmostEqual(modul_clipping.nu_c(1e3, risk, zeta), 1.0, places=9)

    def test_nu_exceeds_half_beyond_unit_scaled_clip(self):
        """Test that nu > 1/2 whenever c / sqrt(2P) > 1."""
        for ratio in [1.001, 1.1, 1.5, 2.0, 5.0, 50.0]:
            for risk, zeta in [(0.5, 0.3), (2.0, 0.0), (0.0, 1.0), (10.0, 0.5)]:
                with self.subTest(ratio=ratio, risk=risk, zeta=zeta):
                    self.assertGreater(modul_clipping.nu_c(c_for_ratio(ratio, risk, zeta), risk, zeta), 0.5)

    def test_degenerate_risk(self):
        """Test that zero total risk is rejected for finite c."""
        with self.assertRaises(DegenerateRiskError):
            modul_clipping.mu_c(1.0, 0.0, 0.0)
        with self.assertRaises(DegenerateRiskError):
            modul_clipping.nu_c(1.0, 0.0, 0.0)

    def test_invalid_arguments(self):
        """Test that non-positive c and negative risk are domain errors."""
        with self.assertRaises(DomainError):
            modul_clipping.mu_c(0.0, 1.0, 0.3)
        with self.assertRaises(DomainError):
            modul_clipping.nu_c(1.0, -0.1, 0.3)


class TestMonteCarloOracle(unittest.TestCase):
    """Test cases comparing the closed forms with the Monte-Carlo oracle."""

    def test_oracle_matches_closed_form(self):
        """Test agreement within 3 standard errors at 1e6 samples."""
        closed = modul_clipping.clipping_factors(1.0, 0.5, 0.3)
        mc = modul_clipping.mc_clipping_oracle(1.0, 0.5, 0.3, samples=10**6, seed=0)
        self.assertLessEqual(abs(mc.mu - closed.mu), 3.0 * mc.mu_se)
        self.assertLessEqual(abs(mc.nu - closed.nu), 3.0 * mc.nu_se)

    def test_oracle_matches_closed_form_on_grid(self):
        """Test agreement over a (c, R) grid, each point on its own seed."""
        zeta = 0.3
        for i, c in enumerate([0.1, 0.3, 1.0, 3.0, 10.0]):
            for j, risk in enumerate([0.0, 0.1, 0.5, 1.0, 2.0]):
                with self.subTest(c=c, risk=risk):
                    closed = modul_clipping.clipping_factors(c, risk, zeta)
                    mc = modul_clipping.mc_clipping_oracle(c, risk, zeta, samples=2 * 10**5, seed=5 * i + j)
                    self.assertLessEqual(abs(mc.mu - closed.mu), 4.0 * mc.mu_se + 1e-12)
                    self.assertLessEqual(abs(mc.nu - closed.nu), 4.0 * mc.nu_se + 1e-12)

    def test_oracle_is_reproducible(self):
        """Test that the same seed gives identical estimates."""
        first = modul_clipping.mc_clipping_oracle(0.5, 1.0, 0.3, samples=10**4, seed=7)
        second = modul_clipping.mc_clipping_oracle(0.5, 1.0, 0.3, samples=10**4, seed=7)
        self.assertEqual(first, second)

    def test_oracle_rejects_small_samples(self):
        """Test that fewer than 1e4 samples are refused."""
        with self.assertRaises(DomainError):
            modul_clipping.mc_clipping_oracle(1.0, 0.5, 0.3, samples=100)

if __name__ == '__main__':
    unittest.main()

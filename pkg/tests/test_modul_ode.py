"""
Unit tests for the modul_ode module: the deterministic-equivalent risk curves.
"""
import math
import unittest
import sys
from pathlib import Path

import numpy as np

# Add src to path so we can import modul_ode
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from modul_ode import (OdeProblem, default_grid, final_private_risk, implicit_residual,
                       integrate, sandwich_bounds, surrogate_constant_risk)
from modul_clipping import mu_c
from modul_schedule import Schedule
from modul_spectrum import SpectrumModel, eigenvalues, mode_energies
from errors import DomainError


def reference_problem(alpha=0.0, variant="identity", d=100):
    """gamma = 0.1, rho = 1, zeta = 0.3, eta~(0) = 3, c = 1, isotropic target."""
    lam = eigenvalues(SpectrumModel(variant, d))
    D0 = mode_energies(lam, mode="isotropic", norm_sq=1.0).D0
    return OdeProblem(lam, D0, Schedule.polynomial(3.0, alpha), 1.0, 1.0, 0.1, 0.3)


class TestOdeProblem(unittest.TestCase):
    """Test cases for problem validation."""

    def test_invalid_parameters(self):
        """Test that every out-of-domain parameter is rejected."""
        lam, D0, schedule = np.ones(3), np.full(3, 0.5), Schedule.constant(1.0)
        cases = {
            "c": dict(c=0.0, rho=1.0, gamma=0.1, zeta=0.3),
            "rho": dict(c=1.0, rho=0.0, gamma=0.1, zeta=0.3),
            "gamma": dict(c=1.0, rho=1.0, gamma=-0.1, zeta=0.3),
            "zeta": dict(c=1.0, rho=1.0, gamma=0.1, zeta=-1.0),
        }
        for name, kwargs in cases.items():
            with self.subTest(parameter=name):
                with self.assertRaises(DomainError):
                    OdeProblem(lam, D0, schedule, **kwargs)
        with self.assertRaises(DomainError):
            OdeProblem(lam, np.ones(2), schedule, 1.0, 1.0, 0.1, 0.3)

    def test_step_cap_and_noise_coefficient(self):
        """Test 2/gamma and 2 c^2 gamma^2 / rho^2."""
        problem = reference_problem()
        self.assertAlmostEqual(problem.step_cap, 20.0)
        self.assertAlmostEqual(problem.noise_coefficient, 0.02)
        free = OdeProblem(np.ones(2), np.ones(2), Schedule.constant(1.0), math.inf, math.inf, 0.0, 0.0)
        self.assertTrue(math.isinf(free.step_cap))
        self.assertEqual(free.noise_coefficient, 0.0)

    def test_unclipped_private_run_is_rejected(self):
        """Test that c = inf with finite rho cannot be integrated."""
        problem = OdeProblem(np.ones(2), np.ones(2), Schedule.polynomial(1.0, 0.5), math.inf, 1.0, 0.1, 0.3)
        with self.assertRaises(DomainError):
            integrate(problem)


class TestGrid(unittest.TestCase):
    """Test cases for the integration grid."""

    def test_stability_refinement(self):
        """Test that the step respects the RK4 stability limit for stiff spectra."""
        problem = OdeProblem(np.array([200.0]), np.array([0.5]), Schedule.constant(3.0), 1.0, 1.0, 0.0, 0.3)
        grid = default_grid(problem, dt=0.01)
        limit = 2.5 / (2.0 * 200.0 * 3.0 * mu_c(1.0, 0.0, 0.3))
        self.assertLessEqual(float(np.max(np.diff(grid))), limit + 1e-15)
        self.assertEqual(grid[0], 0.0)
        self.assertEqual(grid[-1], 1.0)

    def test_kink_node(self):
        """Test that the grid has a node where eta~ crosses 2/gamma."""
        problem = OdeProblem(np.ones(4), np.full(4, 0.5), Schedule.polynomial(3.0, 1.0), 1.0, 1.0, 1.0, 0.3)
        grid = default_grid(problem, dt=1e-2)
        self.assertLess(float(np.min(np.abs(grid - 1.0 / 3.0))), 1e-15)

    def test_explicit_grid_validation(self):
        """Test that malformed grids are rejected."""
        problem = reference_problem()
        for grid in [np.array([0.0]), np.array([0.1, 1.0]), np.array([0.0, 0.6, 0.5, 1.0])]:
            with self.subTest(grid=grid.tolist()):
                with self.assertRaises(DomainError):
                    integrate(problem, grid=grid)


class TestIntegration(unittest.TestCase):
    """Test cases for the risk curve."""

    def test_noiseless_gradient_flow(self):
        """Test R(t) = R(0) exp(-2 t) for full-batch flow on the identity spectrum."""
        problem = OdeProblem(np.ones(5), np.full(5, 0.5), Schedule.constant(1.0), math.inf, math.inf, 0.0, 0.0)
        curve = integrate(problem, dt=1e-3)
        self.assertAlmostEqual(curve.R[-1], 0.5 * math.exp(-2.0), places=9)
        self.assertAlmostEqual(curve.Gamma[-1], 1.0, places=12)
        self.assertEqual(curve.final_private_risk, curve.R[-1])

    def test_curve_shape(self):
        """Test that the curve starts at R(0), stays positive and has matching columns."""
        curve = integrate(reference_problem(alpha=0.5))
        self.assertAlmostEqual(curve.R[0], 0.5)
        self.assertTrue(np.all(curve.R > 0))
        self.assertTrue(np.all(np.diff(curve.Gamma) > 0))
        frame = curve.to_frame()
        self.assertEqual(list(frame.columns), ["t", "R", "Gamma"])
        self.assertEqual(len(frame), curve.grid.size)
        coarse = curve.resample(np.linspace(0.0, 1.0, 11))
        self.assertEqual(coarse.R.shape, (11,))
        self.assertAlmostEqual(coarse.R[0], 0.5)

    def test_risk_decreases_for_small_noise(self):
        """Test that training reduces the risk in the reference configuration."""
        for alpha in [0.0, 0.5]:
            with self.subTest(alpha=alpha):
                curve = integrate(reference_problem(alpha=alpha))
                self.assertLess(curve.R[-1], curve.R[0])

    def test_final_private_risk(self):
        """Test the last-iterate correction 2 c^2 eta~(1)^2 gamma^2 / rho^2."""
        constant = Schedule.constant(3.0)
        self.assertAlmostEqual(final_private_risk(0.1, constant, 1.0, 0.1, 1.0), 0.28, places=12)
        self.assertAlmostEqual(final_private_risk(0.1, constant, 1.0, 0.1, 2.0), 0.145, places=12)
        self.assertEqual(final_private_risk(0.1, Schedule.polynomial(3.0, 0.5), 1.0, 0.1, 1.0), 0.1)
        self.assertEqual(final_private_risk(0.1, constant, 1.0, 0.1, math.inf), 0.1)
        curve = integrate(reference_problem(alpha=0.0))
        self.assertAlmostEqual(curve.final_private_risk - curve.R[-1], 0.18, places=12)

    def test_step_refinement_converges(self):
        """Test that successive step halvings change the final risk by ever smaller amounts."""
        problem = reference_problem(alpha=0.0, variant="uniform_0_2")
        finals = [integrate(problem, dt=1.0 / steps).R[-1] for steps in [50, 100, 200, 400]]
        changes = np.abs(np.diff(finals))
        for k in range(1, changes.size):
            with self.subTest(halving=k):
                self.assertLess(changes[k], 0.5 * changes[k - 1])
        self.assertLess(changes[-1], 1e-6)

    def test_noise_effect_is_monotone(self):
        """Test that the final private risk falls strictly as rho grows."""
        lam, D0 = np.ones(100), np.full(100, 0.5)
        for alpha in [0.0, 0.5]:
            with self.subTest(alpha=alpha):
                risks = [integrate(OdeProblem(lam, D0, Schedule.polynomial(3.0, alpha), 1.0, rho, 0.1, 0.3))
                         .final_private_risk for rho in [0.1, 0.3, 1.0, 3.0, 10.0]]
                self.assertTrue(np.all(np.isfinite(risks)))
                self.assertTrue(np.all(np.diff(risks) < 0), msg=str(risks))

    def test_sandwich_identity_is_exact(self):
        """Test that both bounds coincide with the curve on the identity spectrum."""
        problem = reference_problem(alpha=0.5)
        curve = integrate(problem)
        upper, lower = sandwich_bounds(problem, grid=curve.grid)
        np.testing.assert_allclose(upper.R, curve.R, rtol=0, atol=1e-9)
        np.testing.assert_allclose(lower.R, curve.R, rtol=0, atol=1e-9)

    def test_sandwich_uniform_spectrum(self):
        """Test lower <= R <= upper at every grid point on the uniform spectrum."""
        for alpha in [0.0, 0.5]:
            with self.subTest(alpha=alpha):
                problem = reference_problem(alpha=alpha, variant="uniform_0_2")
                curve = integrate(problem)
                upper, lower = sandwich_bounds(problem, grid=curve.grid)
                self.assertTrue(np.all(lower.R <= curve.R + 1e-12))
                self.assertTrue(np.all(curve.R <= upper.R + 1e-12))

    def test_upper_bound_grows_with_largest_eigenvalue(self):
        """Test that inflating lambda_max at fixed R(0) and grid never lowers the upper bound."""
        base = reference_problem(alpha=0.5, variant="uniform_0_2")
        grid = np.linspace(0.0, 1.0, 1001)
        previous = sandwich_bounds(base, grid=grid)[0].R
        for factor in [1.25, 1.5, 2.0]:
            with self.subTest(factor=factor):
                lam = base.lam.copy()
                D0 = base.D0.copy()
                top = int(np.argmax(lam))
                D0[top] /= factor
                lam[top] *= factor
                inflated = OdeProblem(lam, D0, base.schedule, base.c, base.rho, base.gamma, base.zeta)
                upper = sandwich_bounds(inflated, grid=grid)[0].R
                self.assertAlmostEqual(upper[0], previous[0], places=12)
                self.assertTrue(np.all(upper >= previous - 1e-12))
                self.assertGreater(upper[-1], previous[-1])
                previous = upper


class TestImplicitResidual(unittest.TestCase):
    """Test cases for the self-consistency check of the risk curve."""

    def test_residual_is_small(self):
        """Test that the curve satisfies the implicit equation."""
        for variant in ["identity", "uniform_0_2"]:
            for alpha in [0.0, 0.5]:
                with self.subTest(variant=variant, alpha=alpha):
                    problem = reference_problem(alpha=alpha, variant=variant)
                    self.assertLessEqual(implicit_residual(integrate(problem), problem), 1e-3)

    def test_residual_shrinks_with_the_step(self):
        """Test that halving the step reduces the residual."""
        problem = reference_problem(alpha=0.5, variant="uniform_0_2")
        coarse = implicit_residual(integrate(problem, dt=2e-3), problem)
        fine = implicit_residual(integrate(problem, dt=1e-3), problem)
        self.assertLess(fine, coarse)


class TestSurrogate(unittest.TestCase):
    """Test cases for the closed-form constant-schedule surrogate."""

    def test_surrogate_values(self):
        """Test the limits v = 0 and the formula at v = 1."""
        self.assertEqual(surrogate_constant_risk(0.5, 0.1, 1.0, 1.0, 0.0), 0.5)
        expected = (0.5 - 0.1) * math.exp(-1.0) + 0.1 + 0.01
        self.assertAlmostEqual(surrogate_constant_risk(0.5, 0.1, 1.0, 1.0, 1.0), expected, places=14)

if __name__ == '__main__':
    unittest.main()

import math

import numpy as np
from django.test import SimpleTestCase

from cdf.estimates import Cdf1D, CdfEstimate, empirical_cdf
from cdf.grids import EvalGrid
from core.exceptions import DimensionMismatchError, ImproperCdfError
from estimators.weights import WeightSpec
from .errors import sup_error, weighted_l2_error
from .risk import MODE_ATOMS, RiskReport, cvar, mean_std_from_cdf, relative_error, risk_report


def step(points, values):
    return CdfEstimate(grid=EvalGrid.from_arrays(np.asarray(points, dtype=float)), values=values, monotone=True)


def uniform_cdf():
    points = np.linspace(0.0, 1.0, 1001)
    return Cdf1D(points=points, values=points)


class WeightedL2ErrorTests(SimpleTestCase):
    def test_identical_cdfs(self):
        estimate = empirical_cdf([0.3, 1.2, 2.5])
        self.assertEqual(weighted_l2_error(estimate, estimate, WeightSpec()), 0.0)

    def test_unit_gap_on_unit_interval(self):
        zero = step([0.0], [0.0])
        point_mass = step([0.0], [1.0])
        weight = WeightSpec.rectangle([(0.0, 1.0)])
        self.assertAlmostEqual(weighted_l2_error(zero, point_mass, weight), 1.0)

    def test_symmetric(self):
        first = empirical_cdf([0.1, 0.4, 0.9])
        second = empirical_cdf([0.2, 0.3, 0.5, 0.8])
        weight = WeightSpec()
        self.assertAlmostEqual(weighted_l2_error(first, second, weight), weighted_l2_error(second, first, weight))

    def test_matches_dense_midpoint_rule(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            first = step(np.sort(rng.choice(100, 10, replace=False)) / 100, np.sort(rng.random(10)))
            second = step(np.sort(rng.choice(100, 7, replace=False)) / 100, np.sort(rng.random(7)))
            weight = WeightSpec.rectangle([(0.0, 1.0)])
            nodes = (np.arange(100000) + 0.5) / 100000
            gap = first.evaluate(nodes[:, None]) - second.evaluate(nodes[:, None])
            dense = float(np.sum(gap ** 2) / 100000)
            self.assertAlmostEqual(weighted_l2_error(first, second, weight), dense, delta=1e-6)

    def test_unbounded_weight_with_nonvanishing_tail(self):
        first = step([0.0], [1.0])
        second = step([0.0], [0.5])
        with self.assertLogs("estimators.weights", level="WARNING"):
            self.assertEqual(weighted_l2_error(first, second, WeightSpec()), math.inf)

    def test_two_dimensional_quadrature(self):
        grid = EvalGrid.from_arrays(np.array([0.0]), np.array([0.0]))
        zero = CdfEstimate(grid=grid, values=np.zeros((1, 1)))
        one = CdfEstimate(grid=grid, values=np.ones((1, 1)))
        weight = WeightSpec.rectangle([(0.0, 2.0), (0.0, 1.0)], resolution=8)
        self.assertAlmostEqual(weighted_l2_error(zero, one, weight), 2.0)

    def test_dimension_mismatch(self):
        grid = EvalGrid.from_arrays(np.array([0.0]), np.array([0.0]))
        with self.assertRaises(DimensionMismatchError):
            weighted_l2_error(step([0.0], [1.0]), CdfEstimate(grid=grid, values=np.ones((1, 1))), WeightSpec())


class SupErrorTests(SimpleTestCase):
    def test_largest_gap(self):
        first = step([0.0, 1.0], [0.5, 1.0])
        second = step([0.5], [1.0])
        self.assertAlmostEqual(sup_error(first, second), 0.5)


class CvarTests(SimpleTestCase):
    def test_uniform(self):
        self.assertAlmostEqual(cvar(uniform_cdf(), 0.95), 0.975, places=12)

    def test_point_mass(self):
        mass = Cdf1D(points=[5.0], values=[1.0])
        for a in (0.1, 0.5, 0.99):
            self.assertAlmostEqual(cvar(mass, a), 5.0)

    def test_matches_dense_integration(self):
        cdf = Cdf1D.from_samples([1.0, 2.0, 3.0, 4.0])
        nodes = 0.5 + (np.arange(1000000) + 0.5) * 0.5 / 1000000
        dense = float(np.mean(np.interp(nodes, [0.25, 0.5, 0.75, 1.0], [1.0, 2.0, 3.0, 4.0])))
        self.assertAlmostEqual(cvar(cdf, 0.5), dense, delta=1e-9)
        self.assertAlmostEqual(cvar(cdf, 0.5), 3.0)

    def test_atoms_mode(self):
        cdf = Cdf1D.from_samples([1.0, 2.0, 3.0, 4.0])
        self.assertAlmostEqual(cvar(cdf, 0.5, MODE_ATOMS), 3.5)
        self.assertAlmostEqual(cvar(cdf, 0.6, MODE_ATOMS), (0.15 * 3 + 0.25 * 4) / 0.4)

    def test_monotone_in_level(self):
        cdf = Cdf1D.from_samples(np.random.default_rng(2).normal(size=50))
        values = [cvar(cdf, a) for a in np.linspace(0.05, 0.95, 19)]
        self.assertTrue(all(b >= a - 1e-12 for a, b in zip(values, values[1:])))

    def test_level_out_of_range(self):
        for a in (0.0, 1.0, -0.5):
            with self.assertRaises(ValueError):
                cvar(uniform_cdf(), a)

    def test_improper_cdf(self):
        with self.assertRaises(ImproperCdfError):
            cvar(Cdf1D(points=[0.0, 1.0], values=[0.2, 0.6]), 0.5)


class MeanStdTests(SimpleTestCase):
    def test_point_mass(self):
        self.assertEqual(mean_std_from_cdf(Cdf1D(points=[2.0], values=[1.0])), (2.0, 0.0))

    def test_uniform(self):
        mean, std = mean_std_from_cdf(uniform_cdf())
        self.assertAlmostEqual(mean, 0.5, delta=1e-9)
        self.assertAlmostEqual(std, 1 / math.sqrt(12), delta=1e-9)

    def test_atoms_match_sample_moments(self):
        samples = np.array([1.0, 2.0, 3.0])
        mean, std = mean_std_from_cdf(Cdf1D.from_samples(samples), MODE_ATOMS)
        self.assertAlmostEqual(mean, samples.mean(), delta=1e-12)
        self.assertAlmostEqual(std, samples.std(), delta=1e-12)

    def test_unbounded_support(self):
        with self.assertRaises(ImproperCdfError):
            mean_std_from_cdf(Cdf1D(points=[0.0], values=[0.5]))


class RiskReportTests(SimpleTestCase):
    def test_single_atom(self):
        report = risk_report(step([3.0], [1.0]), levels=(0.99,), quantile_levels=(0.5,))
        self.assertEqual(report.mean, 3.0)
        self.assertEqual(report.std, 0.0)
        self.assertAlmostEqual(report.cvar[0.99], 3.0)
        self.assertEqual(report.quantiles[0.5], 3.0)

    def test_cvar_dominates_quantile(self):
        cdf = Cdf1D.from_samples(np.random.default_rng(4).exponential(size=200))
        report = risk_report(cdf, levels=(0.9, 0.99), quantile_levels=(0.9, 0.99))
        for level in (0.9, 0.99):
            self.assertGreaterEqual(report.cvar[level], report.quantiles[level])

    def test_payload(self):
        report = RiskReport(mean=1.0, std=0.5, cvar={0.99: 2.0})
        self.assertEqual(RiskReport.from_dict(report.to_dict()), report)

    def test_relative_error(self):
        self.assertAlmostEqual(relative_error(1.1, 1.0), 0.1)
        self.assertEqual(relative_error(0.0, 0.0), 0.0)
        self.assertEqual(relative_error(1.0, 0.0), math.inf)

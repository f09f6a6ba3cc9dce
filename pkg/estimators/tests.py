import math

import numpy as np
from django.test import SimpleTestCase, tag

from cdf.estimates import ecdf_eval
from cdf.grids import EvalGrid
from core.exceptions import DegenerateSubsetError, DimensionMismatchError, SampleSizeError
from core.seeding import SeedStreams
from ensemble.sampling import SampleStream
from ensemble.specs import (
    KIND_GBM,
    KIND_LINEAR_GAUSSIAN,
    EnsembleHandle,
    GbmParams,
    JointBatch,
    LinearGaussianParams,
    ModelSpec,
    SubsetBatch,
)
from surrogate.regression import SurrogateCoefficients, fit_surrogate
from .evaluation import evaluate_subset
from .exploitation import ALPHA_TAIL, exploitation_cdf, exploitation_cdf_from_values
from .indicators import (
    IndicatorStats,
    alpha_hat,
    alpha_tail_extension,
    indicator_fields,
    indicator_stats,
    indicator_stats_from_values,
)
from .kfields import k_fields, k_fields_from_stats, k_hats, k_hats_from_values
from .loss import estimated_loss, loss_and_mstar, relative_efficiency, scaled_loss
from .oracle import oracle_stats, rho_field
from .weights import WeightSpec

IDENTITY = SurrogateCoefficients(subset=(1,), matrix=np.array([[0.0], [1.0]]), rank=2)


def batch_from(y, *xs):
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    blocks = tuple(np.asarray(x, dtype=float).reshape(len(x), -1) for x in xs)
    return JointBatch(count=len(y), y=y, x=blocks, charged_cost=0.0)


def random_pair(rng, m=None):
    m = m or int(rng.integers(3, 12))
    y = rng.integers(0, 6, size=m).astype(float)
    h = y + rng.integers(-2, 3, size=m)
    return y[:, None], h[:, None]


class IndicatorStatsTests(SimpleTestCase):
    def test_perfect_surrogate(self):
        batch = batch_from([0.2, 1.4, -0.3, 2.2], [0.2, 1.4, -0.3, 2.2])
        for x in (-1.0, 0.2, 1.0, 3.0):
            stats = indicator_stats(batch, IDENTITY, [x])
            self.assertEqual(stats.f_y, stats.f_h)
            self.assertEqual(stats.f_y, stats.f_yh)

    def test_saturation(self):
        stats = indicator_stats_from_values([1.0, 2.0], [3.0, 0.0], [10.0])
        self.assertEqual((stats.f_y, stats.f_h, stats.f_yh), (1.0, 1.0, 1.0))

    def test_hand_rows(self):
        stats = indicator_stats_from_values([1.0, 2.0, 3.0, 4.0], [2.0, 1.0, 4.0, 3.0], [2.5])
        self.assertEqual((stats.f_y, stats.f_h, stats.f_yh), (0.5, 0.5, 0.5))
        self.assertEqual(alpha_hat(stats), 1.0)

    def test_frechet_bounds_and_alpha_bound(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            y, h = random_pair(rng)
            grid = EvalGrid.from_arrays(np.unique(np.concatenate([y[:, 0], h[:, 0]])))
            stats = indicator_fields(y, h, grid)
            self.assertTrue(np.all(stats.f_yh <= np.minimum(stats.f_y, stats.f_h) + 1e-15))
            self.assertTrue(np.all(stats.f_yh >= np.maximum(0.0, stats.f_y + stats.f_h - 1) - 1e-15))
            self.assertTrue(np.all(np.abs(alpha_hat(stats)) <= 1.0))


class AlphaTests(SimpleTestCase):
    def test_perfect_surrogate_alpha_is_one(self):
        for f in (0.1, 0.5, 0.9):
            self.assertAlmostEqual(alpha_hat(IndicatorStats(np.float64(f), np.float64(f), np.float64(f))), 1.0)

    def test_outside_support_is_zero(self):
        self.assertEqual(alpha_hat(IndicatorStats(np.float64(0.3), np.float64(0.0), np.float64(0.0))), 0.0)
        self.assertEqual(alpha_hat(IndicatorStats(np.float64(0.3), np.float64(1.0), np.float64(0.3))), 0.0)

    def test_independent_indicators(self):
        self.assertEqual(alpha_hat(IndicatorStats(np.float64(0.5), np.float64(0.5), np.float64(0.25))), 0.0)

    def test_tail_extension_perfect_surrogate(self):
        values = np.arange(40, dtype=float)
        batch = batch_from(values, values)
        self.assertAlmostEqual(alpha_tail_extension(batch, IDENTITY, -5.0, tau=0.05), 1.0)
        self.assertAlmostEqual(alpha_tail_extension(batch, IDENTITY, 100.0, tau=0.05), 1.0)

    def test_tail_extension_inside_support(self):
        values = np.arange(40, dtype=float)
        with self.assertRaises(ValueError):
            alpha_tail_extension(batch_from(values, values), IDENTITY, 10.0)

    def test_tail_extension_needs_samples(self):
        values = np.arange(10, dtype=float)
        with self.assertRaises(SampleSizeError):
            alpha_tail_extension(batch_from(values, values), IDENTITY, -1.0, tau=0.05)


class KFieldTests(SimpleTestCase):
    def test_perfect_surrogate(self):
        values = np.array([0.4, -1.0, 2.0, 0.9, 1.3])
        batch = batch_from(values, values)
        for x in (-2.0, 0.5, 1.0, 5.0):
            k1, k2 = k_fields(batch, IDENTITY, [x])
            f = ecdf_eval(values, [x])
            self.assertAlmostEqual(k1, 0.0, places=15)
            self.assertAlmostEqual(k2, f * (1 - f), places=15)

    def test_constant_surrogate_indicator(self):
        stats = indicator_stats_from_values([1.0, 2.0, 3.0, 4.0], [9.0, 9.0, 9.0, 9.0], [2.5])
        k1, k2 = k_fields_from_stats(stats)
        self.assertEqual(float(k1), 0.25)
        self.assertEqual(float(k2), 0.0)

    def test_hand_rows(self):
        stats = indicator_stats_from_values([1.0, 2.0, 3.0, 4.0], [2.0, 1.0, 4.0, 3.0], [2.5])
        k1, k2 = k_fields_from_stats(stats)
        self.assertEqual(float(k1), 0.0)
        self.assertEqual(float(k2), 0.25)

    def test_matches_two_column_least_squares(self):
        rng = np.random.default_rng(9)
        for _ in range(500):
            y, h = random_pair(rng)
            x = float(rng.integers(-1, 7)) + 0.5
            a = (y[:, 0] <= x).astype(float)
            b = (h[:, 0] <= x).astype(float)
            design = np.column_stack([np.ones_like(b), b])
            beta = np.linalg.pinv(design) @ a
            residual = np.mean((a - design @ beta) ** 2)
            stats = indicator_stats_from_values(y, h, [x])
            k1, k2 = k_fields_from_stats(stats)
            self.assertAlmostEqual(float(k1), residual, places=12)
            self.assertAlmostEqual(float(k1 + k2), a.mean() * (1 - a.mean()), places=12)
            self.assertGreaterEqual(float(k1), 0.0)
            self.assertGreaterEqual(float(k2), 0.0)


class KHatTests(SimpleTestCase):
    def test_perfect_surrogate(self):
        values = np.array([0.0, 1.0, 3.0, 4.0])
        k1, k2 = k_hats(batch_from(values, values), IDENTITY, WeightSpec(), c_subset=2.0)
        # F(1-F) steps: 3/16 on [0,1), 1/4 on [1,3), 3/16 on [3,4)
        self.assertAlmostEqual(k1, 0.0, places=14)
        self.assertAlmostEqual(k2, 2.0 * (3 / 16 + 2 * 0.25 + 3 / 16))

    def test_variance_identity(self):
        rng = np.random.default_rng(21)
        for _ in range(500):
            y, h = random_pair(rng)
            c_subset = float(rng.uniform(0.1, 10))
            integrals = k_hats_from_values(y, h, WeightSpec(), c_subset)
            self.assertAlmostEqual(
                integrals.k1_hat + integrals.k2_hat / c_subset, integrals.variance_integral, delta=1e-10
            )

    def test_matches_midpoint_rule(self):
        y = np.array([[0.0], [2.0], [3.0], [4.0], [1.0]])
        h = np.array([[1.0], [2.0], [4.0], [3.0], [0.0]])
        integrals = k_hats_from_values(y, h, WeightSpec(), 1.0)
        nodes = (np.arange(10000) + 0.5) * (5.0 / 10000)
        grid = EvalGrid.from_arrays(nodes)
        k1, _ = k_fields_from_stats(indicator_fields(y, h, grid))
        self.assertAlmostEqual(integrals.k1_hat, float(np.sum(k1) * 5.0 / 10000), delta=1e-6)

    def test_rectangle_weight_in_one_dimension(self):
        values = np.array([0.0, 1.0, 3.0, 4.0])
        weight = WeightSpec.rectangle([(0.5, 2.0)])
        k1, k2 = k_hats(batch_from(values, values), IDENTITY, weight, c_subset=1.0)
        self.assertAlmostEqual(k2, 0.5 * 3 / 16 + 1.0 * 0.25)

    def test_constant_weight_rejected_in_two_dimensions(self):
        rng = np.random.default_rng(0)
        y = rng.random((6, 2))
        with self.assertRaises(DimensionMismatchError):
            k_hats_from_values(y, y, WeightSpec(), 1.0)

    def test_grid_quadrature_in_two_dimensions(self):
        rng = np.random.default_rng(5)
        y = rng.random((30, 2))
        h = y + 0.05 * rng.standard_normal((30, 2))
        integrals = k_hats_from_values(y, h, WeightSpec.rectangle([(0, 1), (0, 1)], resolution=64), 3.0)
        self.assertAlmostEqual(integrals.k1_hat + integrals.k2_hat / 3.0, integrals.variance_integral, delta=1e-12)
        self.assertGreater(integrals.k2_hat, 0.0)


class LossTests(SimpleTestCase):
    def test_symmetric_case(self):
        c_epr, budget = 5.0, 1000.0
        _, m_star = loss_and_mstar(1.0, c_epr, budget, c_epr)
        self.assertAlmostEqual(m_star, budget / (2 * c_epr))
        self.assertAlmostEqual(scaled_loss(1.0, c_epr, c_epr), 4 * c_epr)

    def test_zero_k1_clamps_to_minimum(self):
        _, m_star = loss_and_mstar(0.0, 2.0, 1000.0, 5.0, m_min=3)
        self.assertEqual(m_star, 3)

    def test_zero_k2_clamps_to_feasible_maximum(self):
        _, m_star = loss_and_mstar(2.0, 0.0, 1000.0, 5.0, m_min=3, m_max=199)
        self.assertEqual(m_star, 199)

    def test_degenerate_subset(self):
        with self.assertRaises(DegenerateSubsetError):
            loss_and_mstar(0.0, 0.0, 1000.0, 5.0)

    def test_closed_form_matches_grid_search(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            k1, k2 = rng.uniform(0.01, 10, size=2)
            c_epr = float(rng.uniform(1, 100))
            budget = float(c_epr * rng.uniform(50, 1e4))
            loss, m_star = loss_and_mstar(k1, k2, budget, c_epr)
            nodes = np.linspace(0, budget / c_epr, 10002)[1:-1]
            values = np.array([loss(z) for z in nodes])
            best = nodes[np.argmin(values)]
            self.assertLessEqual(abs(best - m_star), nodes[1] - nodes[0])

    def test_loss_is_infinite_outside_domain(self):
        loss = estimated_loss(1.0, 1.0, 100.0, 10.0)
        self.assertEqual(loss(0), math.inf)
        self.assertEqual(loss(10), math.inf)
        self.assertAlmostEqual(loss(5), 1 / 5 + 1 / 50)


class RelativeEfficiencyTests(SimpleTestCase):
    def test_uncorrelated_equal_cost(self):
        self.assertAlmostEqual(relative_efficiency(2.0, 0.0, 7.0, 7.0), 1.0)

    def test_grows_with_cheap_perfect_surrogate(self):
        ratios = [relative_efficiency(0.0, c * 0.3, 100.0, c) for c in (10.0, 1.0, 0.1)]
        self.assertEqual(ratios, sorted(ratios))
        self.assertAlmostEqual(ratios[-1], 1000.0)

    def test_lower_bound(self):
        rng = np.random.default_rng(31)
        for _ in range(1000):
            c_epr = float(rng.uniform(1, 100))
            c_subset = float(rng.uniform(0.001, 1.0)) * c_epr
            k1 = float(rng.uniform(0, 5))
            k2 = c_subset * float(rng.uniform(0.001, 5))
            self.assertGreaterEqual(relative_efficiency(k1, k2, c_epr, c_subset), 0.25)


class ExploitationTests(SimpleTestCase):
    def test_constant_surrogate_gives_exploration_ecdf(self):
        y = np.array([[0.3], [1.2], [0.8], [2.0]])
        h = np.full((4, 1), 1.0)
        h_ept = np.array([[0.5], [1.5], [2.5]])
        grid = EvalGrid.from_arrays(np.linspace(-1, 3, 17))
        estimate = exploitation_cdf_from_values(y, h, h_ept, grid)
        expected = [ecdf_eval(y, [x]) for x in grid.breakpoints[0]]
        np.testing.assert_allclose(estimate.raw, expected)

    def test_reusing_exploration_rows(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(8)
        y = x + 0.3 * rng.standard_normal(8)
        batch = batch_from(y, x)
        coeffs = fit_surrogate(batch, (1,))
        exploit = SubsetBatch(subset=(1,), count=8, x=x[:, None], charged_cost=0.0)
        estimate = exploitation_cdf(batch, coeffs, exploit)
        expected = [ecdf_eval(y, [z]) for z in estimate.grid.breakpoints[0]]
        np.testing.assert_allclose(estimate.raw, expected, atol=1e-15)

    def test_hand_case_matches_enumeration(self):
        y = np.array([1.0, 2.5, 0.5, 3.0, 2.0])
        x_epr = np.array([1.2, 2.0, 0.1, 3.5, 2.4])
        x_ept = np.array([0.0, 0.9, 1.7, 2.2, 2.8, 3.3, 4.1])
        batch = batch_from(y, x_epr)
        coeffs = SurrogateCoefficients(subset=(1,), matrix=np.array([[0.1], [0.9]]), rank=2)
        exploit = SubsetBatch(subset=(1,), count=7, x=x_ept[:, None], charged_cost=0.0)
        estimate = exploitation_cdf(batch, coeffs, exploit)
        h_epr = 0.1 + 0.9 * x_epr
        h_ept = 0.1 + 0.9 * x_ept
        for point in np.linspace(-0.5, 4.5, 10):
            a = [1.0 if value <= point else 0.0 for value in y]
            b = [1.0 if value <= point else 0.0 for value in h_epr]
            f_y, f_h = sum(a) / 5, sum(b) / 5
            f_yh = sum(p * q for p, q in zip(a, b)) / 5
            alpha = (f_yh - f_y * f_h) / (f_h * (1 - f_h)) if 0 < f_h < 1 else 0.0
            f_ept = sum(1.0 for value in h_ept if value <= point) / 7
            expected = f_y - alpha * (f_h - f_ept)
            self.assertAlmostEqual(float(estimate.evaluate([[point]])[0]), min(max(expected, 0.0), 1.0), delta=1e-12)

    def test_translation_equivariance(self):
        rng = np.random.default_rng(6)
        y = rng.standard_normal((12, 1))
        h = y + 0.2 * rng.standard_normal((12, 1))
        h_ept = rng.standard_normal((20, 1))
        grid = EvalGrid.from_arrays(np.linspace(-2, 2, 9))
        shift = 4.0
        base = exploitation_cdf_from_values(y, h, h_ept, grid)
        moved = exploitation_cdf_from_values(y + shift, h + shift, h_ept + shift, EvalGrid.from_arrays(np.linspace(2, 6, 9)))
        np.testing.assert_array_equal(base.raw, moved.raw)

    def test_tail_mode_requires_one_dimension(self):
        rng = np.random.default_rng(1)
        y = rng.random((40, 2))
        grid = EvalGrid.from_arrays([0.5], [0.5])
        with self.assertRaises(DimensionMismatchError):
            exploitation_cdf_from_values(y, y, y, grid, alpha_mode=ALPHA_TAIL)

    def test_empty_exploitation_batch(self):
        with self.assertRaises(SampleSizeError):
            exploitation_cdf_from_values([[1.0], [2.0]], [[1.0], [2.0]], np.empty((0, 1)), EvalGrid.from_arrays([1.0]))

    def test_unbiased_over_exploitation_draws(self):
        rng = np.random.default_rng(44)
        y = rng.standard_normal((30, 1))
        h = y + 0.5 * rng.standard_normal((30, 1))
        grid = EvalGrid.from_arrays([0.0])
        stats = indicator_fields(y, h, grid)
        alpha = alpha_hat(stats)
        # H^ept ~ N(0, 1.25): the fixed-batch target replaces F_H^ept by its mean 1/2
        target = float(stats.f_y[0] - alpha[0] * (stats.f_h[0] - 0.5))
        values = [
            float(exploitation_cdf_from_values(y, h, np.sqrt(1.25) * rng.standard_normal((50, 1)), grid).raw[0])
            for _ in range(2000)
        ]
        band = 3 * np.std(values) / np.sqrt(len(values))
        self.assertLess(abs(np.mean(values) - target), band + 1e-12)


class SubsetEvaluationTests(SimpleTestCase):
    def test_perfect_surrogate_explores_minimum(self):
        rng = np.random.default_rng(13)
        values = rng.standard_normal(10)
        batch = batch_from(values, values)
        evaluation = evaluate_subset(batch, (1,), WeightSpec(), 1000.0, 5.0, 1.0, m=10, m_min=3)
        self.assertAlmostEqual(evaluation.k1_hat, 0.0, places=10)
        self.assertEqual(evaluation.m_star_hat, 3)
        self.assertAlmostEqual(evaluation.min_loss, evaluation.k1_hat / 10 + evaluation.k2_hat / (1000.0 - 50.0))

    def test_serializes_to_row(self):
        rng = np.random.default_rng(14)
        x = rng.standard_normal(12)
        batch = batch_from(x + 0.1 * rng.standard_normal(12), x)
        row = evaluate_subset(batch, (1,), WeightSpec(), 1000.0, 5.0, 1.0, m=12, m_min=3).to_dict()
        self.assertEqual(row["subset"], "{1}")
        self.assertEqual(set(row), {"subset", "c_S", "k1_hat", "k2_hat", "m_star_hat", "loss", "rank"})


class OracleTests(SimpleTestCase):
    def linear_gaussian(self):
        specs = tuple(ModelSpec(id=i, dim=1, cost=c) for i, c in enumerate((100.0, 1.0, 0.5)))
        return EnsembleHandle(
            specs=specs,
            kind=KIND_LINEAR_GAUSSIAN,
            base_seed=0,
            linear_gaussian=LinearGaussianParams(mean=0.0, std=1.0, noise_stds=(0.0, 0.8)),
        )

    def test_perfect_surrogate_has_no_exploration_loss(self):
        handle = self.linear_gaussian()
        stream = SampleStream(rng=SeedStreams(1).spawn("oracle"))
        stats = oracle_stats(handle, WeightSpec(), 4000, stream, budget=1e5)
        self.assertAlmostEqual(stats.by_subset((1,)).k1, 0.0, places=8)
        self.assertGreater(stats.by_subset((2,)).k1, 0.01)
        self.assertEqual(stats.best.subset, (1,))
        self.assertEqual(stats.labels, ["y_1", "x1_1", "x2_1"])
        self.assertAlmostEqual(stats.correlation[0, 1], 1.0)

    def test_rho_field_of_perfect_surrogate(self):
        values = np.array([0.0, 1.0, 2.0, 3.0])
        rho = rho_field(batch_from(values, values), IDENTITY, EvalGrid.from_arrays([-1.0, 0.5, 1.5, 5.0]))
        np.testing.assert_allclose(rho, [0.0, 1.0, 1.0, 0.0])

    @tag("slow")
    def test_gbm_oracle_loss_table(self):
        specs = tuple(ModelSpec(id=i, dim=2, cost=c) for i, c in enumerate((1024, 16, 4, 1)))
        handle = EnsembleHandle(
            specs=specs,
            kind=KIND_GBM,
            base_seed=0,
            gbm=GbmParams(mu=0.05, sigma=0.2, s0=1.0, horizon=1.0, dt_levels=(2.0 ** -14, 2.0 ** -8, 2.0 ** -6, 2.0 ** -4)),
        )
        weight = WeightSpec.rectangle([(0.5, 1.0), (1.0, 3.0)])
        stats = oracle_stats(handle, weight, 50000, SampleStream(rng=SeedStreams(2024).spawn("oracle")), budget=1e6)
        finest = stats.by_subset((1,))
        self.assertEqual(stats.best.subset, (1,))
        self.assertAlmostEqual(finest.gamma, 11.3, delta=0.15 * 11.3)
        self.assertAlmostEqual(finest.m_star, 613, delta=0.15 * 613)
        self.assertLess(finest.gamma, stats.by_subset((2,)).gamma)

import math

import numpy as np
from django.test import SimpleTestCase, tag

from cdf.estimates import CdfEstimate, empirical_cdf
from cdf.grids import EvalGrid
from core.exceptions import InsufficientBudgetError, SampleSizeError
from core.seeding import SeedStreams
from ensemble.sampling import SampleStream, analytic_cdf, sample_joint
from ensemble.specs import (
    KIND_LINEAR_GAUSSIAN,
    KIND_POOL,
    EnsembleHandle,
    LinearGaussianParams,
    ModelSpec,
    PoolSource,
)
from estimators.evaluation import SubsetEvaluation
from estimators.exploitation import ALPHA_TAIL
from estimators.weights import WeightSpec
from metrics.errors import sup_error, weighted_l2_error
from .driver import (
    CvmdlOptions,
    minimum_budget,
    q_growth,
    run_cvmdl,
    run_ecdf_baseline,
    run_fixed_allocation,
    select_subset,
)
from .ledger import PHASE_EXPLORATION, BudgetLedger

ONE = WeightSpec()


def gaussian_ensemble(costs, noise_stds, dim=1, seed=0):
    specs = tuple(ModelSpec(id=i, dim=dim, cost=c) for i, c in enumerate(costs))
    return EnsembleHandle(
        specs=specs,
        kind=KIND_LINEAR_GAUSSIAN,
        base_seed=seed,
        linear_gaussian=LinearGaussianParams(mean=0.0, std=1.0, noise_stds=tuple(noise_stds)),
    )


def evaluation(subset, loss, c_subset=1.0):
    return SubsetEvaluation(subset=subset, c_subset=c_subset, k1_hat=1.0, k2_hat=1.0, m_star_hat=10.0, min_loss=loss)


class QGrowthTests(SimpleTestCase):
    def test_doubles_far_below_target(self):
        self.assertEqual(q_growth(100, 300), 200)

    def test_moves_halfway_near_target(self):
        self.assertEqual(q_growth(200, 300), 250)

    def test_rounds_up(self):
        self.assertEqual(q_growth(299, 300), 300)

    def test_always_grows(self):
        for m in range(1, 60):
            self.assertGreater(q_growth(m, 61.5), m)
            self.assertLessEqual(q_growth(m, 61.5), 2 * m)

    def test_rejects_zero(self):
        with self.assertRaises(ValueError):
            q_growth(0, 10)


class SelectSubsetTests(SimpleTestCase):
    def test_single_subset(self):
        self.assertEqual(select_subset([evaluation((1,), 3.0)]).subset, (1,))

    def test_smallest_loss(self):
        table = [evaluation((1,), 5.0), evaluation((2,), 7.0)]
        self.assertEqual(select_subset(table).subset, (1,))

    def test_ties_go_to_cheaper_subset(self):
        table = [evaluation((1,), 5.0, c_subset=3.0), evaluation((2,), 5.0, c_subset=2.0)]
        self.assertEqual(select_subset(table).subset, (2,))

    def test_full_ties_are_lexicographic(self):
        table = [evaluation((2,), 5.0), evaluation((1, 2), 5.0, c_subset=1.0), evaluation((1,), 5.0)]
        self.assertEqual(select_subset(table).subset, (1,))

    def test_empty_table(self):
        with self.assertRaises(ValueError):
            select_subset([])


class LedgerTests(SimpleTestCase):
    def test_tracks_phases(self):
        ledger = BudgetLedger(total=10.0, c_epr=2.0)
        ledger.charge(PHASE_EXPLORATION, 4.0)
        ledger.charge("exploitation", 6.0)
        self.assertEqual(ledger.spent, 10.0)
        self.assertEqual(ledger.remaining, 0.0)
        self.assertEqual(ledger.to_dict()["phases"], {"exploration": 4.0, "exploitation": 6.0})

    def test_overspend(self):
        ledger = BudgetLedger(total=10.0, c_epr=2.0)
        ledger.charge(PHASE_EXPLORATION, 8.0)
        with self.assertRaises(InsufficientBudgetError):
            ledger.charge("exploitation", 3.0)
        self.assertEqual(ledger.spent, 8.0)


class RunCvmdlTests(SimpleTestCase):
    def setUp(self):
        self.handle = gaussian_ensemble((100.0, 1.0, 0.5), (0.3, 1.0))

    def test_budget_at_the_floor(self):
        handle = gaussian_ensemble((10.0, 1.0), (0.5,))
        budget = minimum_budget(handle)
        self.assertEqual(budget, 3 * 11.0 + 1.0)
        output = run_cvmdl(handle, budget, ONE, seeds=SeedStreams(1))
        self.assertEqual(output.m, 3)
        self.assertEqual(output.n_exploit, 1)
        self.assertLessEqual(output.ledger.spent, budget)

    def test_below_the_floor(self):
        handle = gaussian_ensemble((10.0, 1.0), (0.5,))
        with self.assertRaises(InsufficientBudgetError):
            run_cvmdl(handle, minimum_budget(handle) - 1.0, ONE)

    def test_budget_safety_and_trace(self):
        budget = 1e5
        output = run_cvmdl(self.handle, budget, ONE, seeds=SeedStreams(7))
        ledger = output.ledger
        self.assertLessEqual(ledger.spent, budget)
        self.assertLess(budget - ledger.spent, 0.5 + ledger.c_epr)
        self.assertAlmostEqual(ledger.phases[PHASE_EXPLORATION], output.m * ledger.c_epr)

        sizes = [record["m"] for record in output.trace]
        self.assertEqual(sizes[0], self.handle.min_exploration)
        self.assertEqual(sizes[-1], output.m)
        for before, after in zip(sizes, sizes[1:]):
            self.assertGreater(after, before)
            self.assertLessEqual(after, 2 * before)
        for record in output.trace:
            self.assertEqual(len(record["subsets"]) + len(record["degenerate"]), 3)

    def test_exploitation_count(self):
        budget = 2e4
        output = run_cvmdl(self.handle, budget, ONE, seeds=SeedStreams(3))
        c_subset = self.handle.subset_cost(output.subset)
        expected = math.floor((budget - self.handle.c_epr * output.m) / c_subset + 1e-9)
        self.assertEqual(output.n_exploit, expected)

    def test_sorted_estimate_is_a_cdf(self):
        output = run_cvmdl(self.handle, 2e4, ONE, seeds=SeedStreams(3))
        self.assertTrue(output.estimate.is_monotone())
        self.assertGreaterEqual(output.estimate.values.min(), 0.0)
        self.assertLessEqual(output.estimate.values.max(), 1.0)
        self.assertIsNotNone(output.raw_estimate.raw)

    def test_unsorted_run(self):
        output = run_cvmdl(self.handle, 2e4, ONE, CvmdlOptions(sort=False), seeds=SeedStreams(3))
        self.assertIsNone(output.sorted_estimate)
        self.assertIs(output.estimate, output.raw_estimate)

    def test_same_seed_reproduces(self):
        first = run_cvmdl(self.handle, 2e4, ONE, seeds=SeedStreams(11), trial=2)
        second = run_cvmdl(self.handle, 2e4, ONE, seeds=SeedStreams(11), trial=2)
        self.assertEqual(first.subset, second.subset)
        self.assertEqual(first.m, second.m)
        np.testing.assert_array_equal(first.estimate.values, second.estimate.values)
        self.assertEqual(first.trace, second.trace)

    def test_perfect_surrogate_is_selected(self):
        handle = gaussian_ensemble((1000.0, 1.0, 1.0), (0.0, 2.0))
        output = run_cvmdl(handle, 1e5, ONE, seeds=SeedStreams(5))
        self.assertIn(1, output.subset)

    def test_tail_extended_alpha(self):
        output = run_cvmdl(self.handle, 2e4, ONE, CvmdlOptions(alpha_mode=ALPHA_TAIL), seeds=SeedStreams(3))
        self.assertTrue(output.estimate.is_monotone())

    def test_two_dimensional_run(self):
        handle = gaussian_ensemble((100.0, 1.0), (0.3,), dim=2)
        weight = WeightSpec.rectangle([(-3.0, 3.0), (-3.0, 3.0)], resolution=16)
        output = run_cvmdl(handle, 2e4, weight, seeds=SeedStreams(2))
        self.assertEqual(output.estimate.values.shape, (16, 16))
        self.assertTrue(output.estimate.is_monotone())


class FixedAllocationTests(SimpleTestCase):
    def setUp(self):
        self.handle = gaussian_ensemble((100.0, 1.0, 0.5), (0.3, 1.0))

    def test_explores_exactly_m(self):
        output = run_fixed_allocation(self.handle, 2e4, (1,), 50, ONE, seeds=SeedStreams(4))
        self.assertEqual(output.m, 50)
        self.assertEqual(output.subset, (1,))
        self.assertEqual(output.n_exploit, math.floor((2e4 - 101.5 * 50) / 1.0))

    def test_below_minimum_exploration(self):
        with self.assertRaises(SampleSizeError):
            run_fixed_allocation(self.handle, 2e4, (1,), 3, ONE)

    def test_no_room_for_exploitation(self):
        with self.assertRaises(InsufficientBudgetError):
            run_fixed_allocation(self.handle, 2e4, (1,), 198, ONE)


class EcdfBaselineTests(SimpleTestCase):
    def pool(self):
        table = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
        specs = (ModelSpec(id=0, dim=1, cost=2.0), ModelSpec(id=1, dim=1, cost=1.0))
        return EnsembleHandle(specs=specs, kind=KIND_POOL, base_seed=0, pool=PoolSource(table=table, replacement=False))

    def test_three_draws(self):
        estimate = run_ecdf_baseline(self.pool(), 6.0)
        self.assertAlmostEqual(float(estimate.evaluate([[2.0]])[0]), 2 / 3)

    def test_budget_below_one_draw(self):
        with self.assertRaises(InsufficientBudgetError):
            run_ecdf_baseline(self.pool(), 1.5)


class PoolWorkflowTests(SimpleTestCase):
    """Runs over a fixed 6000-row table drawn without replacement."""

    budget = 5e4
    trials = 12

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        source = gaussian_ensemble((1000.0, 20.0, 10.0), (0.1, 0.5))
        batch = sample_joint(source, 6000, SampleStream(SeedStreams(6000).spawn("pool-table")))
        cls.table = np.hstack([batch.y, *batch.x])
        cls.handle = EnsembleHandle(
            specs=source.specs,
            kind=KIND_POOL,
            base_seed=0,
            pool=PoolSource(table=cls.table, replacement=False),
        )
        cls.weight = WeightSpec.rectangle([(-4.0, 4.0)])
        cls.oracle = empirical_cdf(cls.table[:, :1])

    def test_budget_safety_and_valid_selection(self):
        for trial in range(3):
            output = run_cvmdl(self.handle, self.budget, self.weight, seeds=SeedStreams(21), trial=trial)
            self.assertLessEqual(output.ledger.spent, self.budget)
            self.assertIn(output.subset, [(1,), (2,), (1, 2)])
            self.assertLessEqual(output.m + output.n_exploit, self.table.shape[0])

    def test_beats_high_fidelity_ecdf(self):
        cvmdl_errors, ecdf_errors = [], []
        for trial in range(self.trials):
            seeds = SeedStreams(21)
            output = run_cvmdl(self.handle, self.budget, self.weight, seeds=seeds, trial=trial)
            baseline = run_ecdf_baseline(self.handle, self.budget, seeds=seeds, trial=trial)
            cvmdl_errors.append(weighted_l2_error(output.estimate, self.oracle, self.weight))
            ecdf_errors.append(weighted_l2_error(baseline, self.oracle, self.weight))
        self.assertLess(np.mean(cvmdl_errors), np.mean(ecdf_errors))


@tag("slow")
class LinearGaussianConvergenceTests(SimpleTestCase):
    def test_sup_error_shrinks_with_budget(self):
        handle = gaussian_ensemble((100.0, 1.0, 0.5), (0.1, 1.0))
        points = np.linspace(-8.0, 8.0, 20001)
        values = analytic_cdf(handle, points[:, None])
        values[-1] = 1.0
        oracle = CdfEstimate(grid=EvalGrid.from_arrays(points), values=values, monotone=True)

        mean_errors = []
        for budget in (1e4, 1e5, 1e6):
            errors = [
                sup_error(run_cvmdl(handle, budget, ONE, seeds=SeedStreams(31), trial=trial).estimate, oracle)
                for trial in range(3)
            ]
            mean_errors.append(float(np.mean(errors)))
        self.assertLess(mean_errors[-1], 0.02)
        for larger, smaller in zip(mean_errors, mean_errors[1:]):
            self.assertLess(smaller, larger)

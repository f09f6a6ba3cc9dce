import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings, tag

from core.exceptions import ConfigurationError, DimensionMismatchError, PoolExhaustedError
from core.seeding import SeedStreams
from .config import build_handle, load_ensemble
from .gbm import gbm_extrema_path, simulate_levels
from .pool import PoolState, load_pool_table, write_pool_table
from .sampling import SampleStream, analytic_cdf, sample_high_fidelity, sample_joint, sample_subset, validate
from .specs import (
    KIND_GBM,
    KIND_LINEAR_GAUSSIAN,
    KIND_POOL,
    EnsembleHandle,
    GbmParams,
    LinearGaussianParams,
    ModelSpec,
    PoolSource,
    nonempty_subsets,
)


def linear_gaussian_handle(costs, noise_stds, dim=1, seed=0):
    specs = tuple(ModelSpec(id=i, dim=dim, cost=c) for i, c in enumerate(costs))
    return EnsembleHandle(
        specs=specs,
        kind=KIND_LINEAR_GAUSSIAN,
        base_seed=seed,
        linear_gaussian=LinearGaussianParams(mean=0.0, std=1.0, noise_stds=tuple(noise_stds)),
    )


def gbm_handle(mu=0.05, sigma=0.2, dt_levels=(2.0 ** -14, 2.0 ** -8, 2.0 ** -6, 2.0 ** -4)):
    costs = (1024, 16, 4, 1)
    specs = tuple(ModelSpec(id=i, dim=2, cost=c) for i, c in enumerate(costs))
    params = GbmParams(mu=mu, sigma=sigma, s0=1.0, horizon=1.0, dt_levels=tuple(dt_levels))
    return EnsembleHandle(specs=specs, kind=KIND_GBM, base_seed=0, gbm=params)


def pool_handle(rows=10, replacement=False):
    table = np.column_stack([np.arange(rows, dtype=float), np.arange(rows, dtype=float) + 0.5])
    specs = (ModelSpec(id=0, dim=1, cost=2.0), ModelSpec(id=1, dim=1, cost=1.0))
    return EnsembleHandle(
        specs=specs,
        kind=KIND_POOL,
        base_seed=0,
        pool=PoolSource(table=table, replacement=replacement),
    )


def stream(seed=0, purpose="explore", *counters):
    return SampleStream(rng=SeedStreams(seed).spawn(purpose, *counters))


class ValidateTests(SimpleTestCase):
    def test_elasticity_costs_sum_to_exploration_cost(self):
        handle = linear_gaussian_handle((4096, 64, 16, 4, 1), (0.1, 0.2, 0.3, 0.4))
        self.assertEqual(validate(handle).c_epr, 4181)

    def test_single_low_fidelity_model(self):
        descriptor = validate(linear_gaussian_handle((1, 1), (0.5,)))
        self.assertEqual(descriptor.c_epr, 2)
        self.assertEqual(list(descriptor.subset_costs), [(1,)])

    def test_gbm_subset_cost_table(self):
        descriptor = validate(gbm_handle())
        self.assertEqual(descriptor.subset_costs[(1, 2)], 20)
        self.assertEqual(len(descriptor.subset_costs), 7)

    def test_rejects_nonpositive_cost(self):
        with self.assertRaises(ConfigurationError) as ctx:
            validate(linear_gaussian_handle((1, 0), (0.5,)))
        self.assertIn("costs", ctx.exception.errors)

    def test_rejects_unnested_dt(self):
        with self.assertRaises(ConfigurationError):
            validate(gbm_handle(dt_levels=(0.3, 0.5, 0.6, 0.7)))

    def test_rejects_duplicate_dt_levels(self):
        with self.assertRaises(ConfigurationError) as ctx:
            validate(gbm_handle(dt_levels=(2.0 ** -8, 2.0 ** -8, 2.0 ** -6, 2.0 ** -4)))
        self.assertIn("dt_levels", ctx.exception.errors)

    @override_settings(CVMDL_MAX_LOW_FIDELITY=1)
    def test_low_fidelity_cap_comes_from_settings(self):
        validate(linear_gaussian_handle((4, 1), (0.5,)))
        with self.assertRaises(ConfigurationError) as ctx:
            validate(linear_gaussian_handle((4, 2, 1), (0.5, 0.7)))
        self.assertIn("specs", ctx.exception.errors)

    def test_rejects_pool_with_wrong_columns(self):
        handle = EnsembleHandle(
            specs=(ModelSpec(0, 1, 1.0), ModelSpec(1, 2, 1.0)),
            kind=KIND_POOL,
            base_seed=0,
            pool=PoolSource(table=np.zeros((10, 2))),
        )
        with self.assertRaises(ConfigurationError):
            validate(handle)

    def test_subsets_are_lexicographic(self):
        self.assertEqual(nonempty_subsets(2), [(1,), (1, 2), (2,)])
        self.assertEqual(len(nonempty_subsets(4)), 15)


class SamplingTests(SimpleTestCase):
    def test_empty_joint_batch(self):
        batch = sample_joint(linear_gaussian_handle((1, 1), (0.5,)), 0, stream())
        self.assertEqual(batch.count, 0)
        self.assertEqual(batch.charged_cost, 0)
        self.assertEqual(batch.y.shape, (0, 1))

    def test_subset_charge_is_count_times_cost(self):
        handle = linear_gaussian_handle((100, 1, 2, 4), (0.1, 0.2, 0.3))
        batch = sample_subset(handle, [3], 10, stream())
        self.assertEqual(batch.charged_cost, 40)
        self.assertEqual(batch.x.shape, (10, 1))

    def test_joint_charge_uses_exploration_cost(self):
        handle = linear_gaussian_handle((100, 1, 2, 4), (0.1, 0.2, 0.3))
        self.assertEqual(sample_joint(handle, 7, stream()).charged_cost, 7 * 107)

    def test_same_seed_gives_identical_batches(self):
        handle = linear_gaussian_handle((4, 1), (0.5,), dim=2)
        first = sample_joint(handle, 50, stream(42, "explore", 3, 1))
        second = sample_joint(handle, 50, stream(42, "explore", 3, 1))
        np.testing.assert_array_equal(first.y, second.y)
        np.testing.assert_array_equal(first.x[0], second.x[0])
        other = sample_joint(handle, 50, stream(42, "explore", 3, 2))
        self.assertFalse(np.array_equal(first.y, other.y))

    def test_linear_gaussian_correlation(self):
        handle = linear_gaussian_handle((4, 1), (0.75,))
        batch = sample_joint(handle, 50000, stream(7))
        empirical = np.corrcoef(batch.y[:, 0], batch.x[0][:, 0])[0, 1]
        self.assertAlmostEqual(empirical, handle.linear_gaussian.correlation(1), delta=0.02)

    def test_perfect_surrogate_copies_y(self):
        handle = linear_gaussian_handle((4, 1), (0.0,))
        batch = sample_joint(handle, 20, stream())
        np.testing.assert_array_equal(batch.y, batch.x[0])

    def test_high_fidelity_only_draws(self):
        handle = linear_gaussian_handle((4, 1), (0.5,))
        y, cost = sample_high_fidelity(handle, 25, stream())
        self.assertEqual(y.shape, (25, 1))
        self.assertEqual(cost, 100)

    def test_analytic_cdf_is_product_of_normals(self):
        handle = linear_gaussian_handle((4, 1), (0.5,), dim=2)
        values = analytic_cdf(handle, [[0.0, 0.0], [10.0, 0.0]])
        np.testing.assert_allclose(values, [0.25, 0.5])


class PoolTests(SimpleTestCase):
    def test_pool_exhaustion_boundary(self):
        handle = pool_handle(rows=10)
        pool_stream = stream()
        sample_joint(handle, 4, pool_stream)
        batch = sample_subset(handle, [1], 6, pool_stream)
        self.assertEqual(batch.count, 6)
        with self.assertRaises(PoolExhaustedError):
            sample_subset(handle, [1], 1, pool_stream)

    def test_rows_never_repeat_without_replacement(self):
        handle = pool_handle(rows=30)
        pool_stream = stream(3)
        first = sample_joint(handle, 12, pool_stream)
        second = sample_subset(handle, [1], 18, pool_stream)
        used = np.concatenate([first.y[:, 0], second.x[:, 0] - 0.5])
        self.assertEqual(len(set(used.tolist())), 30)

    def test_replacement_never_exhausts(self):
        handle = pool_handle(rows=5, replacement=True)
        state = PoolState.for_run(handle, np.random.default_rng(0))
        self.assertEqual(len(state.take(50, np.random.default_rng(1))), 50)

    def test_table_round_trip_and_column_check(self):
        table = np.arange(12, dtype=float).reshape(4, 3)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_pool_table(Path(tmp) / "pool.csv", table, (1, 2))
            self.assertEqual(path.read_text().splitlines()[0], "y_1,x1_1,x1_2")
            np.testing.assert_array_equal(load_pool_table(path, (1, 2)), table)
            with self.assertRaises(DimensionMismatchError):
                load_pool_table(path, (1, 1))

    def test_renamed_header_is_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "pool.csv"
            path.write_text("x1_1,y_1\n1.0,2.0\n3.0,4.0\n", encoding="utf-8")
            with self.assertRaises(ConfigurationError):
                load_pool_table(path, (1, 1))


class GbmTests(SimpleTestCase):
    def test_constant_path(self):
        params = GbmParams(mu=0.0, sigma=0.0, s0=1.0, horizon=1.0, dt_levels=(2.0 ** -14, 2.0 ** -4))
        increments = np.zeros(params.steps(params.finest_dt))
        for dt in params.dt_levels:
            self.assertEqual(gbm_extrema_path(params, dt, increments), (1.0, 1.0))

    def test_deterministic_drift(self):
        params = GbmParams(mu=0.05, sigma=0.0, s0=1.0, horizon=1.0, dt_levels=(2.0 ** -14,))
        dt = params.finest_dt
        s_min, s_max = gbm_extrema_path(params, dt, np.zeros(params.steps(dt)))
        self.assertEqual(s_min, 1.0)
        self.assertAlmostEqual(s_max, float(np.prod(np.full(params.steps(dt), 1 + 0.05 * dt))), places=12)

    def test_increment_length_mismatch(self):
        params = GbmParams(mu=0.0, sigma=0.2, s0=1.0, horizon=1.0, dt_levels=(0.25, 0.5))
        with self.assertRaises(DimensionMismatchError):
            gbm_extrema_path(params, 0.5, np.zeros(3))

    def test_levels_share_increments(self):
        params = GbmParams(mu=0.05, sigma=0.2, s0=1.0, horizon=1.0, dt_levels=(2.0 ** -6, 2.0 ** -4))
        rng = np.random.default_rng(11)
        draws = simulate_levels(params, params.dt_levels, 3, rng)
        increments = np.random.default_rng(11).standard_normal((3, 64)) * np.sqrt(2.0 ** -6)
        for row in range(3):
            expected = gbm_extrema_path(params, 2.0 ** -4, increments[row])
            np.testing.assert_allclose(draws[2.0 ** -4][row], expected, rtol=1e-12)

    def test_extrema_bracket_initial_state(self):
        handle = gbm_handle(dt_levels=(2.0 ** -8, 2.0 ** -6, 2.0 ** -5, 2.0 ** -4))
        batch = sample_joint(handle, 100, stream())
        self.assertTrue(np.all(batch.y[:, 0] <= 1.0))
        self.assertTrue(np.all(batch.y[:, 1] >= 1.0))

    @tag("slow")
    def test_published_level_correlations(self):
        handle = gbm_handle()
        batch = sample_joint(handle, 50000, stream(2024))
        # rows: S_min, S_max at the finest level; columns: (S_min, S_max) at dt 2^-8, 2^-6, 2^-4
        expected = np.array([
            [0.999, 0.682, 0.997, 0.682, 0.984, 0.680],
            [0.681, 0.999, 0.681, 0.998, 0.674, 0.988],
        ])
        coarse = np.hstack(batch.x)
        for i in range(2):
            for j in range(6):
                observed = np.corrcoef(batch.y[:, i], coarse[:, j])[0, 1]
                self.assertAlmostEqual(observed, expected[i, j], delta=0.01, msg=f"entry ({i}, {j})")

    @tag("slow")
    def test_exploitation_marginal_matches_joint(self):
        handle = gbm_handle()
        joint = sample_joint(handle, 50000, stream(5, "explore"))
        exploit = sample_subset(handle, [1], 10000, stream(5, "exploit"))
        reference = joint.x[0][:, 1].mean()
        standard_error = exploit.x[:, 1].std(ddof=1) / np.sqrt(exploit.count)
        self.assertLess(abs(exploit.x[:, 1].mean() - reference), 3 * standard_error + 1e-3)


class EnsembleConfigTests(SimpleTestCase):
    def test_gbm_defaults(self):
        handle = build_handle({"kind": "gbm-extrema", "costs": [1024, 16, 4, 1]})
        self.assertEqual(handle.dims, (2, 2, 2, 2))
        self.assertEqual(handle.gbm.dt_levels[0], 2.0 ** -14)
        self.assertEqual(handle.base_seed, 0)

    def test_dims_must_match_costs(self):
        with self.assertRaises(ConfigurationError) as ctx:
            build_handle({"kind": "linear-gaussian", "costs": [4, 1], "dims": [1], "linear_gaussian": {"noise_stds": [0.1]}})
        self.assertIn("dims", ctx.exception.errors)

    def test_unknown_kind(self):
        with self.assertRaises(ConfigurationError):
            build_handle({"kind": "fem", "costs": [4, 1]})

    def test_unnested_dt_levels(self):
        with self.assertRaises(ConfigurationError) as ctx:
            build_handle({"kind": "gbm-extrema", "costs": [4, 1], "gbm": {"dt_levels": [0.3, 0.5]}})
        self.assertIn("gbm", ctx.exception.errors)

    def test_pool_path_is_relative_to_config(self):
        with tempfile.TemporaryDirectory() as tmp:
            write_pool_table(Path(tmp) / "pool.csv", np.arange(20, dtype=float).reshape(10, 2), (1, 1))
            config = Path(tmp) / "ensemble.toml"
            config.write_text(
                'kind = "pool"\ncosts = [2.0, 1.0]\nseed = 9\n\n[pool]\npath = "pool.csv"\n',
                encoding="utf-8",
            )
            handle = load_ensemble(config)
        self.assertEqual(handle.pool.rows, 10)
        self.assertFalse(handle.pool.replacement)
        self.assertEqual(handle.base_seed, 9)

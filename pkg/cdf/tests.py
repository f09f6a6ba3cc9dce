import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ConfigurationError, ImproperCdfError, SampleSizeError
from .estimates import Cdf1D, CdfEstimate, ecdf_eval, empirical_cdf, grid_ecdf, quantile
from .grids import EvalGrid, build_grid, quadrature_grid
from .sorting import alternating_sort

CROSSING_TENSOR = np.array([[0.7, 0.4, 0.0], [0.3, 0.5, 0.2], [1.0, 0.8, 0.6]])


def square_estimate(values):
    values = np.asarray(values, dtype=float)
    grid = EvalGrid.from_arrays(*(np.arange(n, dtype=float) for n in values.shape))
    return CdfEstimate(grid=grid, values=values, raw=values)


class EcdfTests(SimpleTestCase):
    def test_direct_count(self):
        self.assertAlmostEqual(ecdf_eval([1.0, 2.0, 3.0], 2.0), 2 / 3)

    def test_boundaries(self):
        self.assertEqual(ecdf_eval([1.0, 2.0, 3.0], 0.5), 0.0)
        self.assertEqual(ecdf_eval([1.0, 2.0, 3.0], 10.0), 1.0)

    def test_componentwise_order(self):
        self.assertEqual(ecdf_eval([[0.0, 0.0], [1.0, 1.0]], [1.0, 0.0]), 0.5)

    def test_empty_sample_set(self):
        with self.assertRaises(SampleSizeError):
            ecdf_eval(np.empty((0, 1)), [0.0])

    def test_right_continuity(self):
        samples = [1.0, 2.0, 2.0, 5.0]
        self.assertEqual(ecdf_eval(samples, 2.0), 0.75)
        self.assertEqual(ecdf_eval(samples, 2.0 - 1e-9), 0.25)
        self.assertEqual(ecdf_eval(samples, 2.0 + 1e-9), 0.75)

    def test_grid_ecdf_matches_pointwise(self):
        rng = np.random.default_rng(1)
        samples = rng.standard_normal((200, 2))
        grid = build_grid(domain=[(-2, 2), (-1, 3)], resolution=(9, 7))
        tensor = grid_ecdf(samples, grid)
        expected = np.array([ecdf_eval(samples, point) for point in grid.points()]).reshape(grid.shape)
        np.testing.assert_allclose(tensor, expected)

    def test_sample_grid_ecdf(self):
        estimate = empirical_cdf([3.0, 1.0, 2.0, 2.0])
        np.testing.assert_array_equal(estimate.grid.breakpoints[0], [1.0, 2.0, 3.0])
        np.testing.assert_allclose(estimate.values, [0.25, 0.75, 1.0])


class GridTests(SimpleTestCase):
    def test_sample_driven(self):
        grid = build_grid(samples=[3.0, 1.0, 2.0])
        np.testing.assert_array_equal(grid.breakpoints[0], [1.0, 2.0, 3.0])

    def test_rectangle_lattice(self):
        grid = build_grid(domain=[(0.5, 1.0), (1.0, 3.0)], resolution=(4, 4))
        self.assertEqual(grid.shape, (4, 4))
        points = grid.points()
        np.testing.assert_array_equal(points[0], [0.5, 1.0])
        np.testing.assert_array_equal(points[-1], [1.0, 3.0])

    def test_endpoints_only(self):
        grid = build_grid(domain=[(0.0, 1.0)], resolution=(2,))
        np.testing.assert_array_equal(grid.breakpoints[0], [0.0, 1.0])

    def test_empty_domain(self):
        with self.assertRaises(ConfigurationError):
            build_grid(domain=[(1.0, 1.0)], resolution=4)

    def test_quadrature_midpoints(self):
        grid, volume = quadrature_grid([(0.0, 1.0), (1.0, 3.0)], 4)
        np.testing.assert_allclose(grid.breakpoints[0], [0.125, 0.375, 0.625, 0.875])
        self.assertAlmostEqual(volume, 0.125)


class EvaluateTests(SimpleTestCase):
    def test_step_lookup(self):
        estimate = empirical_cdf([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_allclose(estimate.evaluate([0.5, 1.0, 2.5, 9.0]), [0.0, 0.25, 0.5, 1.0])

    def test_below_in_any_dimension(self):
        grid = EvalGrid.from_arrays([0.0, 1.0], [0.0, 1.0])
        estimate = CdfEstimate(grid=grid, values=[[0.1, 0.2], [0.3, 1.0]])
        np.testing.assert_allclose(estimate.evaluate([[-1.0, 5.0], [5.0, 5.0], [0.5, 0.5]]), [0.0, 1.0, 0.1])

    def test_payload_round_trip(self):
        estimate = alternating_sort(square_estimate(CROSSING_TENSOR))
        restored = CdfEstimate.from_dict(estimate.to_dict())
        np.testing.assert_array_equal(restored.values, estimate.values)
        self.assertTrue(restored.monotone)
        self.assertEqual(list(estimate.to_frame().columns), ["z_1", "z_2", "value", "raw"])


class QuantileTests(SimpleTestCase):
    def test_interpolates_between_jumps(self):
        self.assertAlmostEqual(quantile(Cdf1D.from_samples([0.0, 1.0]), 0.75), 0.5)

    def test_point_mass(self):
        cdf = Cdf1D.from_samples([5.0, 5.0, 5.0])
        for p in (0.01, 0.5, 0.99):
            self.assertEqual(quantile(cdf, p), 5.0)

    def test_identity_inverse(self):
        z = np.linspace(0.0, 1.0, 101)
        self.assertAlmostEqual(quantile(Cdf1D(points=z, values=z), 0.3), 0.3)

    def test_level_out_of_range(self):
        cdf = Cdf1D(points=[0.0, 1.0], values=[0.2, 0.6])
        for p in (0.0, 1.0, 0.7):
            with self.assertRaises(ImproperCdfError):
                quantile(cdf, p)

    def test_rejects_decreasing_values(self):
        with self.assertRaises(ImproperCdfError):
            Cdf1D(points=[0.0, 1.0], values=[0.6, 0.2])


class AlternatingSortTests(SimpleTestCase):
    def test_row_then_column(self):
        result = alternating_sort(square_estimate(CROSSING_TENSOR), axis_order=(1, 0))
        np.testing.assert_array_equal(result.values, [[0.0, 0.3, 0.5], [0.2, 0.4, 0.7], [0.6, 0.8, 1.0]])

    def test_column_then_row_is_default(self):
        result = alternating_sort(square_estimate(CROSSING_TENSOR))
        np.testing.assert_array_equal(result.values, [[0.0, 0.3, 0.4], [0.2, 0.5, 0.7], [0.6, 0.8, 1.0]])
        self.assertTrue(result.monotone)

    def test_monotone_input_takes_one_sweep(self):
        values = np.array([[0.0, 0.1], [0.2, 0.9]])
        result = alternating_sort(square_estimate(values))
        self.assertEqual(result.sweeps, 1)
        np.testing.assert_array_equal(result.values, values)

    def test_one_dimension_is_plain_sort(self):
        values = np.array([0.5, -0.1, 1.2, 0.3])
        result = alternating_sort(square_estimate(values))
        np.testing.assert_array_equal(result.raw, np.sort(values))
        np.testing.assert_array_equal(result.values, np.clip(np.sort(values), 0, 1))

    def test_random_tensors(self):
        rng = np.random.default_rng(12)
        for trial in range(20):
            values = rng.random((20, 20))
            if trial % 2:
                values = np.round(values, 1)
            result = alternating_sort(square_estimate(values))
            np.testing.assert_array_equal(np.sort(result.raw, axis=None), np.sort(values, axis=None))
            self.assertTrue(result.is_monotone())
            self.assertLess(result.sweeps, values.size)
            again = alternating_sort(result)
            np.testing.assert_array_equal(again.raw, result.raw)

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import DimensionMismatchError, SampleSizeError
from ensemble.specs import JointBatch
from .regression import SurrogateCoefficients, apply_surrogate, design_matrix, fit_surrogate, fitted_values


def batch_from(y, *xs):
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    blocks = tuple(np.asarray(x, dtype=float).reshape(len(x), -1) for x in xs)
    return JointBatch(count=len(y), y=y, x=blocks, charged_cost=0.0)


class FitSurrogateTests(SimpleTestCase):
    def test_identity_regression(self):
        x = np.array([0.3, -1.2, 2.5, 0.7, 1.1])
        coeffs = fit_surrogate(batch_from(x, x), (1,))
        np.testing.assert_allclose(coeffs.matrix[:, 0], [0.0, 1.0], atol=1e-10)
        self.assertEqual(coeffs.rank, 2)

    def test_affine_relation_recovered(self):
        x = np.array([0.0, 1.0, 2.0, 4.0])
        coeffs = fit_surrogate(batch_from(2 * x + 3, x), (1,))
        np.testing.assert_allclose(coeffs.matrix[:, 0], [3.0, 2.0], atol=1e-10)

    def test_constant_covariate_is_rank_deficient(self):
        y = np.array([1.0, 2.0, 3.0, 6.0])
        with self.assertLogs("surrogate.regression", level="WARNING"):
            coeffs = fit_surrogate(batch_from(y, np.full(4, 2.0)), (1,))
        self.assertEqual(coeffs.rank, 1)
        # minimum-norm fit of the mean: (b0, b1) proportional to (1, 2)
        np.testing.assert_allclose(coeffs.matrix[:, 0], [0.6, 1.2], atol=1e-10)
        np.testing.assert_allclose(apply_surrogate(coeffs, [2.0]), [3.0], atol=1e-10)

    def test_too_few_rows(self):
        with self.assertRaises(SampleSizeError):
            fit_surrogate(batch_from([1.0, 2.0], [1.0, 3.0]), (1,))

    def test_non_finite_rows(self):
        with self.assertRaises(SampleSizeError):
            fit_surrogate(batch_from([1.0, 2.0, np.nan, 4.0], [1.0, 2.0, 3.0, 4.0]), (1,))

    def test_residuals_orthogonal_to_design(self):
        rng = np.random.default_rng(4)
        x1 = rng.standard_normal((40, 1))
        x2 = rng.standard_normal((40, 2))
        y = np.hstack([x1 + 0.3 * x2[:, :1], x2[:, 1:] - x1]) + 0.1 * rng.standard_normal((40, 2))
        batch = JointBatch(count=40, y=y, x=(x1, x2), charged_cost=0.0)
        coeffs = fit_surrogate(batch, (1, 2))
        residuals = y - fitted_values(batch, coeffs)
        inner = design_matrix(batch.x_subset((1, 2))).T @ residuals
        self.assertLess(np.abs(inner).max(), 1e-8 * np.abs(y).sum())

    def test_duplicate_column_keeps_fitted_values(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal(30)
        y = 1.5 * x + rng.standard_normal(30)
        single = fit_surrogate(batch_from(y, x), (1,))
        doubled = fit_surrogate(batch_from(y, x, x), (1, 2))
        self.assertEqual(doubled.rank, 2)
        np.testing.assert_allclose(
            fitted_values(batch_from(y, x), single),
            fitted_values(batch_from(y, x, x), doubled),
            atol=1e-8,
        )


class ApplySurrogateTests(SimpleTestCase):
    def test_affine_evaluation(self):
        coeffs = SurrogateCoefficients(subset=(1,), matrix=np.array([[3.0], [2.0]]), rank=2)
        np.testing.assert_allclose(apply_surrogate(coeffs, [5.0]), [13.0])

    def test_zero_matrix(self):
        coeffs = SurrogateCoefficients(subset=(1,), matrix=np.zeros((2, 1)), rank=0)
        np.testing.assert_array_equal(apply_surrogate(coeffs, [-7.5]), [0.0])

    def test_coordinate_pass_through(self):
        matrix = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        coeffs = SurrogateCoefficients(subset=(1, 2), matrix=matrix, rank=3)
        np.testing.assert_allclose(apply_surrogate(coeffs, [0.4, -2.0]), [0.4, -2.0])
        np.testing.assert_allclose(apply_surrogate(coeffs, [[1.0, 2.0], [3.0, 4.0]]), [[1.0, 2.0], [3.0, 4.0]])

    def test_dimension_mismatch(self):
        coeffs = SurrogateCoefficients(subset=(1,), matrix=np.zeros((2, 1)), rank=0)
        with self.assertRaises(DimensionMismatchError):
            apply_surrogate(coeffs, [1.0, 2.0])

    def test_json_payload(self):
        coeffs = SurrogateCoefficients(subset=(1, 3), matrix=np.arange(6.0).reshape(3, 2), rank=3)
        restored = SurrogateCoefficients.from_dict(coeffs.to_dict())
        self.assertEqual(restored.subset, (1, 3))
        np.testing.assert_array_equal(restored.matrix, coeffs.matrix)

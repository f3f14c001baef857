import numpy as np

from django.test import SimpleTestCase

from djcalib.distances import (
    L2,
    TVD,
    InterInterval,
    distance,
    validate_weight_matrix,
)
from djcalib.exceptions import (
    DimensionMismatch,
    DistanceLensMismatch,
    InterIntervalOnNonScalar,
    InvalidSpec,
    NonPSDMatrix,
)


class TestDistances(SimpleTestCase):

    def test_tvd(self):
        self.assertAlmostEqual(distance(TVD(), [0.7, 0.2, 0.1], [1, 0, 0]), 0.3, places=12)

    def test_tvd_scalar_is_absolute_difference(self):
        self.assertAlmostEqual(distance(TVD(), [0.7], [1.0]), 0.3, places=12)
        self.assertAlmostEqual(distance(TVD(), [0.9], [0.5]), 0.4, places=12)

    def test_tvd_bounded_on_simplex(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            g = rng.dirichlet(np.ones(4))
            y = np.eye(4)[rng.integers(0, 4)]
            self.assertLessEqual(distance(TVD(), g, y), 1.0)

    def test_l2(self):
        self.assertAlmostEqual(distance(L2(), [0.6, 0.4], [1.0, 0.0]), np.sqrt(0.32), places=12)

    def test_inter_interval(self):
        self.assertEqual(distance(InterInterval(0.0, 0.33), [0.1], [0.2]), 0.0)
        self.assertAlmostEqual(distance(InterInterval(0.0, 0.33), [0.1], [0.5]), 0.17, places=12)
        self.assertAlmostEqual(distance(InterInterval(0.66, 1.0), [0.9], [0.5]), 0.16, places=12)

    def test_inter_interval_ignores_output(self):
        self.assertEqual(distance(InterInterval(0.33, 0.66), [0.0], [0.5]), 0.0)
        self.assertEqual(distance(InterInterval(0.33, 0.66), [1.0], [0.5]), 0.0)

    def test_inter_interval_needs_scalar(self):
        with self.assertRaises(InterIntervalOnNonScalar):
            distance(InterInterval(0.0, 0.5), [0.5, 0.5], [1.0, 0.0])
        # interval distances are lens mismatches too
        with self.assertRaises(DistanceLensMismatch):
            InterInterval(0.0, 0.5).validate(3)

    def test_invalid_interval(self):
        with self.assertRaises(InvalidSpec):
            InterInterval(0.5, 0.4)
        with self.assertRaises(InvalidSpec):
            InterInterval(0.0, 1.5)

    def test_weighted_identity_is_l2(self):
        rng = np.random.default_rng(5)
        identity = validate_weight_matrix(np.eye(3))
        for _ in range(100):
            g, y = rng.random(3), rng.random(3)
            self.assertAlmostEqual(distance(identity, g, y), distance(L2(), g, y), places=12)

    def test_weighted_lens_mismatch(self):
        with self.assertRaises(DistanceLensMismatch):
            distance(validate_weight_matrix(np.eye(2)), [0.2, 0.3, 0.5], [0, 0, 1])

    def test_mismatched_vectors(self):
        with self.assertRaises(DimensionMismatch):
            distance(TVD(), [0.5, 0.5], [1.0, 0.0, 0.0])

    def test_nonnegative(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            a = rng.normal(size=(3, 3))
            weighted = validate_weight_matrix(a @ a.T)
            g, y = rng.random(3), rng.random(3)
            for spec in (TVD(), L2(), weighted):
                self.assertGreaterEqual(distance(spec, g, y), 0.0)


class TestWeightMatrix(SimpleTestCase):

    def test_positive_diagonal(self):
        weighted = validate_weight_matrix(np.diag([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(weighted.M, np.diag([1.0, 2.0, 3.0]))

    def test_indefinite(self):
        with self.assertRaises(NonPSDMatrix) as ctx:
            validate_weight_matrix([[1, 2], [2, 1]])
        self.assertAlmostEqual(ctx.exception.eigenvalue, -1.0, places=9)
        self.assertIn("-1", str(ctx.exception))

    def test_zero_matrix(self):
        weighted = validate_weight_matrix(np.zeros((2, 2)))
        self.assertEqual(distance(weighted, [0.9, 0.1], [0.0, 1.0]), 0.0)

    def test_symmetrized(self):
        weighted = validate_weight_matrix([[2.0, 1.0], [0.0, 2.0]])
        np.testing.assert_array_equal(weighted.M, [[2.0, 0.5], [0.5, 2.0]])

    def test_not_square(self):
        with self.assertRaises(DimensionMismatch):
            validate_weight_matrix([[1.0, 0.0]])

    def test_textual_form(self):
        self.assertEqual(str(validate_weight_matrix(np.eye(2), source="m.csv")), "weighted:m.csv")
        self.assertEqual(str(validate_weight_matrix(np.eye(2))), "weighted:1.0,0.0;0.0,1.0")

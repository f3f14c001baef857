import numpy as np

from django.test import SimpleTestCase

from djcalib.core import Dataset
from djcalib.distances import TVD, InterInterval, distance
from djcalib.estimator import (
    Adaptive,
    Uniform,
    adaptive_capacity,
    bin_adaptive,
    bin_uniform,
    classwise_ece,
    gece,
    traditional_ece,
)
from djcalib.exceptions import EmptySelection, InterIntervalOnNonScalar, InvalidSpec
from djcalib.lenses import ClassConditional, Full, TopK
from djcalib.selectors import All, LabelEquals
from djcalib.synth import oracle_gece

from tests.fixtures import (
    binary,
    hand_fixture,
    random_binning,
    random_dataset,
    random_distance,
    random_lens,
    random_selector,
)


class TestUniformBinning(SimpleTestCase):

    def test_two_bins(self):
        binning = bin_uniform([0.7, 0.7, 0.9, 0.9], 2, 0.5, 1.0)
        self.assertEqual(binning.sizes, (2, 2))
        self.assertEqual(binning.bins[0].member_indices, (0, 1))
        self.assertEqual(binning.bins[1].member_indices, (2, 3))

    def test_single_bin(self):
        binning = bin_uniform([0.1, 0.5, 0.9], 1)
        self.assertEqual(binning.sizes, (3,))

    def test_top_edge_closed(self):
        binning = bin_uniform([1.0], 15)
        self.assertEqual(len(binning), 1)
        lower, upper = binning.bins[0].region
        self.assertAlmostEqual(lower[0], 14 / 15, places=12)
        self.assertEqual(upper[0], 1.0)

    def test_inner_edge_goes_up(self):
        binning = bin_uniform([0.25, 0.5, 0.75], 2, 0.0, 1.0)
        self.assertEqual(binning.sizes, (1, 2))

    def test_multidimensional_cells(self):
        points = np.array([[0.1, 0.9], [0.2, 0.8], [0.9, 0.1]])
        binning = bin_uniform(points, 2)
        self.assertEqual(binning.sizes, (2, 1))

    def test_means(self):
        binning = bin_uniform([0.7, 0.7, 0.9, 0.9], 2, 0.5, 1.0, targets=[1.0, 1.0, 1.0, 0.0])
        self.assertEqual(binning.bins[0].mean_target, (1.0,))
        self.assertEqual(binning.bins[1].mean_target, (0.5,))

    def test_invalid(self):
        with self.assertRaises(InvalidSpec):
            Uniform(0)
        with self.assertRaises(InvalidSpec):
            Uniform(2, 1.0, 0.5)


class TestAdaptiveBinning(SimpleTestCase):

    def test_median_splits(self):
        points = [0.55, 0.6, 0.65, 0.7, 0.8, 0.85, 0.9, 0.95]
        binning = bin_adaptive(points, 0.25)
        self.assertEqual(binning.sizes, (2, 2, 2, 2))
        self.assertEqual(
            [b.member_indices for b in binning],
            [(0, 1), (2, 3), (4, 5), (6, 7)],
        )

    def test_gamma_one_is_single_bin(self):
        self.assertEqual(bin_adaptive([0.1, 0.2, 0.3, 0.4], 1.0).sizes, (4,))

    def test_single_point(self):
        self.assertEqual(bin_adaptive([0.3], 0.01).sizes, (1,))

    def test_capacity(self):
        self.assertEqual(adaptive_capacity(0.1, 30), 3)
        self.assertEqual(adaptive_capacity(0.1, 31), 4)
        self.assertEqual(adaptive_capacity(0.001, 10), 1)
        self.assertEqual(adaptive_capacity(1.0, 7), 7)

    def test_lower_median_goes_left(self):
        binning = bin_adaptive([0.1, 0.2, 0.3], 0.5)
        self.assertEqual(binning.sizes, (2, 1))

    def test_ties_split_by_index(self):
        binning = bin_adaptive([0.5, 0.5, 0.5, 0.5], 0.5)
        self.assertEqual([b.member_indices for b in binning], [(0, 1), (2, 3)])

    def test_regions_start_from_unit_box(self):
        binning = bin_adaptive(np.array([[0.2, 0.8], [0.6, 0.4]]), 0.5)
        self.assertEqual(binning.bins[0].region, ((0.0, 0.0), (0.2, 1.0)))
        self.assertEqual(binning.bins[1].region, ((0.2, 0.0), (1.0, 1.0)))

    def test_bound_and_partition(self):
        rng = np.random.default_rng(31)
        for _ in range(500):
            n = int(rng.integers(1, 200))
            dim = int(rng.integers(1, 4))
            gamma = float(rng.uniform(0.001, 1.0))
            binning = bin_adaptive(rng.random((n, dim)), gamma)

            self.assertLessEqual(max(binning.sizes), adaptive_capacity(gamma, n))
            members = sorted(i for b in binning for i in b.member_indices)
            self.assertEqual(members, list(range(n)))

    def test_invalid(self):
        with self.assertRaises(InvalidSpec):
            Adaptive(0.0)
        with self.assertRaises(InvalidSpec):
            Adaptive(1.5)


class TestGECE(SimpleTestCase):

    def test_hand_fixture(self):
        result = gece(hand_fixture(), TopK(1), All(), TVD(), Uniform(2, 0.5, 1.0))
        self.assertAlmostEqual(result.value, 0.35, delta=1e-12)
        self.assertEqual(result.n_selected, 4)
        self.assertEqual([b.count for b in result.per_bin], [2, 2])
        self.assertAlmostEqual(result.per_bin[0].distance, 0.3, delta=1e-12)
        self.assertAlmostEqual(result.per_bin[1].distance, 0.4, delta=1e-12)

    def test_traditional_preset(self):
        result = traditional_ece(hand_fixture())
        self.assertAlmostEqual(result.value, 0.35, delta=1e-12)
        self.assertEqual(result.config["binning"], "uniform:15")
        self.assertEqual(result.config["lens"], "topk:1")

    def test_traditional_perfect(self):
        dataset = Dataset(probs=[[1.0, 0.0], [0.0, 1.0]], labels=[0, 1])
        self.assertEqual(traditional_ece(dataset).value, 0.0)

    def test_traditional_constant(self):
        dataset = binary([0.8] * 10, [1] * 6 + [0] * 4)
        self.assertAlmostEqual(traditional_ece(dataset).value, 0.2, delta=1e-12)

    def test_matching_constant_classifier(self):
        dataset = Dataset(probs=[[0.6, 0.4]] * 10, labels=[0] * 6 + [1] * 4)
        self.assertAlmostEqual(gece(dataset, Full(), All(), TVD(), Uniform(1)).value, 0.0, delta=1e-12)

    def test_single_bin_reduction(self):
        rng = np.random.default_rng(41)
        dataset = random_dataset(rng, 50, 3)
        result = gece(dataset, Full(), All(), TVD(), Uniform(1))
        expected = distance(TVD(), dataset.probs.mean(axis=0), dataset.targets.mean(axis=0))
        self.assertAlmostEqual(result.value, expected, delta=1e-12)

    def test_selection_is_binned_alone(self):
        dataset = binary([0.9, 0.9, 0.7, 0.7, 0.1], [1, 0, 1, 1, 0])
        selected = gece(dataset, TopK(1), LabelEquals(1), TVD(), Adaptive(1.0))
        self.assertEqual(selected.n_selected, 3)
        self.assertAlmostEqual(selected.value, abs((0.9 + 0.7 + 0.7) / 3 - 1.0), delta=1e-12)

    def test_empty_selection(self):
        dataset = binary([0.9, 0.8], [1, 1])
        with self.assertRaises(EmptySelection):
            gece(dataset, Full(), LabelEquals(0), TVD(), Uniform(2))

    def test_distance_lens_mismatch(self):
        with self.assertRaises(InterIntervalOnNonScalar):
            gece(hand_fixture(), Full(), All(), InterInterval(0.0, 0.5), Uniform(2))

    def test_config_echo(self):
        result = gece(hand_fixture(), ClassConditional(1), All(), TVD(), Adaptive(0.5), seed=9)
        self.assertEqual(
            result.config,
            {"lens": "class:1", "selector": "all", "distance": "tvd", "binning": "adaptive:0.5", "seed": 9},
        )
        self.assertEqual(set(result.to_dict()), {"value", "n", "bins", "config"})

    def test_bounds(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            dataset = random_dataset(rng, int(rng.integers(1, 40)), 3)
            value = gece(dataset, Full(), All(), TVD(), random_binning(rng)).value
            self.assertGreaterEqual(value, 0.0)
            self.assertLessEqual(value, 1.0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(43)
        for _ in range(100):
            dataset = random_dataset(rng, 30, 3)
            shuffled = dataset.take(rng.permutation(30))
            for binning in (Uniform(3), Adaptive(0.2)):
                self.assertEqual(
                    gece(dataset, Full(), All(), TVD(), binning).value,
                    gece(shuffled, Full(), All(), TVD(), binning).value,
                )

    def test_classwise(self):
        dataset = binary([0.9, 0.9, 0.7, 0.7], [1, 0, 1, 1])
        expected = np.mean(
            [gece(dataset, ClassConditional(c), All(), TVD(), Uniform(2)).value for c in range(2)]
        )
        self.assertAlmostEqual(classwise_ece(dataset, TVD(), Uniform(2)), expected, delta=1e-12)


class TestOracleEquivalence(SimpleTestCase):

    def test_hand_fixture(self):
        value = oracle_gece(hand_fixture(), TopK(1), All(), TVD(), Uniform(2, 0.5, 1.0))
        self.assertAlmostEqual(value, 0.35, delta=1e-12)

    def test_single_record(self):
        dataset = Dataset(probs=[[0.6, 0.3, 0.1]], labels=[1])
        for binning in (Uniform(4), Adaptive(0.1)):
            value = oracle_gece(dataset, Full(), All(), TVD(), binning)
            self.assertAlmostEqual(value, 0.7, delta=1e-12)

    def test_random_instances(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            k = int(rng.integers(2, 5))
            dataset = random_dataset(rng, int(rng.integers(1, 65)), k)
            lens = random_lens(rng, k)
            dist = random_distance(rng, lens.dim(k))
            binning = random_binning(rng)
            selector = random_selector(rng, k)

            try:
                expected = oracle_gece(dataset, lens, selector, dist, binning)
            except EmptySelection:
                with self.assertRaises(EmptySelection):
                    gece(dataset, lens, selector, dist, binning)
                continue

            actual = gece(dataset, lens, selector, dist, binning).value
            self.assertAlmostEqual(actual, expected, delta=1e-9, msg=f"{lens} {selector} {dist} {binning}")

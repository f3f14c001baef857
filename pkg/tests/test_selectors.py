import numpy as np

from django.test import SimpleTestCase

from djcalib.core import Dataset
from djcalib.exceptions import InvalidClassIndex, InvalidSpec
from djcalib.selectors import (
    All,
    ClassProb,
    Conjunction,
    LabelEquals,
    LabelInGroup,
    MaxProb,
    OutputCompare,
    ScalarBinary,
    select,
)

from tests.fixtures import binary, random_dataset, random_selector


class TestSelectors(SimpleTestCase):

    def setUp(self):
        self.dataset = Dataset(
            probs=np.full((5, 3), 1 / 3),
            labels=[0, 1, 1, 2, 0],
        )

    def test_label_equals(self):
        selected = select(LabelEquals(1), self.dataset)
        np.testing.assert_array_equal(selected.labels, [1, 1])
        np.testing.assert_array_equal(LabelEquals(1).mask(self.dataset), [False, True, True, False, False])

    def test_label_in_group(self):
        selected = select(LabelInGroup(frozenset({0, 2})), self.dataset)
        np.testing.assert_array_equal(selected.labels, [0, 2, 0])

    def test_all_is_identity(self):
        self.assertIs(select(All(), self.dataset), self.dataset)

    def test_score_band(self):
        dataset = binary([0.2, 0.5, 0.9], [0, 1, 1])
        low = Conjunction(
            (
                OutputCompare(ScalarBinary(), ">=", 0.0),
                OutputCompare(ScalarBinary(), "<", 0.33),
            )
        )
        selected = select(low, dataset)
        self.assertEqual(selected.n, 1)
        self.assertAlmostEqual(selected.probs[0, 1], 0.2, places=12)

    def test_maxprob_and_class_prob(self):
        dataset = Dataset(probs=[[0.7, 0.2, 0.1], [0.4, 0.35, 0.25]], labels=[0, 1])
        self.assertEqual(select(OutputCompare(MaxProb(), ">", 0.5), dataset).n, 1)
        self.assertEqual(select(OutputCompare(ClassProb(1), "<=", 0.25), dataset).n, 1)
        self.assertEqual(select(OutputCompare(ClassProb(1), "=", 0.35), dataset).n, 1)

    def test_empty_selection_is_allowed(self):
        selected = select(LabelEquals(2), self.dataset.take([0, 1]))
        self.assertEqual(selected.n, 0)

    def test_invalid_class_index(self):
        with self.assertRaises(InvalidClassIndex):
            select(LabelEquals(3), self.dataset)
        with self.assertRaises(InvalidClassIndex):
            select(LabelInGroup(frozenset({1, 5})), self.dataset)
        with self.assertRaises(InvalidClassIndex):
            select(OutputCompare(ClassProb(3), "<", 0.5), self.dataset)

    def test_score_needs_binary(self):
        with self.assertRaises(InvalidSpec):
            select(OutputCompare(ScalarBinary(), "<", 0.5), self.dataset)

    def test_invalid_comparisons(self):
        with self.assertRaises(InvalidSpec):
            OutputCompare(MaxProb(), "!=", 0.5)
        with self.assertRaises(InvalidSpec):
            OutputCompare(MaxProb(), "<", 1.5)
        with self.assertRaises(InvalidSpec):
            Conjunction(())

    def test_textual_forms(self):
        self.assertEqual(str(All()), "all")
        self.assertEqual(str(LabelEquals(3)), "label=3")
        self.assertEqual(str(LabelInGroup(frozenset({5, 1, 4}))), "label-in=1,4,5")
        self.assertEqual(str(OutputCompare(MaxProb(), ">=", 0.66)), "maxprob>=0.66")
        self.assertEqual(
            str(Conjunction((LabelEquals(1), OutputCompare(ClassProb(2), "<", 0.5)))),
            "label=1,p2<0.5",
        )

    def test_idempotent(self):
        rng = np.random.default_rng(21)
        for _ in range(500):
            k = int(rng.integers(2, 5))
            dataset = random_dataset(rng, int(rng.integers(1, 30)), k)
            selector = random_selector(rng, k)
            once = select(selector, dataset)
            self.assertEqual(select(selector, once), once)

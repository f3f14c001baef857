import os
import tempfile

import numpy as np

from django.test import SimpleTestCase

from djcalib.calibrators import BiasCorrectedTemperatureScaling
from djcalib.core import Dataset
from djcalib.exceptions import (
    IndexOutOfRange,
    InconsistentWidth,
    InvalidSpec,
    MissingProbs,
    ParseError,
    SimplexViolation,
    SumOutOfTolerance,
)
from djcalib.loaders import (
    infer_format,
    load_calibrator,
    load_document,
    load_group_map,
    load_matrix,
    load_predictions,
    save_calibrator,
    write_predictions,
)

from tests.fixtures import write_jsonl


class LoaderTestCase(SimpleTestCase):

    def setUp(self):
        self._tmpdir = tempfile.TemporaryDirectory()
        self.tmpdir = self._tmpdir.name

    def tearDown(self):
        self._tmpdir.cleanup()

    def path(self, name):
        return os.path.join(self.tmpdir, name)

    def write(self, name, text):
        with open(self.path(name), "w") as f:
            f.write(text)
        return self.path(name)


class TestInferFormat(SimpleTestCase):

    def test_suffixes(self):
        self.assertEqual(infer_format("preds.jsonl"), "jsonl")
        self.assertEqual(infer_format("preds.JSON"), "jsonl")
        self.assertEqual(infer_format("preds.csv"), "csv")
        self.assertEqual(infer_format("preds.txt", "csv"), "csv")

    def test_unknown(self):
        with self.assertRaises(InvalidSpec):
            infer_format("preds.txt")
        with self.assertRaises(InvalidSpec):
            infer_format("preds.csv", "parquet")


class TestLoadJSONL(LoaderTestCase):

    def test_probabilities(self):
        path = write_jsonl(
            self.path("preds.jsonl"),
            [{"label": 1, "probs": [0.1, 0.9]}, {"label": 0, "probs": [0.7, 0.3]}],
        )
        dataset = load_predictions(path)
        self.assertEqual((dataset.n, dataset.k), (2, 2))
        np.testing.assert_array_equal(dataset.labels, [1, 0])
        self.assertFalse(dataset.has_logits)

    def test_logits_and_class_names(self):
        path = write_jsonl(
            self.path("preds.jsonl"),
            [
                {"label": 0, "logits": [2.0, 0.0, -1.0], "class_names": ["a", "b", "c"]},
                {"label": 2, "logits": [0.0, 0.0, 0.0]},
            ],
        )
        dataset = load_predictions(path)
        self.assertTrue(dataset.has_logits)
        self.assertEqual(dataset.class_names, ("a", "b", "c"))
        np.testing.assert_allclose(dataset.probs[1], [1 / 3, 1 / 3, 1 / 3])

    def test_blank_lines_are_skipped(self):
        path = self.write("preds.jsonl", '{"label": 0, "probs": [0.5, 0.5]}\n\n{"label": 1, "probs": [0.5, 0.5]}\n')
        self.assertEqual(load_predictions(path).n, 2)

    def test_renormalizes_within_tolerance(self):
        path = write_jsonl(self.path("preds.jsonl"), [{"label": 0, "probs": [0.5, 0.5000001]}])
        self.assertAlmostEqual(load_predictions(path).probs.sum(), 1.0, places=15)

    def test_errors_name_the_line(self):
        cases = [
            ('{"label": 0, "probs": [0.5, 0.5]}\n{"label": 0, "probs": [0.4, 0.8]}\n', SumOutOfTolerance),
            ('{"label": 0, "probs": [0.5, 0.5]}\n{"label": 0\n', ParseError),
            ('{"label": 0, "probs": [0.5, 0.5]}\n{"label": 0}\n', ParseError),
            ('{"label": 0, "probs": [0.5, 0.5]}\n{"label": 0.5, "probs": [0.5, 0.5]}\n', ParseError),
            ('{"label": 0, "probs": [0.5, 0.5]}\n{"label": 3, "probs": [0.5, 0.5]}\n', IndexOutOfRange),
            ('{"label": 0, "probs": [0.5, 0.5]}\n{"label": 0, "probs": [0.5, 0.25, 0.25]}\n', InconsistentWidth),
        ]
        for text, error in cases:
            path = self.write("bad.jsonl", text)
            with self.assertRaises(error, msg=text) as ctx:
                load_predictions(path)
            self.assertIn("line 2", str(ctx.exception))

    def test_empty_file(self):
        with self.assertRaises(ParseError):
            load_predictions(self.write("empty.jsonl", ""))

    def test_scalar_binary_outputs(self):
        path = write_jsonl(
            self.path("preds.jsonl"),
            [{"probs": 0.7, "label": 1}, {"score": 0.25, "label": 0}, {"probs": 1, "label": 1}],
        )
        dataset = load_predictions(path)
        self.assertEqual((dataset.n, dataset.k), (3, 2))
        np.testing.assert_allclose(dataset.probs, [[0.3, 0.7], [0.75, 0.25], [0.0, 1.0]])

    def test_scalar_outside_unit_interval(self):
        path = self.write("preds.jsonl", '{"probs": 0.5, "label": 0}\n{"probs": 1.5, "label": 1}\n')
        with self.assertRaises(SimplexViolation) as ctx:
            load_predictions(path)
        self.assertIn("line 2", str(ctx.exception))

        path = self.write("preds.jsonl", '{"probs": true, "label": 0}\n')
        with self.assertRaises(ParseError):
            load_predictions(path)

    def test_null_outputs(self):
        path = self.write("preds.jsonl", '{"label": 0, "probs": null}\n')
        with self.assertRaises(MissingProbs):
            load_predictions(path)


class TestLoadCSV(LoaderTestCase):

    def test_probabilities(self):
        path = self.write("preds.csv", "p0,p1,p2,label\n0.7,0.2,0.1,0\n0.1,0.1,0.8,2\n")
        dataset = load_predictions(path)
        self.assertEqual((dataset.n, dataset.k), (2, 3))
        np.testing.assert_array_equal(dataset.labels, [0, 2])

    def test_logit_columns(self):
        path = self.write("preds.csv", "label,z0,z1\n1,0.0,2.0\n")
        dataset = load_predictions(path)
        self.assertTrue(dataset.has_logits)
        self.assertAlmostEqual(dataset.probs[0, 1], 0.8808, places=4)

    def test_scalar_binary_column(self):
        path = self.write("preds.csv", "p,label\n0.7,1\n0.2,0\n")
        dataset = load_predictions(path)
        self.assertEqual((dataset.n, dataset.k), (2, 2))
        np.testing.assert_allclose(dataset.probs, [[0.3, 0.7], [0.8, 0.2]])
        np.testing.assert_array_equal(dataset.labels, [1, 0])

        with self.assertRaises(ParseError):
            load_predictions(self.write("bad.csv", "p,p0,p1,label\n0.5,0.5,0.5,0\n"))

    def test_errors(self):
        cases = [
            ("p0,p1\n0.5,0.5\n", ParseError, "line 1"),
            ("label,x\n0,1\n", ParseError, "line 1"),
            ("p0,p2,label\n0.5,0.5,0\n", ParseError, "line 1"),
            ("p0,p1,label\n0.5,0.5,0\n0.5,0\n", InconsistentWidth, "line 3"),
            ("p0,p1,label\n0.5,0.5,0\n0.5,high,1\n", ParseError, "line 3"),
        ]
        for text, error, where in cases:
            path = self.write("bad.csv", text)
            with self.assertRaises(error, msg=text) as ctx:
                load_predictions(path)
            self.assertIn(where, str(ctx.exception))


class TestWritePredictions(LoaderTestCase):

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        z = rng.normal(size=(20, 4))
        dataset = Dataset(logits=z, labels=rng.integers(0, 4, size=20), class_names=["a", "b", "c", "d"])

        for name in ("out.jsonl", "out.csv"):
            write_predictions(dataset, self.path(name))
            loaded = load_predictions(self.path(name))
            np.testing.assert_array_equal(loaded.labels, dataset.labels)
            np.testing.assert_array_equal(loaded.logits, dataset.logits)
            np.testing.assert_allclose(loaded.probs, dataset.probs, rtol=0, atol=1e-15)

        self.assertEqual(load_predictions(self.path("out.jsonl")).class_names, dataset.class_names)

    def test_deterministic(self):
        dataset = Dataset(probs=[[0.1, 0.9], [1 / 3, 2 / 3]], labels=[1, 0])
        write_predictions(dataset, self.path("a.jsonl"))
        write_predictions(dataset, self.path("b.jsonl"))
        with open(self.path("a.jsonl")) as a, open(self.path("b.jsonl")) as b:
            self.assertEqual(a.read(), b.read())


class TestAuxiliaryFiles(LoaderTestCase):

    def test_group_map(self):
        path = self.write("groups.csv", "class,group\n0,0\n1,0\n2,1\n")
        self.assertEqual(load_group_map(path), {0: 0, 1: 0, 2: 1})

    def test_group_map_errors(self):
        with self.assertRaises(ParseError):
            load_group_map(self.write("groups.csv", "0,0\n0,1\n"))
        with self.assertRaises(ParseError):
            load_group_map(self.write("groups.csv", "0,0,1\n"))

    def test_matrix(self):
        path = self.write("m.csv", "1,0\n0,2\n")
        self.assertEqual(load_matrix(path), [[1.0, 0.0], [0.0, 2.0]])

    def test_matrix_errors(self):
        with self.assertRaises(InvalidSpec):
            load_matrix(self.write("m.csv", "1,0,0\n0,1,0\n"))
        with self.assertRaises(ParseError):
            load_matrix(self.write("m.csv", "1,a\n0,1\n"))

    def test_calibrator(self):
        calibrator = BiasCorrectedTemperatureScaling(1.7, (0.25, -0.125, -0.125))
        save_calibrator(calibrator, self.path("cal.json"))
        self.assertEqual(load_calibrator(self.path("cal.json")), calibrator)

    def test_invalid_documents(self):
        with self.assertRaises(ParseError):
            load_calibrator(self.write("cal.json", "{not json"))
        with self.assertRaises(ParseError):
            load_document(self.write("report.json", "[1,"))
        self.assertEqual(load_document(self.write("report.json", '{"a": 1}')), {"a": 1})

from djcalib.calibrators import apply_calibrator
from djcalib.estimator import traditional_ece
from djcalib.loaders import load_calibrator, write_predictions

from djcalib.management.commands._base import CalibrationCommand


class Command(CalibrationCommand):

    help = "Apply a fitted calibrator to a prediction dump and write the calibrated predictions."

    arguments = {
        ("-C", "--calibrator"): {
            "type": str,
            "default": None,
            "metavar": "PATH",
            "help": "Calibrator document written by the calibrate command",
        },
        ("-i", "--input"): {
            "type": str,
            "default": None,
            "metavar": "PATH",
            "help": "Prediction dump to calibrate",
        },
        ("-f", "--format"): {
            "choices": ("jsonl", "csv"),
            "default": None,
            "help": "Format of the input dump, inferred from its suffix by default",
        },
        "--output-format": {
            "dest": "output_format",
            "choices": ("jsonl", "csv"),
            "default": None,
            "help": "Format of the calibrated predictions (default jsonl)",
        },
        "--require-logits": {
            "dest": "require_logits",
            "action": "store_const",
            "const": True,
            "default": None,
            "help": "Fail instead of using log probabilities when the dump has no logits",
        },
        ("-n", "--name"): {
            "type": str,
            "default": None,
            "help": "Stem of the output file names",
        },
    }

    def defaults(self):
        return {**super().defaults(), "output_format": "jsonl", "require_logits": False}

    def run(self, **options):
        self.require(options, "calibrator", "input")
        calibrator = load_calibrator(options["calibrator"])
        dataset = self.load(options["input"], options["format"])
        calibrated = apply_calibrator(calibrator, dataset, from_probs=not options["require_logits"])

        name = options["name"] or "calibrated"
        path = self.output(options, f"{name}.{options['output_format']}")
        write_predictions(calibrated, path, options["output_format"])

        before, after = traditional_ece(dataset), traditional_ece(calibrated)
        config = {
            "calibrator": str(options["calibrator"]),
            "input": str(options["input"]),
            "variant": calibrator.variant,
            "seed": options["seed"],
        }
        results = {"n": calibrated.n, "predictions": path.name, "ece_before": before.value, "ece_after": after.value}
        rows = [["ece_before", before.value], ["ece_after", after.value]]

        self.write_report(options, name, config, results)
        self.echo(["metric", "value"], rows)

from djcalib import specs
from djcalib.calibrators import FITTERS, apply_calibrator
from djcalib.estimator import gece
from djcalib.loaders import save_calibrator, write_predictions

from djcalib.management.commands._base import (
    METRIC_ARGUMENTS,
    METRIC_DEFAULTS,
    CalibrationCommand,
)


class Command(CalibrationCommand):

    help = (
        "Fit a calibrator on a validation split and, given a test split, apply it "
        "and compare the GECE before and after calibration."
    )

    arguments = {
        **METRIC_ARGUMENTS,
        ("-V", "--validation"): {
            "type": str,
            "default": None,
            "metavar": "PATH",
            "help": "Prediction dump the calibrator is fitted on",
        },
        ("-m", "--method"): {
            "choices": tuple(FITTERS),
            "default": None,
            "help": "Temperature scaling, bias-corrected temperature scaling, or histogram binning",
        },
        "--bins": {
            "type": int,
            "default": None,
            "help": "Histogram binning bins; selected from DJCALIB_HB_BIN_CHOICES by default",
        },
        "--no-bias": {
            "dest": "no_bias",
            "action": "store_const",
            "const": True,
            "default": None,
            "help": "Fit bias-corrected temperature scaling with the bias pinned at zero",
        },
        "--require-logits": {
            "dest": "require_logits",
            "action": "store_const",
            "const": True,
            "default": None,
            "help": "Fail instead of using log probabilities when a dump has no logits",
        },
        ("-b", "--binning"): {
            "type": str,
            "default": None,
            "help": "Binning spec of the before and after evaluation",
        },
        "--write-predictions": {
            "dest": "write_predictions",
            "action": "store_const",
            "const": True,
            "default": None,
            "help": "Also write the calibrated test predictions",
        },
        ("-n", "--name"): {
            "type": str,
            "default": None,
            "help": "Stem of the output file names",
        },
    }

    def defaults(self):
        return {
            **super().defaults(),
            **METRIC_DEFAULTS,
            "method": "ts",
            "binning": "adaptive:0.1",
            "no_bias": False,
            "require_logits": False,
            "write_predictions": False,
        }

    def fit(self, val, options):
        from_probs = not options["require_logits"]
        kwargs = {
            "ts": {"from_probs": from_probs},
            "bcts": {"from_probs": from_probs, "fit_bias": not options["no_bias"]},
            "hb": {"n_bins": options["bins"]},
        }
        return FITTERS[options["method"]](val, **kwargs[options["method"]])

    def run(self, **options):
        self.require(options, "validation")
        val = self.load(options["validation"], options["format"])
        calibrator, report = self.fit(val, options)

        name = options["name"] or "calibrate"
        save_calibrator(calibrator, self.output(options, f"{name}_calibrator.json"))

        config = {
            "validation": str(options["validation"]),
            "input": str(options["input"]) if options["input"] else None,
            "method": options["method"],
            "bins": options["bins"],
            "fit_bias": not options["no_bias"],
            "seed": options["seed"],
        }
        results = {"variant": calibrator.variant, "fit": report}
        rows = [
            ["initial_nll", report.initial_nll],
            ["final_nll", report.final_nll],
            ["iterations", report.iterations],
            ["converged", str(report.converged)],
        ]

        if options["input"]:
            test = self.load(options["input"], options["format"])
            calibrated = apply_calibrator(calibrator, test, from_probs=not options["require_logits"])

            lens, selector, dist, binning = specs.parse_all(
                [
                    ("lens", options["lens"]),
                    ("selector", options["selector"]),
                    ("distance", options["distance"]),
                    ("binning", options["binning"]),
                ]
            )
            before = gece(test, lens, selector, dist, binning, seed=options["seed"])
            after = gece(calibrated, lens, selector, dist, binning, seed=options["seed"])
            results.update({"before": before, "after": after})
            config.update(before.config)
            rows += [["gece_before", before.value], ["gece_after", after.value]]

            if options["write_predictions"]:
                write_predictions(calibrated, self.output(options, f"{name}_predictions.jsonl"))

        self.write_report(options, name, config, results)
        self.write_table(options, name, ["metric", "value"], rows)
        self.echo(["metric", "value"], rows)

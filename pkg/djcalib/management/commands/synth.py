from djcalib import specs
from djcalib.loaders import write_predictions
from djcalib.synth import generate

from djcalib.management.commands._base import CalibrationCommand


class Command(CalibrationCommand):

    help = "Generate a synthetic prediction dump with known calibration properties."

    requires_seed = True

    arguments = {
        ("-G", "--generator"): {
            "type": str,
            "default": None,
            "help": (
                "Generator spec: calibrated:alpha:k:n, sharpened:alpha:k:n:inv_temp, "
                "twopoint:n, or constant:p:rate:n"
            ),
        },
        ("-f", "--format"): {
            "choices": ("jsonl", "csv"),
            "default": None,
            "help": "Format of the generated dump (default jsonl)",
        },
        ("-n", "--name"): {
            "type": str,
            "default": None,
            "help": "Stem of the output file names",
        },
    }

    def defaults(self):
        return {**super().defaults(), "format": "jsonl", "name": "synth"}

    def run(self, **options):
        self.require(options, "generator")
        spec = specs.parse_generator(options["generator"], seed=options["seed"])
        dataset = generate(spec)

        path = self.output(options, f"{options['name']}.{options['format']}")
        write_predictions(dataset, path, options["format"])

        config = {"generator": options["generator"], "seed": options["seed"]}
        results = {"n": dataset.n, "k": dataset.k, "logits": dataset.has_logits, "predictions": path.name}
        self.write_report(options, f"{options['name']}_manifest", config, results)

        if self.verbosity > 0:
            self.stdout.write(f"wrote {dataset.n} records with k={dataset.k} to {path}")

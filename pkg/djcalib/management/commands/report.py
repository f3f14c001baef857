from djcalib.loaders import load_document
from djcalib.reports import aggregate

from djcalib.management.commands._base import CalibrationCommand


class Command(CalibrationCommand):

    help = "Aggregate the numeric results of several report files into means and standard deviations."

    arguments = {
        "--inputs": {
            "nargs": "+",
            "default": None,
            "metavar": "PATH",
            "help": "JSON reports of repeated trials",
        },
        "--ddof": {
            "type": int,
            "default": None,
            "help": "Delta degrees of freedom of the standard deviation (default 0)",
        },
        ("-n", "--name"): {
            "type": str,
            "default": None,
            "help": "Stem of the output file names",
        },
    }

    def defaults(self):
        return {**super().defaults(), "ddof": 0, "name": "aggregate"}

    def run(self, **options):
        self.require(options, "inputs")
        documents = [load_document(path) for path in options["inputs"]]
        summary = aggregate(documents, ddof=options["ddof"])

        config = {"inputs": [str(path) for path in options["inputs"]], "ddof": options["ddof"]}
        header = ["metric", "mean", "std", "n"]
        rows = [[key, s["mean"], s["std"], s["n"]] for key, s in summary.items()]

        self.write_report(options, options["name"], config, summary)
        self.write_table(options, options["name"], header, rows)
        self.echo(header, rows)

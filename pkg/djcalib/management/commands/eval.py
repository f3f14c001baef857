from djcalib import specs
from djcalib.conf import settings
from djcalib.distances import TVD, InterInterval
from djcalib.estimator import classwise_ece, gece
from djcalib.lenses import ClassConditional
from djcalib.reports import reliability_rows
from djcalib.selectors import select

from djcalib.management.commands._base import (
    METRIC_ARGUMENTS,
    METRIC_DEFAULTS,
    CalibrationCommand,
)


class Command(CalibrationCommand):

    help = "Compute a GECE of a prediction dump; the default configuration is the traditional top-1 ECE."

    arguments = {
        **METRIC_ARGUMENTS,
        ("-b", "--binning"): {
            "type": str,
            "default": None,
            "help": "Binning spec: uniform:b[:lo:hi] or adaptive:gamma",
        },
        "--likert": {
            "type": str,
            "default": None,
            "help": "Likert categories name:l:h,... evaluated on the class 1 score",
        },
        "--classwise": {
            "action": "store_const",
            "const": True,
            "default": None,
            "help": "Also report the mean class-conditional ECE over all classes",
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
            "classwise": False,
        }

    def run(self, **options):
        self.require(options, "input")
        dataset = self.load(options["input"], options["format"])

        if options["likert"]:
            return self.likert(dataset, options)

        binning_spec = options["binning"] or f"uniform:{settings.DJCALIB_TRADITIONAL_BINS}"
        lens, selector, dist, binning = specs.parse_all(
            [
                ("lens", options["lens"]),
                ("selector", options["selector"]),
                ("distance", options["distance"]),
                ("binning", binning_spec),
            ]
        )

        result = gece(dataset, lens, selector, dist, binning, seed=options["seed"])
        results = {"gece": result}
        rows = [["gece", result.value, result.n_selected]]

        if options["classwise"]:
            results["classwise_ece"] = classwise_ece(dataset, dist, binning)
            rows.append(["classwise_ece", results["classwise_ece"], dataset.n])

        name = options["name"] or "eval"
        config = {"input": str(options["input"]), **result.config}
        self.write_report(options, name, config, results)
        self.write_table(options, f"{name}_bins", *reliability_rows(result))
        self.echo(["metric", "value", "n"], rows)

    def likert(self, dataset, options):
        """
        One evaluation per Likert category: the class 1 score restricted to the
        category, scored by its distance to the category interval and by TVD.
        """
        categories = specs.parse_likert(options["likert"])
        binning = specs.parse_binning(options["binning"] or "uniform:1")
        lens = ClassConditional(1)

        results, rows = {}, []
        for name, lo, hi in categories:
            selector = specs.likert_selector(lo, hi)
            count = select(selector, dataset).n
            entry = {"l": lo, "h": hi, "count": count, "interval": None, "tvd": None}

            if count > 0:
                entry["interval"] = gece(dataset, lens, selector, InterInterval(lo, hi), binning).value
                entry["tvd"] = gece(dataset, lens, selector, TVD(), binning).value

            results[name] = entry
            rows.append([name, lo, hi, count, entry["interval"], entry["tvd"]])

        stem = options["name"] or "likert"
        config = {
            "input": str(options["input"]),
            "likert": options["likert"],
            "lens": str(lens),
            "binning": str(binning),
            "seed": options["seed"],
        }

        header = ["category", "l", "h", "count", "interval_gece", "tvd_gece"]
        self.write_report(options, stem, config, {"categories": results})
        self.write_table(options, stem, header, rows)
        self.echo(header, rows)

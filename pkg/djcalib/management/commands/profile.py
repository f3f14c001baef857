from django.core.management.base import CommandError

from djcalib import specs
from djcalib.analysis import (
    confidence_profile,
    group_conditional_confidence,
    mean_entropy,
    topk_accuracy,
    variance_profile,
)
from djcalib.exceptions import USAGE_ERROR
from djcalib.lenses import Grouping

from djcalib.management.commands._base import (
    METRIC_ARGUMENTS,
    METRIC_DEFAULTS,
    CalibrationCommand,
)


KINDS = ("variance", "confidence", "entropy", "topk-accuracy", "group-confidence")


class Command(CalibrationCommand):

    help = "Profile the outputs of a prediction dump or the variance of its adaptive GECE."

    arguments = {
        **METRIC_ARGUMENTS,
        ("-k", "--kind"): {
            "choices": KINDS,
            "default": None,
            "help": "The profile to compute (default variance)",
        },
        "--ks": {
            "type": str,
            "default": None,
            "help": "Ranks for the confidence and top-k accuracy profiles, e.g. 1-5 or 1,3,5",
        },
        ("-g", "--gamma"): {
            "type": float,
            "default": None,
            "help": "Adaptive binning fraction of the variance profile",
        },
        "--fractions": {
            "type": str,
            "default": None,
            "help": "Comma separated sample fractions of the variance profile",
        },
        ("-r", "--resamples"): {
            "type": int,
            "default": None,
            "help": "Bootstrap resamples per fraction; defaults to DJCALIB_RESAMPLES",
        },
        "--group": {
            "type": int,
            "default": None,
            "help": "Group index of the group-confidence profile; --lens must be a grouping",
        },
        ("-n", "--name"): {
            "type": str,
            "default": None,
            "help": "Stem of the output file names",
        },
    }

    def defaults(self):
        return {**super().defaults(), **METRIC_DEFAULTS, "kind": "variance"}

    def run(self, **options):
        self.require(options, "input")
        kind = options["kind"]
        if kind == "variance":
            self.require(options, "seed")
        if kind == "group-confidence":
            self.require(options, "group")

        dataset = self.load(options["input"], options["format"])
        ks = specs.parse_ints(options["ks"], "--ks") if options["ks"] else tuple(range(1, min(5, dataset.k) + 1))
        config = {"input": str(options["input"]), "kind": kind, "seed": options["seed"]}

        if kind == "variance":
            lens, selector, dist = specs.parse_all(
                [
                    ("lens", options["lens"]),
                    ("selector", options["selector"]),
                    ("distance", options["distance"]),
                ]
            )
            fractions = specs.parse_floats(options["fractions"], "--fractions") if options["fractions"] else None
            result = variance_profile(
                dataset,
                lens,
                selector,
                dist,
                gamma=options["gamma"],
                fractions=fractions,
                n_resamples=options["resamples"],
                seed=options["seed"],
            )
            config.update(result.config)
            results = result
            header, rows = result.to_rows()

        elif kind == "confidence":
            values = confidence_profile(dataset, ks)
            results = {"ks": list(ks), "mean_confidence": values}
            header, rows = ["k", "mean_confidence"], [list(r) for r in zip(ks, values)]

        elif kind == "topk-accuracy":
            values = topk_accuracy(dataset, ks)
            results = {"ks": list(ks), "accuracy": values}
            header, rows = ["k", "accuracy"], [list(r) for r in zip(ks, values)]

        elif kind == "entropy":
            value = mean_entropy(dataset)
            results = {"mean_entropy": value, "n": dataset.n}
            header, rows = ["metric", "value", "n"], [["mean_entropy", value, dataset.n]]

        else:
            grouping = specs.parse_lens(options["lens"])
            if not isinstance(grouping, Grouping):
                raise CommandError("group-confidence needs a group:... lens", returncode=USAGE_ERROR)
            values = group_conditional_confidence(dataset, grouping, options["group"])
            config.update({"lens": str(grouping), "group": options["group"]})
            results = {"group": options["group"], "mean_grouped_output": values}
            header = ["group", "mean_output"]
            rows = [[g, v] for g, v in enumerate(values)]

        name = options["name"] or f"profile_{kind.replace('-', '_')}"
        self.write_report(options, name, config, results)
        self.write_table(options, name, header, rows)
        self.echo(header, rows)

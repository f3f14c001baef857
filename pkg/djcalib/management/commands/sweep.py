from djcalib import specs
from djcalib.analysis import gamma_sweep

from djcalib.management.commands._base import (
    METRIC_ARGUMENTS,
    METRIC_DEFAULTS,
    CalibrationCommand,
)


class Command(CalibrationCommand):

    help = (
        "Bootstrap the adaptive GECE over a coarse to fine grid of binning "
        "fractions and recommend the first stable one."
    )

    requires_seed = True

    arguments = {
        **METRIC_ARGUMENTS,
        ("-g", "--gammas"): {
            "type": str,
            "default": None,
            "help": "Comma separated gamma grid, coarse to fine; defaults to DJCALIB_GAMMA_GRID",
        },
        ("-r", "--resamples"): {
            "type": int,
            "default": None,
            "help": "Bootstrap resamples per gamma; defaults to DJCALIB_RESAMPLES",
        },
        ("-e", "--epsilon"): {
            "type": float,
            "default": None,
            "help": "Plateau threshold on the mean ECE; defaults to DJCALIB_PLATEAU_EPSILON",
        },
        ("-n", "--name"): {
            "type": str,
            "default": None,
            "help": "Stem of the output file names",
        },
    }

    def defaults(self):
        return {**super().defaults(), **METRIC_DEFAULTS}

    def run(self, **options):
        self.require(options, "input")
        dataset = self.load(options["input"], options["format"])

        lens, selector, dist = specs.parse_all(
            [
                ("lens", options["lens"]),
                ("selector", options["selector"]),
                ("distance", options["distance"]),
            ]
        )

        grid = specs.parse_floats(options["gammas"], "--gammas") if options["gammas"] else None
        result = gamma_sweep(
            dataset,
            lens,
            selector,
            dist,
            gamma_grid=grid,
            n_resamples=options["resamples"],
            seed=options["seed"],
            stability_epsilon=options["epsilon"],
        )

        name = options["name"] or "sweep"
        config = {"input": str(options["input"]), **result.config, "n_resamples": result.n_resamples}
        self.write_report(options, name, config, result)
        header, rows = result.to_rows()
        self.write_table(options, name, header, rows)
        self.echo(header, rows)

        if self.verbosity > 0:
            state = "stable" if result.plateau_found else "fallback"
            self.stdout.write(f"recommended gamma: {result.recommended_gamma:.4f} ({state})")

import json
import logging

from pathlib import Path
from typing import Any, Dict

from django.core.management.base import BaseCommand, CommandError

from djcalib import reports
from djcalib.exceptions import DATA_ERROR, USAGE_ERROR, CalibrationError
from djcalib.loaders import load_predictions


logger = logging.getLogger("djcalib.commands")

VERBOSITY_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO, 3: logging.DEBUG}


class CalibrationCommand(BaseCommand):
    """
    Base class of the djcalib commands. Options are resolved from the command line
    first, then from the --config JSON file, then from the command's defaults.
    Library errors are reported as CommandErrors whose return code is the exit
    status of the error.
    """

    # Option specs in the add_arguments dict form; every option must default to None.
    arguments: Dict[Any, Dict[str, Any]] = {}

    # Stochastic commands refuse to run without a seed.
    requires_seed = False

    def add_arguments(self, parser):
        args = {
            ("-c", "--config"): {
                "type": str,
                "default": None,
                "metavar": "PATH",
                "help": "JSON file of option values; flags override its values",
            },
            ("-o", "--output-dir"): {
                "type": str,
                "default": None,
                "metavar": "DIR",
                "help": "Directory the JSON and CSV outputs are written to",
            },
            ("-s", "--seed"): {
                "type": int,
                "default": None,
                "help": "Seed of the random number streams",
            },
        }
        args.update(self.arguments)

        for pargs, kwargs in args.items():
            if isinstance(pargs, str):
                pargs = (pargs,)
            parser.add_argument(*pargs, **kwargs)

    def defaults(self) -> Dict[str, Any]:
        """
        Fallback values of options given neither as flags nor in the config file.
        """
        return {"output_dir": "."}

    def handle(self, *args, **options):
        level = VERBOSITY_LEVELS.get(options.get("verbosity", 1), logging.DEBUG)
        logging.getLogger("djcalib").setLevel(level)

        config = self.load_config(options.pop("config", None))
        options = self.resolve(options, config)

        if self.requires_seed and options.get("seed") is None:
            raise CommandError(
                f"--seed is required by the {self.name} command", returncode=USAGE_ERROR
            )

        try:
            return self.run(**options)
        except CalibrationError as e:
            raise CommandError(str(e), returncode=e.status)
        except OSError as e:
            logger.exception("could not read or write %s", getattr(e, "filename", "a file"))
            raise CommandError(f"{e.strerror or e}: {e.filename}", returncode=DATA_ERROR)

    @property
    def name(self) -> str:
        return self.__class__.__module__.rsplit(".", 1)[-1]

    def load_config(self, path) -> Dict[str, Any]:
        if not path:
            return {}

        try:
            with open(path, "r", encoding="utf-8") as f:
                config = json.load(f)
        except OSError as e:
            raise CommandError(f"cannot read config {path}: {e.strerror}", returncode=USAGE_ERROR)
        except json.JSONDecodeError as e:
            raise CommandError(f"config {path} is not valid json: {e.msg}", returncode=USAGE_ERROR)

        if not isinstance(config, dict):
            raise CommandError(f"config {path} must be a json object", returncode=USAGE_ERROR)
        return {key.replace("-", "_"): value for key, value in config.items()}

    def resolve(self, options: Dict[str, Any], config: Dict[str, Any]) -> Dict[str, Any]:
        unknown = sorted(set(config) - set(options))
        if unknown:
            raise CommandError(f"unknown config options: {', '.join(unknown)}", returncode=USAGE_ERROR)

        defaults = self.defaults()
        resolved = {}
        for key, value in options.items():
            if value is None:
                value = config.get(key, defaults.get(key))
            resolved[key] = value
        return resolved

    def run(self, **options):
        raise NotImplementedError("djcalib commands must implement run()")

    def require(self, options: Dict[str, Any], *keys: str):
        for key in keys:
            if options.get(key) is None:
                flag = "--" + key.replace("_", "-")
                raise CommandError(f"{flag} is required", returncode=USAGE_ERROR)

    def load(self, path, format=None):
        return load_predictions(path, format=format)

    def output(self, options: Dict[str, Any], name: str) -> Path:
        return Path(options["output_dir"]) / name

    def write_report(self, options, name: str, config: Dict[str, Any], results: Dict[str, Any]) -> Path:
        report = reports.Report(command=self.name, config=config, results=results)
        path = reports.write_json(report, self.output(options, f"{name}.json"))
        logger.info("wrote %s", path)
        return path

    def write_table(self, options, name: str, header, rows) -> Path:
        path = reports.write_csv(header, rows, self.output(options, f"{name}.csv"))
        logger.info("wrote %s", path)
        return path

    def echo(self, header, rows):
        if self.verbosity > 0:
            self.stdout.write(reports.table(header, rows), ending="")

    def execute(self, *args, **options):
        self.verbosity = options.get("verbosity", 1)
        return super().execute(*args, **options)


# Arguments shared by the commands that evaluate a GECE.
METRIC_ARGUMENTS = {
    ("-i", "--input"): {
        "type": str,
        "default": None,
        "metavar": "PATH",
        "help": "Prediction dump (jsonl or csv) to evaluate",
    },
    ("-f", "--format"): {
        "choices": ("jsonl", "csv"),
        "default": None,
        "help": "Format of the prediction dump, inferred from its suffix by default",
    },
    ("-l", "--lens"): {
        "type": str,
        "default": None,
        "help": "Lens spec: full, topk:m, class:c, or group:<map>",
    },
    ("-S", "--selector"): {
        "type": str,
        "default": None,
        "help": "Selector spec, e.g. all, label=3, maxprob>=0.66",
    },
    ("-d", "--distance"): {
        "type": str,
        "default": None,
        "help": "Distance spec: tvd, l2, interval:l:h, or weighted:<matrix>",
    },
}

# Fallbacks of the shared arguments.
METRIC_DEFAULTS = {"lens": "topk:1", "selector": "all", "distance": "tvd"}

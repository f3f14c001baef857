"""
The djcalib console script. Outside of a Django project it configures a minimal
settings module with only the djcalib app installed and dispatches to the djcalib
management commands, e.g.

    djcalib eval --input preds.jsonl --lens topk:1 --binning uniform:15

Exit statuses: 0 on success, 1 for usage errors, 2 for data errors.
"""

import os
import sys
import django

from typing import Sequence

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError

from djcalib.exceptions import USAGE_ERROR


COMMANDS = ("eval", "sweep", "profile", "calibrate", "apply", "synth", "report")

USAGE = (
    "usage: djcalib <command> [options]\n\n"
    "commands:\n"
    "  eval       compute a GECE, the traditional ECE, or Likert category metrics\n"
    "  sweep      bootstrap sweep over adaptive binning fractions\n"
    "  profile    variance, confidence, entropy, and accuracy profiles\n"
    "  calibrate  fit a calibrator on a validation split\n"
    "  apply      apply a fitted calibrator to predictions\n"
    "  synth      generate synthetic predictions\n"
    "  report     aggregate reports across trials\n\n"
    "run 'djcalib <command> --help' for the options of a command\n"
)


def setup():
    """
    Configure Django with the djcalib app unless a settings module is already in use.
    """
    if not settings.configured:
        if not os.environ.get("DJANGO_SETTINGS_MODULE"):
            settings.configure(INSTALLED_APPS=["djcalib"], USE_TZ=True)
    django.setup()


def run_command(argv: Sequence[str], stdout=None, stderr=None) -> int:
    """
    Run one djcalib command and return its exit status instead of exiting.
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(argv)

    if not argv or argv[0] in ("-h", "--help", "help"):
        stderr.write(USAGE)
        return USAGE_ERROR if not argv else 0

    name, args = argv[0], argv[1:]
    if name not in COMMANDS:
        stderr.write(f"unknown command '{name}'\n\n{USAGE}")
        return USAGE_ERROR

    setup()
    try:
        call_command(name, *args, stdout=stdout, stderr=stderr)
    except CommandError as e:
        stderr.write(f"djcalib {name}: {e}\n")
        return e.returncode
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else USAGE_ERROR
    return 0


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()

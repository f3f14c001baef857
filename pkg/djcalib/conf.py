from typing import Any, Mapping, Sequence
from dataclasses import dataclass, field
from django.conf import settings as django_settings
from django.utils.module_loading import import_string


# All settings prefixed with DJCALIB_ are considered part of the djcalib app.
PREFIX = "DJCALIB_"

# All settings that are import strings should be imported when accessed.
IMPORT_STRINGS = ("DJCALIB_CALIBRATORS",)


@dataclass(frozen=True)
class AppSettings(object):
    """
    This class defines the default settings for the djcalib app. These settings can
    be overridden using similar names in the Django settings module.
    """

    DJCALIB_INGEST_TOLERANCE: float = 1e-6
    """Simplex tolerance when reading prediction dumps; rows within it are renormalized."""

    DJCALIB_SIMPLEX_TOLERANCE: float = 1e-9
    """Simplex tolerance used internally once a dataset has been ingested."""

    DJCALIB_TRADITIONAL_BINS: int = 15
    """Number of uniform bins over [0,1] used by the traditional (top-1) ECE preset."""

    DJCALIB_DEFAULT_GAMMA: float = 0.1
    """Baseline adaptive binning fraction when no gamma is given or no plateau is found."""

    DJCALIB_GAMMA_GRID: Sequence[float] = tuple(2.0**-i for i in range(9))
    """Coarse to fine grid of adaptive binning fractions swept by the sweep command."""

    DJCALIB_RESAMPLES: int = 1000
    """Number of bootstrap resamples drawn at each grid point."""

    DJCALIB_PLATEAU_EPSILON: float = 0.005
    """Mean ECE change between neighboring gammas under which the sweep is considered stable."""

    DJCALIB_FRACTIONS: Sequence[float] = tuple(i / 10 for i in range(1, 11))
    """Sample fractions n/N used by the variance profile."""

    DJCALIB_HB_BIN_CHOICES: Sequence[int] = (10, 15, 25, 50)
    """Candidate bin counts for histogram binning, selected by validation NLL."""

    DJCALIB_NLL_CLAMP: float = 1e-12
    """Probabilities are clamped to at least this value before taking the log."""

    DJCALIB_HB_NLL_CLAMP: float = 1e-6
    """Clamp used when reporting the NLL of histogram binning calibrators."""

    DJCALIB_CALIBRATORS: Mapping[str, str] = field(
        default_factory=lambda: {
            "ts": "djcalib.calibrators.TemperatureScaling",
            "bcts": "djcalib.calibrators.BiasCorrectedTemperatureScaling",
            "hb": "djcalib.calibrators.HistogramBinning",
        }
    )
    """Calibrator classes by variant name, used to decode serialized calibrators."""

    def __getattribute__(self, name: str) -> Any:
        """
        Check if a Django project setting should override the app default.
        """
        if name.startswith(PREFIX) and hasattr(django_settings, name):
            val = getattr(django_settings, name)
        else:
            val = super().__getattribute__(name)

        if name in IMPORT_STRINGS:
            return perform_import(val, name)
        return val


def perform_import(val: Any, name: str) -> Any:
    """
    If the given setting is a string import notation, then perform the import or
    imports; mappings are imported value by value.
    """
    if val is None:
        return None
    if isinstance(val, str):
        return import_from_string(val, name)
    if isinstance(val, Mapping):
        return {key: perform_import(v, name) for key, v in val.items()}
    if isinstance(val, (list, tuple)):
        return [import_from_string(v, name) for v in val]
    return val


def import_from_string(val: str, name: str) -> Any:
    try:
        return import_string(val)
    except ImportError as e:
        msg = f"Could not import '{val}' for Django Calibration setting '{name}'. {e.__class__.__name__}: {e}"
        raise ImportError(msg)


settings = AppSettings()

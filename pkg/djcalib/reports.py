"""
Machine readable reports (JSON and CSV) and human readable tables for the results of
the djcalib commands, and aggregation of reports across trials.

JSON reports are written with sorted keys and floats in their shortest round-trip
representation, so identical results always produce byte identical files. CSV
tables use 17 significant digits.
"""

import csv
import json
import math
import numpy as np

from pathlib import Path
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence, Tuple

from djcalib.estimator import MetricResult
from djcalib.exceptions import InvalidSpec


def tool_version() -> str:
    try:
        from djcalib.version import __version__
    except ImportError:
        return "unknown"
    return __version__


@dataclass
class Report(object):
    """
    The document a command writes: its name, the configuration it ran with, its
    results, and the version of the tool that produced it.
    """

    command: str
    config: Dict[str, Any] = field(default_factory=dict)
    results: Dict[str, Any] = field(default_factory=dict)
    version: str = field(default_factory=tool_version)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "version": self.version,
        }


def plain(obj: Any) -> Any:
    """
    Convert numpy scalars, arrays, and tuples into JSON serializable values.
    """
    if isinstance(obj, Mapping):
        return {str(key): plain(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return [plain(value) for value in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            return None
        return value
    if hasattr(obj, "to_dict"):
        return plain(obj.to_dict())
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(obj: Any, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def write_csv(header: Sequence[str], rows: Sequence[Sequence[Any]], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    return path


def reliability_rows(result: MetricResult) -> Tuple[List[str], List[list]]:
    """
    One row per bin of a GECE: its count, its mean output and mean target per lensed
    coordinate, and its distance.
    """
    dim = len(result.per_bin[0].mean_output) if result.per_bin else 0
    header = ["bin", "count"]
    header += [f"mean_output_{i}" for i in range(dim)]
    header += [f"mean_target_{i}" for i in range(dim)]
    header += ["distance"]

    rows = []
    for idx, b in enumerate(result.per_bin):
        rows.append([idx, b.count, *b.mean_output, *b.mean_target, b.distance])
    return header, rows


def flatten(document: Any, prefix: str = "") -> Dict[str, float]:
    """
    The numeric leaves of a report keyed by their dotted path. Lists, configuration
    echoes, and booleans are skipped.
    """
    leaves = {}
    if isinstance(document, Mapping):
        for key, value in document.items():
            if key in ("config", "version", "seed"):
                continue
            leaves.update(flatten(value, f"{prefix}{key}."))
    elif isinstance(document, (int, float)) and not isinstance(document, bool):
        leaves[prefix.rstrip(".")] = float(document)
    return leaves


def mean_std(values: Sequence[float], ddof: int = 0) -> Tuple[float, float]:
    """
    Mean and standard deviation by a shifted two pass computation; identical values
    give a standard deviation of exactly zero.
    """
    n = len(values)
    if n == 0:
        raise InvalidSpec("cannot aggregate zero values")
    if n - ddof <= 0:
        raise InvalidSpec(f"need more than {ddof} values for ddof={ddof}")

    shift = values[0]
    mean = shift + math.fsum(v - shift for v in values) / n
    variance = math.fsum((v - mean) ** 2 for v in values) / (n - ddof)
    return mean, math.sqrt(variance)


def aggregate(documents: Sequence[Mapping[str, Any]], ddof: int = 0) -> Dict[str, Dict[str, float]]:
    """
    Mean and standard deviation of every numeric metric shared by all documents.

    :raises InvalidSpec: If there are no documents or they share no metric.
    """
    if not documents:
        raise InvalidSpec("no reports to aggregate")

    flat = [flatten(document.get("results", document)) for document in documents]
    keys = set(flat[0])
    for leaves in flat[1:]:
        keys &= set(leaves)

    if not keys:
        raise InvalidSpec("the reports share no numeric metric")

    summary = {}
    for key in sorted(keys):
        mean, std = mean_std([leaves[key] for leaves in flat], ddof=ddof)
        summary[key] = {"mean": mean, "std": std, "n": len(flat)}
    return summary


def _human(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.4f}"
    return str(value)


def table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """
    Render rows as an aligned plain text table with floats to four decimals.
    """
    cells = [[str(h) for h in header]] + [[_human(v) for v in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"

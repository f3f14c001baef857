"""
Reading and writing prediction dumps, group maps, weight matrices, and serialized
calibrators.

Prediction dumps come in two formats:

- jsonl: one object per line, {"label": 3, "probs": [...]} and/or {"logits": [...]}
- csv: a header row naming p0..p{k-1} and/or z0..z{k-1} columns and a label column

Binary dumps may give the class 1 probability alone, as a scalar "probs" or "score"
in jsonl or a single "p" column in csv; it is read as [1 - p, p].
"""

import csv
import json
import logging

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from djcalib.conf import settings
from djcalib.core import Dataset, PredictionRecord, scalar_to_binary, validate_simplex
from djcalib.exceptions import (
    CalibrationError,
    InconsistentWidth,
    InvalidSpec,
    ParseError,
)


logger = logging.getLogger("djcalib.loaders")

FORMATS = ("jsonl", "csv")


def infer_format(path, format: str = None) -> str:
    """
    The explicit format if given, otherwise the format named by the file suffix.
    """
    if format:
        if format not in FORMATS:
            raise InvalidSpec(f"unknown prediction format '{format}', choose one of {FORMATS}")
        return format

    suffix = Path(path).suffix.lower().lstrip(".")
    if suffix in ("jsonl", "ndjson", "json"):
        return "jsonl"
    if suffix == "csv":
        return "csv"
    raise InvalidSpec(f"cannot infer the format of '{path}', pass --format")


def _record(line: int, label, probs, logits, tolerance: float) -> PredictionRecord:
    try:
        if isinstance(label, bool) or int(label) != float(label):
            raise ParseError(f"label {label!r} is not an integer", line=line)
        label = int(label)
    except (TypeError, ValueError):
        raise ParseError(f"label {label!r} is not an integer", line=line)

    try:
        if isinstance(probs, bool):
            raise ParseError("outputs must be numbers", line=line)
        if probs is not None and not isinstance(probs, (list, tuple)):
            probs = scalar_to_binary(float(probs))
        elif probs is not None:
            probs = validate_simplex([float(p) for p in probs], tolerance)
        if logits is not None:
            logits = tuple(float(z) for z in logits)
        return PredictionRecord(label=label, probs=probs, logits=logits)
    except ParseError:
        raise
    except (TypeError, ValueError):
        raise ParseError("outputs must be numbers", line=line)
    except CalibrationError as e:
        raise e.__class__(f"line {line}: {e.message}")


def _check_width(line: int, record: PredictionRecord, width: Optional[int]) -> int:
    if width is not None and record.k != width:
        raise InconsistentWidth(f"expected {width} classes, found {record.k}", line=line)
    return record.k


def _read_jsonl(path: Path, tolerance: float) -> Tuple[List[PredictionRecord], Optional[list]]:
    records, width, class_names = [], None, None
    with path.open("r", encoding="utf-8") as f:
        for line, text in enumerate(f, start=1):
            if not text.strip():
                continue

            try:
                obj = json.loads(text)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid json: {e.msg}", line=line)

            if not isinstance(obj, dict) or "label" not in obj:
                raise ParseError("expected an object with a label", line=line)
            if "probs" not in obj and "score" not in obj and "logits" not in obj:
                raise ParseError("expected probs, score or logits", line=line)

            if obj.get("class_names") is not None and class_names is None:
                class_names = list(obj["class_names"])

            probs = obj["probs"] if "probs" in obj else obj.get("score")
            record = _record(line, obj["label"], probs, obj.get("logits"), tolerance)
            width = _check_width(line, record, width)
            records.append(record)

    return records, class_names


def _columns(header: List[str], prefix: str) -> List[int]:
    found = {}
    for idx, name in enumerate(header):
        name = name.strip()
        if len(name) > 1 and name[0] == prefix and name[1:].isdigit():
            found[int(name[1:])] = idx

    if found and sorted(found) != list(range(len(found))):
        raise ParseError(f"{prefix} columns must be numbered from {prefix}0 without gaps", line=1)
    return [found[i] for i in range(len(found))]


def _read_csv(path: Path, tolerance: float) -> Tuple[List[PredictionRecord], None]:
    records = []
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            return records, None

        if "label" not in (name.strip() for name in header):
            raise ParseError("the header needs a label column", line=1)

        names = [name.strip() for name in header]
        label_col = names.index("label")
        prob_cols, logit_cols = _columns(header, "p"), _columns(header, "z")
        score_col = names.index("p") if "p" in names else None
        if score_col is not None and prob_cols:
            raise ParseError("the header mixes a p column with p0.. columns", line=1)
        if not prob_cols and not logit_cols and score_col is None:
            raise ParseError("the header needs p, p0.. or z0.. columns", line=1)

        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise InconsistentWidth(f"expected {len(header)} fields, found {len(row)}", line=line)

            probs = [row[i] for i in prob_cols] if prob_cols else None
            if score_col is not None:
                probs = row[score_col]
            logits = [row[i] for i in logit_cols] if logit_cols else None
            records.append(_record(line, row[label_col], probs, logits, tolerance))

    return records, None


def load_predictions(path, format: str = None, tolerance: float = None) -> Dataset:
    """
    Load a prediction dump into a dataset. Probability rows within the ingest
    tolerance of the simplex are renormalized; others are rejected.

    :param path: The path of the prediction dump.
    :param format: jsonl or csv; inferred from the suffix when omitted.
    :param tolerance: Defaults to the DJCALIB_INGEST_TOLERANCE setting.
    :raises ParseError: If a line cannot be parsed, with its line number.
    :raises InconsistentWidth: If rows disagree on the number of classes.
    :raises SimplexViolation: If a probability row is not on the simplex.
    """
    path = Path(path)
    format = infer_format(path, format)
    tolerance = settings.DJCALIB_INGEST_TOLERANCE if tolerance is None else tolerance

    reader = _read_jsonl if format == "jsonl" else _read_csv
    records, class_names = reader(path, tolerance)
    if not records:
        raise ParseError(f"no prediction records found in {path}")

    dataset = Dataset.from_records(records, class_names=class_names)
    logger.info("loaded %d records with k=%d from %s", dataset.n, dataset.k, path)
    return dataset


def _number(value: float) -> str:
    return format(float(value), ".17g")


def write_predictions(dataset: Dataset, path, format: str = None):
    """
    Write a dataset as a prediction dump with 17 significant digits per number so
    that loading it back reproduces the dataset exactly.
    """
    path = Path(path)
    format = infer_format(path, format)
    path.parent.mkdir(parents=True, exist_ok=True)

    if format == "jsonl":
        with path.open("w", encoding="utf-8") as f:
            for i in range(dataset.n):
                fields = [f'"label": {int(dataset.labels[i])}']
                fields.append('"probs": [' + ", ".join(_number(p) for p in dataset.probs[i]) + "]")
                if dataset.has_logits:
                    fields.append('"logits": [' + ", ".join(_number(z) for z in dataset.logits[i]) + "]")
                if i == 0 and dataset.class_names:
                    fields.append('"class_names": ' + json.dumps(list(dataset.class_names)))
                f.write("{" + ", ".join(fields) + "}\n")
        return

    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        header = [f"p{i}" for i in range(dataset.k)]
        if dataset.has_logits:
            header += [f"z{i}" for i in range(dataset.k)]
        writer.writerow(header + ["label"])

        for i in range(dataset.n):
            row = [_number(p) for p in dataset.probs[i]]
            if dataset.has_logits:
                row += [_number(z) for z in dataset.logits[i]]
            writer.writerow(row + [int(dataset.labels[i])])


def _csv_rows(path: Path) -> Iterable[Tuple[int, List[str]]]:
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        for row in reader:
            if row and any(cell.strip() for cell in row):
                yield reader.line_num, [cell.strip() for cell in row]


def load_group_map(path) -> Dict[int, int]:
    """
    Read a class_index,group_index CSV file; a non-numeric first row is a header.
    """
    group_map = {}
    for line, row in _csv_rows(path):
        if len(row) != 2:
            raise ParseError("expected class_index,group_index", line=line)
        try:
            cls, group = int(row[0]), int(row[1])
        except ValueError:
            if line == 1:
                continue
            raise ParseError("class and group indices must be integers", line=line)
        if cls in group_map:
            raise ParseError(f"class {cls} is mapped twice", line=line)
        group_map[cls] = group
    return group_map


def load_matrix(path) -> List[List[float]]:
    """
    Read a square matrix from a headerless CSV file, one row per line.
    """
    rows = []
    for line, row in _csv_rows(path):
        try:
            rows.append([float(v) for v in row])
        except ValueError:
            raise ParseError("matrix entries must be numbers", line=line)

    if not rows or any(len(row) != len(rows) for row in rows):
        raise InvalidSpec(f"the weight matrix in {path} is not square")
    return rows


def load_calibrator(path):
    """
    Read a calibrator written by save_calibrator.
    """
    from djcalib.calibrators import Calibrator

    try:
        with Path(path).open("r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid calibrator json: {e.msg}", line=e.lineno)
    return Calibrator.from_document(document)


def save_calibrator(calibrator, path):
    from djcalib.reports import write_json

    write_json(calibrator.to_document(), path)


def load_document(path) -> dict:
    """
    Read a JSON report written by one of the commands.
    """
    try:
        with Path(path).open("r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid json: {e.msg}", line=e.lineno)

"""
Textual forms of the lens, selector, distance, binning, and generator specs used by
configuration files and the command line:

    lens       full | topk:5 | class:12 | group:<path-to-group-map> | group:0,1;2
    selector   all | label=3 | label-in=1,4,5 | maxprob>=0.66 | p2<0.5 | score<0.33
               and comma joined conjunctions of these
    distance   tvd | l2 | interval:0.0:0.33 | weighted:<path-to-matrix-csv> | weighted:1,0;0,2
    binning    uniform:15 | uniform:2:0.5:1.0 | adaptive:0.1
    generator  calibrated:alpha:k:n | sharpened:alpha:k:n:inv_temp | twopoint:n
               | constant:p:rate:n
"""

import re
import os

from typing import List, Sequence, Tuple

from djcalib import distances, estimator, lenses, selectors, synth
from djcalib.exceptions import CalibrationError, InvalidSelector, InvalidSpec


SELECTOR_PATTERN = re.compile(r"^(maxprob|score|p(\d+))(<=|>=|<|>|=)(.+)$")


def _number(text: str, kind, spec: str):
    try:
        return kind(text)
    except ValueError:
        raise InvalidSpec(f"'{text}' is not a valid number in spec '{spec}'")


def _inline_rows(text: str, kind, spec: str) -> List[List]:
    return [
        [_number(v.strip(), kind, spec) for v in row.split(",") if v.strip()]
        for row in text.split(";")
    ]


def parse_lens(text: str) -> lenses.LensSpec:
    """
    Parse a lens spec. Group maps are read from a two column class_index,group_index
    CSV file, or given inline as semicolon separated groups of class indices.
    """
    from djcalib.loaders import load_group_map

    text = text.strip()
    name, _, arg = text.partition(":")
    name = name.lower()

    if name == "full" and not arg:
        return lenses.Full()
    if name == "topk" and arg:
        return lenses.TopK(_number(arg, int, text))
    if name == "class" and arg:
        return lenses.ClassConditional(_number(arg, int, text))
    if name == "group" and arg:
        if os.path.exists(arg):
            group_map = load_group_map(arg)
            return lenses.make_grouping(group_map, len(group_map))
        return lenses.Grouping(tuple(tuple(row) for row in _inline_rows(arg, int, text)))

    raise InvalidSpec(f"unknown lens spec '{text}'")


def parse_selector(text: str) -> selectors.SelectorSpec:
    """
    Parse a selector spec; several comma joined selectors form a conjunction. Bare
    integers continue the class list of a preceding label-in.
    """
    tokens = []
    for token in (t.strip() for t in text.strip().split(",")):
        if not token:
            raise InvalidSelector(f"empty selector in spec '{text}'")
        if token.isdigit() and tokens and tokens[-1].startswith("label-in="):
            tokens[-1] += "," + token
        else:
            tokens.append(token)

    parsed = [_parse_simple_selector(token, text) for token in tokens]
    if len(parsed) == 1:
        return parsed[0]
    return selectors.Conjunction(tuple(parsed))


def _parse_simple_selector(token: str, text: str) -> selectors.SelectorSpec:
    if token == "all":
        return selectors.All()

    if token.startswith("label-in="):
        classes = [_number(c, int, text) for c in token[len("label-in="):].split(",")]
        return selectors.LabelInGroup(frozenset(classes))

    if token.startswith("label="):
        return selectors.LabelEquals(_number(token[len("label="):], int, text))

    match = SELECTOR_PATTERN.match(token)
    if match:
        name, cls, comparator, threshold = match.groups()
        if name == "maxprob":
            projection = selectors.MaxProb()
        elif name == "score":
            projection = selectors.ScalarBinary()
        else:
            projection = selectors.ClassProb(int(cls))
        return selectors.OutputCompare(projection, comparator, _number(threshold, float, text))

    raise InvalidSelector(f"unknown selector '{token}' in spec '{text}'")


def parse_distance(text: str) -> distances.DistanceSpec:
    """
    Parse a distance spec. Weight matrices are read from a headerless CSV file or
    given inline as semicolon separated rows.
    """
    from djcalib.loaders import load_matrix

    text = text.strip()
    name, _, arg = text.partition(":")
    name = name.lower()

    if name == "tvd" and not arg:
        return distances.TVD()
    if name == "l2" and not arg:
        return distances.L2()
    if name == "interval" and arg:
        bounds = arg.split(":")
        if len(bounds) != 2:
            raise InvalidSpec(f"interval distance needs l:h, got '{text}'")
        return distances.InterInterval(*(_number(b, float, text) for b in bounds))
    if name == "weighted" and arg:
        if os.path.exists(arg):
            return distances.validate_weight_matrix(load_matrix(arg), source=arg)
        rows = _inline_rows(arg, float, text)
        if any(len(row) != len(rows) for row in rows):
            raise InvalidSpec(f"inline weight matrix in '{text}' is not square")
        return distances.validate_weight_matrix(rows)

    raise InvalidSpec(f"unknown distance spec '{text}'")


def parse_binning(text: str) -> estimator.BinningSpec:
    text = text.strip()
    name, _, arg = text.partition(":")
    args = arg.split(":") if arg else []
    name = name.lower()

    if name == "uniform" and len(args) == 1:
        return estimator.Uniform(_number(args[0], int, text))
    if name == "uniform" and len(args) == 3:
        return estimator.Uniform(
            _number(args[0], int, text), _number(args[1], float, text), _number(args[2], float, text)
        )
    if name == "adaptive" and len(args) == 1:
        return estimator.Adaptive(_number(args[0], float, text))

    raise InvalidSpec(f"unknown binning spec '{text}'")


def parse_generator(text: str, seed: int) -> synth.GeneratorSpec:
    text = text.strip()
    name, _, arg = text.partition(":")
    args = arg.split(":") if arg else []
    name = name.lower()

    try:
        if name == "calibrated" and len(args) == 3:
            return synth.Calibrated(float(args[0]), int(args[1]), int(args[2]), seed=seed)
        if name == "sharpened" and len(args) == 4:
            base = synth.Calibrated(float(args[0]), int(args[1]), int(args[2]), seed=seed)
            return synth.Sharpened(base, float(args[3]))
        if name == "twopoint" and len(args) == 1:
            return synth.TwoPointBinary(int(args[0]), seed=seed)
        if name == "constant" and len(args) == 3:
            return synth.ConstantBinary(float(args[0]), float(args[1]), int(args[2]), seed=seed)
    except ValueError:
        raise InvalidSpec(f"invalid number in generator spec '{text}'")

    raise InvalidSpec(f"unknown generator spec '{text}'")


def parse_floats(text, spec: str = "list") -> Tuple[float, ...]:
    """
    Parse a comma separated list of numbers; sequences are passed through.
    """
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(_number(v.strip(), float, spec) for v in str(text).split(",") if v.strip())


def parse_ints(text, spec: str = "list") -> Tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    values = []
    for part in (p.strip() for p in str(text).split(",") if p.strip()):
        if "-" in part:
            lo, hi = part.split("-", 1)
            values.extend(range(_number(lo, int, spec), _number(hi, int, spec) + 1))
        else:
            values.append(_number(part, int, spec))
    return tuple(values)


def parse_likert(text: str) -> List[Tuple[str, float, float]]:
    """
    Parse Likert categories name:l:h, comma separated, e.g.
    low:0:0.33,med:0.33:0.66,high:0.66:1.0
    """
    categories = []
    for part in (p.strip() for p in text.split(",") if p.strip()):
        fields = part.split(":")
        if len(fields) != 3:
            raise InvalidSpec(f"likert category '{part}' must be name:l:h")
        name, lo, hi = fields[0], _number(fields[1], float, text), _number(fields[2], float, text)
        if not 0.0 <= lo < hi <= 1.0:
            raise InvalidSpec(f"likert category '{part}' needs 0 <= l < h <= 1")
        categories.append((name, lo, hi))

    if not categories:
        raise InvalidSpec("at least one likert category is required")
    return categories


def likert_selector(lo: float, hi: float) -> selectors.SelectorSpec:
    """
    Records whose binary score falls in [lo, hi); the category ending at 1 is closed.
    """
    upper = "<=" if hi == 1.0 else "<"
    return selectors.Conjunction(
        (
            selectors.OutputCompare(selectors.ScalarBinary(), ">=", lo),
            selectors.OutputCompare(selectors.ScalarBinary(), upper, hi),
        )
    )


def parse_all(specs: Sequence[Tuple[str, str]]):
    """
    Parse (kind, text) pairs, naming the failing spec in the error.
    """
    parsers = {
        "lens": parse_lens,
        "selector": parse_selector,
        "distance": parse_distance,
        "binning": parse_binning,
    }
    parsed = []
    for kind, text in specs:
        try:
            parsed.append(parsers[kind](text))
        except InvalidSpec as e:
            raise InvalidSpec(f"--{kind}: {e}")
        except CalibrationError as e:
            raise CalibrationError(f"--{kind}: {e}", status=e.status)
    return parsed

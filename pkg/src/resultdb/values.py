"""Value semantics shared by the whole engine.

A value is an int, a float, a UTF-8 string, or None (the null marker).
Comparisons involving null are never satisfied; duplicate elimination
treats nulls as equal to each other (plain tuple equality).
"""

from __future__ import annotations

import csv
import io
import math
import operator
from typing import Iterable, Sequence

from .errors import DataError

Value = int | float | str | None

VALUE_TYPES = ("int", "float", "string")

COMPARISON_OPS = ("=", "<>", "<", "<=", ">", ">=")


def type_name_of(value: Value) -> str:
    if isinstance(value, bool):
        raise DataError(f"boolean value {value!r} is not a supported type")
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "string"
    raise DataError(f"unsupported value {value!r}")


def matches_type(value: Value, vtype: str) -> bool:
    """True when value is null or belongs to the declared column type."""
    if value is None:
        return True
    if isinstance(value, bool):
        return False
    if vtype == "int":
        return isinstance(value, int)
    if vtype == "float":
        return isinstance(value, float)
    if vtype == "string":
        return isinstance(value, str)
    raise DataError(f"unknown value type {vtype!r}")


_OPERATORS = {
    "=": operator.eq,
    "<>": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


def compare(op: str, left: Value, right: Value) -> bool:
    """Evaluate a comparison; any null operand makes it false."""
    if left is None or right is None:
        return False
    try:
        return _OPERATORS[op](left, right)
    except KeyError:
        raise DataError(f"unknown comparison operator {op!r}") from None


def value_sort_key(value: Value):
    # Nulls sort first; within a typed column the remaining values are comparable.
    return (value is not None, value)


def row_sort_key(row: Sequence[Value]):
    return tuple(value_sort_key(v) for v in row)


def sorted_rows(rows: Iterable[Sequence[Value]]) -> list[tuple]:
    return sorted((tuple(r) for r in rows), key=row_sort_key)


def parse_value(text: str, vtype: str) -> Value:
    """Decode one CSV field. The empty field is null, regardless of type."""
    if text == "":
        return None
    if vtype == "int":
        try:
            return int(text, 10)
        except ValueError:
            raise DataError(f"invalid int literal {text!r}") from None
    if vtype == "float":
        try:
            parsed = float(text)
        except ValueError:
            raise DataError(f"invalid float literal {text!r}") from None
        if not math.isfinite(parsed):
            raise DataError(f"non-finite float {text!r} is not supported")
        return parsed
    if vtype == "string":
        return text
    raise DataError(f"unknown value type {vtype!r}")


def format_value(value: Value) -> str:
    """Encode one value for canonical CSV; null becomes the empty field."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def canonical_csv(header: Sequence[str], rows: Iterable[Sequence[Value]]) -> str:
    """Canonical textual encoding used for round-trips and size accounting.

    Header line first, then rows sorted ascending lexicographically,
    RFC-4180 minimal quoting, "\\n" line ends.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in sorted_rows(rows):
        writer.writerow([format_value(v) for v in row])
    return out.getvalue()


def parse_csv(text: str) -> tuple[list[str], list[list[str]]]:
    """Split CSV text into a header and raw (undecoded) data rows."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("CSV source is empty (missing header row)") from None
    return header, [row for row in reader if row]

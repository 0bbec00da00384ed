"""Comma-separated tables with a mandatory header row.

Schemas understood by :func:`read_csv_curve`:

* ``tuning``: ``flux`` (reduced flux) or ``current_A`` (coil current), and ``f0_Hz``
* ``reflection``: ``f_Hz``, ``re``, ``im``
"""

import csv
import io
import math
from pathlib import Path

from wja.errors import ParseError, ValidationError
from wja.fitting.reflection import ReflectionTrace
from wja.fitting.tuning import TuningCurveData
from wja.io.files import atomic_write_text, format_float

SCHEMAS = {
    "tuning": (("flux", "current_A"), ("f0_Hz",)),
    "reflection": (("f_Hz",), ("re",), ("im",)),
}
TEXT_COLUMNS = ("tags",)


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return format_float(v)


def dumps_csv(columns):
    """Render ``{name: sequence}`` as CSV text, columns in insertion order."""
    names = list(columns)
    if not names:
        raise ValidationError("no columns to write")
    n = len(columns[names[0]])
    for k in names:
        if len(columns[k]) != n:
            raise ValidationError(f"column {k!r} has {len(columns[k])} rows, expected {n}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for i in range(n):
        w.writerow([_cell(columns[k][i]) for k in names])
    return buf.getvalue()


def write_csv(columns, path):
    """Write a table atomically; floats use their shortest exact repr."""
    return atomic_write_text(path, dumps_csv(columns))


def loads_csv(text, text_columns=TEXT_COLUMNS, source="<csv>"):
    """Parse CSV text into ``{name: list}``; numeric cells become floats.

    Blank and NaN numeric cells are rejected with their line number; ``inf``
    is accepted (an uncoupled coupling Q, for instance).
    """
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not any(c.strip() for c in rows[0]):
        raise ParseError(f"{source}: missing header row")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise ParseError(f"{source}: duplicate column names in header")
    cols = {h: [] for h in header}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            raise ParseError(f"{source}: line {lineno} is blank")
        if len(row) != len(header):
            raise ParseError(f"{source}: line {lineno} has {len(row)} fields, header has {len(header)}")
        for h, cell in zip(header, row):
            if h in text_columns:
                cols[h].append(cell)
                continue
            s = cell.strip()
            if not s:
                raise ParseError(f"{source}: line {lineno}: blank cell in column {h!r}")
            try:
                v = float(s)
            except ValueError:
                raise ParseError(f"{source}: line {lineno}: non-numeric cell {s!r} in column {h!r}") from None
            if math.isnan(v):
                raise ParseError(f"{source}: line {lineno}: NaN in column {h!r}")
            cols[h].append(v)
    return cols


def read_csv_table(path, text_columns=TEXT_COLUMNS):
    path = Path(path)
    return loads_csv(path.read_text(encoding="utf-8"), text_columns, str(path))


def _pick(cols, options, source):
    for name in options:
        if name in cols:
            return name
    raise ParseError(f"{source}: missing column {' or '.join(repr(o) for o in options)}")


def curve_from_columns(cols, schema, source="<csv>"):
    if schema not in SCHEMAS:
        raise ValidationError(f"unknown schema {schema!r}; expected one of {sorted(SCHEMAS)}")
    names = [_pick(cols, opts, source) for opts in SCHEMAS[schema]]
    for name in names:
        if any(math.isinf(v) for v in cols[name]):
            raise ParseError(f"{source}: infinite value in column {name!r}")
    if schema == "tuning":
        return TuningCurveData(cols[names[0]], cols[names[1]], flux_mode=names[0] == "flux")
    f, re, im = (cols[n] for n in names)
    return ReflectionTrace(f, [complex(a, b) for a, b in zip(re, im)])


def read_csv_curve(path, schema):
    """Read a tuning curve or a reflection trace from CSV.

    Raises
    ------
    ParseError
        Missing column (named), ragged row or blank/NaN cell (line number).
    """
    path = Path(path)
    cols = read_csv_table(path, text_columns=())
    return curve_from_columns(cols, schema, str(path))

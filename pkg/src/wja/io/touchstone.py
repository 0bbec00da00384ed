"""Touchstone v1 one-port (.s1p) reader and writer.

Option line ``# <unit> S <RI|MA|DB> R <ohms>``; defaults are ``GHz S MA R 50``.
Frequencies are converted to Hz on input.
"""

import math
from pathlib import Path

import numpy as np

from wja.errors import ParseError
from wja.fitting.reflection import ReflectionTrace
from wja.io.files import atomic_write_text, format_float

UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
FORMATS = ("RI", "MA", "DB")


def _parse_option_line(line, lineno):
    unit, fmt, ref = "GHZ", "MA", 50.0
    tokens = line[1:].upper().split()
    i = 0
    while i < len(tokens):
        t = tokens[i]
        if t in UNITS:
            unit = t
        elif t in FORMATS:
            fmt = t
        elif t == "S":
            pass
        elif t in ("Y", "Z", "H", "G"):
            raise ParseError(f"line {lineno}: only S parameters are supported, got {t}")
        elif t == "R":
            if i + 1 >= len(tokens):
                raise ParseError(f"line {lineno}: option 'R' needs a resistance")
            try:
                ref = float(tokens[i + 1])
            except ValueError:
                raise ParseError(f"line {lineno}: bad reference resistance {tokens[i + 1]!r}") from None
            if not ref > 0:
                raise ParseError(f"line {lineno}: reference resistance must be > 0")
            i += 1
        else:
            raise ParseError(f"line {lineno}: malformed option line, unknown token {t!r}")
        i += 1
    return unit, fmt, ref


def _to_complex(a, b, fmt):
    if fmt == "RI":
        return a + 1j * b
    mag = a if fmt == "MA" else 10 ** (a / 20)
    ang = np.radians(b)
    return mag * (np.cos(ang) + 1j * np.sin(ang))


def loads(text):
    """Parse the text of a one-port Touchstone file into a ReflectionTrace.

    Raises
    ------
    ParseError
        Malformed option line, bad numbers, multi-port data or
        non-increasing frequencies.
    """
    option = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if option is not None:
                raise ParseError(f"line {lineno}: second option line")
            option = _parse_option_line(line, lineno)
            continue
        try:
            values = [float(v) for v in line.split()]
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric data {line!r}") from None
        rows.append((lineno, values))
    if option is None:
        option = ("GHZ", "MA", 50.0)
    if not rows:
        raise ParseError("no data rows")
    bad = [(n, v) for n, v in rows if len(v) != 3]
    if bad:
        n, v = bad[0]
        ports = math.sqrt((len(v) - 1) / 2) if len(v) > 1 else 0
        if ports == int(ports) and ports > 1:
            raise ParseError(f"line {n}: {int(ports)}-port data ({len(v)} values per row); only one-port is supported")
        raise ParseError(f"line {n}: expected 3 values per row, got {len(v)}")
    data = np.array([v for _, v in rows])
    if not np.all(np.isfinite(data)):
        raise ParseError("non-finite value in data")
    unit, fmt, _ = option
    f = data[:, 0] * UNITS[unit]
    steps = np.diff(f)
    if np.any(steps <= 0):
        k = int(np.argmax(steps <= 0)) + 1
        raise ParseError(f"line {rows[k][0]}: frequencies must be strictly increasing")
    return ReflectionTrace(f, _to_complex(data[:, 1], data[:, 2], fmt))


def dumps(trace, fmt="RI", unit="Hz", ref=50.0):
    """Serialize a trace. RI in Hz (the default) round-trips exactly."""
    fmt = fmt.upper()
    if fmt not in FORMATS or unit.upper() not in UNITS:
        raise ParseError(f"unsupported format/unit {fmt!r}/{unit!r}")
    scale = UNITS[unit.upper()]
    g = trace.gamma
    if fmt == "RI":
        a, b = g.real, g.imag
    else:
        mag = np.abs(g)
        a = mag if fmt == "MA" else 20 * np.log10(mag)
        b = np.degrees(np.angle(g))
    lines = ["! one-port reflection", f"# {unit} S {fmt} R {format_float(ref)}"]
    for fi, ai, bi in zip(trace.frequencies / scale, a, b):
        lines.append(f"{format_float(fi)} {format_float(ai)} {format_float(bi)}")
    return "\n".join(lines) + "\n"


def read_touchstone(path):
    path = Path(path)
    if path.suffix.lower() not in (".s1p", ".ts", ""):
        raise ParseError(f"{path}: expected a one-port .s1p file")
    return loads(path.read_text(encoding="utf-8"))


def write_touchstone(trace, path, fmt="RI", unit="Hz"):
    return atomic_write_text(path, dumps(trace, fmt, unit))

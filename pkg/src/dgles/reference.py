"""Published reference rows for the three channel cases and a comparison tool."""

import csv
import io
from importlib import resources

from .config import _float

COMPARE_KEYS = ("Re_tau", "u_tau/U_b")
DEFAULT_TOLERANCE = 0.10


def _read(name):
    text = resources.files("dgles").joinpath("data", name).read_text()
    return list(csv.DictReader(io.StringIO(text)))


def table2():
    """``{case: {key: float or None}}`` of the mean-flow reference rows."""
    out = {}
    for row in _read("table2_reference.csv"):
        case = row.pop("case")
        rec = {"model": row.pop("model")}
        for k, v in row.items():
            rec[k] = float(v) if v.strip() else None
        out[case] = rec
    return out


def table1():
    """Run parameters of the three LES cases (lengths parsed from pi expressions)."""
    out = {}
    for row in _read("table1_parameters.csv"):
        case = row.pop("case")
        out[case] = {k: _float(v) for k, v in row.items()}
    return out


def compare(record, case, keys=COMPARE_KEYS, tolerance=DEFAULT_TOLERANCE):
    """Relative deviation of ``record`` from a reference row.

    Returns ``(ok, rows)`` with one ``(key, value, reference, rel_error, ok)``
    row per compared key.
    """
    ref = table2()
    if case not in ref:
        raise KeyError(f"unknown reference case {case!r}; known: {', '.join(ref)}")
    rows = []
    for k in keys:
        r = ref[case].get(k)
        if r is None:
            continue
        if k not in record:
            rows.append((k, float("nan"), r, float("inf"), False))
            continue
        v = float(record[k])
        rel = abs(v - r) / abs(r)
        rows.append((k, v, r, rel, rel <= tolerance))
    return all(row[-1] for row in rows), rows

"""Deterministic JSON and CSV rendering of reports.

Floats are written with 17 significant digits, non-finite floats as
``null`` (JSON) or ``nan``/``inf`` (CSV); key order follows insertion order.
"""

import csv
import io
import json
import math

import numpy as np


def _float(v):
    text = format(v, ".17g")
    # keep floats recognisable as floats after a round trip
    if math.isfinite(v) and not any(c in text for c in ".e"):
        text += ".0"
    return text


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return _float(v) if math.isfinite(v) else "null"
    if isinstance(v, str):
        return _json_string(v)
    if isinstance(v, np.ndarray):
        return _json_value(v.tolist())
    if isinstance(v, dict):
        return "{" + ", ".join(f"{_json_string(str(k))}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    if hasattr(v, "as_dict"):
        return _json_value(v.as_dict())
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _json_string(s):
    return json.dumps(s)


def to_json(obj):
    """Render ``obj`` (reports, dicts, lists, arrays) as one JSON line."""
    return _json_value(obj)


def _csv_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return _float(float(v))
    return str(v)


def rows_to_csv(rows, columns):
    """CSV text with a header of ``columns`` and one line per row dict."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row[c]) for c in columns])
    return buf.getvalue()

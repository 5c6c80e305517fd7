"""Deterministic CSV/JSON serialization and tidy plot-data extraction.

Floats are written with 17 significant digits so every value round-trips
exactly; no timestamps or timings enter the files, so identical configs
give byte-identical output.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

PLOT_KINDS = ("bound-vs-R", "liouville-convergence", "identity-order", "jflow-decay")

PLOT_COLUMNS = {
    "bound-vs-R": ("key", "R", "quantity", "role", "measured", "bound", "passed"),
    "liouville-convergence": ("label", "boundary", "R", "quantity", "deviation", "threshold", "passed"),
    "identity-order": ("kind", "beta", "level", "h", "residual"),
    "jflow-decay": ("convention", "t", "quantity", "value"),
}


class ReportError(ValueError):
    pass


def format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return "%.17g" % x


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, dict):
        return ";".join(f"{k}={format_cell(v)}" for k, v in sorted(value.items()))
    return str(value)


def _json_value(value, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if value is None or isinstance(value, (bool, np.bool_)):
        return json.dumps(None if value is None else bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(value[k], indent, level + 1)}"
                 for k in sorted(value, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [pad + _json_value(v, indent, level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise ReportError(f"cannot serialize {type(value).__name__}")


def dumps(payload, indent: int = 2) -> str:
    """JSON text with sorted keys and %.17g floats (non-finite as NaN/Infinity)."""
    return _json_value(payload, indent, 0) + "\n"


def write_json(path: str | Path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload))
    return path


def csv_text(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_table(path: str | Path, rows, columns, fmt: str = "csv") -> Path:
    """Write rows as CSV, or as a JSON list of objects with the same columns."""
    rows = list(rows)
    if not rows:
        raise ReportError(f"refusing to write an empty table to {path}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path.write_text(csv_text(rows, columns))
    elif fmt == "json":
        path.write_text(dumps([{c: row.get(c) for c in columns} for row in rows]))
    else:
        raise ReportError(f"unknown table format {fmt!r}")
    return path


# -- plot data -------------------------------------------------------------------

def _key_label(key: dict) -> str:
    return format_cell({k: v for k, v in key.items() if k != "R"})


def _bound_rows(payload):
    for rep in payload.get("estimates", []):
        key = rep["key"]
        yield {"key": _key_label(key), "R": key.get("R"), "quantity": rep["quantity"],
               "role": rep["role"], "measured": rep["measured"], "bound": rep["bound"],
               "passed": rep["passed"]}


def _liouville_rows(payload):
    for rep in payload.get("liouville", []):
        key = rep["key"]
        yield {"label": key["label"], "boundary": key["boundary"], "R": key["R"],
               "quantity": rep["quantity"], "deviation": rep["measured"],
               "threshold": rep["components"].get("threshold"), "passed": rep["passed"]}


def _identity_rows(payload):
    for rep in payload.get("identity", []):
        for level, (h, res) in enumerate(zip(rep["h"], rep["residuals"])):
            yield {"kind": rep["kind"], "beta": rep["beta"], "level": level, "h": h, "residual": res}


def _jflow_rows(payload):
    for rec in payload.get("jflow", []):
        series = {"min_J": rec["min_J"], "max_J": rec["max_J"]}
        if rec.get("envelope") is not None:
            series["j_decay"] = rec["envelope"]
        for name, values in series.items():
            for t, v in zip(rec["times"], values):
                yield {"convention": rec["convention"], "t": t, "quantity": name, "value": v}


_EXTRACTORS = {
    "bound-vs-R": _bound_rows,
    "liouville-convergence": _liouville_rows,
    "identity-order": _identity_rows,
    "jflow-decay": _jflow_rows,
}


def plot_rows(payload: dict, kind: str) -> list:
    """Tidy rows of one plot kind, read straight from a report payload."""
    if kind not in _EXTRACTORS:
        raise ReportError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    rows = list(_EXTRACTORS[kind](payload))
    if not rows:
        raise ReportError(f"report has no data for plot kind {kind!r}")
    return rows


def available_kinds(payload: dict) -> list:
    return [k for k in PLOT_KINDS if any(True for _ in _EXTRACTORS[k](payload))]


def emit_plot_data(payload: dict, kind: str, out_dir: str | Path, fmt: str = "csv") -> Path:
    """Write the tidy data file for ``kind``; errors instead of writing an empty file."""
    rows = [dict(row, config_hash=payload.get("config_hash")) for row in plot_rows(payload, kind)]
    suffix = "csv" if fmt == "csv" else "json"
    columns = PLOT_COLUMNS[kind] + ("config_hash",)
    return write_table(Path(out_dir) / f"plot-{kind}.{suffix}", rows, columns, fmt)

"""Problem, reference and trace files.

Problem and reference files are JSON objects. Traces are CSV: one
``# pdama-trace key=value ...`` metadata line, a mandatory header row, then
one row per iteration with floats in shortest round-trip form.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .model import reformulate_qp
from .solver import IterationRecord

TRACE_COLUMNS = ("k", "eta", "f_avg", "feas", "d_gamma", "d_plain", "lemma_ok", "linesearch_evals", "tie_count")
PROBLEM_FIELDS = ("D", "q", "A", "a", "b", "r")
REFERENCE_FIELDS = ("f_star", "lambda_star", "d_u", "gamma", "mode")
TRACE_MAGIC = "# pdama-trace"


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc


def _require(doc, fields, what):
    if not isinstance(doc, dict):
        raise SchemaError(f"{what} must be a JSON object")
    for name in fields:
        if name not in doc:
            raise SchemaError(f"{what} is missing field {name!r}")


def load_problem(path):
    """Read a problem file and return its slack-form :class:`ProblemSpec`."""
    doc = _load_json(path)
    _require(doc, PROBLEM_FIELDS, "problem file")
    try:
        return reformulate_qp(doc["D"], doc["q"], doc["A"], doc["a"], doc["b"], doc["r"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"problem file: {exc}") from exc


def dump_json(obj, path=None) -> str:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def load_reference(path) -> dict:
    doc = _load_json(path)
    _require(doc, REFERENCE_FIELDS, "reference file")
    try:
        ref = {
            "f_star": float(doc["f_star"]),
            "lambda_star": np.asarray(doc["lambda_star"], dtype=float).reshape(-1),
            "d_u": float(doc["d_u"]),
            "gamma": float(doc["gamma"]),
            "mode": str(doc["mode"]),
        }
        for key in ("norm_A", "mu_g"):
            if doc.get(key) is not None:
                ref[key] = float(doc[key])
        if doc.get("lambda0") is not None:
            ref["lambda0"] = np.asarray(doc["lambda0"], dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"reference file: {exc}") from exc
    if ref["mode"] not in ("fixed", "line_search"):
        raise SchemaError("reference field 'mode' must be 'fixed' or 'line_search'")
    return ref


def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_trace(path, trace, meta: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(TRACE_MAGIC + " " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in trace:
            writer.writerow([_fmt(getattr(rec, col)) for col in TRACE_COLUMNS])


def read_trace(path):
    """Return ``(meta, records)`` from a trace file written by :func:`write_trace`."""
    try:
        with open(path, newline="") as fh:
            first = fh.readline()
            if not first.startswith(TRACE_MAGIC):
                raise SchemaError("trace file lacks the metadata line")
            meta = dict(item.split("=", 1) for item in first[len(TRACE_MAGIC):].split())
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != TRACE_COLUMNS:
                raise SchemaError(f"trace header must be {','.join(TRACE_COLUMNS)}")
            records = []
            for row in reader:
                if not row:
                    continue
                records.append(
                    IterationRecord(
                        k=int(row[0]),
                        eta=float(row[1]),
                        f_avg=float(row[2]),
                        feas=float(row[3]),
                        d_gamma=float(row[4]),
                        d_plain=float(row[5]),
                        lemma_ok=row[6] == "1",
                        linesearch_evals=int(row[7]),
                        tie_count=int(row[8]),
                    )
                )
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"malformed trace row: {exc}") from exc
    return meta, records

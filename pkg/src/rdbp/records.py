"""File formats: trace CSV, summary/solution JSON, transport CSV grids.

All writers go through :func:`atomic_write`, which writes a temporary file
next to the target and renames it into place.  Floats are written with
``repr`` so that every value re-parses to the identical double.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from .sim import AllSurvived, MonteCarloSummary, TrajectoryOutcome

__all__ = [
    "atomic_write",
    "trace_columns",
    "write_trace_csv",
    "read_trace_csv",
    "summary_record",
    "dumps",
    "read_transport_csv",
    "write_matrix_csv",
    "read_matrix_csv",
    "TRACE_SCHEMA_COLUMNS",
    "SUMMARY_SCHEMA",
    "SOLUTIONS_SCHEMA",
    "BRS_SCHEMA",
    "TRANSPORT_SIDECAR_SCHEMA",
]

TRACE_SCHEMA_COLUMNS = ("run_id", "t", "gamma_h", "gamma_i", "descendants_h", "descendants_i",
                        "resources_total", "tau_t", "alpha_t", "served_h", "served_i")


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(int(x))


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def trace_columns(labels: Sequence[str]) -> list[str]:
    """Column names; two sub-populations use the ``_h``/``_i`` suffixes."""
    suffixes = ["h", "i"] if len(labels) == 2 else list(labels)
    cols = ["run_id", "t"]
    cols += [f"gamma_{s}" for s in suffixes]
    cols += [f"descendants_{s}" for s in suffixes]
    cols += ["resources_total", "tau_t", "alpha_t"]
    cols += [f"served_{s}" for s in suffixes]
    return cols


def trace_text(outcomes: Sequence[TrajectoryOutcome], labels: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_columns(labels))
    for run_id, o in enumerate(outcomes):
        for r in o.trace:
            w.writerow([run_id, r.t, *r.counts, *r.descendants, _fmt(r.resources_total),
                        _fmt(r.threshold), _fmt(r.ratio), *r.served])
    return buf.getvalue()


def write_trace_csv(path, outcomes: Sequence[TrajectoryOutcome], labels: Sequence[str]) -> None:
    atomic_write(path, trace_text(outcomes, labels))


def read_trace_csv(path) -> list[dict]:
    """Parse a trace back into typed rows (``alpha_t`` is ``None`` when empty)."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for k, v in row.items():
                if k in ("resources_total", "tau_t"):
                    parsed[k] = float(v)
                elif k == "alpha_t":
                    parsed[k] = float(v) if v != "" else None
                else:
                    parsed[k] = int(v)
            rows.append(parsed)
    return rows


def _status_record(o: TrajectoryOutcome) -> dict:
    if isinstance(o.status, AllSurvived):
        return {"status": "all_survived", "halted_at_cap": o.status.halted_at_cap}
    return {"status": "extinct", "extinct_label": o.status.label, "extinct_generation": o.status.generation}


def summary_record(summary: MonteCarloSummary, labels: Sequence[str], horizon: int) -> dict:
    runs = []
    for run_id, o in enumerate(summary.outcomes):
        rec = {"run_id": run_id, "seed": o.seed}
        rec.update(_status_record(o))
        rec.update({
            "cap_generation": o.cap_generation,
            "final_counts": list(o.final_counts),
            "final_ratio": o.final_ratio,
            "final_threshold": o.final_record.threshold if o.final_record else None,
            "generations": (o.final_record.t + 1) if o.final_record else 0,
        })
        runs.append(rec)
    return {
        "labels": list(labels),
        "runs": summary.runs,
        "horizon": horizon,
        "base_seed": summary.base_seed,
        "population_cap": summary.population_cap,
        "cap_mode": summary.cap_mode,
        "joint_survival_fraction": summary.joint_survival_fraction,
        "conditional_ratio_stats": summary.conditional_ratio_stats,
        "conditional_threshold_stats": summary.conditional_threshold_stats,
        "per_run": runs,
    }


def read_transport_csv(path):
    """Read a transport grid: first row holds ``b``, first column ``a``.

    Cell (0, 0) is a free label.  Returns ``(a, b, cost)``.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2 or len(rows[0]) < 2:
        raise ValueError(f"{path}: need at least one row and one column of costs")
    b = [float(x) for x in rows[0][1:]]
    a, cost = [], []
    for k, r in enumerate(rows[1:], start=2):
        if len(r) != len(b) + 1:
            raise ValueError(f"{path}: line {k} has {len(r)} fields, expected {len(b) + 1}")
        a.append(float(r[0]))
        cost.append([float(x) for x in r[1:]])
    return a, b, np.asarray(cost, dtype=float)


def matrix_text(m: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in np.asarray(m, dtype=float):
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def write_matrix_csv(path, m: np.ndarray) -> None:
    atomic_write(path, matrix_text(m))


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.asarray([[float(x) for x in r] for r in csv.reader(fh) if r], dtype=float)


_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}
_STATS = {
    "type": ["object", "null"],
    "required": ["count", "mean", "median", "q05", "q25", "q75", "q95"],
    "properties": {k: _NUM for k in ("count", "mean", "median", "q05", "q25", "q75", "q95")},
}

SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["labels", "runs", "horizon", "base_seed", "population_cap", "cap_mode",
                 "joint_survival_fraction", "conditional_ratio_stats",
                 "conditional_threshold_stats", "per_run"],
    "properties": {
        "labels": {"type": "array", "items": {"type": "string"}},
        "runs": {"type": "integer", "minimum": 1},
        "horizon": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer"},
        "population_cap": {"type": "integer"},
        "cap_mode": {"enum": ["downsample", "halt"]},
        "joint_survival_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "conditional_ratio_stats": _STATS,
        "conditional_threshold_stats": _STATS,
        "per_run": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["run_id", "seed", "status", "cap_generation", "final_counts",
                             "final_ratio", "final_threshold", "generations"],
                "properties": {
                    "run_id": {"type": "integer"},
                    "seed": {"type": "integer"},
                    "status": {"enum": ["all_survived", "extinct"]},
                    "halted_at_cap": {"type": "boolean"},
                    "extinct_label": {"type": "string"},
                    "extinct_generation": {"type": "integer"},
                    "cap_generation": {"type": ["integer", "null"]},
                    "final_counts": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "final_ratio": _NUM_OR_NULL,
                    "final_threshold": _NUM_OR_NULL,
                    "generations": {"type": "integer", "minimum": 0},
                },
            },
        },
    },
}

SOLUTIONS_SCHEMA = {
    "type": "object",
    "required": ["solutions", "dropped"],
    "properties": {
        "solutions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["tau", "alpha", "effective_mean", "classification", "residuals"],
                "properties": {
                    "tau": {"type": "number", "exclusiveMinimum": 0},
                    "alpha": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "any"}]},
                    "effective_mean": _NUM,
                    "classification": {"enum": ["Strict", "Critical", "Inadmissible"]},
                    "residuals": {
                        "type": "object",
                        "required": ["equation", "constraint"],
                        "properties": {"equation": _NUM, "constraint": _NUM},
                    },
                },
            },
        },
        "dropped": {"type": "array"},
    },
}

BRS_SCHEMA = {
    "type": "object",
    "required": ["n", "budget", "tau_star", "bound", "estimate", "ci", "runs"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "budget": {"type": "number", "minimum": 0},
        "tau_star": {"type": ["number", "string"]},
        "bound": _NUM,
        "estimate": _NUM,
        "ci": _NUM,
        "runs": {"type": "integer", "minimum": 100},
    },
}

TRANSPORT_SIDECAR_SCHEMA = {
    "type": "object",
    "required": ["cost", "monge", "sparsity"],
    "properties": {"cost": _NUM, "monge": {"type": "boolean"}, "sparsity": {"type": "integer"}},
}

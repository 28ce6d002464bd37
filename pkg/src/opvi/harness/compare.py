"""Final-metric comparison across seeded runs, Table-style mean +/- sd."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from opvi.core import ConfigError
from opvi.harness.runner import TRACE_COLUMNS

_METRICS = ["rmse", "test_ll", "energy_dist", "regret_cum", "objective"]


@dataclass
class ComparisonRow:
    label: str
    n_runs: int
    horizon: int
    stats: dict  # metric -> (mean, sd)


def _read_trace(path: str):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    if header != TRACE_COLUMNS:
        raise ConfigError(f"{path}: not a trace CSV (unexpected columns)")
    rows = [ln.split(",") for ln in lines[1:]]
    if not rows:
        raise ConfigError(f"{path}: empty trace")
    return rows


def _final_metrics(rows):
    out = {}
    for metric in _METRICS:
        col = TRACE_COLUMNS.index(metric)
        vals = [r[col] for r in rows if r[col] != ""]
        if vals:
            out[metric] = float(vals[-1])
    return out


def _group_key(path: str) -> str:
    """Runs sharing a resolved config (minus seed) belong to one row."""
    sibling = os.path.join(os.path.dirname(os.path.abspath(path)), "resolved_config.txt")
    if os.path.isfile(sibling):
        with open(sibling, encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines()
                     if not ln.startswith(("seed =", "data_seed =", "output_dir ="))]
        return "\n".join(lines)
    return path


def _label(key: str, path: str) -> str:
    if "\n" not in key:
        return os.path.basename(os.path.dirname(os.path.abspath(path))) or path
    fields = dict(ln.split(" = ", 1) for ln in key.splitlines() if " = " in ln)
    batch = fields.get("batch_schedule", "?")
    extra = f"B={fields.get('batch_size')}" if batch == "static" else f"rho={fields.get('batch_rho')}"
    return f"{fields.get('model')}/{fields.get('sampler')}/{batch}({extra})"


def compare_runs(trace_paths) -> list[ComparisonRow]:
    """Aggregate final metrics across traces; traces must share the horizon."""
    paths = list(trace_paths)
    if not paths:
        raise ConfigError("compare needs at least one trace file")
    horizon = None
    groups: dict[str, dict] = {}
    for path in paths:
        rows = _read_trace(path)
        if horizon is None:
            horizon = len(rows)
        elif len(rows) != horizon:
            raise ConfigError(
                f"{path}: horizon {len(rows)} does not match the first trace ({horizon})"
            )
        key = _group_key(path)
        entry = groups.setdefault(key, {"label": _label(key, path), "finals": []})
        entry["finals"].append(_final_metrics(rows))

    out = []
    for entry in groups.values():
        finals = entry["finals"]
        stats = {}
        for metric in _METRICS:
            vals = [f[metric] for f in finals if metric in f]
            if vals:
                arr = np.asarray(vals)
                stats[metric] = (float(arr.mean()), float(arr.std(ddof=0)))
        out.append(ComparisonRow(label=entry["label"], n_runs=len(finals),
                                 horizon=horizon, stats=stats))
    return out


def format_comparison(rows) -> str:
    """Plain-text table: one line per configuration, mean +/- sd per metric."""
    metrics = [m for m in _METRICS if any(m in r.stats for r in rows)]
    width = max(len(r.label) for r in rows) + 2
    header = "configuration".ljust(width) + "runs  " + "  ".join(m.rjust(18) for m in metrics)
    lines = [header, "-" * len(header)]
    for r in rows:
        cells = []
        for m in metrics:
            if m in r.stats:
                mean, sd = r.stats[m]
                cells.append(f"{mean:.4f} +/- {sd:.4f}".rjust(18))
            else:
                cells.append("".rjust(18))
        lines.append(r.label.ljust(width) + str(r.n_runs).ljust(6) + "  ".join(cells))
    return "\n".join(lines)

"""Trace persistence: one CSV per (method, seed) plus a JSON sidecar."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from ..errors import InputError
from ..optimizer import RunTrace, TraceRow

CSV_COLUMNS = ("seed", "global_epoch", "cycle", "t", "eta", "train_loss", "grad_norm_sq", "val_metric")
_INT_COLUMNS = {"seed", "global_epoch", "cycle", "t"}


def fmt(x) -> str:
    """17 significant digits: enough for an exact float64 round trip."""
    return format(float(x), ".17g")


def write_rows_csv(rows, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([getattr(r, c) if c in _INT_COLUMNS else fmt(getattr(r, c)) for c in CSV_COLUMNS])


def read_rows_csv(path) -> list[TraceRow]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise InputError(f"{path}: unexpected columns {reader.fieldnames}")
        return [
            TraceRow(**{c: int(rec[c]) if c in _INT_COLUMNS else float(rec[c]) for c in CSV_COLUMNS})
            for rec in reader
        ]


def _num(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def trace_meta(trace: RunTrace, label: str) -> dict:
    return {
        "label": label,
        "seed": trace.seed,
        "fingerprint": trace.fingerprint,
        "status": trace.status,
        "failure": trace.failure,
        "sampled_iterate": trace.sampled_iterate,
        "sampled_per_cycle": list(trace.sampled_per_cycle),
        "final_train_loss": _num(trace.final_train_loss),
        "final_val_metric": _num(trace.final_val_metric),
        "armijo_warnings": trace.armijo_warnings,
    }


def trace_stem(label: str, seed: int) -> str:
    return f"{label}__seed{seed}"


def write_trace(trace: RunTrace, out_dir, label: str) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = trace_stem(label, trace.seed)
    csv_path = out_dir / f"{stem}.csv"
    write_rows_csv(trace.rows, csv_path)
    with open(out_dir / f"{stem}.meta.json", "w") as f:
        json.dump(trace_meta(trace, label), f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path


def read_trace(csv_path) -> tuple[str, RunTrace]:
    csv_path = Path(csv_path)
    meta_path = csv_path.with_name(csv_path.stem + ".meta.json")
    with open(meta_path) as f:
        meta = json.load(f)
    nan = float("nan")
    trace = RunTrace(
        fingerprint=meta["fingerprint"],
        seed=meta["seed"],
        rows=read_rows_csv(csv_path),
        status=meta["status"],
        failure=meta["failure"],
        sampled_iterate=meta["sampled_iterate"],
        sampled_per_cycle=meta["sampled_per_cycle"],
        final_train_loss=nan if meta["final_train_loss"] is None else meta["final_train_loss"],
        final_val_metric=nan if meta["final_val_metric"] is None else meta["final_val_metric"],
        armijo_warnings=meta["armijo_warnings"],
    )
    return meta["label"], trace


def load_trace_dir(in_dir) -> dict[str, list[RunTrace]]:
    """Traces grouped by method label, each group sorted by seed."""
    groups: dict[str, list[RunTrace]] = {}
    paths = sorted(Path(in_dir).glob("*__seed*.csv"))
    if not paths:
        raise InputError(f"no trace CSVs in {in_dir}")
    for p in paths:
        label, tr = read_trace(p)
        groups.setdefault(label, []).append(tr)
    for traces in groups.values():
        traces.sort(key=lambda t: t.seed)
    return groups

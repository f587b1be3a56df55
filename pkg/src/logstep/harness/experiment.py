"""JSON-configured multi-method, multi-seed experiments."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path

import jsonschema

from ..errors import ConfigError
from ..optimizer import AdamParams, ArmijoParams, RunConfig, run
from ..problems import (
    make_logreg,
    make_noisy_quadratic,
    make_quad_cosine,
    make_smooth_mlp,
    synth_classification,
    train_val_split,
)
from ..problems.idx import load_fashion_mnist
from ..schedules import KINDS, StepSchedule, default_milestones
from .report import summarize
from .traces import write_trace

log = logging.getLogger(__name__)

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}

SCHEDULE_SCHEMA = {
    "type": "object",
    "required": ["kind", "eta0"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(KINDS)},
        "eta0": _POS,
        "alpha": {"type": "number", "minimum": 0},
        "beta": _POS,
        "milestones": {"type": "array", "items": {"type": "integer"}},
        "n_milestones": {"enum": [1, 2]},
        "patience": _POS_INT,
        "threshold": _POS,
    },
}

METHOD_SCHEMA = {
    "type": "object",
    "required": ["label", "schedule"],
    "additionalProperties": False,
    "properties": {
        "label": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "method": {"enum": ["sgd", "sgd_armijo", "adam"]},
        "schedule": SCHEDULE_SCHEMA,
        "mu": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "armijo": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eta_max": _POS,
                "c_armijo": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "backtrack": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "adam": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"beta1": _NUM, "beta2": _NUM, "eps": _POS},
        },
    },
}

PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["quadratic", "quad_cosine", "logreg", "mlp"]},
        "d": _POS_INT,
        "eigmin": _POS,
        "eigmax": _POS,
        "a": {"type": "number", "minimum": 0},
        "b": _POS,
        "sigma": {"type": "number", "minimum": 0},
        "hidden": _POS_INT,
        "l2": {"type": "number", "minimum": 0},
        "batch_size": _POS_INT,
        "seed": {"type": "integer"},
        "data": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "source": {"enum": ["auto", "fashion_mnist", "synthetic"]},
                "data_dir": {"type": ["string", "null"]},
                "max_n": _POS_INT,
                "val_n": _POS_INT,
                "d": _POS_INT,
                "n_classes": _POS_INT,
                "spread": _POS,
            },
        },
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["problem", "methods", "T"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "problem": PROBLEM_SCHEMA,
        "methods": {"type": "array", "minItems": 1, "items": METHOD_SCHEMA},
        "T": {"type": "integer", "minimum": 2},
        "restarts": _POS_INT,
        "batches_per_epoch": _POS_INT,
        "mu": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "seeds": {"type": "array", "minItems": 1, "items": {"type": "integer"}},
        "reset_momentum": {"type": "boolean"},
        "workers": _POS_INT,
    },
}

DEFAULT_PROBLEMS = {
    "quadratic": {"kind": "quadratic", "d": 10, "eigmin": 0.1, "eigmax": 10.0, "sigma": 1.0},
    "quad_cosine": {"kind": "quad_cosine", "d": 10, "a": 1.0, "b": 2.0, "sigma": 1.0},
    "logreg": {"kind": "logreg", "l2": 1e-4, "batch_size": 128},
    "mlp": {"kind": "mlp", "hidden": 64, "l2": 1e-4, "batch_size": 128},
}

# stand-in for FashionMNIST when the IDX files are absent
SYNTHETIC_FALLBACK = {"d": 64, "n_classes": 10, "spread": 0.5}


def _line_of(text: str, path) -> int | None:
    """Best-effort line number of the JSON node at ``path``."""
    if not path:
        return None
    key = path[-1] if isinstance(path[-1], str) else (path[-2] if len(path) > 1 else None)
    if not isinstance(key, str):
        return None
    for i, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return i
    return None


def validate_config(cfg: dict, text: str | None = None, source="<config>") -> dict:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        field = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        line = _line_of(text, list(exc.absolute_path)) if text else None
        where = f"{source}:{line}" if line else source
        raise ConfigError(f"{where}: field '{field}': {exc.message}") from None
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return validate_config(cfg, text, str(path))


def config_fingerprint(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()[:16]


def load_classification_data(data: dict, seed: int = 0):
    """(train, val) splits: FashionMNIST when available, else synthetic clusters."""
    source = data.get("source", "auto")
    max_n = data.get("max_n", 2000)
    val_n = data.get("val_n", 500)
    if source in ("auto", "fashion_mnist"):
        train = load_fashion_mnist(data.get("data_dir"), "train", max_n)
        if train is not None:
            val = load_fashion_mnist(data.get("data_dir"), "test", val_n)
            return train, val, "fashion_mnist"
        if source == "fashion_mnist":
            raise ConfigError("FashionMNIST IDX files not found (set --data-dir or LOGSTEP_DATA_DIR)")
        log.warning("FashionMNIST files not found; using the synthetic fallback")
    syn = {**SYNTHETIC_FALLBACK, **{k: data[k] for k in ("d", "n_classes", "spread") if k in data}}
    full = synth_classification(max_n + val_n, syn["d"], syn["n_classes"], seed=seed, spread=syn["spread"])
    train, val = train_val_split(full, val_n / (max_n + val_n), seed=seed)
    return train, val, "synthetic"


def build_problem(spec: dict):
    """(problem, oracle, default batches per epoch) from a problem spec."""
    spec = {**DEFAULT_PROBLEMS.get(spec["kind"], {}), **spec}
    kind = spec["kind"]
    seed = spec.get("seed", 0)
    if kind == "quadratic":
        p, o = make_noisy_quadratic(spec["d"], spec["eigmin"], spec["eigmax"], spec["sigma"], seed)
        return p, o, 1
    if kind == "quad_cosine":
        p, o = make_quad_cosine(spec["d"], spec["a"], spec["b"], spec["sigma"], seed)
        return p, o, 1
    train, val, _ = load_classification_data(spec.get("data", {}), seed)
    bs = spec["batch_size"]
    if kind == "logreg":
        p, o = make_logreg(train, spec["l2"], bs, seed, val=val)
    else:
        p, o = make_smooth_mlp(train, spec["hidden"], spec["l2"], seed, bs, val=val)
    return p, o, math.ceil(train.n / min(bs, train.n))


def schedule_from_spec(spec: dict, T: int) -> StepSchedule:
    spec = dict(spec)
    n_ms = spec.pop("n_milestones", None)
    if spec["kind"] == "stagewise" and "milestones" not in spec:
        spec["milestones"] = default_milestones(T, n_ms or 1)
    spec["milestones"] = tuple(spec.get("milestones", ()))
    return StepSchedule(T=T, **spec)


def method_configs(cfg: dict, default_batches: int) -> dict[str, RunConfig]:
    out = {}
    for m in cfg["methods"]:
        if m["label"] in out:
            raise ConfigError(f"duplicate method label {m['label']!r}")
        method = m.get("method", "sgd")
        default_mu = 0.0 if method != "sgd" else cfg.get("mu", 0.9)
        try:
            out[m["label"]] = RunConfig(
                schedule=schedule_from_spec(m["schedule"], cfg["T"]),
                restarts=cfg.get("restarts", 1),
                batches_per_epoch=cfg.get("batches_per_epoch", default_batches),
                mu=m.get("mu", default_mu),
                seeds=tuple(cfg.get("seeds", (0, 1, 2, 3, 4))),
                method=method,
                armijo=ArmijoParams(**m.get("armijo", {})),
                adam=AdamParams(**m.get("adam", {})),
                reset_momentum=cfg.get("reset_momentum", False),
            )
        except ValueError as exc:
            raise ConfigError(f"method {m['label']!r}: {exc}") from None
    return out


@lru_cache(maxsize=4)
def _cached_problem(problem_json: str):
    return build_problem(json.loads(problem_json))


def _run_one(problem_json: str, label: str, rc: RunConfig, seed: int, out_dir: str):
    problem, oracle, _ = _cached_problem(problem_json)
    trace = run(problem, oracle, rc, seed)
    write_trace(trace, out_dir, label)
    return label, trace


def execute_experiment(config_path, out_dir, workers: int | None = None) -> Path:
    """Run every (method, seed) pair of a config file and write traces + summary.json.

    A diverged run produces a marked trace; it never aborts the experiment.
    Returns the output directory.
    """
    cfg = load_config(config_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem_json = json.dumps(cfg["problem"], sort_keys=True)
    _, _, default_batches = _cached_problem(problem_json)
    configs = method_configs(cfg, default_batches)
    jobs = [(label, rc, seed) for label, rc in configs.items() for seed in rc.seeds]
    workers = workers or cfg.get("workers") or os.cpu_count() or 1

    groups: dict[str, list] = {label: [] for label in configs}
    if workers == 1:
        results = [_run_one(problem_json, label, rc, seed, str(out_dir)) for label, rc, seed in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, problem_json, label, rc, seed, str(out_dir))
                       for label, rc, seed in jobs]
            results = [f.result() for f in futures]
    for label, trace in results:
        groups[label].append(trace)

    summary = {
        "config_fingerprint": config_fingerprint(cfg),
        "name": cfg.get("name"),
        "diverged": {label: [t.seed for t in ts if not t.completed] for label, ts in groups.items()},
        "methods": [],
    }
    eligible = {k: v for k, v in groups.items() if sum(t.completed for t in v) >= 2}
    summary["methods"] = [s.to_dict() for s in summarize(eligible)] if eligible else []
    with open(out_dir / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return out_dir

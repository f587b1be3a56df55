"""Command-line entry point.

Exit codes: 0 success, 2 configuration/argument error, 3 every run
diverged, 4 a bound was violated under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from . import bounds
from .errors import ConfigError, LogstepError, NoWinnerError, SummaryError
from .harness.experiment import DEFAULT_PROBLEMS, build_problem, execute_experiment
from .harness.report import bound_report, format_table, seed_averaged, summarize
from .harness.traces import fmt, load_trace_dir, write_trace
from .optimizer import COARSE_GRID, AdamParams, ArmijoParams, RunConfig, grid_search, run
from .sampling import build_distribution
from .schedules import KINDS, StepSchedule, restart_table

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_BOUND = 0, 2, 3, 4

# column suffixes for `dist compare`
SHORT_NAMES = {"logarithmic": "log", "cosine": "cos", "constant": "const", "exponential": "exp"}


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _write_dat(path: Path, header, rows):
    """Whitespace-separated companion file readable by gnuplot."""
    with open(path, "w") as f:
        f.write("# " + " ".join(header) + "\n")
        for r in rows:
            f.write(" ".join(str(v) if isinstance(v, int) else fmt(v) for v in r) + "\n")


def _schedule_from_args(args, kind=None) -> StepSchedule:
    return StepSchedule(
        kind=kind or args.kind,
        eta0=args.eta0,
        T=args.T,
        alpha=getattr(args, "alpha", 0.0) or 0.0,
        beta=getattr(args, "beta", 1.0) or 1.0,
        milestones=tuple(_ints(args.milestones)) if getattr(args, "milestones", None) else (),
    )


def cmd_schedules_dump(args):
    rows = restart_table(_schedule_from_args(args), args.restarts)
    out = Path(args.out)
    header = ("global_epoch", "cycle", "t", "eta")
    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for g, c, t, eta in rows:
            w.writerow([g, c, t, fmt(eta)])
    _write_dat(out.with_suffix(".dat"), header, rows)
    return EXIT_OK


def cmd_dist_compare(args):
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    dists = [build_distribution(_schedule_from_args(args, kind)) for kind in kinds]
    header = ["t"] + [f"p_{SHORT_NAMES.get(k, k)}" for k in kinds]
    rows = [[t] + [float(d.probs[t - 1]) for d in dists] for t in range(1, args.T + 1)]
    out = Path(args.out)
    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([r[0]] + [fmt(v) for v in r[1:]])
    _write_dat(out.with_suffix(".dat"), header, rows)
    return EXIT_OK


def cmd_bounds_verify(args):
    reports = [bounds.verify_sum_bounds(args.eta0, T).to_dict() for T in _ints(args.T_list)]
    text = json.dumps(reports, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_bounds_eval(args):
    try:
        p = json.loads(args.params)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--params is not valid JSON: {exc}") from None
    if args.which == "cor1":
        value, c = bounds.corollary1_bound(p["L"], p["sigma"], p["delta1"], int(p["T"]))
        print(json.dumps({"bound": value, "c": c}))
        return EXIT_OK
    try:
        inp = bounds.TheoremInputs(**p)
    except TypeError as exc:
        raise ConfigError(f"--params: {exc}") from None
    value = bounds.theorem1_bound(inp) if args.which == "theorem1" else bounds.corollary2_bound(inp)
    print(fmt(value))
    return EXIT_OK


def _problem_from_args(args):
    spec = dict(DEFAULT_PROBLEMS[args.problem])
    for key in ("sigma", "batch_size", "hidden", "l2"):
        val = getattr(args, key, None)
        if val is not None:
            spec[key] = val
    if args.problem in ("logreg", "mlp"):
        data = {"source": "auto", "data_dir": args.data_dir}
        if args.max_n:
            data["max_n"] = args.max_n
        spec["data"] = data
    return build_problem(spec)


def _run_config_from_args(args, default_batches):
    return RunConfig(
        schedule=_schedule_from_args(args),
        restarts=args.restarts,
        batches_per_epoch=args.batches or default_batches,
        mu=args.mu if args.method == "sgd" else 0.0,
        seeds=tuple(range(args.seeds)),
        method=args.method,
        armijo=ArmijoParams(eta_max=args.eta_max or args.eta0, c_armijo=args.c_armijo),
        adam=AdamParams(),
        reset_momentum=args.reset_momentum,
    )


def cmd_run(args):
    problem, oracle, nb = _problem_from_args(args)
    config = _run_config_from_args(args, nb)
    out = Path(args.out)
    label = f"{args.method}_{args.kind}"
    traces = []
    for seed in config.seeds:
        tr = run(problem, oracle, config, seed)
        write_trace(tr, out, label)
        traces.append(tr)
    done = [t for t in traces if t.completed]
    if not done:
        print("every run diverged", file=sys.stderr)
        return EXIT_DIVERGED
    if len(done) >= 2:
        summary = summarize({label: traces})
        print(format_table(summary))
        (out / "summary.json").write_text(json.dumps([s.to_dict() for s in summary], indent=2) + "\n")
    status = EXIT_OK
    if args.kind == "logarithmic":
        try:
            reports = [bound_report(t, problem, oracle, config) for t in done]
        except LogstepError as exc:
            print(f"bound report skipped: {exc}", file=sys.stderr)
        else:
            avg = seed_averaged(reports)
            payload = {"per_seed": [r.to_dict() for r in reports], "seed_averaged": avg.to_dict()}
            (out / "bounds.json").write_text(json.dumps(payload, indent=2) + "\n")
            print(f"{avg.which}: measured {avg.measured:.6g} vs bound {avg.bound:.6g} "
                  f"({'advisory' if avg.satisfied is None else 'satisfied' if avg.satisfied else 'VIOLATED'})")
            if args.strict and any(r.satisfied is False for r in reports):
                status = EXIT_BOUND
    return status


def cmd_grid(args):
    problem, oracle, nb = _problem_from_args(args)
    template = _run_config_from_args(args, nb)
    coarse = _floats(args.coarse) if args.coarse else COARSE_GRID
    result = grid_search(problem, oracle, template, coarse, args.fine_radius, args.fine_step)
    ranked = [{**r, "mean_val_loss": r["mean_val_loss"] if math.isfinite(r["mean_val_loss"]) else None}
              for r in result.ranked()]
    text = json.dumps({"best_eta0": result.best_eta0, "ranked": ranked}, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(f"best eta0 = {result.best_eta0}")
    return EXIT_OK


def cmd_report(args):
    groups = load_trace_dir(args.in_dir)
    eligible = {k: v for k, v in groups.items() if sum(t.completed for t in v) >= 2}
    if not eligible:
        if all(not t.completed for ts in groups.values() for t in ts):
            print("every run diverged", file=sys.stderr)
            return EXIT_DIVERGED
        raise SummaryError("no method has 2 completed runs")
    summaries = summarize(eligible, args.confidence)
    print(format_table(summaries))
    if args.out:
        Path(args.out).write_text(json.dumps([s.to_dict() for s in summaries], indent=2) + "\n")
    return EXIT_OK


def cmd_experiment(args):
    out = execute_experiment(args.config, args.out, args.workers)
    summary = json.loads((out / "summary.json").read_text())
    if not summary["methods"]:
        return EXIT_DIVERGED
    return EXIT_OK


def _add_schedule_args(p, kind=True, eta0_required=True):
    if kind:
        p.add_argument("--kind", choices=KINDS, default="logarithmic")
    p.add_argument("--eta0", type=float, required=eta0_required, default=1.0)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--milestones", help="comma-separated epochs, e.g. 34,67")


def _add_run_args(p, eta0_required=True):
    p.add_argument("--problem", choices=sorted(DEFAULT_PROBLEMS), default="quadratic")
    p.add_argument("--method", choices=("sgd", "sgd_armijo", "adam"), default="sgd")
    _add_schedule_args(p, eta0_required=eta0_required)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--batches", type=int, help="oracle calls per epoch (default: ceil(n/batch))")
    p.add_argument("--mu", type=float, default=0.9)
    p.add_argument("--seeds", type=int, default=5, help="number of seeds, 0..N-1")
    p.add_argument("--sigma", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--eta-max", dest="eta_max", type=float)
    p.add_argument("--c-armijo", dest="c_armijo", type=float, default=0.1)
    p.add_argument("--reset-momentum", dest="reset_momentum", action="store_true")
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--max-n", dest="max_n", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logstep", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sched = sub.add_parser("schedules", help="step-size tables").add_subparsers(dest="action", required=True)
    p = sched.add_parser("dump", help="write eta per epoch, with warm restarts")
    _add_schedule_args(p)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_schedules_dump)

    dist = sub.add_parser("dist", help="output-iterate distributions").add_subparsers(dest="action", required=True)
    p = dist.add_parser("compare", help="output-iterate probabilities per schedule")
    p.add_argument("--kinds", default="logarithmic,cosine")
    _add_schedule_args(p, kind=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dist_compare)

    bnd = sub.add_parser("bounds", help="sum bounds and convergence bounds").add_subparsers(dest="action", required=True)
    p = bnd.add_parser("verify", help="check the sum bounds by direct summation")
    p.add_argument("--eta0", type=float, default=1.0)
    p.add_argument("--T-list", dest="T_list", default="2,10,100,1000,10000,100000")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds_verify)
    p = bnd.add_parser("eval", help="evaluate a closed-form bound")
    p.add_argument("--which", choices=("theorem1", "cor1", "cor2"), required=True)
    p.add_argument("--params", required=True, help='JSON, e.g. {"c":2,"L":1,"sigma":1,"delta1":1,"T":100}')
    p.set_defaults(func=cmd_bounds_eval)

    p = sub.add_parser("run", help="run SGD on a problem for several seeds")
    _add_run_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--strict", action="store_true", help="exit 4 when a bound is violated")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid", help="two-stage grid search over eta0")
    _add_run_args(p, eta0_required=False)
    p.add_argument("--coarse", help="comma-separated coarse grid")
    p.add_argument("--fine-radius", dest="fine_radius", type=float, default=0.1)
    p.add_argument("--fine-step", dest="fine_step", type=float, default=0.01)
    p.add_argument("--out")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("report", help="seed-aggregated table of a trace directory")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("experiment", help="run a JSON experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NoWinnerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (LogstepError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

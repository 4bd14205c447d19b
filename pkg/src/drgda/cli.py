"""Command-line batch runner: ``drgda run | validate | summarize``.

Exit codes: 0 success, 1 a run diverged or aborted (partial traces kept),
2 configuration error.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import json
import logging
import math
import os
import re
import sys

from . import __version__
from .config import build, load, parse_overrides, validate_config
from .errors import ConfigError, DRGDAError
from .solver import run
from .trace import TraceReadError, read_trace, write_trace

log = logging.getLogger("drgda")

EXIT_OK, EXIT_DIVERGED, EXIT_CONFIG = 0, 1, 2
THRESHOLDS = (1e-1, 1e-2)
NOT_REACHED = "not reached"


def _slug(value):
    text = repr(value) if isinstance(value, float) else str(value)
    return re.sub(r"[^A-Za-z0-9.+-]", "_", text)


def trace_filename(name, assignment, fmt):
    """Deterministic file name embedding every sweep value and the seed."""
    parts = [_slug(name)]
    for path in sorted(assignment):
        parts.append(f"{_slug(path.rsplit('.', 1)[-1])}={_slug(assignment[path])}")
    return "__".join(parts) + (".csv" if fmt == "csv" else ".jsonl")


def _execute(job):
    raw, assignment, path, fmt = job
    problem, W, cfg, consts = build(raw)
    lw = raw.get("metrics", {}).get("L_weight", "probe")
    L_weight = consts.L_hat if lw == "probe" else float(lw)
    records = run(problem, W, cfg, raw["mode"], L_weight)
    d_run = max((r.local_grad_max for r in records if r.error is None and not math.isnan(r.local_grad_max)),
                default=float("nan"))
    constants = consts.to_dict()
    constants["D_run"] = d_run
    constants["L_weight"] = L_weight
    header = {
        "code_version": __version__,
        "config": raw,
        "sweep_point": assignment,
        "constants": constants,
        "problem": problem.describe(),
        "mixing": {"lambda2": W.lambda2, "lambda_n": W.lambda_n, "k": W.k},
    }
    extra = bool(raw.get("metrics", {}).get("record_node_grad_norm", False))
    write_trace(path, header, records, fmt, extra)
    failed = any(r.error is not None for r in records)
    return path, failed


def run_experiment(config_path, out_dir=None, overrides=(), workers=1):
    """Run every (sweep point x seed) of a config; return ``(exit_code, trace_paths)``."""
    try:
        cfg = load(config_path, parse_overrides(overrides))
        issues = validate_config(cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG, []
    errors = [i for i in issues if i.level == "error"]
    for i in issues:
        (log.error if i.level == "error" else log.warning)("%s", i)
    if errors:
        return EXIT_CONFIG, []
    out = out_dir or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    jobs = []
    for assignment in cfg.sweep_points():
        raw = cfg.resolved(assignment)
        path = os.path.join(out, trace_filename(cfg.name, assignment, cfg.output_format))
        jobs.append((raw, assignment, path, cfg.output_format))
    try:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_execute, jobs))
        else:
            results = [_execute(j) for j in jobs]
    except DRGDAError as exc:
        log.error("run failed: %s", exc)
        return EXIT_DIVERGED, []
    paths = [p for p, _ in results]
    for p, failed in results:
        log.info("%s %s", "ABORTED" if failed else "wrote", p)
    return (EXIT_DIVERGED if any(f for _, f in results) else EXIT_OK), paths


# --- summarize -----------------------------------------------------------------------------


def iterations_to(rows, threshold):
    """First ``t`` with ``metric_total <= threshold``, or the not-reached sentinel."""
    for r in rows:
        if r["metric_total"] <= threshold:
            return r["t"]
    return NOT_REACHED


def summarize(trace_paths):
    """One summary dict per trace, sorted by final metric (unreadable files last)."""
    good, bad = [], []
    for path in trace_paths:
        try:
            header, rows, errors = read_trace(path)
        except TraceReadError as exc:
            bad.append({"file": str(path), "error": str(exc)})
            continue
        if not rows:
            bad.append({"file": str(path), "error": "; ".join(errors) or "no rows"})
            continue
        last = rows[-1]
        entry = {"file": str(path)}
        for thr in THRESHOLDS:
            entry[f"iters_to_{thr:g}"] = iterations_to(rows, thr)
        for key in ("metric_total", "grad_norm", "primal_consensus", "dual_gap"):
            entry[f"final_{key}"] = last[key]
        entry["mean_wall_ms"] = sum(r["wall_ms"] for r in rows) / len(rows)
        entry["total_comms"] = last["comms"]
        entry["iterations"] = len(rows)
        entry["error"] = "; ".join(errors) if errors else None
        good.append(entry)
    good.sort(key=lambda e: (math.isnan(e["final_metric_total"]), e["final_metric_total"]))
    return good + bad


def render_table(summary):
    cols = ["file", "iters_to_0.1", "iters_to_0.01", "final_metric_total", "final_grad_norm",
            "final_primal_consensus", "final_dual_gap", "mean_wall_ms", "total_comms", "error"]

    def cell(v):
        if isinstance(v, float):
            return f"{v:.4g}"
        return "" if v is None else str(v)

    table = [cols] + [[cell(e.get(c)) for c in cols] for e in summary]
    widths = [max(len(r[j]) for r in table) for j in range(len(cols))]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in table)


# --- entry point ---------------------------------------------------------------------------


def _parser():
    p = argparse.ArgumentParser(prog="drgda", description="Decentralized Riemannian GDA experiments.")
    p.add_argument("--version", action="version", version=f"drgda {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every sweep point of a config and write traces")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir")
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--workers", type=int, default=1)

    v = sub.add_parser("validate", help="check a config and report errors and theory warnings")
    v.add_argument("--config", required=True)
    v.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    v.add_argument("--json", action="store_true")

    s = sub.add_parser("summarize", help="summarize trace files")
    s.add_argument("traces", nargs="+")
    s.add_argument("--json", action="store_true")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if args.command == "run":
        code, paths = run_experiment(args.config, args.out_dir, args.override, args.workers)
        for p in paths:
            print(p)
        return code
    if args.command == "validate":
        try:
            cfg = load(args.config, parse_overrides(args.override))
            issues = validate_config(cfg)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if args.json:
            print(json.dumps([i.__dict__ for i in issues], indent=2))
        else:
            for i in issues:
                print(i)
            if not issues:
                print("ok")
        return EXIT_CONFIG if any(i.level == "error" for i in issues) else EXIT_OK
    summary = summarize(args.traces)
    print(json.dumps(summary, indent=2) if args.json else render_table(summary))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Experiment configuration: TOML parsing, dotted overrides, sweeps and validation.

Config layout (schema version 1)::

    schema_version = 1
    name = "synthetic_ring"
    mode = "drgda"              # drgda | drsgda | centralized | drcs_consensus_only
    seeds = [0, 1]              # optional; each entry becomes solver.seed

    [problem]   kind, seed, plus kind-specific keys (see PROBLEM_KEYS)
    [topology]  kind, n, plus rows/cols (torus) or p/seed (erdos_renyi)
    [solver]    alpha, beta, eta, k (int or "auto"), T, batch_size, project_dual,
                v_mixing_power ("k" or 1), seed, init_perturbation, precompute_power
    [metrics]   L_weight ("probe" or a number), probe_pairs, record_node_grad_norm
    [output]    dir, format ("csv" | "jsonl")
    [sweep]     "solver.beta" = [..], ...   (cartesian product over all lists)
"""

from dataclasses import dataclass, field
import copy
import itertools
import math
import re
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, DRGDAError
from .network import build_metropolis, make_topology, required_k
from .solver import MODES, SolverConfig

SCHEMA_VERSION = 1
DELTA2 = 1.0 / 6.0

TOP_KEYS = {"schema_version", "name", "mode", "seeds", "problem", "topology", "solver", "metrics", "output", "sweep"}
PROBLEM_KEYS = {
    "synthetic_bilinear": {"kind", "seed", "n", "d", "r", "mu", "samples_per_node", "noise", "heterogeneity", "b_scale", "spectrum"},
    "dro_weighting": {"kind", "seed", "n", "n_samples", "d", "n_classes", "separation", "loss_kind"},
    "fair_classification": {"kind", "seed", "n", "n_samples", "d", "n_classes", "separation", "loss_kind", "rho"},
}
TOPOLOGY_KEYS = {"ring": {"kind", "n"}, "complete": {"kind", "n"}, "torus": {"kind", "n", "rows", "cols"},
                 "erdos_renyi": {"kind", "n", "p", "seed"}}
SOLVER_KEYS = {"alpha", "beta", "eta", "k", "T", "batch_size", "project_dual", "v_mixing_power", "seed",
               "init_perturbation", "precompute_power"}
METRIC_KEYS = {"L_weight", "probe_pairs", "record_node_grad_norm"}
OUTPUT_KEYS = {"dir", "format"}
FORMATS = ("csv", "jsonl")


@dataclass
class Issue:
    level: str  # "error" | "warning"
    field: str
    message: str

    def __str__(self):
        return f"{self.level}: {self.field}: {self.message}"


@dataclass
class ExperimentConfig:
    raw: dict
    text: str = ""
    source: str = "<config>"

    @property
    def name(self):
        return self.raw.get("name", "run")

    @property
    def mode(self):
        return self.raw.get("mode")

    @property
    def output_dir(self):
        return self.raw.get("output", {}).get("dir", "traces")

    @property
    def output_format(self):
        return self.raw.get("output", {}).get("format", "csv")

    def sweep_points(self):
        """Every (sweep assignment, seed) pair as a list of ``(overrides, label)``."""
        sweep = self.raw.get("sweep", {})
        keys = list(sweep)
        seeds = self.raw.get("seeds")
        points = []
        for combo in itertools.product(*(sweep[k] for k in keys)):
            base = dict(zip(keys, combo))
            for s in seeds if seeds is not None else [None]:
                assignment = dict(base)
                if s is not None:
                    assignment["solver.seed"] = s
                points.append(assignment)
        return points

    def resolved(self, assignment):
        """Raw config dict with one sweep assignment applied and the sweep table removed."""
        raw = copy.deepcopy(self.raw)
        raw.pop("sweep", None)
        raw.pop("seeds", None)
        for path, value in assignment.items():
            set_path(raw, path, value)
        return raw

    def line_of(self, dotted):
        return _line_of(self.text, dotted)


def _line_of(text, dotted):
    key = dotted.rsplit(".", 1)[-1]
    pat = re.compile(rf'^\s*"?{re.escape(key)}"?\s*=')
    for no, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return no
    return None


def set_path(d, path, value):
    parts = path.split(".")
    cur = d
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
        if not isinstance(cur, dict):
            raise ConfigError(f"cannot descend into non-table at {p!r}", field=path)
    cur[parts[-1]] = value


def parse_value(text):
    """Parse an override value as a TOML literal, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def parse_overrides(items):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = parse_value(value.strip())
    return out


def loads(text, overrides=None, source="<config>"):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML parse error: {exc}", line=int(m.group(1)) if m else None) from exc
    for path, value in (overrides or {}).items():
        set_path(raw, path, value)
    return ExperimentConfig(raw, text, source)


def load(path, overrides=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return loads(text, overrides, str(path))


# --- structural checks ---------------------------------------------------------------------


def _structural(cfg, raw, issues):
    def err(fld, msg):
        issues.append(Issue("error", fld, msg + _where(cfg, fld)))

    for key in raw:
        if key not in TOP_KEYS:
            err(key, "unknown top-level key")
    if raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        err("schema_version", f"unsupported schema version {raw.get('schema_version')!r}")
    if raw.get("mode") not in MODES:
        err("mode", f"must be exactly one of {MODES}, got {raw.get('mode')!r}")
    for section in ("problem", "topology", "solver"):
        if not isinstance(raw.get(section), dict):
            err(section, "missing table")
    if any(i.level == "error" for i in issues):
        return

    prob, topo, solver = raw["problem"], raw["topology"], raw["solver"]
    kind = prob.get("kind")
    if kind not in PROBLEM_KEYS:
        err("problem.kind", f"unknown problem kind {kind!r}")
    else:
        for key in prob:
            if key not in PROBLEM_KEYS[kind]:
                err(f"problem.{key}", f"unknown key for {kind}")
    if "seed" not in prob:
        err("problem.seed", "seed must be explicit")
    tkind = topo.get("kind")
    if tkind not in TOPOLOGY_KEYS:
        err("topology.kind", f"unknown topology kind {tkind!r}")
    else:
        for key in topo:
            if key not in TOPOLOGY_KEYS[tkind]:
                err(f"topology.{key}", f"unknown key for {tkind}")
        if tkind == "erdos_renyi" and "seed" not in topo:
            err("topology.seed", "seed must be explicit")
    if not isinstance(topo.get("n"), int) or topo.get("n") < 1:
        err("topology.n", "must be a positive integer")
    elif "n" in prob and prob["n"] != topo["n"]:
        err("problem.n", f"problem.n={prob['n']} disagrees with topology.n={topo['n']}")
    for key in solver:
        if key not in SOLVER_KEYS:
            err(f"solver.{key}", "unknown solver key")
    if "seed" not in solver and raw.get("seeds") is None:
        err("solver.seed", "seed must be explicit (solver.seed or top-level seeds)")
    for key in raw.get("metrics", {}):
        if key not in METRIC_KEYS:
            err(f"metrics.{key}", "unknown metrics key")
    lw = raw.get("metrics", {}).get("L_weight", "probe")
    if lw != "probe" and not (isinstance(lw, (int, float)) and lw > 0):
        err("metrics.L_weight", "must be 'probe' or a positive number")
    for key in raw.get("output", {}):
        if key not in OUTPUT_KEYS:
            err(f"output.{key}", "unknown output key")
    if raw.get("output", {}).get("format", "csv") not in FORMATS:
        err("output.format", f"must be one of {FORMATS}")
    if raw.get("mode") == "drsgda" and solver.get("batch_size") is None:
        err("solver.batch_size", "drsgda needs a batch size")
    try:
        solver_config(raw)
    except ConfigError as exc:
        issues.append(Issue("error", exc.field or "solver", exc.message + _where(cfg, exc.field or "solver")))
    except (TypeError, ValueError) as exc:
        err("solver", str(exc))


def _where(cfg, fld):
    line = cfg.line_of(fld) if cfg is not None else None
    return f" (line {line})" if line else ""


def _sweep_structure(cfg, issues):
    sweep = cfg.raw.get("sweep", {})
    if not isinstance(sweep, dict):
        issues.append(Issue("error", "sweep", "must be a table of dotted-path = [values]"))
        return
    for key, values in sweep.items():
        if not isinstance(values, list) or not values:
            issues.append(Issue("error", f"sweep.{key}", "sweep lists must be non-empty arrays" + _where(cfg, key)))
        if key.split(".")[0] not in ("problem", "topology", "solver", "metrics"):
            issues.append(Issue("error", f"sweep.{key}", "sweep keys must be dotted paths into problem/topology/solver/metrics"))
    seeds = cfg.raw.get("seeds")
    if seeds is not None and (not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds)):
        issues.append(Issue("error", "seeds", "must be a non-empty list of integers" + _where(cfg, "seeds")))


def solver_config(raw, k_value=None):
    s = dict(raw["solver"])
    k = s.get("k", "auto") if k_value is None else k_value
    if k == "auto":
        k = 1
    v = s.get("v_mixing_power", "k")
    return SolverConfig(
        alpha=float(s.get("alpha", 1.0)),
        beta=float(s.get("beta", 0.01)),
        eta=float(s.get("eta", 0.1)),
        k=int(k) if isinstance(k, (int, float)) and not isinstance(k, bool) else k,
        T=int(s.get("T", 100)),
        batch_size=None if s.get("batch_size") is None else int(s["batch_size"]),
        project_dual=bool(s.get("project_dual", True)),
        v_mixing_power=v if v == "k" else int(v),
        seed=int(s.get("seed", 0)),
        init_perturbation=float(s.get("init_perturbation", 0.0)),
        precompute_power=bool(s.get("precompute_power", False)),
    )


# --- building the run ------------------------------------------------------------------------


@dataclass
class Constants:
    """Probed problem/network constants recorded in every trace header."""

    L_blocks: dict
    L_hat: float
    D_hat: float
    M_hat: float
    lambda2: float
    lambda_n: float
    k: int
    required_k: int
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"L_hat": self.L_hat, "L_blocks": self.L_blocks, "D_hat": self.D_hat, "M_hat": self.M_hat,
                "lambda2": self.lambda2, "lambda_n": self.lambda_n, "k": self.k, "required_k": self.required_k,
                **self.extra}


def build(raw, probe_cache=None):
    """Instantiate ``(problem, W, SolverConfig, Constants)`` from a resolved config dict."""
    import numpy as np

    from .manifold import estimate_retraction_constant
    from .problems import make_problem
    from .problems.diagnostics import probe_gradient_bound, probe_lipschitz

    topo_raw = raw["topology"]
    topo = make_topology(topo_raw["kind"], int(topo_raw["n"]),
                         **{k: v for k, v in topo_raw.items() if k not in ("kind", "n")})
    W = build_metropolis(topo)
    kreq = required_k(W.lambda2, topo.n) if W.lambda2 > 0 else 1
    k = raw["solver"].get("k", "auto")
    k = kreq if k == "auto" else int(k)
    W = W.with_k(k)
    prob_raw = {kk: v for kk, v in raw["problem"].items() if kk not in ("kind", "n")}
    problem = make_problem(raw["problem"]["kind"], topo.n, **prob_raw)

    pairs = int(raw.get("metrics", {}).get("probe_pairs", 10_000))
    key = repr((sorted(raw["problem"].items()), topo.n, pairs))
    if probe_cache is not None and key in probe_cache:
        Lb, D, M = probe_cache[key]
    else:
        rng = np.random.default_rng([int(raw["problem"]["seed"]), 99])
        Lb = probe_lipschitz(problem, rng, pairs)
        D = probe_gradient_bound(problem, rng)
        M = float(estimate_retraction_constant(problem.d, problem.r, rng))
        if probe_cache is not None:
            probe_cache[key] = (Lb, D, M)
    cfg = solver_config(raw, k)
    consts = Constants({k2: v for k2, v in Lb.items() if k2 != "L"}, Lb["L"], D, M,
                       W.lambda2, W.lambda_n, k, kreq)
    return problem, W, cfg, consts


def dual_tracking_stable(W, eta, mu):
    """Whether the linearized dual consensus/tracking loop is stable for every mode of ``W^k``.

    On the disagreement eigenvector with eigenvalue ``lam`` of ``W^k`` the
    pair (dual error, tracker error) evolves with characteristic roots
    ``lam - c/2 +- sqrt(c^2/4 + c)``, ``c = eta * mu``.
    """
    c = eta * mu
    rad = math.sqrt(c * c / 4 + c)
    for lam in W.eigenvalues[1:] ** W.k:
        if abs(lam - c / 2 + rad) >= 1 or abs(lam - c / 2 - rad) >= 1:
            return False
    return True


def theory_warnings(raw, problem, W, cfg, consts, label=""):
    """Non-fatal warnings for step sizes outside the caps under which convergence is guaranteed."""
    out = []
    tag = f" [{label}]" if label else ""
    if W.lambda2 > 0 and cfg.k < consts.required_k:
        out.append(Issue("warning", "solver.k",
                         f"k={cfg.k} < required_k={consts.required_k} (lambda2^k <= 1/(2 sqrt(n)) needs k >= {consts.required_k}){tag}"))
    if cfg.eta > 1.0 / consts.L_hat:
        out.append(Issue("warning", "solver.eta", f"eta={cfg.eta:g} > 1/L_hat={1.0 / consts.L_hat:g} (L_hat={consts.L_hat:g}){tag}"))
    if cfg.alpha > 1.0 / consts.M_hat:
        out.append(Issue("warning", "solver.alpha", f"alpha={cfg.alpha:g} > 1/M_hat={1.0 / consts.M_hat:g}{tag}"))
    if raw["mode"] in ("drgda", "drsgda") and consts.D_hat > 0:
        delta1 = DELTA2 / (5.0 * math.sqrt(problem.r))
        cap = cfg.alpha * delta1 / (10.0 * consts.D_hat)
        if cfg.beta > cap:
            out.append(Issue("warning", "solver.beta",
                             f"beta={cfg.beta:g} > alpha*delta1/(10 D_hat)={cap:g} (delta1={delta1:g}, D_hat={consts.D_hat:g}){tag}"))
    if raw["mode"] in ("drgda", "drsgda") and not dual_tracking_stable(W, cfg.eta, problem.mu):
        out.append(Issue("warning", "solver.eta",
                         f"eta*mu={cfg.eta * problem.mu:g}: dual tracking loop is linearly unstable for W^{cfg.k}'s spectrum{tag}"))
    return out


def validate_config(cfg, probe_cache=None):
    """Return a list of :class:`Issue` (errors for structure, warnings for theory caps)."""
    issues = []
    _sweep_structure(cfg, issues)
    points = cfg.sweep_points() if not issues else [{}]
    for assignment in points:
        raw = cfg.resolved(assignment)
        point_issues = []
        _structural(cfg, raw, point_issues)
        # the run seed does not enter any checked condition, so keep it out of labels
        label = ", ".join(f"{k}={v}" for k, v in assignment.items() if k != "solver.seed")
        if any(i.level == "error" for i in point_issues):
            for i in point_issues:
                if label:
                    i.message += f" [{label}]"
            issues.extend(point_issues)
            continue
        try:
            problem, W, scfg, consts = build(raw, probe_cache)
        except DRGDAError as exc:
            issues.append(Issue("error", getattr(exc, "field", None) or "config", f"{exc} [{label}]" if label else str(exc)))
            continue
        except (TypeError, ValueError, KeyError) as exc:
            issues.append(Issue("error", "problem", f"{exc} [{label}]" if label else str(exc)))
            continue
        if raw["mode"] == "drsgda":
            m = min(problem.num_samples(i) for i in range(problem.n))
            if scfg.batch_size > m:
                issues.append(Issue("error", "solver.batch_size", f"batch_size={scfg.batch_size} exceeds local dataset size {m}"))
        issues.extend(theory_warnings(raw, problem, W, scfg, consts, label))
    seen, unique = set(), []
    for i in issues:
        key = (i.level, i.field, i.message)
        if key not in seen:
            seen.add(key)
            unique.append(i)
    return unique

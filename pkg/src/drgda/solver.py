"""Decentralized Riemannian gradient descent ascent with gradient tracking.

All node states are held as stacked arrays (node index first) and every
iteration is a synchronous round: mixes and gradients are computed from
time-t values before any time-(t+1) value is written.
"""

from dataclasses import dataclass, fields, replace
import logging
import math
import time

import numpy as np

from .errors import ConfigError, DRGDAError, NumericError, SingularityError
from .manifold import (
    ORTHONORMALITY_TOL,
    StiefelPoint,
    orthonormality_error,
    project_tangent,
    random_stiefel,
    random_tangent,
    retract_polar,
)
from .metrics import metric_point
from .network import MixingMatrix, mix

log = logging.getLogger(__name__)

MODES = ("drgda", "drsgda", "centralized", "drcs_consensus_only")
DIVERGENCE_THRESHOLD = 1e6


@dataclass(frozen=True)
class SolverConfig:
    """Step sizes, budget and switches for one run.

    ``v_mixing_power`` is ``"k"`` (mix the dual tracker with ``W^k`` like the
    other variables) or ``1`` (a single round of ``W``).  ``batch_size=None``
    means full local batches.
    """

    alpha: float = 1.0
    beta: float = 0.01
    eta: float = 0.1
    k: int = 1
    T: int = 100
    batch_size: int | None = None
    project_dual: bool = True
    v_mixing_power: str | int = "k"
    seed: int = 0
    init_perturbation: float = 0.0
    precompute_power: bool = False

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}", field="solver.alpha")
        if self.beta < 0:
            raise ConfigError(f"beta must be nonnegative, got {self.beta}", field="solver.beta")
        if self.eta <= 0:
            raise ConfigError(f"eta must be positive, got {self.eta}", field="solver.eta")
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be an integer >= 1, got {self.k}", field="solver.k")
        if int(self.T) != self.T or self.T < 1:
            raise ConfigError(f"T must be an integer >= 1, got {self.T}", field="solver.T")
        if self.batch_size is not None and (int(self.batch_size) != self.batch_size or self.batch_size < 1):
            raise ConfigError(f"batch_size must be a positive integer, got {self.batch_size}", field="solver.batch_size")
        if self.v_mixing_power not in ("k", 1):
            raise ConfigError(f"v_mixing_power must be 'k' or 1, got {self.v_mixing_power!r}", field="solver.v_mixing_power")
        if self.init_perturbation < 0:
            raise ConfigError("init_perturbation must be nonnegative", field="solver.init_perturbation")

    def v_power(self, W):
        return W.k if self.v_mixing_power == "k" else 1

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class NodeState:
    """One node's view of a :class:`NetworkState`."""

    x: StiefelPoint
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    prev_grad_x: np.ndarray
    prev_grad_y: np.ndarray
    prev_batch: np.ndarray | None = None


@dataclass
class NetworkState:
    """Stacked per-node iterates, trackers and the gradients cached at the iterates.

    ``grad_x`` / ``grad_y`` hold the (Riemannian / Euclidean) local gradients
    at ``(x, y)`` on ``batches``; the tracker recursion subtracts them in the
    next step.
    """

    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    grad_x: np.ndarray
    grad_y: np.ndarray
    batches: list | None = None
    comms: int = 0

    @property
    def n(self):
        return self.x.shape[0]

    def node(self, i):
        return NodeState(
            StiefelPoint(self.x[i]), self.y[i], self.u[i], self.v[i], self.grad_x[i], self.grad_y[i],
            None if self.batches is None else self.batches[i],
        )


@dataclass
class TraceRecord:
    t: int
    metric_total: float = math.nan
    grad_norm: float = math.nan
    primal_consensus: float = math.nan
    dual_gap: float = math.nan
    x_consensus_l2: float = math.nan
    y_consensus_l2: float = math.nan
    tracker_drift_u: float = math.nan
    tracker_drift_v: float = math.nan
    phi_hat: float = math.nan
    comms: int = 0
    wall_ms: float = 0.0
    node_grad_norm: float = math.nan
    node_grad_y_norm: float = math.nan
    local_grad_max: float = math.nan
    error: str | None = None


# --- initialization -----------------------------------------------------------------------


def initial_point(problem, seed):
    """Common starting point shared by all nodes: random Stiefel ``x``, ``y = P_Y(0)``."""
    rng = np.random.default_rng(seed)
    return random_stiefel(rng, problem.d, problem.r), problem.initial_dual()


def draw_batches(problem, q, rng):
    """One size-``q`` subset per node, without replacement, indices sorted."""
    out = []
    for i in range(problem.n):
        m = problem.num_samples(i)
        if q > m:
            raise ConfigError(f"batch_size {q} exceeds node {i}'s {m} samples", field="solver.batch_size")
        out.append(problem.resolve_batch(i, np.sort(rng.choice(m, size=q, replace=False))))
    return out


def init_state(problem, cfg, rng=None, x0=None, y0=None):
    """Replicate the common start at every node and evaluate the initial trackers.

    With ``cfg.init_perturbation > 0`` each node's ``x`` is moved along an
    independent random tangent direction of that Frobenius norm.
    """
    if x0 is None or y0 is None:
        xs0, ys0 = initial_point(problem, cfg.seed)
        x0 = xs0 if x0 is None else x0
        y0 = ys0 if y0 is None else y0
    n = problem.n
    xs = np.repeat(np.asarray(x0, dtype=float)[None], n, axis=0)
    ys = np.repeat(np.asarray(y0, dtype=float)[None], n, axis=0)
    if cfg.init_perturbation > 0:
        prng = np.random.default_rng([cfg.seed, 1])
        xs = retract_polar(xs, random_tangent(prng, xs, norm=cfg.init_perturbation))
    batches = None
    if cfg.batch_size is not None and rng is not None:
        batches = draw_batches(problem, cfg.batch_size, rng)
    gx, gy = problem.node_gradients(xs, ys, batches)
    return NetworkState(xs, ys, gx.copy(), gy.copy(), gx, gy, batches, 0)


# --- single steps -------------------------------------------------------------------------


def consensus_direction(xs, mixed, alpha):
    """``P_{T_x}(alpha * sum_j W^k_ij x_j)`` for every node."""
    return project_tangent(xs, alpha * mixed)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError("non-finite value in iterate or gradient")


def _gda_step(state, problem, W, cfg, batches):
    k = W.k
    pre = cfg.precompute_power
    mixed_x = mix(W, state.x, k, pre)
    w = project_tangent(state.x, state.u)
    x_new = retract_polar(state.x, consensus_direction(state.x, mixed_x, cfg.alpha) - cfg.beta * w)
    y_new = mix(W, state.y, k, pre) + cfg.eta * state.v
    if cfg.project_dual:
        y_new = problem.project_dual_stack(y_new)
    gx, gy = problem.node_gradients(x_new, y_new, batches)
    _check_finite(x_new, y_new, gx, gy)
    vp = cfg.v_power(W)
    u_new = mix(W, state.u, k, pre) + gx - state.grad_x
    v_new = mix(W, state.v, vp, pre) + gy - state.grad_y
    comms = state.comms + 3 * k + vp
    return NetworkState(x_new, y_new, u_new, v_new, gx, gy, batches, comms)


def drgda_step(state, problem, W, cfg):
    """One deterministic round: full local gradients in the tracker update."""
    return _gda_step(state, problem, W, cfg, None)


def drsgda_step(state, problem, W, cfg, rng):
    """One stochastic round: fresh size-``q`` batches at the new iterate.

    The tracker subtracts the gradient of the old iterate on the old batch,
    which is exactly the cached ``state.grad_x`` / ``state.grad_y``.
    """
    batches = draw_batches(problem, cfg.batch_size, rng)
    return _gda_step(state, problem, W, cfg, batches)


def drcs_step(state, problem, W, cfg):
    """Consensus-only update ``x_i <- R_{x_i}(alpha P_T(sum_j W^k_ij x_j))``."""
    mixed_x = mix(W, state.x, W.k, cfg.precompute_power)
    x_new = retract_polar(state.x, consensus_direction(state.x, mixed_x, cfg.alpha))
    _check_finite(x_new)
    return replace(state, x=x_new, comms=state.comms + W.k)


def centralized_step(x, y, problem, cfg):
    """Single-machine Riemannian GDA on the global objective."""
    g = project_tangent(x, problem.grad_x_F(x, y))
    x_new = retract_polar(x, -cfg.beta * g)
    y_new = y + cfg.eta * problem.grad_y_F(x, y)
    if cfg.project_dual:
        y_new = problem.project_dual(y_new)
    _check_finite(x_new, y_new)
    return x_new, y_new


# --- runs ---------------------------------------------------------------------------------


def iterate(problem, W, cfg, mode="drgda", x0=None, y0=None):
    """Yield the network state at t = 0, 1, ..., T-1.

    Centralized runs yield a one-row state whose trackers are unused.  Errors
    propagate to the caller.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}", field="mode")
    if mode == "drsgda" and cfg.batch_size is None:
        raise ConfigError("drsgda needs solver.batch_size", field="solver.batch_size")
    rng = np.random.default_rng([cfg.seed, 2])
    if mode == "centralized":
        if x0 is None or y0 is None:
            xs0, ys0 = initial_point(problem, cfg.seed)
            x0 = xs0 if x0 is None else x0
            y0 = ys0 if y0 is None else y0
        x, y = np.asarray(x0, dtype=float), np.asarray(y0, dtype=float)
        for t in range(cfg.T):
            z = np.zeros_like(x)[None]
            yield NetworkState(x[None], y[None], z, np.zeros_like(y)[None], z, np.zeros_like(y)[None])
            if t + 1 < cfg.T:
                x, y = centralized_step(x, y, problem, cfg)
        return
    state = init_state(problem, cfg, rng if mode == "drsgda" else None, x0, y0)
    for t in range(cfg.T):
        yield state
        if t + 1 == cfg.T:
            break
        if mode == "drgda":
            state = drgda_step(state, problem, W, cfg)
        elif mode == "drsgda":
            state = drsgda_step(state, problem, W, cfg, rng)
        else:
            state = drcs_step(state, problem, W, cfg)


def _record(t, state, problem, cfg, L_weight, mode, wall_ms):
    xs, ys = state.x, state.y
    if mode == "centralized":
        xs = np.repeat(xs, problem.n, axis=0)
        ys = np.repeat(ys, problem.n, axis=0)
    pt = metric_point(problem, xs, ys, L_weight, cfg.project_dual)
    m = pt.value
    rec = TraceRecord(
        t=t,
        metric_total=m.total,
        grad_norm=m.grad_norm,
        primal_consensus=m.primal_consensus,
        dual_gap=m.dual_gap,
        x_consensus_l2=float(np.mean(np.sum((xs - pt.xhat) ** 2, axis=(1, 2)))),
        y_consensus_l2=float(np.mean(np.sum((ys - ys.mean(axis=0)) ** 2, axis=tuple(range(1, ys.ndim))))),
        phi_hat=problem.F(pt.xhat, pt.ystar),
        comms=state.comms,
        wall_ms=wall_ms,
    )
    if mode in ("drgda", "drsgda"):
        gbar = state.grad_x.mean(axis=0)
        hbar = state.grad_y.mean(axis=0)
        rec.tracker_drift_u = float(np.linalg.norm(state.u.mean(axis=0) - gbar))
        rec.tracker_drift_v = float(np.linalg.norm(state.v.mean(axis=0) - hbar))
        rec.node_grad_norm = float(np.linalg.norm(gbar))
        rec.node_grad_y_norm = float(np.linalg.norm(hbar))
        rec.local_grad_max = float(np.max(np.linalg.norm(state.grad_x, axis=(1, 2))))
    return rec


def run(problem, W, cfg, mode="drgda", L_weight=None, x0=None, y0=None):
    """Run ``cfg.T`` iterations and return one :class:`TraceRecord` per iteration.

    On a numeric failure (singular retraction, non-finite values, metric above
    1e6) the partial trace is returned with a final record whose ``error``
    field describes the failure.
    """
    if not isinstance(W, MixingMatrix):
        raise ConfigError("W must be a MixingMatrix")
    L_weight = 1.0 if L_weight is None else L_weight
    records = []
    gen = iterate(problem, W, cfg, mode, x0, y0)
    t = 0
    tic = time.perf_counter()
    try:
        for state in gen:
            wall = (time.perf_counter() - tic) * 1e3
            rec = _record(t, state, problem, cfg, L_weight, mode, wall)
            records.append(rec)
            if not math.isfinite(rec.metric_total) or rec.metric_total > DIVERGENCE_THRESHOLD:
                raise NumericError(f"divergence at t={t}: metric {rec.metric_total:.3e}")
            t += 1
            tic = time.perf_counter()
    except (NumericError, SingularityError) as exc:
        log.warning("run aborted: %s", exc)
        records.append(TraceRecord(t=t, error=f"{type(exc).__name__}: {exc}"))
    return records


def check_feasible(state, tol=ORTHONORMALITY_TOL):
    """True when every node's ``x`` passes the orthonormality invariant."""
    return bool(np.all(orthonormality_error(state.x) <= tol))


__all__ = [
    "MODES", "SolverConfig", "NodeState", "NetworkState", "TraceRecord", "DRGDAError",
    "initial_point", "init_state", "draw_batches", "consensus_direction",
    "drgda_step", "drsgda_step", "drcs_step", "centralized_step", "iterate", "run", "check_feasible",
]

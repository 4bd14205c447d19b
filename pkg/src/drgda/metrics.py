"""Stationarity metric, inner-maximization oracle and gradient checks."""

from dataclasses import dataclass

import numpy as np

from .errors import OracleError
from .manifold import (
    induced_arithmetic_mean,
    project_tangent,
    random_stiefel,
    random_tangent,
    retract_polar,
)

MAX_ASCENT_STEPS = 100_000


@dataclass(frozen=True)
class MetricValue:
    grad_norm: float
    primal_consensus: float
    dual_gap: float

    @property
    def total(self):
        return self.grad_norm + self.primal_consensus + self.dual_gap


def ascent_maximizer(problem, x, tol=1e-10, y0=None, step=None, max_steps=MAX_ASCENT_STEPS):
    """Projected gradient ascent on ``F(x, .)`` until ``||y_{s+1} - y_s|| <= tol``.

    Returns ``(y, steps)``; ``steps`` counts updates taken before the one that
    triggered the stopping test, so starting at the maximizer gives 0.
    """
    step = 1.0 / problem.dual_smoothness if step is None else step
    y = problem.initial_dual() if y0 is None else np.array(y0, dtype=float)
    for s in range(max_steps):
        y_next = problem.project_dual(y + step * problem.grad_y_F(x, y))
        if np.linalg.norm(y_next - y) <= tol:
            return y_next, s
        y = y_next
    raise OracleError(f"inner ascent did not reach tol={tol:g} in {max_steps} steps")


def inner_maximizer(problem, x, tol=1e-10):
    """``y*(x) = argmax_{y in Y} F(x, y)``; closed form when the problem has one."""
    y = problem.closed_form_maximizer(x)
    if y is not None:
        return y
    return ascent_maximizer(problem, x, tol)[0]


def phi(problem, x, tol=1e-10):
    """Primal envelope ``Phi(x) = max_y F(x, y)``."""
    return problem.F(x, inner_maximizer(problem, x, tol))


def global_riemannian_grad(problem, x, y):
    return project_tangent(x, problem.grad_x_F(x, y))


@dataclass(frozen=True)
class MetricPoint:
    """Network summary points the metric is evaluated at."""

    xhat: np.ndarray
    ybar: np.ndarray
    ystar: np.ndarray
    value: MetricValue


def metric_point(problem, xs, ys, L_weight, project_dual=True, tol=1e-10):
    n = xs.shape[0]
    xhat = induced_arithmetic_mean(xs)
    ybar = ys.mean(axis=0)
    if project_dual:
        ybar = problem.project_dual(ybar)
    ystar = inner_maximizer(problem, xhat, tol)
    grad = float(np.linalg.norm(global_riemannian_grad(problem, xhat, ybar)))
    dev = float(np.sqrt(np.sum((xs - xhat) ** 2)))
    gap = float(np.linalg.norm(ybar - ystar))
    return MetricPoint(xhat, ybar, ystar, MetricValue(grad, dev / n, L_weight * gap / n))


def evaluate_metric(problem, xs, ys, L_weight, project_dual=True, tol=1e-10):
    """Convergence metric at stacked node states ``xs (n,d,r)`` and ``ys (n, ...)``.

    ``grad_norm`` is ``||grad_x F(xhat, ybar)||`` for the global objective at
    the induced arithmetic mean ``xhat`` and the dual mean ``ybar``;
    ``primal_consensus`` is ``(1/n) ||x - xhat||`` with the norm over the stacked
    network; ``dual_gap`` is ``(L/n) ||ybar - y*(xhat)||``.
    """
    return metric_point(problem, xs, ys, L_weight, project_dual, tol).value


def partial_potential(problem, xs, ys, L, eta, project_dual=True):
    """The two closed-form terms of the Lyapunov potential: ``Phi(xhat) + 8L/(mu eta) ||ybar - y*||^2``.

    Partial: the tracker-deviation terms need proof-internal constants and are omitted.
    """
    pt = metric_point(problem, xs, ys, L, project_dual)
    return problem.F(pt.xhat, pt.ystar) + 8.0 * L / (problem.mu * eta) * float(np.sum((pt.ybar - pt.ystar) ** 2))


def _rel(fd, an, scale):
    return abs(fd - an) / max(abs(an), 1e-2 * scale, 1e-300)


def finite_difference_check(problem, x, y, eps=1e-5, rng=None, node=None, directions=20):
    """Max relative error of central differences against analytic directional derivatives.

    For ``x`` the curve is ``t -> f(R_x(t u), y)`` along unit tangent ``u``;
    for ``y`` it is the straight line ``y + t v``.  ``node=None`` checks the
    global objective.  Errors are relative to ``|analytic|``, floored at 1% of
    ``||grad|| ||direction||`` so directions nearly orthogonal to the gradient
    do not dominate.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    rng = np.random.default_rng(0) if rng is None else rng
    if node is None:
        fn = problem.F
        gx = global_riemannian_grad(problem, x, y)
        gy = problem.grad_y_F(x, y)
    else:
        fn = lambda a, b: problem.f(node, a, b)  # noqa: E731
        gx = problem.riemannian_grad_x(node, x, y)
        gy = problem.grad_y(node, x, y)
    err_x = err_y = 0.0
    for _ in range(directions):
        u = random_tangent(rng, x, norm=1.0)
        fd = (fn(retract_polar(x, eps * u), y) - fn(retract_polar(x, -eps * u), y)) / (2 * eps)
        err_x = max(err_x, _rel(fd, float(np.sum(gx * u)), np.linalg.norm(gx)))
        v = rng.standard_normal(np.shape(y))
        v /= np.linalg.norm(v)
        fd = (fn(x, y + eps * v) - fn(x, y - eps * v)) / (2 * eps)
        err_y = max(err_y, _rel(fd, float(np.sum(gy * v)), np.linalg.norm(gy)))
    return err_x, err_y


def ystar_lipschitz_violations(problem, rng, kappa, pairs=200, slack=1e-3):
    """Count pairs with ``||y*(x1) - y*(x2)|| > kappa (1 + slack) ||x1 - x2||``."""
    bad = 0
    for _ in range(pairs):
        x1 = random_stiefel(rng, problem.d, problem.r)
        scale = 10.0 ** rng.uniform(-3, 0)
        x2 = retract_polar(x1, random_tangent(rng, x1, norm=scale))
        lhs = np.linalg.norm(inner_maximizer(problem, x1) - inner_maximizer(problem, x2))
        if lhs > kappa * (1 + slack) * np.linalg.norm(x1 - x2):
            bad += 1
    return bad

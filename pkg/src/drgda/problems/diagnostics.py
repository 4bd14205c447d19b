"""Runtime probes for the smoothness, concavity and noise assumptions."""

from itertools import combinations

import numpy as np

from ..manifold import random_stiefel, random_tangent, retract_polar
from ..metrics import inner_maximizer

L_SAFETY = 1.5


def _random_pair(problem, rng):
    """Two nearby points: a random base and a perturbation at a log-uniform scale."""
    x1 = random_stiefel(rng, problem.d, problem.r)
    y1 = problem.sample_dual(rng)
    scale = 10.0 ** rng.uniform(-3, 0)
    x2 = retract_polar(x1, random_tangent(rng, x1, norm=scale))
    y2 = problem.project_dual(y1 + scale * rng.standard_normal(problem.dual_shape))
    return x1, y1, x2, y2


def probe_lipschitz(problem, rng, pairs=10_000):
    """Largest observed gradient-difference ratios for the four Lipschitz blocks.

    Returns the per-block maxima ``L11, L12, L21, L22`` and
    ``L = 1.5 * max(block maxima)``.
    """
    best = dict(L11=0.0, L12=0.0, L21=0.0, L22=0.0)
    for _ in range(pairs):
        i = int(rng.integers(problem.n))
        x1, y1, x2, y2 = _random_pair(problem, rng)
        gx11, gy11 = problem.grad_x(i, x1, y1), problem.grad_y(i, x1, y1)
        gx21, gy21 = problem.grad_x(i, x2, y1), problem.grad_y(i, x2, y1)
        gx12, gy12 = problem.grad_x(i, x1, y2), problem.grad_y(i, x1, y2)
        dx = np.linalg.norm(x1 - x2)
        dy = np.linalg.norm(y1 - y2)
        if dx > 0:
            best["L11"] = max(best["L11"], np.linalg.norm(gx11 - gx21) / dx)
            best["L21"] = max(best["L21"], np.linalg.norm(gy11 - gy21) / dx)
        if dy > 0:
            best["L12"] = max(best["L12"], np.linalg.norm(gx11 - gx12) / dy)
            best["L22"] = max(best["L22"], np.linalg.norm(gy11 - gy12) / dy)
    out = {k: float(v) for k, v in best.items()}
    out["L"] = L_SAFETY * max(out.values())
    return out


def probe_gradient_bound(problem, rng, points=200):
    """Largest local Riemannian gradient ``||grad_x f_i(x, y*(x))||`` over random ``x``.

    The dual is placed at the global maximizer, the point the dual iterates
    track; a uniformly random ``y`` would overstate the bound by the
    radius of ``Y``.
    """
    worst = 0.0
    for _ in range(points):
        x = random_stiefel(rng, problem.d, problem.r)
        y = inner_maximizer(problem, x)
        for i in range(problem.n):
            worst = max(worst, float(np.linalg.norm(problem.riemannian_grad_x(i, x, y))))
    return worst


def strong_concavity_violations(problem, rng, trials=200, tol=1e-8):
    """Count triples where ``f_i(x, .)`` breaks the ``mu``-strong concavity inequality."""
    bad = 0
    for _ in range(trials):
        i = int(rng.integers(problem.n))
        x = random_stiefel(rng, problem.d, problem.r)
        y1, y2 = problem.sample_dual(rng), problem.sample_dual(rng)
        lhs = problem.f(i, x, y1)
        rhs = (
            problem.f(i, x, y2)
            + float(np.sum(problem.grad_y(i, x, y2) * (y1 - y2)))
            - 0.5 * problem.mu * float(np.sum((y1 - y2) ** 2))
        )
        if lhs > rhs + tol:
            bad += 1
    return bad


def all_batches(problem, i, q):
    """Every size-``q`` subset of node ``i``'s samples (small datasets only)."""
    return [np.array(c) for c in combinations(range(problem.num_samples(i)), q)]


def stochastic_gradient_variance(problem, i, x, y, q=1):
    """Exact variance of the size-``q`` mini-batch gradients at ``(x, y)`` over all subsets.

    Returns ``(var_x, var_y)`` where ``var_x`` uses the Riemannian gradient.
    Subsets are drawn without replacement, so ``var(q) = var(1) (m - q) / (q (m - 1))``.
    """
    gx_full = problem.riemannian_grad_x(i, x, y)
    gy_full = problem.grad_y(i, x, y)
    vx, vy = [], []
    for b in all_batches(problem, i, q):
        vx.append(np.sum((problem.riemannian_grad_x(i, x, y, b) - gx_full) ** 2))
        vy.append(np.sum((problem.grad_y(i, x, y, b) - gy_full) ** 2))
    return float(np.mean(vx)), float(np.mean(vy))

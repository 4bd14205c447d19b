"""Geometry of the Stiefel manifold St(d, r) = {X in R^{d x r} : X^T X = I_r}.

Every function here works on plain ``ndarray`` inputs and accepts a stack of
matrices with arbitrary leading dimensions (``(..., d, r)``), so the solver can
update all network nodes with one call.  :class:`StiefelPoint` and
:class:`TangentVector` are thin validated wrappers for API boundaries; they are
accepted anywhere an array is.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ManifoldError, SingularityError

ORTHONORMALITY_TOL = 1e-10
TANGENCY_TOL = 1e-8
REPAIR_TOL = 1e-6
SINGULAR_VALUE_FLOOR = 1e-12


def _arr(obj):
    return np.asarray(getattr(obj, "matrix", obj), dtype=float)


def _sym(a):
    return a + np.swapaxes(a, -1, -2)


def _mT(a):
    return np.swapaxes(a, -1, -2)


def orthonormality_error(x):
    """Return ``||X^T X - I||_F`` (one value per stacked matrix)."""
    x = _arr(x)
    r = x.shape[-1]
    return np.linalg.norm(_mT(x) @ x - np.eye(r), axis=(-2, -1))


def tangency_error(x, u):
    """Return ``||X^T U + U^T X||_F``; zero iff ``u`` is tangent at ``x``."""
    x, u = _arr(x), _arr(u)
    return np.linalg.norm(_sym(_mT(x) @ u), axis=(-2, -1))


def polar_factor(a):
    """Orthogonal polar factor ``A (A^T A)^{-1/2}`` computed as ``P Q^T`` from a thin SVD.

    Raises SingularityError when the smallest singular value drops below
    ``SINGULAR_VALUE_FLOOR``.
    """
    a = _arr(a)
    p, s, qt = np.linalg.svd(a, full_matrices=False)
    smin = float(np.min(s)) if s.size else 0.0
    if not np.isfinite(smin) or smin < SINGULAR_VALUE_FLOOR:
        raise SingularityError(
            f"polar factor undefined: smallest singular value {smin:.3e} < {SINGULAR_VALUE_FLOOR:g}"
        )
    return p @ qt


@dataclass(frozen=True)
class StiefelPoint:
    """A d x r matrix with orthonormal columns.

    Matrices whose orthonormality error lies in ``(1e-10, 1e-6]`` are silently
    re-orthonormalized by polar projection; anything worse is rejected.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2:
            raise DimensionError(f"expected a d x r matrix, got shape {m.shape}")
        d, r = m.shape
        if not d >= r >= 1:
            raise DimensionError(f"need d >= r >= 1, got d={d}, r={r}")
        err = float(orthonormality_error(m))
        if err > REPAIR_TOL or not np.isfinite(err):
            raise ManifoldError(f"||X^T X - I||_F = {err:.3e} exceeds repair tolerance {REPAIR_TOL:g}")
        if err > ORTHONORMALITY_TOL:
            m = polar_factor(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def d(self):
        return self.matrix.shape[0]

    @property
    def r(self):
        return self.matrix.shape[1]


@dataclass(frozen=True)
class TangentVector:
    """A d x r matrix ``U`` with ``X^T U + U^T X = 0`` for its base point ``X``."""

    matrix: np.ndarray
    base: StiefelPoint

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != self.base.matrix.shape:
            raise DimensionError(f"tangent shape {m.shape} != base shape {self.base.matrix.shape}")
        err = float(tangency_error(self.base.matrix, m))
        if err > TANGENCY_TOL * max(1.0, float(np.linalg.norm(m))):
            raise ManifoldError(f"not tangent: ||X^T U + U^T X||_F = {err:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def _check_shapes(x, y):
    if x.shape[-2:] != y.shape[-2:]:
        raise DimensionError(f"shape mismatch: base {x.shape} vs matrix {y.shape}")


def project_tangent(x, y):
    """Orthogonal projection of the ambient matrix ``y`` onto ``T_x St``: ``y - x sym(x^T y) / 2``."""
    x, y = _arr(x), _arr(y)
    _check_shapes(x, y)
    return y - 0.5 * x @ _sym(_mT(x) @ y)


def riemannian_gradient(x, euclid_grad):
    """Riemannian gradient under the embedded metric (projected Euclidean gradient)."""
    return project_tangent(x, euclid_grad)


def retract_polar(x, u):
    """Polar retraction ``R_x(u)``: the orthogonal polar factor of ``x + u``."""
    x, u = _arr(x), _arr(u)
    _check_shapes(x, u)
    return polar_factor(x + u)


def induced_arithmetic_mean(points):
    """Stiefel point closest in Frobenius norm to the Euclidean mean of ``points``.

    ``points`` is a sequence of d x r matrices or an ``(n, d, r)`` stack.  A
    rank-deficient Euclidean mean raises SingularityError: the points are too
    spread out for the mean to be defined.
    """
    pts = _stack(points)
    return polar_factor(pts.mean(axis=0))


def consensus_error(points):
    """Return ``(l2, linf)``: mean squared and max Frobenius distance to the IAM."""
    pts = _stack(points)
    xhat = induced_arithmetic_mean(pts)
    dist = np.linalg.norm(pts - xhat, axis=(-2, -1))
    return float(np.mean(dist**2)), float(np.max(dist))


def _stack(points):
    if isinstance(points, np.ndarray):
        pts = np.asarray(points, dtype=float)
    else:
        pts = np.stack([_arr(p) for p in points])
    if pts.ndim != 3 or pts.shape[0] == 0:
        raise DimensionError(f"expected a non-empty stack of d x r matrices, got shape {pts.shape}")
    return pts


def random_stiefel(rng, d, r, size=None):
    """Random point (or stack of points) on St(d, r): QR of a Gaussian, polar-corrected."""
    shape = (d, r) if size is None else (*np.atleast_1d(size), d, r)
    g = rng.standard_normal(shape)
    q, _ = np.linalg.qr(g)
    return polar_factor(q)


def random_tangent(rng, x, norm=None):
    """Random tangent vector at ``x``; rescaled to Frobenius ``norm`` if given."""
    x = _arr(x)
    u = project_tangent(x, rng.standard_normal(x.shape))
    if norm is not None:
        # St(1, 1) = {+-1} has a zero tangent space; leave u = 0 there
        cur = np.linalg.norm(u, axis=(-2, -1), keepdims=True)
        u = np.where(cur > 0, u * (norm / np.where(cur > 0, cur, 1.0)), 0.0)
    return u


def estimate_retraction_constant(d, r, rng, trials=200, norms=(0.2, 0.1, 0.05, 0.025)):
    """Empirical second-order constant ``M`` with ``||R_x(u) - (x+u)|| <= M ||u||^2``.

    Returns the largest observed ratio over ``trials`` random (x, direction)
    pairs, each evaluated along the halving sweep ``norms``.
    """
    worst = 0.0
    for _ in range(trials):
        x = random_stiefel(rng, d, r)
        direction = random_tangent(rng, x, norm=1.0)
        for s in norms:
            u = s * direction
            gap = np.linalg.norm(retract_polar(x, u) - (x + u))
            worst = max(worst, gap / s**2)
    return worst

"""The decentralized minimax problem interface.

A problem holds ``n`` local objectives ``f_i(x, y)``, each the average of
per-sample terms ``f_i(x, y; xi)`` over the node's local dataset, with
``x`` on St(d, r) and ``y`` in a closed convex set.  The global objective is
``F = (1/n) sum_i f_i``.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError
from ..manifold import project_tangent


@dataclass(frozen=True)
class SampleBatch:
    """Indices into node ``node``'s local dataset."""

    node: int
    indices: np.ndarray

    @property
    def size(self):
        return len(self.indices)


class MinimaxProblem(ABC):
    """Base class for ``min_{x in St(d,r)} max_{y in Y} (1/n) sum_i f_i(x, y)``.

    Subclasses implement the per-node evaluations with an optional ``batch``
    argument (an index array into the node's samples, ``None`` for the full
    local dataset) plus the projection onto ``Y``.
    """

    name = "problem"
    n: int
    d: int
    r: int
    dual_shape: tuple
    mu: float

    # --- per-node, per-batch evaluations -------------------------------------------------
    @abstractmethod
    def num_samples(self, i): ...

    @abstractmethod
    def f(self, i, x, y, batch=None): ...

    @abstractmethod
    def grad_x(self, i, x, y, batch=None):
        """Euclidean partial gradient in ``x`` (an ambient d x r matrix)."""

    @abstractmethod
    def grad_y(self, i, x, y, batch=None): ...

    @abstractmethod
    def project_dual(self, y): ...

    @abstractmethod
    def sample_dual(self, rng):
        """A random point of ``Y`` (used by probes and tests)."""

    def closed_form_maximizer(self, x):
        """``argmax_y F(x, y)`` in closed form, or ``None`` if unavailable."""
        return None

    @property
    def dual_smoothness(self):
        """Lipschitz constant of ``y -> grad_y F(x, y)`` (the ascent oracle uses ``1/L22``)."""
        return self.mu

    def describe(self):
        return {"kind": self.name, "n": self.n, "d": self.d, "r": self.r, "mu": self.mu}

    # --- helpers shared by all problems --------------------------------------------------
    def resolve_batch(self, i, batch):
        """Map ``batch`` to ``None`` when it covers the full local dataset."""
        if batch is None:
            return None
        idx = np.asarray(getattr(batch, "indices", batch), dtype=int)
        m = self.num_samples(i)
        if idx.ndim != 1 or idx.size == 0:
            raise DimensionError("a batch must be a non-empty 1-D index array")
        if idx.min() < 0 or idx.max() >= m:
            raise DimensionError(f"batch indices out of range for node {i} with {m} samples")
        if idx.size == m and np.array_equal(np.sort(idx), np.arange(m)):
            return None
        return idx

    def riemannian_grad_x(self, i, x, y, batch=None):
        return project_tangent(x, self.grad_x(i, x, y, batch))

    def node_gradients(self, xs, ys, batches=None):
        """Stacked ``(grad_x, grad_y)`` over all nodes; ``grad_x`` is Riemannian."""
        gx = np.empty_like(xs)
        gy = np.empty_like(ys)
        for i in range(self.n):
            b = None if batches is None else batches[i]
            gx[i] = self.grad_x(i, xs[i], ys[i], b)
            gy[i] = self.grad_y(i, xs[i], ys[i], b)
        return project_tangent(xs, gx), gy

    def project_dual_stack(self, ys):
        return np.stack([self.project_dual(y) for y in ys])

    def F(self, x, y):
        return float(np.mean([self.f(i, x, y) for i in range(self.n)]))

    def grad_x_F(self, x, y):
        return np.mean([self.grad_x(i, x, y) for i in range(self.n)], axis=0)

    def grad_y_F(self, x, y):
        return np.mean([self.grad_y(i, x, y) for i in range(self.n)], axis=0)

    def initial_dual(self):
        return self.project_dual(np.zeros(self.dual_shape))

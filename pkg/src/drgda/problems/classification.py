"""Orthonormal-weight linear classifiers with adversarial loss weighting.

Both problems use logits ``z = a^T w`` with ``w`` on St(d, r), ``r`` the
number of classes, and a per-sample loss ``l(w; a, label)``:

* ``DROWeighting``: ``F(w, p) = sum_i p_i l_i(w) - ||p - 1/n||^2`` with
  ``p`` on the n-simplex, ``l_i`` node ``i``'s average loss.  Locally
  ``f_i(w, p) = n p_i l_i(w) - ||p - 1/n||^2``.
* ``FairClassification``: ``f_i(w, u) = sum_c u_c L_c^i(w) - rho ||u||^2``
  with ``u`` on the class simplex and ``L_c^i`` the mean loss of node ``i``'s
  class-``c`` samples.  A sample of class ``c`` carries weight ``m_i / m_ic`` so
  that uniform sampling is unbiased.
"""

import numpy as np
from scipy.special import log_softmax, softmax

from ..errors import DataError, DimensionError, PartitionError
from .base import MinimaxProblem
from .simplex import project_simplex

LOSS_KINDS = ("squared", "softmax_cross_entropy")


def make_blobs(seed, n_samples, d, n_classes=3, separation=2.0, scale=1.0):
    """Gaussian class blobs with labels in round-robin order.

    Round-robin labels mean any contiguous shard of at least ``n_classes``
    samples contains every class.  Features are divided by ``sqrt(d)`` so
    sample norms stay O(1) as ``d`` grows.
    """
    rng = np.random.default_rng(seed)
    centers = separation * rng.standard_normal((n_classes, d))
    labels = np.arange(n_samples) % n_classes
    feats = centers[labels] + scale * rng.standard_normal((n_samples, d))
    return feats / np.sqrt(d), labels


def sample_losses(logits, labels, kind):
    """Per-sample losses and their gradients with respect to the logits."""
    onehot = np.zeros_like(logits)
    onehot[np.arange(len(labels)), labels] = 1.0
    if kind == "squared":
        diff = logits - onehot
        return 0.5 * np.sum(diff * diff, axis=1), diff
    if kind == "softmax_cross_entropy":
        lp = log_softmax(logits, axis=1)
        return -lp[np.arange(len(labels)), labels], softmax(logits, axis=1) - onehot
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def _partition(features, labels, n):
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if len(features) != len(labels):
        raise DimensionError("features and labels differ in length")
    if len(labels) % n:
        raise PartitionError(f"{len(labels)} samples cannot be split evenly across {n} nodes")
    return np.split(features, n), np.split(labels, n)


class _ShardedClassifier(MinimaxProblem):
    def __init__(self, features, labels, n, loss_kind, n_classes=None):
        if loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {loss_kind!r}; expected one of {LOSS_KINDS}")
        self.X, self.Y = _partition(features, labels, n)
        self.n = n
        self.loss_kind = loss_kind
        self.d = self.X[0].shape[1]
        self.r = int(n_classes if n_classes is not None else np.max(labels) + 1)
        if self.r > self.d:
            raise DimensionError(f"need d >= number of classes, got d={self.d}, classes={self.r}")
        self.m = len(self.Y[0])
        self.params = {}

    def num_samples(self, i):
        return self.m

    def _batch(self, i, batch):
        idx = self.resolve_batch(i, batch)
        if idx is None:
            return self.X[i], self.Y[i], slice(None)
        return self.X[i][idx], self.Y[i][idx], idx

    def node_losses(self, w):
        """Full-shard mean loss of every node."""
        return np.array([sample_losses(self.X[i] @ w, self.Y[i], self.loss_kind)[0].mean() for i in range(self.n)])

    def describe(self):
        return {"kind": self.name, **self.params, "loss_kind": self.loss_kind, "d": self.d, "r": self.r}


class DROWeighting(_ShardedClassifier):
    name = "dro_weighting"

    def __init__(self, features, labels, n, loss_kind="softmax_cross_entropy", n_classes=None):
        super().__init__(features, labels, n, loss_kind, n_classes)
        self.mu = 2.0
        self.dual_shape = (n,)
        self._center = np.full(n, 1.0 / n)

    def f(self, i, x, y, batch=None):
        a, lab, _ = self._batch(i, batch)
        loss = sample_losses(a @ x, lab, self.loss_kind)[0].mean()
        return float(self.n * y[i] * loss - np.sum((y - self._center) ** 2))

    def grad_x(self, i, x, y, batch=None):
        a, lab, _ = self._batch(i, batch)
        _, g = sample_losses(a @ x, lab, self.loss_kind)
        return (self.n * y[i] / len(lab)) * (a.T @ g)

    def grad_y(self, i, x, y, batch=None):
        a, lab, _ = self._batch(i, batch)
        loss = sample_losses(a @ x, lab, self.loss_kind)[0].mean()
        g = -2.0 * (y - self._center)
        g[i] += self.n * loss
        return g

    def project_dual(self, y):
        return project_simplex(y)

    def sample_dual(self, rng):
        return rng.dirichlet(np.ones(self.n))

    def closed_form_maximizer(self, x):
        return project_simplex(self._center + self.node_losses(x) / 2.0)

    def F(self, x, y):
        return float(y @ self.node_losses(x) - np.sum((y - self._center) ** 2))


class FairClassification(_ShardedClassifier):
    name = "fair_classification"

    def __init__(self, features, labels, n, rho=0.1, loss_kind="softmax_cross_entropy", n_classes=None):
        if rho <= 0:
            raise ValueError(f"rho must be positive, got {rho}")
        super().__init__(features, labels, n, loss_kind, n_classes)
        self.rho = float(rho)
        self.mu = 2.0 * self.rho
        self.dual_shape = (self.r,)
        self.weights = []
        for i in range(n):
            counts = np.bincount(self.Y[i], minlength=self.r)
            if np.any(counts == 0):
                missing = np.nonzero(counts == 0)[0].tolist()
                raise DataError(f"node {i} shard lacks classes {missing}")
            self.weights.append(self.m / counts[self.Y[i]])

    def describe(self):
        return {**super().describe(), "rho": self.rho}

    def _class_terms(self, i, x, batch):
        a, lab, sel = self._batch(i, batch)
        loss, g = sample_losses(a @ x, lab, self.loss_kind)
        wts = self.weights[i][sel]
        h = np.bincount(lab, weights=wts * loss, minlength=self.r) / len(lab)
        return a, lab, wts, g, h

    def class_losses(self, i, x):
        """``L_c^i(w)`` for every class ``c`` on node ``i``'s full shard."""
        return self._class_terms(i, x, None)[4]

    def f(self, i, x, y, batch=None):
        h = self._class_terms(i, x, batch)[4]
        return float(y @ h - self.rho * np.sum(y * y))

    def grad_x(self, i, x, y, batch=None):
        a, lab, wts, g, _ = self._class_terms(i, x, batch)
        return a.T @ (g * (wts * y[lab])[:, None]) / len(lab)

    def grad_y(self, i, x, y, batch=None):
        h = self._class_terms(i, x, batch)[4]
        return h - 2.0 * self.rho * y

    def project_dual(self, y):
        return project_simplex(y)

    def sample_dual(self, rng):
        return rng.dirichlet(np.ones(self.r))

    def closed_form_maximizer(self, x):
        losses = np.mean([self.class_losses(i, x) for i in range(self.n)], axis=0)
        return project_simplex(losses / (2.0 * self.rho))


def dro_weighting(features, labels, loss_kind, n):
    return DROWeighting(features, labels, n, loss_kind)


def fair_classification(features, labels_3class, rho, n, loss_kind="softmax_cross_entropy"):
    return FairClassification(features, labels_3class, n, rho=rho, loss_kind=loss_kind)

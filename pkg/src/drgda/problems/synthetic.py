import numpy as np

from ..manifold import project_tangent
from .base import MinimaxProblem


class SyntheticBilinear(MinimaxProblem):
    """``f_i(x, y) = <A_i x, y> - (mu/2) ||y - b_i||_F^2`` over a Frobenius ball.

    Node ``i`` owns ``m`` samples ``(A_is, b_is)``; the per-sample term is
    ``<A_is x, y> - (mu/2)||y||^2 + mu <y, b_is> - (mu/2)||b_i||^2`` so that
    its average over the node's samples is exactly ``f_i`` with
    ``A_i, b_i`` the sample means.  The ball radius is twice the largest
    ``||b_i|| + ||A_i||_F / mu``, which keeps every node's and the global
    maximizer ``y*(x) = b + A x / mu`` strictly inside for ``x`` on St(d, r).
    """

    name = "synthetic_bilinear"

    def __init__(self, A_samples, b_samples, mu):
        self.A_samples = np.asarray(A_samples, dtype=float)
        self.b_samples = np.asarray(b_samples, dtype=float)
        self.n, self.m, self.d, _ = self.A_samples.shape
        self.r = self.b_samples.shape[-1]
        self.mu = float(mu)
        self.dual_shape = (self.d, self.r)
        self.A = self.A_samples.mean(axis=1)
        self.b = self.b_samples.mean(axis=1)
        self.A_mean = self.A.mean(axis=0)
        self.b_mean = self.b.mean(axis=0)
        self._bsq = np.sum(self.b**2, axis=(1, 2))
        self.radius = 2.0 * float(
            np.max(np.linalg.norm(self.b, axis=(1, 2)) + np.linalg.norm(self.A, axis=(1, 2)) / self.mu)
        )
        self.params = {}

    @classmethod
    def generate(cls, seed, n, d, r, mu=1.0, samples_per_node=10, noise=0.5,
                 heterogeneity=0.3, b_scale=2.0, spectrum=(0.5, 1.0)):
        """Random instance with a well-conditioned global objective.

        The network average ``A`` has singular values spread evenly over
        ``spectrum``; node ``i`` gets ``A + heterogeneity * G_i`` and
        ``b + heterogeneity * b_scale * H_i`` with ``G_i, H_i`` Gaussian and
        centered across nodes, so the network means are exactly ``A`` and
        ``b``.  Per-sample noise is centered within each node the same way.
        """
        rng = np.random.default_rng(seed)
        U, _ = np.linalg.qr(rng.standard_normal((d, d)))
        V, _ = np.linalg.qr(rng.standard_normal((d, d)))
        A_mean = U @ np.diag(np.linspace(spectrum[0], spectrum[1], d)) @ V.T
        b_mean = b_scale * rng.standard_normal((d, r)) / np.sqrt(d * r)
        G = rng.standard_normal((n, d, d)) / np.sqrt(d)
        H = rng.standard_normal((n, d, r)) / np.sqrt(d * r)
        A = A_mean + heterogeneity * (G - G.mean(axis=0))
        b = b_mean + heterogeneity * b_scale * (H - H.mean(axis=0))
        NA = rng.standard_normal((n, samples_per_node, d, d)) / np.sqrt(d)
        Nb = rng.standard_normal((n, samples_per_node, d, r)) / np.sqrt(d * r)
        A_s = A[:, None] + noise * (NA - NA.mean(axis=1, keepdims=True))
        b_s = b[:, None] + noise * b_scale * (Nb - Nb.mean(axis=1, keepdims=True))
        prob = cls(A_s, b_s, mu)
        prob.params = {
            "seed": seed, "n": n, "d": d, "r": r, "mu": mu, "samples_per_node": samples_per_node,
            "noise": noise, "heterogeneity": heterogeneity, "b_scale": b_scale, "spectrum": list(spectrum),
        }
        return prob

    def describe(self):
        return {"kind": self.name, **self.params, "radius": self.radius}

    def num_samples(self, i):
        return self.m

    def _moments(self, i, batch):
        idx = self.resolve_batch(i, batch)
        if idx is None:
            return self.A[i], self.b[i]
        return self.A_samples[i, idx].mean(axis=0), self.b_samples[i, idx].mean(axis=0)

    def f(self, i, x, y, batch=None):
        A, b = self._moments(i, batch)
        return float(
            np.sum((A @ x) * y) - 0.5 * self.mu * np.sum(y * y) + self.mu * np.sum(y * b) - 0.5 * self.mu * self._bsq[i]
        )

    def grad_x(self, i, x, y, batch=None):
        A, _ = self._moments(i, batch)
        return A.T @ y

    def grad_y(self, i, x, y, batch=None):
        A, b = self._moments(i, batch)
        return A @ x - self.mu * (y - b)

    def node_gradients(self, xs, ys, batches=None):
        if batches is None or all(b is None for b in batches):
            gx = np.swapaxes(self.A, -1, -2) @ ys
            gy = self.A @ xs - self.mu * (ys - self.b)
            return project_tangent(xs, gx), gy
        return super().node_gradients(xs, ys, batches)

    def project_dual(self, y):
        nrm = np.linalg.norm(y)
        return y if nrm <= self.radius else y * (self.radius / nrm)

    def project_dual_stack(self, ys):
        nrm = np.linalg.norm(ys, axis=(1, 2), keepdims=True)
        return np.where(nrm <= self.radius, ys, ys * (self.radius / np.maximum(nrm, 1e-300)))

    def sample_dual(self, rng):
        y = rng.standard_normal(self.dual_shape)
        return y * (self.radius * rng.random() ** (1.0 / y.size) / np.linalg.norm(y))

    def node_maximizer(self, i, x):
        return self.b[i] + self.A[i] @ x / self.mu

    def closed_form_maximizer(self, x):
        return self.project_dual(self.b_mean + self.A_mean @ x / self.mu)

    def F(self, x, y):
        return float(
            np.sum((self.A_mean @ x) * y) - 0.5 * self.mu * np.mean(np.sum((y - self.b) ** 2, axis=(1, 2)))
        )

    def grad_x_F(self, x, y):
        return self.A_mean.T @ y

    def grad_y_F(self, x, y):
        return self.A_mean @ x - self.mu * (y - self.b_mean)

    def lipschitz_constants(self):
        """Exact block constants of the local objectives (for cross-checking the probe)."""
        op = float(np.max(np.linalg.norm(self.A, ord=2, axis=(1, 2))))
        return {"L11": 0.0, "L12": op, "L21": op, "L22": self.mu}


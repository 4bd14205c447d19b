"""Communication graphs, Metropolis mixing matrices and k-round neighbor averaging."""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DimensionError, SpectralError, TopologyError

STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class Topology:
    """Undirected simple graph on nodes ``0..n-1``."""

    n: int
    edges: frozenset
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError(f"need at least one node, got n={self.n}")
        norm = set()
        for i, j in self.edges:
            if i == j:
                raise TopologyError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise TopologyError(f"edge ({i}, {j}) out of range for n={self.n}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    def degrees(self):
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self, i):
        return sorted({b if a == i else a for a, b in self.edges if i in (a, b)})

    def is_connected(self):
        seen = {0}
        stack = [0]
        adj = {i: [] for i in range(self.n)}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        while stack:
            for j in adj[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == self.n

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "params": dict(self.params)}


def ring(n):
    edges = {(i, (i + 1) % n) for i in range(n)} if n > 1 else set()
    if n == 2:
        edges = {(0, 1)}
    return Topology(n, frozenset(edges), kind="ring")


def complete(n):
    edges = {(i, j) for i in range(n) for j in range(i + 1, n)}
    return Topology(n, frozenset(edges), kind="complete")


def torus(rows, cols):
    """2-D wraparound grid: every node linked to its horizontal and vertical neighbors."""
    n = rows * cols
    edges = set()
    for a in range(rows):
        for b in range(cols):
            i = a * cols + b
            for j in (a * cols + (b + 1) % cols, ((a + 1) % rows) * cols + b):
                if i != j:
                    edges.add((min(i, j), max(i, j)))
    return Topology(n, frozenset(edges), kind="torus", params={"rows": rows, "cols": cols})


def erdos_renyi(n, p, seed, max_tries=1000):
    """G(n, p) resampled until connected."""
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        mask = np.triu(rng.random((n, n)) < p, k=1)
        topo = Topology(
            n,
            frozenset(zip(*map(lambda a: a.tolist(), np.nonzero(mask)))),
            kind="erdos_renyi",
            params={"p": p, "seed": seed},
        )
        if topo.is_connected():
            return topo
    raise TopologyError(f"no connected G({n}, {p}) sample in {max_tries} tries")


def make_topology(kind, n, **params):
    """Build a topology from its config description ``{kind, n, params}``."""
    if kind == "ring":
        return ring(n)
    if kind == "complete":
        return complete(n)
    if kind == "torus":
        rows = int(params.get("rows", int(math.isqrt(n))))
        cols = int(params.get("cols", n // rows))
        if rows * cols != n:
            raise TopologyError(f"torus {rows}x{cols} does not have n={n} nodes")
        return torus(rows, cols)
    if kind == "erdos_renyi":
        return erdos_renyi(n, float(params["p"]), int(params["seed"]))
    raise TopologyError(f"unknown topology kind {kind!r}")


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly stochastic ``W`` with its spectrum and mixing power ``k``.

    ``lambda2`` is the largest eigenvalue magnitude after removing the
    eigenvalue 1, i.e. the contraction factor of one mixing round on the
    disagreement subspace.  ``eigenvalues`` are sorted in descending order.
    """

    w: np.ndarray
    lambda2: float
    lambda_n: float
    eigenvalues: np.ndarray
    k: int = 1

    def with_k(self, k):
        if int(k) < 1:
            raise SpectralError(f"mixing power must be >= 1, got {k}")
        return MixingMatrix(self.w, self.lambda2, self.lambda_n, self.eigenvalues, int(k))

    @property
    def n(self):
        return self.w.shape[0]


def spectral_data(w):
    eig = np.sort(np.linalg.eigvalsh(w))[::-1]
    lam2 = float(np.max(np.abs(eig[1:]))) if len(eig) > 1 else 0.0
    return eig, lam2, float(eig[-1])


def build_metropolis(topology, k=1):
    """Metropolis-Hastings weights ``w_ij = 1 / (1 + max(deg_i, deg_j))`` on a connected graph."""
    if not topology.is_connected():
        raise TopologyError(f"{topology.kind} graph with n={topology.n} is not connected")
    n = topology.n
    deg = topology.degrees()
    w = np.zeros((n, n))
    for i, j in topology.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    w[np.diag_indices(n)] = 1.0 - w.sum(axis=1)
    check_doubly_stochastic(w)
    eig, lam2, lam_n = spectral_data(w)
    w.setflags(write=False)
    eig.setflags(write=False)
    return MixingMatrix(w, lam2, lam_n, eig, int(k))


def check_doubly_stochastic(w, tol=STOCHASTIC_TOL):
    if not np.allclose(w, w.T, atol=tol, rtol=0):
        raise SpectralError("mixing matrix is not symmetric")
    if np.any(w < 0):
        raise SpectralError("mixing matrix has negative entries")
    ones = np.ones(w.shape[0])
    if np.max(np.abs(w @ ones - 1)) > tol or np.max(np.abs(ones @ w - 1)) > tol:
        raise SpectralError("mixing matrix is not doubly stochastic")


def required_k(lambda2, n):
    """Smallest k >= 1 with ``lambda2**k <= 1 / (2 sqrt(n))``."""
    if lambda2 >= 1:
        raise SpectralError(f"lambda2 = {lambda2} >= 1: graph is disconnected or W is invalid")
    if lambda2 < 0:
        raise SpectralError(f"lambda2 must be nonnegative, got {lambda2}")
    if lambda2 == 0:
        return 1
    target = 1.0 / (2.0 * math.sqrt(n))
    k = max(1, math.ceil(math.log(target) / math.log(lambda2)))
    # guard against log-ratio rounding on either side of an integer
    while lambda2**k > target:
        k += 1
    while k > 1 and lambda2 ** (k - 1) <= target:
        k -= 1
    return k


def mix(matrix, values, power=None, precomputed=False):
    """Apply ``W^power`` blockwise: ``out_i = sum_j (W^power)_ij values_j``.

    ``values`` is an ``(n, ...)`` array (or a length-n sequence of arrays).  The
    default applies ``power`` successive single rounds, one per communication
    step; ``precomputed=True`` multiplies by a dense ``W^power`` instead.
    """
    w = matrix.w if isinstance(matrix, MixingMatrix) else np.asarray(matrix)
    if power is None:
        power = matrix.k
    if power < 1:
        raise DimensionError(f"power must be >= 1, got {power}")
    vals = np.asarray(values, dtype=float)
    if vals.shape[0] != w.shape[0]:
        raise DimensionError(f"got {vals.shape[0]} node values for {w.shape[0]} nodes")
    flat = vals.reshape(vals.shape[0], -1)
    if precomputed:
        flat = np.linalg.matrix_power(w, power) @ flat
    else:
        for _ in range(power):
            flat = w @ flat
    return flat.reshape(vals.shape)

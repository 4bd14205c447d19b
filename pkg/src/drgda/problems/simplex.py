import numpy as np


def project_simplex(v):
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-and-threshold: with ``u`` sorted descending, find the largest ``j``
    with ``u_j + (1 - sum_{i<=j} u_i) / j > 0`` and shift by that threshold.
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u + (1.0 - css) / idx > 0)[0][-1]
    theta = (1.0 - css[rho]) / (rho + 1.0)
    p = np.maximum(v + theta, 0.0)
    # one renormalization step trims the last ulp of drift in the sum
    return p / p.sum()

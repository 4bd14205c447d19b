"""Decentralized Riemannian gradient descent ascent on the Stiefel manifold."""

__version__ = "0.1.0"

from .errors import ConfigError, DRGDAError  # noqa: E402
from .metrics import MetricValue, evaluate_metric  # noqa: E402
from .network import MixingMatrix, Topology, build_metropolis, make_topology, required_k  # noqa: E402
from .solver import MODES, SolverConfig, TraceRecord, run  # noqa: E402

__all__ = [
    "__version__", "ConfigError", "DRGDAError", "MetricValue", "evaluate_metric", "MixingMatrix",
    "Topology", "build_metropolis", "make_topology", "required_k", "MODES", "SolverConfig",
    "TraceRecord", "run",
]

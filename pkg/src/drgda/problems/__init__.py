from .base import MinimaxProblem, SampleBatch
from .classification import (
    DROWeighting,
    FairClassification,
    dro_weighting,
    fair_classification,
    make_blobs,
    sample_losses,
)
from .simplex import project_simplex
from .synthetic import SyntheticBilinear


def synthetic_bilinear(seed, n, d, r, mu, **kwargs):
    return SyntheticBilinear.generate(seed, n, d, r, mu, **kwargs)


def make_problem(kind, n, **params):
    """Build a built-in problem from its config description."""
    params = dict(params)
    if kind == "synthetic_bilinear":
        extra = {}
        for key, cast in (("samples_per_node", int), ("noise", float), ("heterogeneity", float), ("b_scale", float)):
            if key in params:
                extra[key] = cast(params[key])
        if "spectrum" in params:
            extra["spectrum"] = tuple(float(s) for s in params["spectrum"])
        return SyntheticBilinear.generate(
            int(params.get("seed", 0)), n, int(params.get("d", 10)), int(params.get("r", 2)),
            float(params.get("mu", 1.0)), **extra,
        )
    if kind in ("dro_weighting", "fair_classification"):
        seed = int(params.get("seed", 0))
        n_samples = int(params.get("n_samples", 30 * n))
        d = int(params.get("d", 10))
        n_classes = int(params.get("n_classes", 3))
        feats, labels = make_blobs(seed, n_samples, d, n_classes, float(params.get("separation", 2.0)))
        loss_kind = params.get("loss_kind", "softmax_cross_entropy")
        if kind == "dro_weighting":
            prob = DROWeighting(feats, labels, n, loss_kind, n_classes)
        else:
            prob = FairClassification(feats, labels, n, float(params.get("rho", 0.1)), loss_kind, n_classes)
        prob.params = {"seed": seed, "n": n, "n_samples": n_samples, "n_classes": n_classes,
                       "separation": float(params.get("separation", 2.0))}
        return prob
    raise ValueError(f"unknown problem kind {kind!r}")


__all__ = [
    "MinimaxProblem", "SampleBatch", "SyntheticBilinear", "DROWeighting", "FairClassification",
    "synthetic_bilinear", "dro_weighting", "fair_classification", "make_blobs", "make_problem",
    "project_simplex", "sample_losses",
]

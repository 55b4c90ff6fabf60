"""Co-modeling peptide primary structure as both a token sequence and a
coarse-grained bead graph: contrastive representation fusion, baseline
fusion operators, gradient attribution, and attribution-similarity
metrics, all on a small float64 autodiff engine."""

from . import attribution, autodiff, checkpoint, config, data, encoders, fusion, metrics, model_io, training

__version__ = "0.1.0"

__all__ = [
    "attribution",
    "autodiff",
    "checkpoint",
    "config",
    "data",
    "encoders",
    "fusion",
    "metrics",
    "model_io",
    "training",
    "__version__",
]

"""Active inference on discrete HMMs by constrained KL-divergence minimization."""

__version__ = "0.1.0"

from .probkit import (
    CategoricalDist,
    ConcentrationVec,
    LogWeights,
    cross_entropy,
    digamma,
    dirichlet_kl,
    entropy,
    kl,
    kl_chain_parts,
    log_beta,
    softmax,
)

__all__ = [
    "__version__",
    "CategoricalDist",
    "ConcentrationVec",
    "LogWeights",
    "cross_entropy",
    "digamma",
    "dirichlet_kl",
    "entropy",
    "kl",
    "kl_chain_parts",
    "log_beta",
    "softmax",
]

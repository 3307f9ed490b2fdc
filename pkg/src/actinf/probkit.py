"""Categorical-probability primitives and special-function kernels.

Conventions adopted package-wide:

* Probabilities are stored in linear domain; the log domain is entered only
  transiently inside updates.
* Zero probabilities are exact.  ``ln 0 = -inf`` and no epsilon flooring is
  applied anywhere.
* ``0 * ln 0 = 0`` and ``0 * (-inf) = 0`` in every entropy / divergence sum.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import (
    AllNegInfError,
    DimMismatchError,
    InvalidJointError,
    NonPositiveArgError,
)

SIMPLEX_TOL = 1e-12
COMPARE_TOL = 1e-10

_NEG_EULER = -0.5772156649015329


def _as_prob_array(x) -> np.ndarray:
    """Accept a CategoricalDist or a raw weight vector; return the ndarray."""
    if isinstance(x, CategoricalDist):
        return x.weights
    return np.asarray(x, dtype=float)


@dataclass(frozen=True, eq=False)
class CategoricalDist:
    """Probability vector on a finite label set.

    Weights must be non-negative and sum to one within ``SIMPLEX_TOL``.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise DimMismatchError("weights must be a non-empty 1-d vector")
        if np.any(w < 0):
            raise InvalidJointError("negative probability weight")
        if abs(float(w.sum()) - 1.0) > SIMPLEX_TOL:
            raise InvalidJointError(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def K(self) -> int:
        return self.weights.size

    @classmethod
    def uniform(cls, k: int) -> "CategoricalDist":
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def point_mass(cls, index: int, k: int) -> "CategoricalDist":
        w = np.zeros(k)
        w[index] = 1.0
        return cls(w)

    def __eq__(self, other):
        if not isinstance(other, CategoricalDist):
            return NotImplemented
        return self.K == other.K and bool(np.all(self.weights == other.weights))


@dataclass(frozen=True, eq=False)
class LogWeights:
    """Unnormalized log-domain scores; ``-inf`` entries are admissible."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise DimMismatchError("values must be a non-empty 1-d vector")
        if not np.any(np.isfinite(v)):
            raise AllNegInfError("log weights have no finite entry")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class ConcentrationVec:
    """Strictly positive Dirichlet concentration parameters."""

    alphas: np.ndarray
    alpha0: float = field(init=False)

    def __post_init__(self):
        a = np.array(self.alphas, dtype=float)
        if a.ndim != 1 or a.size < 1:
            raise DimMismatchError("alphas must be a non-empty 1-d vector")
        if np.any(a <= 0):
            raise NonPositiveArgError("concentration parameters must be > 0")
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "alpha0", float(a.sum()))

    @property
    def K(self) -> int:
        return self.alphas.size


def softmax(lw) -> CategoricalDist:
    """Normalized exponential of a log-weight vector.

    Stabilized by subtracting the max finite entry; ``-inf`` maps to an
    exact zero.  Raises :class:`AllNegInfError` when nothing is finite.
    """
    v = lw.values if isinstance(lw, LogWeights) else np.asarray(lw, dtype=float)
    finite = np.isfinite(v)
    if not finite.any():
        raise AllNegInfError("softmax of all -inf")
    e = np.exp(v - v[finite].max())
    return CategoricalDist(e / e.sum())


def entropy(p) -> float:
    """Shannon entropy in nats, with 0 ln 0 = 0.  Lies in [0, ln K]."""
    w = _as_prob_array(p)
    w = w[w > 0]
    return float(-(w @ np.log(w)))


def cross_entropy(q, p) -> float:
    """-sum q ln p; +inf exactly when q puts mass where p has none."""
    qw = _as_prob_array(q)
    pw = _as_prob_array(p)
    if qw.shape != pw.shape:
        raise DimMismatchError(f"shapes {qw.shape} vs {pw.shape}")
    m = qw > 0
    if np.any(pw[m] == 0):
        return math.inf
    return float(-(qw[m] @ np.log(pw[m])))


def kl(q, p) -> float:
    """Kullback-Leibler divergence of q from p (reverse divergence)."""
    return cross_entropy(q, p) - entropy(q)


def kl_chain_parts(q_joint, p_joint) -> tuple[float, float]:
    """Chain-rule decomposition of the KL divergence between two joints.

    For K1 x K2 joint tables, returns ``(marginal_kl, conditional_kl)``:
    the divergence between the first-coordinate marginals plus the
    q-marginal-weighted expectation of the per-row conditional divergences.
    The two parts sum to the divergence between the flattened joints.
    """
    qj = np.asarray(q_joint, dtype=float)
    pj = np.asarray(p_joint, dtype=float)
    if qj.shape != pj.shape or qj.ndim != 2:
        raise DimMismatchError(f"joint shapes {qj.shape} vs {pj.shape}")
    for name, j in (("q", qj), ("p", pj)):
        if np.any(j < 0):
            raise InvalidJointError(f"{name}_joint has negative mass")
        if abs(float(j.sum()) - 1.0) > 1e-9:
            raise InvalidJointError(f"{name}_joint sums to {j.sum()!r}")
    qm = qj.sum(axis=1)
    pm = pj.sum(axis=1)
    marginal = kl(qm, pm)
    conditional = 0.0
    for i in range(qj.shape[0]):
        if qm[i] == 0:
            continue
        if pm[i] == 0:
            conditional = math.inf
            break
        conditional += qm[i] * kl(qj[i] / qm[i], pj[i] / pm[i])
    return marginal, float(conditional)


def elementwise_log(x) -> np.ndarray:
    """Elementwise natural log; exact zeros map to -inf without warnings."""
    arr = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(arr)


def weighted_logs(weights, logs) -> float:
    """sum_k weights_k * logs_k with the 0 * (-inf) = 0 convention."""
    w = _as_prob_array(weights)
    v = np.asarray(logs, dtype=float)
    m = w > 0
    return float(w[m] @ v[m])


def log_matvec(ln_m: np.ndarray, v) -> np.ndarray:
    """(ln_m @ v) respecting 0 * (-inf) = 0; entries may be -inf."""
    w = _as_prob_array(v)
    m = w > 0
    return ln_m[:, m] @ w[m]


def quad_form_log(u, ln_m: np.ndarray, v) -> float:
    """u^T ln_m v with the 0 * (-inf) = 0 convention on both sides."""
    uw = _as_prob_array(u)
    vw = _as_prob_array(v)
    rm = uw > 0
    cm = vw > 0
    return float(uw[rm] @ ln_m[np.ix_(rm, cm)] @ vw[cm])


# --- special functions ------------------------------------------------------

# psi(x) ~ ln x - 1/(2x) - sum B_2n / (2n x^2n); coefficients of the Horner
# tail in u = 1/x^2, valid once the recurrence has pushed x above 6.
_DIGAMMA_MIN = 6.0


def digamma(x: float) -> float:
    """Digamma psi(x) for x > 0, accurate to ~1e-12 relative.

    Upward recurrence psi(x+1) = psi(x) + 1/x pushes the argument above 6,
    then an asymptotic (de Moivre) expansion finishes the job.
    """
    x = float(x)
    if not x > 0:
        raise NonPositiveArgError(f"digamma requires x > 0, got {x!r}")
    acc = 0.0
    while x < _DIGAMMA_MIN:
        acc -= 1.0 / x
        x += 1.0
    u = 1.0 / (x * x)
    tail = u * (
        1.0 / 12.0
        - u * (
            1.0 / 120.0
            - u * (
                1.0 / 252.0
                - u * (
                    1.0 / 240.0
                    - u * (1.0 / 132.0 - u * (691.0 / 32760.0 - u / 12.0))
                )
            )
        )
    )
    return acc + math.log(x) - 0.5 / x - tail


# Lanczos approximation, g = 7, 9 coefficients (double-precision standard set).
_LANCZOS_G = 7.0
_LANCZOS_C = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0 via the Lanczos series (reflection below 1/2)."""
    x = float(x)
    if not x > 0:
        raise NonPositiveArgError(f"log_gamma requires x > 0, got {x!r}")
    if x < 0.5:
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    z = x - 1.0
    a = _LANCZOS_C[0]
    for i, c in enumerate(_LANCZOS_C[1:], start=1):
        a += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * math.log(t) - t + math.log(a)


def log_beta(a) -> float:
    """ln of the multivariate beta function of a concentration vector."""
    alphas = a.alphas if isinstance(a, ConcentrationVec) else np.asarray(a, dtype=float)
    return float(sum(log_gamma(x) for x in alphas) - log_gamma(float(alphas.sum())))


def dirichlet_kl(a_post: ConcentrationVec, a_prior: ConcentrationVec) -> float:
    """KL divergence between Dirichlet distributions given their counts.

    ``a_post`` parameterizes the left (q) argument, ``a_prior`` the right.
    Exactly zero when the two concentration vectors coincide.
    """
    ap = a_post.alphas if isinstance(a_post, ConcentrationVec) else np.asarray(a_post, dtype=float)
    a = a_prior.alphas if isinstance(a_prior, ConcentrationVec) else np.asarray(a_prior, dtype=float)
    if ap.shape != a.shape:
        raise DimMismatchError(f"shapes {ap.shape} vs {a.shape}")
    psi0 = digamma(float(ap.sum()))
    cross = float(sum((x - y) * (digamma(x) - psi0) for x, y in zip(ap, a)))
    return log_beta(a) - log_beta(ap) + cross

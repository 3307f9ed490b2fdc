"""Discrete hidden Markov models and the brute-force inference oracles.

The model container is deliberately permissive (plain arrays, no hard
validation on construction) so that :func:`validate` can report problems;
every inference routine assumes a valid model.

Two independent exact-inference routines are provided: sequence
enumeration (:func:`exact_inference`, the ground truth) and a scaled
forward-backward recursion (:func:`forward_backward`).  They are
cross-checked against each other in the test suite, which is what allows
the rest of the package to be validated against either one.
"""

from dataclasses import dataclass
import json
import math

import numpy as np

from .errors import DimMismatchError, ModelContradictionError, TooLargeError
from .probkit import CategoricalDist, SIMPLEX_TOL

ENUMERATION_GUARD = 10**7
_ENUM_BLOCK = 200_000


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Row-stochastic matrix; every row is a categorical distribution."""

    rows: np.ndarray

    def __post_init__(self):
        r = np.array(self.rows, dtype=float)
        if r.ndim != 2:
            raise DimMismatchError("rows must form a 2-d matrix")
        if np.any(r < 0):
            raise DimMismatchError("negative entry in stochastic matrix")
        if np.any(np.abs(r.sum(axis=1) - 1.0) > SIMPLEX_TOL):
            raise DimMismatchError("row sums differ from 1")
        r.setflags(write=False)
        object.__setattr__(self, "rows", r)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape

    def row(self, i: int) -> CategoricalDist:
        return CategoricalDist(self.rows[i])


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, StochasticMatrix):
        return x.rows
    return np.asarray(x, dtype=float)


@dataclass(frozen=True, eq=False)
class Hmm:
    """Generative model (p0, A, B).

    p0 : (S,) start distribution over hidden states
    A  : (S, O) emission matrix, row s = p(o | s)
    B  : (S, S) transition matrix, row s = p(s' | s)

    Arrays are stored as given; run :func:`validate` to check invariants.
    """

    p0: np.ndarray
    A: np.ndarray
    B: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "p0", np.array(self.p0, dtype=float))
        object.__setattr__(self, "A", _as_matrix(self.A).copy())
        object.__setattr__(self, "B", _as_matrix(self.B).copy())
        for arr in (self.p0, self.A, self.B):
            arr.setflags(write=False)

    @property
    def S(self) -> int:
        return self.A.shape[0]

    @property
    def O(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class Trajectory:
    """A state path s_0..s_T with its emitted observations o_1..o_T."""

    states: tuple[int, ...]
    observations: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(int(s) for s in self.states))
        object.__setattr__(self, "observations", tuple(int(o) for o in self.observations))
        if len(self.observations) != len(self.states) - 1:
            raise DimMismatchError("need exactly one observation per transition step")


def validate(m: Hmm) -> list[str]:
    """Return a list of invariant violations; empty iff the model is valid."""
    problems: list[str] = []
    if m.p0.ndim != 1:
        problems.append("p0 is not a vector")
        return problems
    if m.A.ndim != 2 or m.B.ndim != 2:
        problems.append("A and B must be matrices")
        return problems
    S = m.A.shape[0]
    if m.B.shape != (S, S):
        problems.append(f"B shape {m.B.shape} does not match S={S}")
    if m.p0.shape != (S,):
        problems.append(f"p0 length {m.p0.shape[0]} does not match S={S}")
    if np.any(m.p0 < 0):
        for (i,) in zip(*np.nonzero(m.p0 < 0)):
            problems.append(f"p0[{i}] is negative")
    if abs(float(m.p0.sum()) - 1.0) > SIMPLEX_TOL:
        problems.append(f"p0 sums to {m.p0.sum()!r}")
    for name, mat in (("A", m.A), ("B", m.B)):
        neg = np.nonzero(mat < 0)
        for i, j in zip(*neg):
            problems.append(f"{name}[{i},{j}] is negative")
        sums = mat.sum(axis=1)
        for (i,) in zip(*np.nonzero(np.abs(sums - 1.0) > SIMPLEX_TOL)):
            problems.append(f"{name} row {i} sums to {sums[i]!r}")
    return problems


def log_joint(m: Hmm, traj: Trajectory) -> float:
    """ln p(s, o) for a full trajectory; -inf iff any factor is zero."""
    states, obs = traj.states, traj.observations
    if any(not 0 <= s < m.S for s in states):
        raise IndexError("state index out of range")
    if any(not 0 <= o < m.O for o in obs):
        raise IndexError("observation index out of range")
    factors = [m.p0[states[0]]]
    for tau in range(1, len(states)):
        factors.append(m.B[states[tau - 1], states[tau]])
        factors.append(m.A[states[tau], obs[tau - 1]])
    if any(f == 0.0 for f in factors):
        return -math.inf
    return float(sum(math.log(f) for f in factors))


def sample_trajectory(m: Hmm, T: int, seed: int) -> Trajectory:
    """Ancestral sampling of a length-T trajectory, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    states = [int(rng.choice(m.S, p=m.p0))]
    obs = []
    for _ in range(T):
        states.append(int(rng.choice(m.S, p=m.B[states[-1]])))
        obs.append(int(rng.choice(m.O, p=m.A[states[-1]])))
    return Trajectory(tuple(states), tuple(obs))


@dataclass(frozen=True, eq=False)
class ExactResult:
    """Evidence and exact posterior marginals for an observed prefix."""

    evidence: float
    state_marginals: np.ndarray    # (T+1, S), rows are p(s_tau | obs prefix)
    pairwise_marginals: np.ndarray  # (T, S, S), entry tau-1 is p(s_tau-1, s_tau | obs)

    def marginal(self, tau: int) -> CategoricalDist:
        return CategoricalDist(self.state_marginals[tau])


def exact_inference(m: Hmm, obs, T: int) -> ExactResult:
    """Brute-force posterior over s_0..s_T given the observed prefix o_1..o_t.

    Enumerates every state sequence, weighting by the joint with future
    observations marginalized out (emission rows sum to one, so times
    beyond the prefix contribute no factor).  Blocks are accumulated in a
    fixed index order, so results are bit-stable.
    """
    obs = tuple(int(o) for o in obs)
    t = len(obs)
    if t > T:
        raise DimMismatchError(f"observed prefix of length {t} exceeds horizon {T}")
    S = m.S
    n_seq = S ** (T + 1)
    if n_seq > ENUMERATION_GUARD:
        raise TooLargeError(f"S^(T+1) = {n_seq} exceeds guard {ENUMERATION_GUARD}")
    powers = S ** np.arange(T, -1, -1, dtype=np.int64)
    evidence = 0.0
    marg = np.zeros((T + 1, S))
    pair = np.zeros((T, S, S))
    for start in range(0, n_seq, _ENUM_BLOCK):
        idx = np.arange(start, min(start + _ENUM_BLOCK, n_seq), dtype=np.int64)
        states = (idx[:, None] // powers[None, :]) % S   # column tau holds s_tau
        w = m.p0[states[:, 0]].copy()
        for tau in range(1, T + 1):
            w *= m.B[states[:, tau - 1], states[:, tau]]
            if tau <= t:
                w *= m.A[states[:, tau], obs[tau - 1]]
        evidence += float(w.sum())
        for tau in range(T + 1):
            np.add.at(marg[tau], states[:, tau], w)
        for tau in range(1, T + 1):
            np.add.at(pair[tau - 1], (states[:, tau - 1], states[:, tau]), w)
    if evidence <= 0.0:
        raise ModelContradictionError("observed prefix has zero probability under the model")
    return ExactResult(evidence, marg / evidence, pair / evidence)


def forward_backward(m: Hmm, obs, T: int) -> ExactResult:
    """Scaled alpha-beta smoother over the same quantities as exact_inference.

    Independent of the enumeration path; steps beyond the observed prefix
    carry a unit likelihood factor.
    """
    obs = tuple(int(o) for o in obs)
    t = len(obs)
    if t > T:
        raise DimMismatchError(f"observed prefix of length {t} exceeds horizon {T}")
    S = m.S
    lik = np.ones((T + 1, S))
    for tau in range(1, t + 1):
        lik[tau] = m.A[:, obs[tau - 1]]
    alpha = np.zeros((T + 1, S))
    scale = np.ones(T + 1)
    alpha[0] = m.p0
    for tau in range(1, T + 1):
        a = (m.B.T @ alpha[tau - 1]) * lik[tau]
        scale[tau] = a.sum()
        if scale[tau] <= 0.0:
            raise ModelContradictionError("observed prefix has zero probability under the model")
        alpha[tau] = a / scale[tau]
    beta = np.ones((T + 1, S))
    for tau in range(T - 1, -1, -1):
        beta[tau] = (m.B @ (lik[tau + 1] * beta[tau + 1])) / scale[tau + 1]
    marg = alpha * beta
    marg /= marg.sum(axis=1, keepdims=True)
    pair = np.zeros((T, S, S))
    for tau in range(1, T + 1):
        p = alpha[tau - 1][:, None] * m.B * (lik[tau] * beta[tau])[None, :] / scale[tau]
        pair[tau - 1] = p / p.sum()
    return ExactResult(float(np.prod(scale[1:])), marg, pair)


def steady_state(B, max_iters: int = 10**5, tol: float = 1e-12) -> tuple[CategoricalDist, bool]:
    """Fixed point of pi^T B = pi^T by power iteration from uniform.

    Returns the final iterate together with a convergence flag; periodic
    chains may cycle and come back flagged False.
    """
    mat = _as_matrix(B)
    S = mat.shape[0]
    if mat.shape != (S, S):
        raise DimMismatchError("transition matrix must be square")
    pi = np.full(S, 1.0 / S)
    for _ in range(max_iters):
        nxt = pi @ mat
        nxt /= nxt.sum()
        if np.abs(nxt - pi).max() < tol:
            return CategoricalDist(nxt), True
        pi = nxt
    return CategoricalDist(pi), False


# --- file format --------------------------------------------------------------


def hmm_to_dict(m: Hmm) -> dict:
    d = {
        "S": m.S,
        "O": m.O,
        "p0": m.p0.tolist(),
        "A": m.A.tolist(),
        "B": m.B.tolist(),
    }
    if m.labels is not None:
        d["labels"] = list(m.labels)
    return d


def hmm_from_dict(d: dict) -> Hmm:
    for key in ("p0", "A", "B"):
        if key not in d:
            raise DimMismatchError(f"model document missing field {key!r}")
    m = Hmm(
        p0=np.asarray(d["p0"], dtype=float),
        A=np.asarray(d["A"], dtype=float),
        B=np.asarray(d["B"], dtype=float),
        labels=tuple(d["labels"]) if "labels" in d else None,
    )
    if "S" in d and int(d["S"]) != m.S:
        raise DimMismatchError(f"declared S={d['S']} but A has {m.S} rows")
    if "O" in d and int(d["O"]) != m.O:
        raise DimMismatchError(f"declared O={d['O']} but A has {m.O} columns")
    return m


def load_hmm(path) -> Hmm:
    with open(path) as fh:
        return hmm_from_dict(json.load(fh))


def save_hmm(m: Hmm, path) -> None:
    with open(path, "w") as fh:
        json.dump(hmm_to_dict(m), fh, indent=2, sort_keys=True)
        fh.write("\n")

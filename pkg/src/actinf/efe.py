"""Information-theoretic diagnostics on the predictive part of a trajectory.

The predictive branch of a belief trajectory defines per-time joints
q(s_tau, o_tau) = q(s_tau) p(o_tau | s_tau) that are independent across
future times, so mutual information, entropies and the anticipated
free-energy functionals all decompose additively over tau and can be
evaluated in closed form.

Three anticipated-free-energy variants are computed:

* ``efe_standard`` - pragmatic value minus mutual information,
* ``efe_lhs``      - predictive state divergence plus ambiguity,
* ``efe_exact``    - expected free energy of future observations with the
  per-time posterior q(s|o), no independence approximation.

These are diagnostics only; the engine optimizes the trajectory
divergence, never any of these functionals.
"""

from dataclasses import dataclass
import itertools
import math

import numpy as np

from .engine import BeliefTrajectory, divergence_split
from .errors import DimMismatchError, NoFutureError, TooLargeError
from .probkit import CategoricalDist, cross_entropy, elementwise_log, entropy, kl

FUTURE_SEQ_GUARD = 10**6


@dataclass(frozen=True, eq=False)
class PredictiveFactor:
    """Per-time predictive joint q(s_tau, o_tau) and its marginals."""

    tau: int
    q_s: np.ndarray    # (S,)
    emission: np.ndarray  # (S, O) reference to the model's A
    joint: np.ndarray  # (S, O), q_s[s] * A[s, o]
    q_o: np.ndarray    # (O,), column marginal

    @classmethod
    def build(cls, tau: int, q_s: np.ndarray, emission: np.ndarray) -> "PredictiveFactor":
        joint = q_s[:, None] * emission
        return cls(tau=tau, q_s=q_s, emission=emission, joint=joint,
                   q_o=joint.sum(axis=0))


@dataclass(frozen=True, eq=False)
class EfeReport:
    """Everything verify_bounds computes, slacks included.

    ``pragmatic_value`` is the sequence-level cross entropy of the
    predicted observations against the model's own future-observation
    marginal (exactly computed); ``bound_slacks`` maps each inequality or
    identity name to LHS - RHS.
    """

    mutual_information: float
    ambiguity: float
    pragmatic_value: float
    entropy_q_o: float
    entropy_q_s: float
    g_lhs: float
    g_standard: float
    g_exact: float
    kl_future: float
    bound_slacks: dict[str, float]


def predictive_factor(bt: BeliefTrajectory) -> list[PredictiveFactor]:
    """Per-time predictive joints for tau = t+1 .. T.

    Requires the trajectory to carry its linear-domain generative model
    (trajectories built from expected-log parameters have none).
    """
    if bt.t >= bt.T:
        raise NoFutureError("trajectory has no future timesteps")
    if bt.hmm is None:
        raise DimMismatchError("trajectory carries no linear-domain emission model")
    A = np.asarray(bt.hmm.A, dtype=float)
    return [PredictiveFactor.build(tau, bt.q[tau], A) for tau in range(bt.t + 1, bt.T + 1)]


def mutual_information(pf: list[PredictiveFactor]) -> float:
    """Predictive state/observation mutual information, summed over tau."""
    total = 0.0
    for f in pf:
        total += kl(f.joint.ravel(), np.outer(f.q_s, f.q_o).ravel())
    return total


def ambiguity(pf: list[PredictiveFactor]) -> float:
    """Expected emission entropy under the predicted state beliefs."""
    total = 0.0
    for f in pf:
        row_h = np.array([entropy(row) for row in f.emission])
        total += float(f.q_s @ row_h)
    return total


def _per_step_refs(p_o_ref, n: int) -> list[np.ndarray]:
    if isinstance(p_o_ref, CategoricalDist):
        return [p_o_ref.weights] * n
    arr = np.asarray(p_o_ref, dtype=float)
    if arr.ndim == 1:
        return [arr] * n
    if arr.ndim == 2 and arr.shape[0] == n:
        return list(arr)
    raise DimMismatchError(f"reference marginal shape {arr.shape} for {n} steps")


def pragmatic_value(pf: list[PredictiveFactor], p_o_ref) -> float:
    """Cross entropy of the predicted observation marginals to a reference.

    ``p_o_ref`` may be one distribution (reused each step, e.g. a
    preference) or a per-step stack.  +inf when the prediction puts mass
    where the reference has none.
    """
    refs = _per_step_refs(p_o_ref, len(pf))
    total = 0.0
    for f, ref in zip(pf, refs):
        if f.q_o.size != ref.size:
            raise DimMismatchError("reference marginal dimension mismatch")
        total += cross_entropy(f.q_o, ref)
    return total


def efe_standard(pf: list[PredictiveFactor], p_o_ref) -> float:
    """Pragmatic value minus mutual information."""
    return pragmatic_value(pf, p_o_ref) - mutual_information(pf)


def efe_lhs(bt: BeliefTrajectory, pf: list[PredictiveFactor]) -> float:
    """Predictive state divergence plus ambiguity."""
    _, f_future = divergence_split(bt)
    return f_future + ambiguity(pf)


def efe_exact(bt: BeliefTrajectory, pf: list[PredictiveFactor]) -> float:
    """Expected free energy of the unobserved future, evaluated closed-form.

    E_q[-ln p(s_>, o_>)] minus the expected entropy of the per-time
    posteriors q(s_tau | o_tau); the across-time independence of the
    predictive factorization makes observation-sequence enumeration
    unnecessary.  The transition chain starts from q_t.
    """
    energy = 0.0
    prev = bt.q[bt.t]
    for f in pf:
        ln_a = elementwise_log(f.emission)
        mask = f.joint > 0
        if np.any(np.isneginf(ln_a[mask])):
            energy = math.inf
        else:
            energy -= float(f.joint[mask] @ ln_a[mask])
        ln_b = bt.ln_b[f.tau - 1]
        rm, cm = prev > 0, f.q_s > 0
        sub = prev[rm] @ ln_b[np.ix_(rm, cm)] @ f.q_s[cm]
        energy -= float(sub)
        prev = f.q_s
    cond_entropy = 0.0
    for f in pf:
        for o in range(f.q_o.size):
            if f.q_o[o] == 0:
                continue
            cond_entropy += f.q_o[o] * entropy(f.joint[:, o] / f.q_o[o])
    return energy - cond_entropy


def future_obs_log_marginal(bt: BeliefTrajectory, obs_seq) -> float:
    """ln p(o_{t+1..T} = obs_seq) under the chain started at q_t.

    Exact forward recursion through the trajectory's own per-step
    transitions (recovered from the log domain, so this assumes genuine
    log-probabilities rather than expected-log parameters).
    """
    if bt.hmm is None:
        raise DimMismatchError("trajectory carries no linear-domain model")
    A = np.asarray(bt.hmm.A, dtype=float)
    v = bt.q[bt.t].copy()
    for tau, o in zip(range(bt.t + 1, bt.T + 1), obs_seq):
        B = np.exp(bt.ln_b[tau - 1])
        v = (B.T @ v) * A[:, int(o)]
    p = float(v.sum())
    return math.log(p) if p > 0 else -math.inf


def _sequence_cross_entropy(bt: BeliefTrajectory, pf: list[PredictiveFactor]) -> float:
    """E_{q(o_>)}[-ln p(o_>)] by enumeration of future observation sequences."""
    n = len(pf)
    O = pf[0].q_o.size
    if O**n > FUTURE_SEQ_GUARD:
        raise TooLargeError(f"O^(T-t) = {O**n} exceeds guard {FUTURE_SEQ_GUARD}")
    total = 0.0
    for seq in itertools.product(range(O), repeat=n):
        q_prob = 1.0
        for f, o in zip(pf, seq):
            q_prob *= f.q_o[o]
        if q_prob == 0.0:
            continue
        lp = future_obs_log_marginal(bt, seq)
        if lp == -math.inf:
            return math.inf
        total -= q_prob * lp
    return total


def verify_bounds(bt: BeliefTrajectory) -> EfeReport:
    """Evaluate the anticipated-free-energy quantities and their bound slacks.

    Slacks are LHS - RHS of, in order: the expected-future bound ``info``,
    its entropy-simplified variant ``simplest`` (state-entropy form, as
    stated by the source derivation) plus the observation-entropy variant
    ``simplest_obs`` that is tight at matched beliefs, the transposed
    bound ``efe``, and the identity residual ``gkl_identity`` relating the
    exact functional to the predictive divergence through the observation
    entropy.
    """
    pf = predictive_factor(bt)
    mi = mutual_information(pf)
    amb = ambiguity(pf)
    h_qo = sum(entropy(f.q_o) for f in pf)
    h_qs = sum(entropy(f.q_s) for f in pf)
    _, f_future = divergence_split(bt)
    crossent = _sequence_cross_entropy(bt, pf)
    g_exact = efe_exact(bt, pf)
    slacks = {
        "info": f_future - ((crossent - amb) - mi),
        "simplest": f_future - (crossent - h_qs),
        "simplest_obs": f_future - (crossent - h_qo),
        "efe": (f_future + amb) - (crossent - mi),
        "gkl_identity": g_exact - h_qo - f_future,
    }
    return EfeReport(
        mutual_information=mi,
        ambiguity=amb,
        pragmatic_value=crossent,
        entropy_q_o=h_qo,
        entropy_q_s=h_qs,
        g_lhs=f_future + amb,
        g_standard=crossent - mi,
        g_exact=g_exact,
        kl_future=f_future,
        bound_slacks=slacks,
    )

"""Mean-field belief engine over an observation-clamped HMM trajectory.

A :class:`BeliefTrajectory` carries factorized beliefs q_0..q_T over hidden
states together with the log-domain model parameters they are optimized
against.  Coordinate updates come in two flavours:

* prediction (future indices): softmax of the two transition messages,
* retrodiction (observed indices): the same plus the clamped-observation
  log-likelihood column.

Every update is an exact coordinate-descent step on the trajectory
divergence, so the divergence is non-increasing along any update schedule.

The engine is parameterized by log-domain matrices rather than by a model
object so the same updates serve time-dependent transitions (policies),
geometric transition mixtures, and expected-log parameters during
learning.  Exact zeros are supported: when every candidate state of an
update is weighted impossible by its neighbours, the update takes the
limit of vanishing transition mass (support goes to the states with the
least impossible-neighbour weight), which keeps deterministic models
consistent instead of failing on transients.
"""

from dataclasses import dataclass, replace
import math

import numpy as np

from .errors import (
    BadParamsError,
    DimMismatchError,
    HorizonExhaustedError,
    ModelContradictionError,
)
from .hmm import Hmm
from .probkit import SIMPLEX_TOL, elementwise_log, entropy, quad_form_log, softmax

FILTERING = "filtering"
SMOOTHING = "smoothing"

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 100


@dataclass(frozen=True, eq=False)
class BeliefTrajectory:
    """Beliefs q_0..q_T plus the log-domain model they are fitted to.

    ln_a : (S, O) log-emission scores
    ln_b : (T, S, S) log-transition scores; slice tau-1 governs the step
           from time tau-1 to tau
    q    : (T+1, S) belief rows; q[0] is pinned to p0 and never updated
    obs  : observed indices o_1..o_t, len(obs) == t
    hmm  : optional reference to the linear-domain generative model the
           log parameters came from (needed by predictive diagnostics)
    """

    p0: np.ndarray
    ln_a: np.ndarray
    ln_b: np.ndarray
    T: int
    t: int
    obs: tuple[int, ...]
    q: np.ndarray
    hmm: Hmm | None = None

    def __post_init__(self):
        if len(self.obs) != self.t:
            raise DimMismatchError(f"{len(self.obs)} observations but t={self.t}")
        if not 0 <= self.t <= self.T:
            raise DimMismatchError(f"t={self.t} outside [0, {self.T}]")
        if self.ln_b.shape != (self.T, self.S, self.S):
            raise DimMismatchError(f"ln_b shape {self.ln_b.shape}")
        if self.q.shape != (self.T + 1, self.S):
            raise DimMismatchError(f"q shape {self.q.shape}")
        if np.abs(self.q[0] - self.p0).max() > SIMPLEX_TOL:
            raise DimMismatchError("q_0 must equal the start distribution")
        if any(not 0 <= o < self.ln_a.shape[1] for o in self.obs):
            raise IndexError("observation index out of range")

    @property
    def S(self) -> int:
        return self.p0.size

    def belief(self, tau: int) -> np.ndarray:
        return self.q[tau]


@dataclass(frozen=True)
class SweepReport:
    """Per-update divergence trace of one sweep call."""

    divergence_before: float
    divergence_after: float
    per_update_divergences: tuple[float, ...]
    iterations: int
    converged: bool


def init_beliefs(m: Hmm, T: int) -> BeliefTrajectory:
    """Fresh trajectory: t=0, no observations, q_0 = p0, the rest uniform."""
    if T < 1:
        raise BadParamsError(f"horizon must be >= 1, got {T}")
    ln_b = np.broadcast_to(elementwise_log(m.B), (T, m.S, m.S)).copy()
    return from_log_params(elementwise_log(m.A), ln_b, np.asarray(m.p0, dtype=float),
                           T, obs=(), hmm=m)


def from_log_params(ln_a, ln_b, p0, T: int, obs=(), hmm: Hmm | None = None,
                    q: np.ndarray | None = None) -> BeliefTrajectory:
    """Build a trajectory from explicit log-domain parameters.

    Used by the planner (per-policy or mixed transitions) and by the
    learner (expected-log parameters).  Future beliefs start uniform
    unless ``q`` is supplied.
    """
    p0 = np.asarray(p0, dtype=float)
    ln_a = np.asarray(ln_a, dtype=float)
    ln_b = np.asarray(ln_b, dtype=float)
    obs = tuple(int(o) for o in obs)
    if q is None:
        q = np.full((T + 1, p0.size), 1.0 / p0.size)
        q[0] = p0
    return BeliefTrajectory(p0=p0, ln_a=ln_a, ln_b=ln_b, T=T, t=len(obs),
                            obs=obs, q=np.array(q, dtype=float), hmm=hmm)


def with_log_params(bt: BeliefTrajectory, ln_a=None, ln_b=None) -> BeliefTrajectory:
    """Swap the log-domain parameters, keeping beliefs and observations."""
    kwargs = {}
    if ln_a is not None:
        kwargs["ln_a"] = np.asarray(ln_a, dtype=float)
    if ln_b is not None:
        kwargs["ln_b"] = np.asarray(ln_b, dtype=float)
    return replace(bt, **kwargs)


# --- update kernels -----------------------------------------------------------


def _graded_matvec(ln_m: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split sum_j ln_m[:, j] v_j into a finite part and an impossible-mass part.

    Returns ``(f, w)`` where ``f`` collects the finite contributions under
    the 0 * (-inf) = 0 convention and ``w`` accumulates the probability
    mass v_j attached to -inf entries.
    """
    act = v > 0
    sub = ln_m[:, act]
    vv = v[act]
    neg = np.isneginf(sub)
    if not neg.any():
        return sub @ vv, np.zeros(ln_m.shape[0])
    return np.where(neg, 0.0, sub) @ vv, neg.astype(float) @ vv


def _grounded_softmax(f: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Softmax of f restricted to the least-impossible support.

    When some state has zero impossible mass this is the ordinary softmax
    over the feasible states.  Otherwise (a transient of exact-zero
    models) the support is the argmin of w, which is the limit of the
    update as the forbidden transition mass goes to zero.
    """
    feasible = w == 0.0
    if not feasible.any():
        feasible = w <= w.min() + 1e-12
    lw = np.where(feasible, f, -math.inf)
    return softmax(lw).weights


def _update_row(bt: BeliefTrajectory, q: np.ndarray, tau: int) -> np.ndarray:
    """New belief row for time tau given the current neighbour rows."""
    f, w = _graded_matvec(bt.ln_b[tau - 1].T, q[tau - 1])
    if tau < bt.T:
        f2, w2 = _graded_matvec(bt.ln_b[tau], q[tau + 1])
        f, w = f + f2, w + w2
    if tau <= bt.t:
        col = bt.ln_a[:, bt.obs[tau - 1]]
        neg = np.isneginf(col)
        if neg.all():
            raise ModelContradictionError(
                f"observation {bt.obs[tau - 1]} at time {tau} is impossible "
                "from every state")
        f = f + np.where(neg, 0.0, col)
        w = w + neg.astype(float)
    return _grounded_softmax(f, w)


def prediction_update(bt: BeliefTrajectory, tau: int) -> BeliefTrajectory:
    """Coordinate update of a future belief q_tau (t < tau <= T)."""
    if not bt.t < tau <= bt.T:
        raise IndexError(f"prediction index {tau} outside ({bt.t}, {bt.T}]")
    q = bt.q.copy()
    q[tau] = _update_row(bt, q, tau)
    return replace(bt, q=q)


def retrodiction_update(bt: BeliefTrajectory, tau: int) -> BeliefTrajectory:
    """Coordinate update of an observed belief q_tau (1 <= tau <= t)."""
    if not 1 <= tau <= bt.t:
        raise IndexError(f"retrodiction index {tau} outside [1, {bt.t}]")
    q = bt.q.copy()
    q[tau] = _update_row(bt, q, tau)
    return replace(bt, q=q)


# --- objective ------------------------------------------------------------------


def _split_terms(p0, ln_a, ln_b, obs, q, t, T) -> tuple[float, float]:
    past = 0.0
    for tau in range(1, t + 1):
        past -= entropy(q[tau])
        f, w = _obs_term(ln_a, obs[tau - 1], q[tau])
        past -= f if w == 0.0 else -math.inf
        past -= quad_form_log(q[tau - 1], ln_b[tau - 1], q[tau])
    future = 0.0
    for tau in range(t + 1, T + 1):
        future -= entropy(q[tau])
        future -= quad_form_log(q[tau - 1], ln_b[tau - 1], q[tau])
    return past, future


def _obs_term(ln_a, o, q_row) -> tuple[float, float]:
    col = ln_a[:, o]
    m = q_row > 0
    sub = col[m]
    neg = np.isneginf(sub)
    if neg.any():
        return 0.0, float(q_row[m][neg].sum())
    return float(q_row[m] @ sub), 0.0


def divergence(bt: BeliefTrajectory) -> float:
    """KL divergence of the constrained belief factorization from the model.

    With all observations clamped (t = T) this is the variational free
    energy of the observation sequence; with t = 0 it is the divergence
    of the predictive state factorization from the model's state chain.
    """
    past, future = _split_terms(bt.p0, bt.ln_a, bt.ln_b, bt.obs, bt.q, bt.t, bt.T)
    return past + future


def divergence_split(bt: BeliefTrajectory) -> tuple[float, float]:
    """(F_past, F_future): observed-prefix free energy and predictive KL.

    The two parts sum to :func:`divergence`.  F_future is the divergence
    of the factorized future beliefs from the transition chain started at
    q_t.
    """
    return _split_terms(bt.p0, bt.ln_a, bt.ln_b, bt.obs, bt.q, bt.t, bt.T)


# --- sweeping -------------------------------------------------------------------


def _schedule(bt: BeliefTrajectory, mode: str) -> list[int]:
    if mode == FILTERING:
        past = [bt.t] if bt.t >= 1 else []
    elif mode == SMOOTHING:
        past = list(range(1, bt.t + 1))
    else:
        raise BadParamsError(f"unknown sweep mode {mode!r}")
    ascending = past + list(range(bt.t + 1, bt.T + 1))
    return ascending + ascending[::-1]


def sweep(bt: BeliefTrajectory, mode: str = SMOOTHING,
          max_iters: int = DEFAULT_MAX_ITERS, tol: float = DEFAULT_TOL,
          ) -> tuple[BeliefTrajectory, SweepReport]:
    """Iterate asynchronous coordinate updates until the divergence settles.

    One pass applies the mode's update range in ascending order and then
    again in descending order, always using the latest neighbour values.
    Filtering leaves q_1..q_{t-1} untouched; smoothing revisits the whole
    past.  Convergence is declared when the divergence decreases by less
    than ``tol`` between passes; the report records the divergence after
    every single update.
    """
    order = _schedule(bt, mode)
    q = bt.q.copy()
    work = replace(bt, q=q)
    before = divergence(work)
    per_update: list[float] = []
    prev = before
    current = before
    converged = False
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        for tau in order:
            q[tau] = _update_row(work, q, tau)
            current = divergence(work)
            per_update.append(current)
        if math.isfinite(prev) and math.isfinite(current) and prev - current < tol:
            converged = True
            break
        prev = current
    out = replace(bt, q=q)
    report = SweepReport(before, current, tuple(per_update), iterations, converged)
    return out, report


def advance(bt: BeliefTrajectory, new_obs: int) -> BeliefTrajectory:
    """Step the cycle: record a new observation and move the present time.

    Beliefs are left untouched; the caller re-sweeps.  The factorization
    constraint at the new present time switches from the predictive
    emission product to a clamped point mass on ``new_obs``.
    """
    if bt.t >= bt.T:
        raise HorizonExhaustedError(f"present time already at horizon {bt.T}")
    new_obs = int(new_obs)
    if not 0 <= new_obs < bt.ln_a.shape[1]:
        raise IndexError(f"observation {new_obs} out of range")
    return replace(bt, t=bt.t + 1, obs=bt.obs + (new_obs,))

"""Policies, divergence planners, policy posteriors, and hierarchy folding.

A policy is a fixed sequence of action indices; each action is a
row-stochastic transition matrix.  Planning scores every candidate policy
and never mutates the engine's machinery: the engine simply runs with the
policy's time-indexed transitions substituted for the homogeneous ones.

Two planners are provided.  The reverse planner sweeps beliefs per policy
and scores the divergence of the predicted future states from a stationary
preference; the forward planner evaluates the closed-form divergence of
the preference from each policy's chain and needs no sweeps at all.

For inference *about* policies, :func:`alternate_policy_state` runs the
block-coordinate loop on the joint over (policy, states, observations):
policy posterior from per-policy divergences of the shared beliefs, then
one belief sweep under the posterior-weighted geometric transition
mixture.  The joint divergence is non-increasing across half-steps.
"""

from dataclasses import dataclass, replace
import json
import math

import numpy as np

from . import engine
from .engine import BeliefTrajectory, SMOOTHING, divergence_split, from_log_params, sweep
from .errors import DimMismatchError, EmptyPolicySetError
from .hmm import Hmm, validate
from .probkit import CategoricalDist, elementwise_log, entropy, kl, quad_form_log, softmax


@dataclass(frozen=True, eq=False)
class ActionModel:
    """Catalog of named actions, each a row-stochastic S x S matrix."""

    names: tuple[str, ...]
    matrices: np.ndarray  # (N_a, S, S)

    def __post_init__(self):
        mats = np.array(self.matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise DimMismatchError(f"action stack shape {mats.shape}")
        if len(self.names) != mats.shape[0]:
            raise DimMismatchError("one name per action required")
        if np.any(mats < 0) or np.any(np.abs(mats.sum(axis=2) - 1.0) > 1e-12):
            raise DimMismatchError("every action matrix must be row-stochastic")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def count(self) -> int:
        return self.matrices.shape[0]

    @property
    def S(self) -> int:
        return self.matrices.shape[1]

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class Policy:
    """A fixed sequence of action indices a_1..a_T."""

    steps: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(int(a) for a in self.steps))

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True, eq=False)
class PreferenceDist:
    """Stationary preference distribution over hidden states."""

    p_c: CategoricalDist

    @classmethod
    def from_weights(cls, w) -> "PreferenceDist":
        return cls(CategoricalDist(np.asarray(w, dtype=float)))


@dataclass(frozen=True, eq=False)
class PolicyBelief:
    """Candidate policies with a log prior and current posterior over them."""

    policies: tuple[Policy, ...]
    log_prior: np.ndarray
    posterior: CategoricalDist

    def __post_init__(self):
        lp = np.array(self.log_prior, dtype=float)
        if lp.size != len(self.policies) or self.posterior.K != len(self.policies):
            raise DimMismatchError("policies / prior / posterior sizes disagree")
        lp.setflags(write=False)
        object.__setattr__(self, "log_prior", lp)
        object.__setattr__(self, "policies", tuple(self.policies))

    @classmethod
    def uniform(cls, policies) -> "PolicyBelief":
        policies = tuple(policies)
        if not policies:
            raise EmptyPolicySetError("no policies")
        n = len(policies)
        return cls(policies, np.zeros(n), CategoricalDist.uniform(n))


@dataclass(frozen=True)
class ScoredPolicy:
    index: int
    policy: Policy
    score: float


@dataclass(frozen=True)
class AlternationTrace:
    """Joint divergence after each half-step of the alternating loop."""

    values: tuple[float, ...]
    converged: bool


def _check_policies(policies, am: ActionModel, T: int):
    policies = tuple(policies)
    if not policies:
        raise EmptyPolicySetError("no policies to score")
    for p in policies:
        if len(p) != T:
            raise DimMismatchError(f"policy length {len(p)} != horizon {T}")
        if any(not 0 <= a < am.count for a in p.steps):
            raise DimMismatchError("action index out of range")
    return policies


def policy_log_transitions(am: ActionModel, pol: Policy) -> np.ndarray:
    """(T, S, S) stack of log transitions; slice tau-1 is ln B of action a_tau."""
    return elementwise_log(am.matrices[list(pol.steps)])


def policy_trajectory(m: Hmm, am: ActionModel, pol: Policy, obs, T: int,
                      mode: str = SMOOTHING, max_iters: int = engine.DEFAULT_MAX_ITERS,
                      tol: float = engine.DEFAULT_TOL) -> BeliefTrajectory:
    """Converged beliefs under one policy's time-indexed transitions."""
    (pol,) = _check_policies([pol], am, T)
    if am.S != m.S:
        raise DimMismatchError("action dimension does not match the model")
    bt = from_log_params(elementwise_log(m.A), policy_log_transitions(am, pol),
                         m.p0, T, obs=obs, hmm=m)
    out, _ = sweep(bt, mode=mode, max_iters=max_iters, tol=tol)
    return out


def plan_reverse(m: Hmm, am: ActionModel, policies, obs, pref: PreferenceDist,
                 t: int | None = None, T: int | None = None) -> list[ScoredPolicy]:
    """Rank policies by the divergence of predicted states from the preference.

    Per policy, beliefs are swept under its transitions and the score is
    the summed per-step divergence of q(s_tau | policy) from p_c over the
    future indices.  Ascending ranking; ties break on the lower index.
    """
    obs = tuple(int(o) for o in obs)
    if T is None:
        raise DimMismatchError("planning horizon T is required")
    if t is None:
        t = len(obs)
    if t != len(obs):
        raise DimMismatchError(f"t={t} but {len(obs)} observations supplied")
    policies = _check_policies(policies, am, T)
    scored = []
    for i, pol in enumerate(policies):
        bt = policy_trajectory(m, am, pol, obs, T)
        score = sum(kl(bt.q[tau], pref.p_c.weights) for tau in range(t + 1, T + 1))
        scored.append(ScoredPolicy(i, pol, float(score)))
    return sorted(scored, key=lambda s: (s.score, s.index))


def plan_forward(am: ActionModel, policies, pref: PreferenceDist,
                 t: int, T: int) -> list[ScoredPolicy]:
    """Rank policies by the closed-form forward divergence, no sweeps.

    Per future step the contribution is p_c . ln p_c - p_c^T (ln B) p_c;
    a transition zero hit by the preference's support scores +inf and
    sorts after every finite plan.
    """
    policies = _check_policies(policies, am, T)
    p_c = pref.p_c.weights
    if am.S != p_c.size:
        raise DimMismatchError("preference dimension does not match actions")
    neg_h = -entropy(p_c)
    ln_mats = elementwise_log(am.matrices)
    scored = []
    for i, pol in enumerate(policies):
        score = 0.0
        for tau in range(t + 1, T + 1):
            term = neg_h - quad_form_log(p_c, ln_mats[pol.steps[tau - 1]], p_c)
            score += term
        scored.append(ScoredPolicy(i, pol, float(score)))
    return sorted(scored, key=lambda s: (s.score, s.index))


def policy_posterior(pb: PolicyBelief, f_past, f_future) -> CategoricalDist:
    """Softmax of log prior minus the per-policy divergence parts."""
    f_past = np.asarray(f_past, dtype=float)
    f_future = np.asarray(f_future, dtype=float)
    if f_past.size != len(pb.policies) or f_future.size != len(pb.policies):
        raise DimMismatchError("per-policy scores must match the policy count")
    return softmax(pb.log_prior - f_past - f_future)


def mixture_log_transition(pb: PolicyBelief, am: ActionModel, tau: int) -> np.ndarray:
    """Posterior-weighted geometric mixture sum_pi q(pi) ln B_{pi tau}.

    Rows need not renormalize in linear domain; the softmax-based updates
    absorb the constant.  Entries where any supported policy has a zero
    are exactly -inf.
    """
    if not 1 <= tau <= len(pb.policies[0]):
        raise IndexError(f"step {tau} outside the policy horizon")
    w = pb.posterior.weights
    out = np.zeros((am.S, am.S))
    for weight, pol in zip(w, pb.policies):
        if weight == 0.0:
            continue
        out = out + weight * elementwise_log(am.matrices[pol.steps[tau - 1]])
    return out


def _mixture_stack(pb: PolicyBelief, am: ActionModel, T: int) -> np.ndarray:
    return np.stack([mixture_log_transition(pb, am, tau) for tau in range(1, T + 1)])


def _joint_divergence(pb: PolicyBelief, posterior: np.ndarray,
                      per_policy_div: np.ndarray) -> float:
    prior = softmax(pb.log_prior).weights
    return kl(posterior, prior) + float(posterior @ per_policy_div)


def alternate_policy_state(pb: PolicyBelief, m: Hmm, am: ActionModel, obs, T: int,
                           max_outer: int = 50, tol: float = 1e-10,
                           ) -> tuple[PolicyBelief, BeliefTrajectory, AlternationTrace]:
    """Alternate policy-posterior and shared-belief updates to convergence.

    Each outer loop: (1) per-policy divergence parts of the shared beliefs
    against that policy's transitions, (2) posterior update, (3) geometric
    transition mixture, (4) one belief sweep under the mixture.  The trace
    records the joint divergence after each half-step; it is non-increasing
    because both half-steps are exact block-coordinate updates.
    """
    policies = _check_policies(pb.policies, am, T)
    obs = tuple(int(o) for o in obs)
    ln_a = elementwise_log(m.A)
    stacks = [policy_log_transitions(am, pol) for pol in policies]
    bt = from_log_params(ln_a, _mixture_stack(pb, am, T), m.p0, T, obs=obs, hmm=m)
    post = pb.posterior.weights
    values: list[float] = []
    converged = False
    prev_joint = math.inf
    for _ in range(max_outer):
        parts = np.array([sum(divergence_split(engine.with_log_params(bt, ln_b=stack)))
                          for stack in stacks])
        post_dist = policy_posterior(pb, np.zeros(len(policies)), parts)
        post = post_dist.weights
        values.append(_joint_divergence(pb, post, parts))
        working = replace(pb, posterior=post_dist)
        bt = engine.with_log_params(bt, ln_b=_mixture_stack(working, am, T))
        bt, _ = sweep(bt, mode=SMOOTHING)
        parts_after = np.array(
            [sum(divergence_split(engine.with_log_params(bt, ln_b=stack)))
             for stack in stacks])
        joint = _joint_divergence(pb, post, parts_after)
        values.append(joint)
        if math.isfinite(prev_joint) and math.isfinite(joint) and prev_joint - joint < tol:
            converged = True
            break
        prev_joint = joint
    return replace(pb, posterior=CategoricalDist(post)), bt, AlternationTrace(
        tuple(values), converged)


def sample_next_action(q_a: CategoricalDist, seed: int) -> int:
    """One categorical draw over actions, deterministic given the seed."""
    rng = np.random.default_rng(seed)
    return int(rng.choice(q_a.K, p=q_a.weights))


# --- hierarchy folding ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FoldedHmm:
    """World and policy-generator HMMs folded over (sigma, action, state) triples.

    The action coordinate has one extra slot, a distinguished null index
    (``action_dim - 1``) that only the start distribution occupies: the
    folded transition kernel conditions on (sigma, state) to emit the next
    action and on (state, next action) for the next state, never on the
    previous action, so the null slot's outgoing behaviour matches every
    other slot and its transition content is never distinguishable.
    """

    hmm: Hmm
    sigma_dim: int
    action_dim: int   # real actions + 1 null slot
    world_dim: int

    @property
    def null_action(self) -> int:
        return self.action_dim - 1

    def encode(self, sigma: int, action: int, state: int) -> int:
        return (sigma * self.action_dim + action) * self.world_dim + state

    def decode(self, flat: int) -> tuple[int, int, int]:
        state = flat % self.world_dim
        rest = flat // self.world_dim
        return rest // self.action_dim, rest % self.action_dim, state

    def project(self, dist, coord: str) -> np.ndarray:
        """Marginalize a flat distribution onto sigma / action / state."""
        axis = {"sigma": 0, "action": 1, "state": 2}[coord]
        cube = np.asarray(dist, dtype=float).reshape(
            self.sigma_dim, self.action_dim, self.world_dim)
        keep = [ax for ax in range(3) if ax != axis]
        return cube.sum(axis=tuple(keep))


def fold_hierarchy(sigma_hmm: Hmm, world: Hmm, am: ActionModel) -> FoldedHmm:
    """Integrate a policy-generating HMM and the world into one flat HMM.

    sigma_hmm's emission rows are p(a | sigma) and must have one column
    per real action; the folded transition factorizes as
    p(sigma'|sigma) p(a'|sigma') B_{a'}(s, s') and the folded emission
    depends on the world state alone.
    """
    n_act = am.count
    if sigma_hmm.O != n_act:
        raise DimMismatchError(
            f"sigma emission has {sigma_hmm.O} columns but {n_act} actions exist")
    if am.S != world.S:
        raise DimMismatchError("action matrices do not match the world dimension")
    s_dim, w_dim = sigma_hmm.S, world.S
    a_dim = n_act + 1
    t_sigma = np.asarray(sigma_hmm.B, dtype=float)
    p_act = np.zeros((s_dim, a_dim))
    p_act[:, :n_act] = sigma_hmm.A
    b_ext = np.concatenate([am.matrices, np.eye(w_dim)[None]], axis=0)
    trans = (
        t_sigma[:, None, None, :, None, None]
        * p_act[None, None, None, :, :, None]
        * b_ext.transpose(1, 0, 2)[None, None, :, None, :, :]
    )
    flat_s = s_dim * a_dim * w_dim
    trans = np.broadcast_to(trans, (s_dim, a_dim, w_dim, s_dim, a_dim, w_dim))
    emis = np.broadcast_to(
        np.asarray(world.A, dtype=float)[None, None, :, :],
        (s_dim, a_dim, w_dim, world.O))
    start = np.zeros((s_dim, a_dim, w_dim))
    start[:, n_act, :] = np.outer(sigma_hmm.p0, world.p0)
    folded = Hmm(p0=start.reshape(flat_s),
                 A=emis.reshape(flat_s, world.O),
                 B=trans.reshape(flat_s, flat_s))
    out = FoldedHmm(folded, s_dim, a_dim, w_dim)
    _spot_check_fold(out, t_sigma, p_act, b_ext)
    return out


def _spot_check_fold(f: FoldedHmm, t_sigma, p_act, b_ext, samples: int = 32) -> None:
    rng = np.random.default_rng(0)
    flat = f.hmm.S
    for _ in range(samples):
        i, j = int(rng.integers(flat)), int(rng.integers(flat))
        sg, a, s = f.decode(i)
        sg2, a2, s2 = f.decode(j)
        want = t_sigma[sg, sg2] * p_act[sg2, a2] * b_ext[a2][s, s2]
        if abs(f.hmm.B[i, j] - want) > 1e-12:
            raise DimMismatchError("folded transition fails product reconstruction")


# --- policy set file format -----------------------------------------------------


def policy_set_from_dict(d: dict) -> tuple[ActionModel, list[Policy], PreferenceDist, np.ndarray | None]:
    for key in ("actions", "policies", "preference"):
        if key not in d:
            raise DimMismatchError(f"policy set document missing field {key!r}")
    names = tuple(d["actions"].keys())
    am = ActionModel(names, np.array([d["actions"][n] for n in names], dtype=float))
    policies = [Policy(tuple(am.index(n) for n in steps)) for steps in d["policies"]]
    pref = PreferenceDist.from_weights(d["preference"])
    log_prior = np.asarray(d["log_prior"], dtype=float) if "log_prior" in d else None
    return am, policies, pref, log_prior


def load_policy_set(path):
    with open(path) as fh:
        return policy_set_from_dict(json.load(fh))

"""Variational Bayesian learning of HMM parameters under Dirichlet priors.

q(M) stays Dirichlet throughout: the posterior concentration matrices are
the prior plus expected emission / transition counts under the current
state beliefs.  Belief updates reuse the engine's retrodiction sweeps with
expected-log parameters substituted for log parameters.  The joint
learning divergence (Dirichlet part plus expected trajectory part) is the
objective both half-steps descend.
"""

from dataclasses import dataclass
import json
import math

import numpy as np

from . import engine
from .engine import BeliefTrajectory, SMOOTHING, from_log_params, sweep
from .errors import (
    DimMismatchError,
    EmptyTrainingSetError,
    NotFullyObservedError,
)
from .hmm import Hmm
from .probkit import ConcentrationVec, digamma, dirichlet_kl, entropy


@dataclass(frozen=True, eq=False)
class DirichletHmm:
    """Dirichlet prior/posterior over HMM parameters as concentration matrices."""

    C_A: np.ndarray  # (S, O), strictly positive
    C_B: np.ndarray  # (S, S), strictly positive

    def __post_init__(self):
        ca = np.array(self.C_A, dtype=float)
        cb = np.array(self.C_B, dtype=float)
        if ca.ndim != 2 or cb.ndim != 2 or cb.shape[0] != cb.shape[1]:
            raise DimMismatchError(f"concentration shapes {ca.shape}, {cb.shape}")
        if ca.shape[0] != cb.shape[0]:
            raise DimMismatchError("C_A and C_B disagree on the state count")
        if np.any(ca <= 0) or np.any(cb <= 0):
            raise DimMismatchError("concentrations must be strictly positive")
        ca.setflags(write=False)
        cb.setflags(write=False)
        object.__setattr__(self, "C_A", ca)
        object.__setattr__(self, "C_B", cb)

    @property
    def S(self) -> int:
        return self.C_A.shape[0]

    @property
    def O(self) -> int:
        return self.C_A.shape[1]


@dataclass(frozen=True, eq=False)
class ExpectedLogParams:
    """Row-wise expected log parameters of a Dirichlet-distributed model."""

    ln_A_bar: np.ndarray
    ln_B_bar: np.ndarray


@dataclass(frozen=True)
class LearnTrace:
    """Joint learning divergence after each half-step."""

    values: tuple[float, ...]
    converged: bool


def _expected_log_rows(c: np.ndarray) -> np.ndarray:
    out = np.empty_like(c)
    for s in range(c.shape[0]):
        row_total = digamma(float(c[s].sum()))
        for k in range(c.shape[1]):
            out[s, k] = digamma(float(c[s, k])) - row_total
    return out


def expected_log_params(d: DirichletHmm) -> ExpectedLogParams:
    """E[ln A] and E[ln B] entrywise, via the digamma identity per row."""
    return ExpectedLogParams(_expected_log_rows(d.C_A), _expected_log_rows(d.C_B))


def accumulate_counts(prior: DirichletHmm, bt: BeliefTrajectory,
                      pairwise=None) -> DirichletHmm:
    """Add one fully observed trajectory's expected counts to the prior.

    Emission counts add q_tau to the observed column per step; transition
    counts add the mean-field outer product of consecutive beliefs, unless
    exact pairwise marginals are supplied.  Batching over sequences is
    repeated application.
    """
    if bt.t != bt.T:
        raise NotFullyObservedError(f"t={bt.t} < T={bt.T}")
    ca = np.array(prior.C_A)
    cb = np.array(prior.C_B)
    if ca.shape != (bt.S, bt.ln_a.shape[1]):
        raise DimMismatchError("prior emission shape does not match the trajectory")
    if pairwise is not None and len(pairwise) != bt.T:
        raise DimMismatchError("need one pairwise table per time step")
    for tau in range(1, bt.T + 1):
        ca[:, bt.obs[tau - 1]] += bt.q[tau]
        if pairwise is None:
            cb += np.outer(bt.q[tau - 1], bt.q[tau])
        else:
            cb += np.asarray(pairwise[tau - 1], dtype=float)
    return DirichletHmm(ca, cb)


def e_step(d: DirichletHmm, p0, obs, sweeps: int = engine.DEFAULT_MAX_ITERS,
           tol: float = engine.DEFAULT_TOL) -> BeliefTrajectory:
    """Belief sweep for one sequence under the expected-log parameters."""
    obs = tuple(int(o) for o in obs)
    elp = expected_log_params(d)
    T = len(obs)
    ln_b = np.broadcast_to(elp.ln_B_bar, (T, d.S, d.S)).copy()
    bt = from_log_params(elp.ln_A_bar, ln_b, np.asarray(p0, dtype=float), T, obs=obs)
    out, _ = sweep(bt, mode=SMOOTHING, max_iters=sweeps, tol=tol)
    return out


def learning_divergence(posterior: DirichletHmm, prior: DirichletHmm,
                        beliefs, sequences) -> float:
    """Dirichlet divergence to the prior plus the expected trajectory part.

    The second term sums, over sequences, the belief entropy terms minus
    the expected-log emission and transition scores under q(M).
    """
    if posterior.C_A.shape != prior.C_A.shape or posterior.C_B.shape != prior.C_B.shape:
        raise DimMismatchError("posterior and prior shapes disagree")
    total = 0.0
    for post_c, prior_c in ((posterior.C_A, prior.C_A), (posterior.C_B, prior.C_B)):
        for s in range(post_c.shape[0]):
            total += dirichlet_kl(ConcentrationVec(post_c[s]), ConcentrationVec(prior_c[s]))
    elp = expected_log_params(posterior)
    for bt, seq in zip(beliefs, sequences):
        seq = tuple(int(o) for o in seq)
        if bt.obs != seq:
            raise DimMismatchError("beliefs do not match their sequence")
        for tau in range(1, bt.T + 1):
            total -= entropy(bt.q[tau])
            total -= float(bt.q[tau] @ elp.ln_A_bar[:, seq[tau - 1]])
            total -= float(bt.q[tau - 1] @ elp.ln_B_bar @ bt.q[tau])
    return total


def randomized_init(prior: DirichletHmm, scale: float, seed: int) -> DirichletHmm:
    """Seeded random perturbation of the prior, for initializing q(M).

    The flat prior with uniform beliefs is an exact fixed point of the
    alternating updates (nothing ever distinguishes the states), so
    recovery runs need a randomized starting posterior.  This changes the
    starting point only, never the objective.
    """
    rng = np.random.default_rng(seed)
    return DirichletHmm(prior.C_A + scale * rng.random(prior.C_A.shape),
                        prior.C_B + scale * rng.random(prior.C_B.shape))


def learn(prior: DirichletHmm, p0, sequences, outer_iters: int = 50,
          tol: float = 1e-8, sweeps: int = engine.DEFAULT_MAX_ITERS,
          init_posterior: DirichletHmm | None = None,
          ) -> tuple[DirichletHmm, LearnTrace]:
    """Alternate belief sweeps and count updates until the divergence settles.

    Counts are recomputed from the prior each outer iteration (batch
    updates, never compounded); beliefs are warm-started across outer
    iterations so every half-step descends the joint divergence.  The
    trace records the divergence after each half-step.

    ``init_posterior`` seeds q(M) for the first belief sweep only (see
    :func:`randomized_init`); by default the loop starts at the prior.
    """
    sequences = [tuple(int(o) for o in seq) for seq in sequences]
    if not sequences:
        raise EmptyTrainingSetError("no training sequences")
    p0 = np.asarray(p0, dtype=float)
    posterior = prior if init_posterior is None else init_posterior
    elp = expected_log_params(posterior)
    bts = []
    for seq in sequences:
        T = len(seq)
        ln_b = np.broadcast_to(elp.ln_B_bar, (T, prior.S, prior.S)).copy()
        bts.append(from_log_params(elp.ln_A_bar, ln_b, p0, T, obs=seq))
    values: list[float] = []
    converged = False
    prev = math.inf
    for _ in range(outer_iters):
        elp = expected_log_params(posterior)
        new_bts = []
        for bt in bts:
            ln_b = np.broadcast_to(elp.ln_B_bar, (bt.T, prior.S, prior.S)).copy()
            bt = engine.with_log_params(bt, ln_a=elp.ln_A_bar, ln_b=ln_b)
            bt, _ = sweep(bt, mode=SMOOTHING, max_iters=sweeps)
            new_bts.append(bt)
        bts = new_bts
        values.append(learning_divergence(posterior, prior, bts, sequences))
        posterior = prior
        for bt in bts:
            posterior = accumulate_counts(posterior, bt)
        cur = learning_divergence(posterior, prior, bts, sequences)
        values.append(cur)
        if math.isfinite(prev) and prev - cur < tol:
            converged = True
            break
        prev = cur
    return posterior, LearnTrace(tuple(values), converged)


def posterior_mean_model(d: DirichletHmm, p0) -> Hmm:
    """Point estimate: row-normalized concentration matrices."""
    return Hmm(p0=np.asarray(p0, dtype=float),
               A=d.C_A / d.C_A.sum(axis=1, keepdims=True),
               B=d.C_B / d.C_B.sum(axis=1, keepdims=True))


# --- file formats ----------------------------------------------------------------


def dirichlet_from_dict(d: dict) -> tuple[DirichletHmm, np.ndarray | None]:
    for key in ("C_A", "C_B"):
        if key not in d:
            raise DimMismatchError(f"prior document missing field {key!r}")
    dh = DirichletHmm(np.asarray(d["C_A"], dtype=float),
                      np.asarray(d["C_B"], dtype=float))
    p0 = np.asarray(d["p0"], dtype=float) if "p0" in d else None
    return dh, p0


def dirichlet_to_dict(d: DirichletHmm, p0=None) -> dict:
    out = {"C_A": d.C_A.tolist(), "C_B": d.C_B.tolist()}
    if p0 is not None:
        out["p0"] = np.asarray(p0, dtype=float).tolist()
    return out


def load_sequences(path) -> list[tuple[int, ...]]:
    """JSON-lines training data: one observation-index array per line."""
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(tuple(int(o) for o in json.loads(line)))
    return out

"""Desk-scale discrete environments and the closed perception/action loop.

Two committed fixtures are shipped as package data: a two-phase T-maze
(context hidden until the cue location is visited) and a 3x3 gridworld
with four corner-seeking policy scripts.  ``run_agent`` drives the full
cycle: sweep beliefs, score the policies consistent with the executed
prefix, act, observe, advance.
"""

from dataclasses import dataclass, field
import itertools
import json

import numpy as np

from . import engine
from .engine import FILTERING, advance, divergence, from_log_params, sweep, with_log_params
from .errors import BadParamsError, DimMismatchError, EmptyPolicySetError
from .hmm import Hmm, hmm_from_dict, hmm_to_dict
from .planning import (
    ActionModel,
    Policy,
    PolicyBelief,
    PreferenceDist,
    alternate_policy_state,
    plan_forward,
    plan_reverse,
    policy_log_transitions,
    sample_next_action,
)
from .probkit import elementwise_log

REVERSE = "reverse"
FORWARD = "forward"
POLICY_POSTERIOR = "posterior"
PLANNERS = (REVERSE, FORWARD, POLICY_POSTERIOR)

FIXTURE_NAMES = ("tmaze", "gridworld")


@dataclass
class Environment:
    """Ground-truth world state with action-conditioned dynamics."""

    start: np.ndarray          # (S,) start distribution
    actions: np.ndarray        # (N_a, S, S)
    emission: np.ndarray       # (S, O)
    true_state: int = -1
    rng: np.random.Generator | None = None

    def reset(self, rng: np.random.Generator) -> None:
        self.rng = rng
        self.true_state = int(rng.choice(self.start.size, p=self.start))


def env_step(env: Environment, a: int) -> int:
    """Advance the true state under action ``a`` and emit an observation."""
    if env.rng is None or env.true_state < 0:
        raise BadParamsError("environment must be reset before stepping")
    if not 0 <= a < env.actions.shape[0]:
        raise IndexError(f"action {a} out of range")
    env.true_state = int(env.rng.choice(env.start.size, p=env.actions[a, env.true_state]))
    return int(env.rng.choice(env.emission.shape[1], p=env.emission[env.true_state]))


@dataclass(frozen=True, eq=False)
class EnvBundle:
    """A committed environment fixture: world, actions, preference, policies."""

    name: str
    model: Hmm
    actions: ActionModel
    preference: PreferenceDist
    policies: tuple[Policy, ...]
    T: int

    def make_environment(self) -> Environment:
        return Environment(start=np.asarray(self.model.p0, dtype=float),
                           actions=self.actions.matrices,
                           emission=np.asarray(self.model.A, dtype=float))


@dataclass
class AgentStep:
    """One decision point of an episode."""

    t: int
    action: int
    observation: int
    chosen_policy: int
    divergence: float
    q_t: np.ndarray
    scores: tuple[tuple[int, float], ...]   # (policy index, planner score)


@dataclass
class AgentTrace:
    episode: int
    steps: list[AgentStep]
    final_state: int
    success: bool


# --- T-maze fixture -------------------------------------------------------------

_LOCS = ("center", "left", "right", "cue")
_OBS_LABELS = ("center-neutral", "left-reward", "left-blank",
               "right-reward", "right-blank", "cue-left", "cue-right")
_MOVE_SUCCESS = 0.9


def _tmaze_dict() -> dict:
    # states are (location, context) pairs, context = which arm pays off
    S, O = 8, 7
    state = lambda loc, ctx: loc * 2 + ctx
    A = np.zeros((S, O))
    obs_of = {("center", 0): 0, ("center", 1): 0,
              ("left", 0): 1, ("left", 1): 2,
              ("right", 1): 3, ("right", 0): 4,
              ("cue", 0): 5, ("cue", 1): 6}
    for loc_i, loc in enumerate(_LOCS):
        for ctx in range(2):
            A[state(loc_i, ctx), obs_of[(loc, ctx)]] = 1.0
    actions = {}
    for target_i, target in enumerate(_LOCS):
        B = np.zeros((S, S))
        for loc_i in range(4):
            for ctx in range(2):
                s = state(loc_i, ctx)
                B[s, state(target_i, ctx)] += _MOVE_SUCCESS
                B[s, s] += 1.0 - _MOVE_SUCCESS
        actions[f"go-{target}"] = B.tolist()
    p0 = np.zeros(S)
    p0[state(0, 0)] = 0.5
    p0[state(0, 1)] = 0.5
    pref = np.full(S, 1.0 / 64.0)
    pref[state(1, 0)] = 29.0 / 64.0   # left arm, left-rewarding context
    pref[state(2, 1)] = 29.0 / 64.0   # right arm, right-rewarding context
    mean_B = np.mean([np.array(b) for b in actions.values()], axis=0)
    labels = tuple(f"{loc}/{'ctxL' if ctx == 0 else 'ctxR'}"
                   for loc in _LOCS for ctx in range(2))
    policies = [[f"go-{a}", f"go-{b}"]
                for a, b in itertools.product(_LOCS, repeat=2)]
    return {
        "name": "tmaze",
        "T": 2,
        "model": hmm_to_dict(Hmm(p0=p0, A=A, B=mean_B, labels=labels)),
        "observation_labels": list(_OBS_LABELS),
        "actions": actions,
        "policies": policies,
        "preference": pref.tolist(),
    }


# --- gridworld fixture ------------------------------------------------------------

_DIRS = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}


def gridworld_actions(N: int, slip: float) -> ActionModel:
    """Four move actions; blocked probability mass stays put."""
    S = N * N
    names = tuple(_DIRS)
    mats = np.zeros((4, S, S))
    for ai, name in enumerate(names):
        for r in range(N):
            for c in range(N):
                s = r * N + c
                for other, (dr, dc) in _DIRS.items():
                    rr, cc = r + dr, c + dc
                    target = rr * N + cc if 0 <= rr < N and 0 <= cc < N else s
                    weight = 1.0 - slip if other == name else slip / 3.0
                    mats[ai, s, target] += weight
    return ActionModel(names, mats)


def make_gridworld(N: int, slip: float) -> tuple[Environment, Hmm, ActionModel]:
    """N x N gridworld: noiseless position emission, point-mass start at (0,0)."""
    if not 2 <= N <= 6:
        raise BadParamsError(f"grid side must be in [2, 6], got {N}")
    if not 0.0 <= slip <= 0.5:
        raise BadParamsError(f"slip must be in [0, 0.5], got {slip}")
    am = gridworld_actions(N, slip)
    S = N * N
    p0 = np.zeros(S)
    p0[0] = 1.0
    model = Hmm(p0=p0, A=np.eye(S), B=am.matrices.mean(axis=0),
                labels=tuple(f"r{r}c{c}" for r in range(N) for c in range(N)))
    env = Environment(start=p0, actions=am.matrices, emission=np.asarray(model.A))
    return env, model, am


def _gridworld_dict() -> dict:
    N = 3
    _, model, am = make_gridworld(N, 0.0)
    pref = np.full(N * N, 1.0 / 128.0)
    pref[N * N - 1] = 1.0 - (N * N - 1) / 128.0
    policies = [
        ["up", "left", "up", "left"],
        ["right", "right", "up", "up"],
        ["down", "down", "left", "left"],
        ["down", "down", "right", "right"],
    ]
    return {
        "name": "gridworld",
        "T": 4,
        "model": hmm_to_dict(model),
        "actions": {name: am.matrices[i].tolist() for i, name in enumerate(am.names)},
        "policies": policies,
        "preference": pref.tolist(),
    }


# --- fixture access -----------------------------------------------------------------


def _bundle_from_dict(d: dict) -> EnvBundle:
    for key in ("name", "model", "actions", "policies", "preference", "T"):
        if key not in d:
            raise DimMismatchError(f"environment fixture missing field {key!r}")
    model = hmm_from_dict(d["model"])
    names = tuple(d["actions"].keys())
    am = ActionModel(names, np.array([d["actions"][n] for n in names], dtype=float))
    policies = tuple(Policy(tuple(am.index(n) for n in steps)) for steps in d["policies"])
    return EnvBundle(name=d["name"], model=model, actions=am,
                     preference=PreferenceDist.from_weights(d["preference"]),
                     policies=policies, T=int(d["T"]))


def load_fixture(name_or_path: str) -> EnvBundle:
    """Resolve a committed fixture name or a path to a fixture JSON file."""
    from importlib import resources

    if name_or_path in FIXTURE_NAMES:
        ref = resources.files("actinf") / "fixtures" / f"{name_or_path}.json"
        return _bundle_from_dict(json.loads(ref.read_text()))
    with open(name_or_path) as fh:
        return _bundle_from_dict(json.load(fh))


def make_tmaze() -> tuple[Environment, Hmm, ActionModel, PreferenceDist, tuple[Policy, ...]]:
    """The committed T-maze fixture, unpacked."""
    b = load_fixture("tmaze")
    return b.make_environment(), b.model, b.actions, b.preference, b.policies


# --- the agent loop -----------------------------------------------------------------


def _consistent(policies, executed):
    prefix = tuple(executed)
    return [(i, p) for i, p in enumerate(policies) if p.steps[:len(prefix)] == prefix]


def run_agent(env: Environment, agent_model: Hmm, am: ActionModel,
              pref: PreferenceDist, planner: str, T: int, episodes: int,
              seed: int, policies, mode: str = FILTERING) -> list[AgentTrace]:
    """Run seeded episodes of the perception / planning / action cycle.

    At each decision point only the policies consistent with the executed
    action prefix are scored.  The reverse and forward planners pick the
    argmin (ties to the lower index); the posterior planner samples from
    the variational policy posterior.  Beliefs are maintained under the
    chosen policy's transitions and re-swept after every observation.
    Identical seeds replay identical traces.
    """
    if planner not in PLANNERS:
        raise BadParamsError(f"unknown planner {planner!r}; options: {PLANNERS}")
    policies = tuple(policies)
    ln_a = elementwise_log(agent_model.A)
    preferred = np.flatnonzero(
        pref.p_c.weights == pref.p_c.weights.max())
    traces = []
    for ep in range(episodes):
        env.reset(np.random.default_rng([seed, ep]))
        executed: list[int] = []
        obs: list[int] = []
        bt = None
        steps: list[AgentStep] = []
        for t in range(T):
            candidates = _consistent(policies, executed)
            if not candidates:
                raise EmptyPolicySetError(f"no policy extends prefix {executed}")
            idxs = [i for i, _ in candidates]
            pols = [p for _, p in candidates]
            if planner == REVERSE:
                ranked = plan_reverse(agent_model, am, pols, obs, pref, T=T)
                scores = tuple((idxs[r.index], r.score) for r in ranked)
                chosen_local = ranked[0].index
            elif planner == FORWARD:
                ranked = plan_forward(am, pols, pref, t=t, T=T)
                scores = tuple((idxs[r.index], r.score) for r in ranked)
                chosen_local = ranked[0].index
            else:
                pb = PolicyBelief.uniform(pols)
                pb, _, _ = alternate_policy_state(pb, agent_model, am, obs, T)
                scores = tuple(
                    (idxs[i], float(w)) for i, w in enumerate(pb.posterior.weights))
                chosen_local = sample_next_action(
                    pb.posterior, np.random.default_rng([seed, ep, t]).integers(2**63))
            chosen = pols[chosen_local]
            action = chosen.steps[t]
            o = env_step(env, action)
            executed.append(action)
            obs.append(o)
            ln_b = policy_log_transitions(am, Policy(tuple(executed) + chosen.steps[t + 1:]))
            if bt is None:
                bt = from_log_params(ln_a, ln_b, agent_model.p0, T, obs=(),
                                     hmm=agent_model)
            else:
                bt = with_log_params(bt, ln_b=ln_b)
            bt = advance(bt, o)
            bt, _ = sweep(bt, mode=mode)
            steps.append(AgentStep(
                t=t, action=action, observation=o,
                chosen_policy=idxs[chosen_local],
                divergence=divergence(bt), q_t=bt.q[t + 1].copy(), scores=scores))
        traces.append(AgentTrace(
            episode=ep, steps=steps, final_state=env.true_state,
            success=env.true_state in preferred))
    return traces

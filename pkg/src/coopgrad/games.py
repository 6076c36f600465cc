"""Identical-payoff stochastic games: tabular models, episode simulation, histories.

A game couples a Markov environment with a set of agents that all receive the
same reward.  Tabular games enumerate states, joint actions, transition and
reward tables; generative games (see ``domains.soccer``) expose reset/step/observe
callbacks instead and never enumerate their state space.

Joint actions are packed into a single integer with a mixed-radix encoding,
agent 0 least significant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

PROB_TOL = 1e-12


class ContractViolation(ValueError):
    """Raised when a caller breaks a documented precondition."""


# ---------------------------------------------------------------------------
# sampling helpers (shared by the pure-Python episode loop and mirrored by the
# compiled kernels; both walk the cumulative sum against a single uniform)
# ---------------------------------------------------------------------------

def categorical_from_uniform(probs, u: float) -> int:
    """Index k with probability probs[k], driven by one uniform draw u."""
    c = 0.0
    last = 0
    for k in range(len(probs)):
        c += probs[k]
        if u < c:
            return k
        last = k
    return last


def sample_categorical(probs, rng: np.random.Generator) -> int:
    return categorical_from_uniform(probs, rng.random())


# ---------------------------------------------------------------------------
# agents and tabular games
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AgentSpec:
    """One agent's action space, observation space and observation function.

    ``observe`` is a (state_count, observation_count) row-stochastic matrix for
    tabular games, or None for generative games that compute observations
    procedurally.
    """

    action_count: int
    observation_count: int
    observe: np.ndarray | None = None

    def __post_init__(self):
        if self.action_count < 1 or self.observation_count < 1:
            raise ContractViolation("action_count and observation_count must be >= 1")
        if self.observe is not None:
            obs = np.asarray(self.observe, dtype=float)
            object.__setattr__(self, "observe", obs)
            if obs.ndim != 2 or obs.shape[1] != self.observation_count:
                raise ContractViolation(f"observe must be (S, {self.observation_count})")
            if np.any(obs < 0) or np.any(np.abs(obs.sum(axis=1) - 1.0) > PROB_TOL):
                raise ContractViolation("observation rows must be distributions")


def joint_action_count(agents: Sequence[AgentSpec]) -> int:
    n = 1
    for a in agents:
        n *= a.action_count
    return n


def joint_action_index(actions: Sequence[int], agents: Sequence[AgentSpec]) -> int:
    """Mixed-radix encoding of per-agent actions, agent 0 least significant."""
    if len(actions) != len(agents):
        raise ContractViolation("one action per agent")
    idx = 0
    base = 1
    for a, spec in zip(actions, agents):
        if not 0 <= a < spec.action_count:
            raise ContractViolation(f"action {a} out of range [0, {spec.action_count})")
        idx += a * base
        base *= spec.action_count
    return idx


def joint_action_decode(index: int, agents: Sequence[AgentSpec]) -> tuple[int, ...]:
    if not 0 <= index < joint_action_count(agents):
        raise ContractViolation("joint action index out of range")
    out = []
    for spec in agents:
        out.append(index % spec.action_count)
        index //= spec.action_count
    return tuple(out)


@dataclass(frozen=True)
class GameModel:
    """Tabular identical-payoff game.

    transition: (S, A_joint, S) row-stochastic; reward: (S, A_joint); terminal
    states are absorbing with zero reward (validated).  The initial state is a
    single index; games needing a start distribution can add a dummy state.
    """

    state_count: int
    initial_state: int
    agents: tuple[AgentSpec, ...]
    transition: np.ndarray
    reward: np.ndarray
    terminal: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "terminal", frozenset(self.terminal))
        t = np.asarray(self.transition, dtype=float)
        r = np.asarray(self.reward, dtype=float)
        na = joint_action_count(self.agents)
        if t.shape != (self.state_count, na, self.state_count):
            raise ContractViolation(f"transition must be (S, {na}, S)")
        if r.shape != (self.state_count, na):
            raise ContractViolation(f"reward must be (S, {na})")
        if np.any(t < 0) or np.any(np.abs(t.sum(axis=2) - 1.0) > PROB_TOL):
            raise ContractViolation("transition rows must be distributions")
        if not 0 <= self.initial_state < self.state_count:
            raise ContractViolation("initial_state out of range")
        for s in self.terminal:
            if np.any(r[s] != 0.0):
                raise ContractViolation(f"terminal state {s} has nonzero reward")
            for a in range(na):
                if t[s, a, s] != 1.0:
                    raise ContractViolation(f"terminal state {s} must self-loop")
        for a in self.agents:
            if a.observe is None or a.observe.shape[0] != self.state_count:
                raise ContractViolation("each agent needs an (S, O) observe matrix")
        object.__setattr__(self, "transition", t)
        object.__setattr__(self, "reward", r)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def joint_actions(self) -> int:
        return joint_action_count(self.agents)

    def is_terminal(self, s: int) -> bool:
        return s in self.terminal


@runtime_checkable
class GenerativeGame(Protocol):
    """Environment interface for games too large to tabulate.

    Implementations must be deterministic given the rng stream: identical
    seeds and action sequences yield identical trajectories.
    """

    agents: tuple[AgentSpec, ...]

    def reset(self, rng: np.random.Generator): ...

    def step(self, state, actions: Sequence[int], rng: np.random.Generator): ...

    def observe(self, state, agent: int) -> int: ...

    def is_done(self, state) -> bool: ...


# ---------------------------------------------------------------------------
# histories
# ---------------------------------------------------------------------------

@dataclass
class AgentHistory:
    """One agent's local view of an episode: what it saw, did, and was paid.

    This is all a distributed learner is allowed to read; other agents'
    observations, internal states and actions are structurally absent.
    """

    initial_internal: int
    observations: np.ndarray
    internals: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)


@dataclass
class History:
    """A full episode record.

    Arrays are (T, n_agents) for per-agent fields and (T,) for the shared
    reward.  ``internals[t, i]`` is agent i's internal state after absorbing
    observation t, i.e. the state that chose ``actions[t, i]``.  ``states`` is
    kept for tabular games (length T+1, including the final state) and is None
    for generative games.
    """

    initial_internal: tuple[int, ...]
    observations: np.ndarray
    internals: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    states: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def n_agents(self) -> int:
        return self.observations.shape[1]

    def agent_view(self, i: int) -> AgentHistory:
        return AgentHistory(
            initial_internal=self.initial_internal[i],
            observations=self.observations[:, i].copy(),
            internals=self.internals[:, i].copy(),
            actions=self.actions[:, i].copy(),
            rewards=self.rewards.copy(),
        )

    @staticmethod
    def from_agent_views(views: Sequence[AgentHistory], states=None) -> "History":
        """Reassemble the joint history from per-agent views (lossless zip)."""
        T = len(views[0])
        for v in views:
            if len(v) != T or not np.array_equal(v.rewards, views[0].rewards):
                raise ContractViolation("agent views disagree on length or rewards")
        return History(
            initial_internal=tuple(v.initial_internal for v in views),
            observations=np.stack([v.observations for v in views], axis=1),
            internals=np.stack([v.internals for v in views], axis=1),
            actions=np.stack([v.actions for v in views], axis=1),
            rewards=views[0].rewards.copy(),
            states=states,
        )


def discounted_return(history, gamma: float) -> float:
    """Sum of gamma^t * r(t), first reward discounted by gamma^0."""
    rewards = history.rewards if hasattr(history, "rewards") else history
    if len(rewards) == 0:
        raise ContractViolation("history is empty")
    total = 0.0
    g = 1.0
    for r in rewards:
        total += g * float(r)
        g *= gamma
    return total


# ---------------------------------------------------------------------------
# episode simulation
# ---------------------------------------------------------------------------

def _deterministic_index(row) -> int:
    """Index of a probability-1 outcome, or -1 if the row is stochastic."""
    nz = np.nonzero(row)[0]
    if len(nz) == 1 and row[nz[0]] == 1.0:
        return int(nz[0])
    return -1


def run_episode(game, policies, horizon: int, rng: np.random.Generator) -> History:
    """Simulate one episode and record the full history.

    Stops early when the game reaches a terminal/done state.  Per step, each
    agent in index order observes, updates its internal state, and picks an
    action; then the environment transitions.  The rng consumption order is
    part of the contract (the compiled kernels reproduce it exactly):
    per agent [observation draw if stochastic, internal draw if the policy has
    memory, action draw], then one transition draw if stochastic.
    """
    if horizon < 1:
        raise ContractViolation("horizon must be >= 1")
    if len(policies) != len(game.agents):
        raise ContractViolation("one policy per agent")

    m = len(game.agents)
    tabular = isinstance(game, GameModel)

    obs_hist, int_hist, act_hist, rew_hist, state_hist = [], [], [], [], []
    internal = [p.initial_internal for p in policies]
    init_internal = tuple(internal)

    if tabular:
        s = game.initial_state
        state_hist.append(s)
    else:
        s = game.reset(rng)

    for _ in range(horizon):
        obs_row, int_row, act_row = [], [], []
        for i, (spec, pol) in enumerate(zip(game.agents, policies)):
            if tabular:
                brow = spec.observe[s]
                o = _deterministic_index(brow)
                if o < 0:
                    o = sample_categorical(brow, rng)
            else:
                o = game.observe(s, i)
            a, n_next = pol.act(o, internal[i], rng)
            internal[i] = n_next
            obs_row.append(o)
            int_row.append(n_next)
            act_row.append(a)
        obs_hist.append(obs_row)
        int_hist.append(int_row)
        act_hist.append(act_row)

        if tabular:
            ja = joint_action_index(act_row, game.agents)
            trow = game.transition[s, ja]
            s_next = _deterministic_index(trow)
            if s_next < 0:
                s_next = sample_categorical(trow, rng)
            r = float(game.reward[s, ja])
            s = s_next
            state_hist.append(s)
            rew_hist.append(r)
            done = game.is_terminal(s)
        else:
            s, r, done = game.step(s, act_row, rng)
            rew_hist.append(float(r))

        if done:
            break

    return History(
        initial_internal=init_internal,
        observations=np.array(obs_hist, dtype=np.int64),
        internals=np.array(int_hist, dtype=np.int64),
        actions=np.array(act_hist, dtype=np.int64),
        rewards=np.array(rew_hist, dtype=np.float64),
        states=np.array(state_hist, dtype=np.int64) if tabular else None,
    )


# ---------------------------------------------------------------------------
# JSON round trip (sparse document; see docs/formats.md)
# ---------------------------------------------------------------------------

def game_to_json(game: GameModel) -> str:
    doc = {
        "states": game.state_count,
        "initial_state": game.initial_state,
        "terminal": sorted(game.terminal),
        "agents": [
            {
                "actions": a.action_count,
                "observations": a.observation_count,
                "observe": [
                    [int(s), int(o), float(p)]
                    for s in range(game.state_count)
                    for o, p in enumerate(a.observe[s])
                    if p != 0.0
                ],
            }
            for a in game.agents
        ],
        "transitions": [
            [int(s), int(a), int(s2), float(p)]
            for s in range(game.state_count)
            for a in range(game.joint_actions)
            for s2, p in enumerate(game.transition[s, a])
            if p != 0.0
        ],
        "rewards": [
            [int(s), int(a), float(r)]
            for s in range(game.state_count)
            for a, r in enumerate(game.reward[s])
            if r != 0.0
        ],
    }
    return json.dumps(doc, indent=2)


def game_from_json(text: str) -> GameModel:
    doc = json.loads(text)
    n_states = doc["states"]
    agents = []
    for a in doc["agents"]:
        obs = np.zeros((n_states, a["observations"]))
        for s, o, p in a["observe"]:
            obs[s, o] = p
        agents.append(AgentSpec(a["actions"], a["observations"], obs))
    na = joint_action_count(agents)
    transition = np.zeros((n_states, na, n_states))
    for s, a, s2, p in doc["transitions"]:
        transition[s, a, s2] = p
    reward = np.zeros((n_states, na))
    for s, a, r in doc["rewards"]:
        reward[s, a] = r
    return GameModel(
        state_count=n_states,
        initial_state=doc["initial_state"],
        agents=tuple(agents),
        transition=transition,
        reward=reward,
        terminal=frozenset(doc["terminal"]),
    )

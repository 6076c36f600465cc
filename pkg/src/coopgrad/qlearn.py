"""Central-controller tabular Q-learning over the joint action space.

One table, one learner: the controller picks the joint action for all
learning agents.  The state key is either the true environment state (fully
observable mode) or the concatenation of the agents' current observations
(partially observable mode) — never the hidden state.  Performance is
reported by periodically evaluating the greedy policy derived from the table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .games import ContractViolation, GameModel, joint_action_count, joint_action_decode
from .domains.soccer import SoccerGame


@dataclass
class QLearnConfig:
    alpha: float
    gamma: float
    epsilon: float
    episodes: int
    horizon: int
    eval_every: int = 1000
    eval_episodes: int = 1000
    initial_q: float = 0.0
    observability: str = "full"  # "full" | "partial"
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise ContractViolation("epsilon must be in [0, 1]")
        if not 0 <= self.gamma < 1:
            raise ContractViolation("gamma must be in [0, 1)")
        if self.alpha < 0 or self.horizon < 1 or self.episodes < 0:
            raise ContractViolation("alpha >= 0, horizon >= 1, episodes >= 0")
        if self.observability not in ("full", "partial"):
            raise ContractViolation("observability must be 'full' or 'partial'")


class QTable:
    """Map state-key -> row of joint-action values; unseen rows stay at initial_q."""

    def __init__(self, action_count: int, initial_q: float = 0.0):
        if action_count < 1:
            raise ContractViolation("action_count must be >= 1")
        self.action_count = action_count
        self.initial_q = float(initial_q)
        self.values: dict[int, np.ndarray] = {}

    def row(self, key: int) -> np.ndarray:
        r = self.values.get(key)
        if r is None:
            r = np.full(self.action_count, self.initial_q)
            self.values[key] = r
        return r

    def lookup(self, key: int) -> np.ndarray:
        r = self.values.get(key)
        return r if r is not None else np.full(self.action_count, self.initial_q)

    def to_json(self) -> str:
        return json.dumps({
            "action_count": self.action_count,
            "initial_q": self.initial_q,
            "entries": {str(k): [float(x) for x in v] for k, v in sorted(self.values.items())},
        })

    @staticmethod
    def from_json(text: str) -> "QTable":
        doc = json.loads(text)
        t = QTable(doc["action_count"], doc["initial_q"])
        for k, v in doc["entries"].items():
            t.values[int(k)] = np.array(v, dtype=float)
        return t


def q_update(table: QTable, s: int, a: int, r: float, s_next: int,
             alpha: float, gamma: float, terminal: bool = False) -> QTable:
    """One-sample backup toward r + gamma * max_a' Q(s', a'); max is 0 at terminals."""
    if not 0 <= a < table.action_count:
        raise ContractViolation("action index out of range")
    row = table.row(s)
    target = r if terminal else r + gamma * float(np.max(table.lookup(s_next)))
    row[a] += alpha * (target - row[a])
    return table


def greedy_action(table: QTable, s: int, rng: np.random.Generator) -> int:
    """Argmax with a uniform tie-break (always consumes one uniform)."""
    row = table.lookup(s)
    best = float(row[0])
    ties = [0]
    for a in range(1, table.action_count):
        v = float(row[a])
        if v > best:
            best = v
            ties = [a]
        elif v == best:
            ties.append(a)
    return ties[int(rng.random() * len(ties))]


def epsilon_greedy(table: QTable, s: int, epsilon: float, rng: np.random.Generator) -> int:
    """Uniform with probability epsilon, otherwise the greedy tie-broken argmax.

    Consumes exactly two uniforms per call regardless of the branch taken, so
    the compiled kernels reproduce the stream.
    """
    if not 0 <= epsilon <= 1:
        raise ContractViolation("epsilon must be in [0, 1]")
    u = rng.random()
    if u < epsilon:
        return int(rng.random() * table.action_count)
    return greedy_action(table, s, rng)


# ---------------------------------------------------------------------------
# environment adapters: state keys and stepping for the central controller
# ---------------------------------------------------------------------------

class _TabularAdapter:
    def __init__(self, game: GameModel, observability: str):
        self.game = game
        self.partial = observability == "partial"
        self.joint_actions = joint_action_count(game.agents)
        self.decode = [joint_action_decode(ja, game.agents) for ja in range(self.joint_actions)]

    def reset(self, rng):
        return self.game.initial_state

    def key(self, s, rng) -> int:
        if not self.partial:
            return int(s)
        code = 0
        for spec in self.game.agents:
            row = spec.observe[s]
            nz = np.nonzero(row)[0]
            if len(nz) == 1 and row[nz[0]] == 1.0:
                o = int(nz[0])
            else:
                from .games import sample_categorical
                o = sample_categorical(row, rng)
            code = code * spec.observation_count + o
        return code

    def step(self, s, ja, rng):
        from .games import sample_categorical, _deterministic_index
        trow = self.game.transition[s, ja]
        s2 = _deterministic_index(trow)
        if s2 < 0:
            s2 = sample_categorical(trow, rng)
        r = float(self.game.reward[s, ja])
        return s2, r, self.game.is_terminal(s2)


class _SoccerAdapter:
    def __init__(self, game: SoccerGame, observability: str):
        self.game = game
        self.partial = observability == "partial"
        self.joint_actions = joint_action_count(game.agents)
        self.decode = [joint_action_decode(ja, game.agents) for ja in range(self.joint_actions)]
        self.cells = game.config.width * game.config.height

    def reset(self, rng):
        return self.game.reset(rng)

    def key(self, state, rng) -> int:
        if self.partial:
            n_obs = self.game.agents[0].observation_count
            return self.game.observe(state, 0) * n_obs + self.game.observe(state, 1)
        code = 0
        for (c, r) in state.positions:
            code = code * self.cells + (r * self.game.config.width + c)
        return code * self.game.n_players + state.possessor

    def step(self, state, ja, rng):
        return self.game.step(state, self.decode[ja], rng)


def _adapter(game, observability):
    if isinstance(game, GameModel):
        return _TabularAdapter(game, observability)
    if isinstance(game, SoccerGame):
        return _SoccerAdapter(game, observability)
    raise ContractViolation(f"unsupported game type {type(game).__name__}")


def evaluate_greedy(game, table: QTable, episodes: int, horizon: int,
                    rng: np.random.Generator, observability: str = "full") -> float:
    """Mean undiscounted return of the greedy policy over fresh episodes."""
    env = _adapter(game, observability)
    total = 0.0
    for _ in range(episodes):
        s = env.reset(rng)
        for _ in range(horizon):
            a = greedy_action(table, env.key(s, rng), rng)
            s, r, done = env.step(s, a, rng)
            total += r
            if done:
                break
    return total / episodes


def q_train(game, config: QLearnConfig, rng=None, backend: str = "auto"):
    """Train a central controller with epsilon-greedy exploration.

    The greedy policy is evaluated before the first episode, every
    ``eval_every`` episodes and after the last one; evaluations use an
    independent random stream so the cadence does not perturb training.
    Returns (QTable, LearningCurve) with metric "eval_payoff".
    """
    from .learning import LearningCurve
    from . import _kernels

    if rng is None:
        rng = np.random.default_rng(config.seed)

    kernel = _kernels.dispatch_soccer_q(game, backend)
    if kernel is not None and isinstance(game, SoccerGame):
        return kernel(game, config, rng)

    env = _adapter(game, config.observability)
    table = QTable(env.joint_actions, config.initial_q)
    curve = LearningCurve()
    train_rng, eval_parent = rng.spawn(2)

    def evaluate(episode):
        eval_rng = eval_parent.spawn(1)[0]
        mean = evaluate_greedy(game, table, config.eval_episodes, config.horizon,
                               eval_rng, config.observability)
        curve.add(episode, "eval_payoff", mean)

    evaluate(0)
    for episode in range(config.episodes):
        s = env.reset(train_rng)
        k = env.key(s, train_rng)
        for _ in range(config.horizon):
            a = epsilon_greedy(table, k, config.epsilon, train_rng)
            s, r, done = env.step(s, a, train_rng)
            k2 = env.key(s, train_rng)
            q_update(table, k, a, r, k2, config.alpha, config.gamma, terminal=done)
            k = k2
            if done:
                break
        if (episode + 1) % config.eval_every == 0 or episode == config.episodes - 1:
            evaluate(episode + 1)
    return table, curve

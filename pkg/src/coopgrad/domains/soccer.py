"""Grid soccer: two learners vs. fixed-strategy opponents on a 6x5 field.

Two learning agents start in the right half, the opponent in the left half,
all in distinct cells; each player has an equal chance of starting with the
ball.  Per step every player picks one of {N, S, E, W, Stay, Pass} and the
actions execute in a uniformly random order.  Moving into an occupied cell is
cancelled and, when the mover carried the ball, possession transfers to the
stationary occupant.  Moving off the field is cancelled unless the mover
carries the ball through a goal mouth, which ends the game: the left goal
scores +1 for the learner team, the right goal -1 (own goals count).  A pass
registers when the passer holds the ball on its turn and hands it to the
teammate at the start of the next step.  Episodes that reach the step limit
end as a 0-reward draw.

Each learner observes only who holds the ball (itself / teammate / opponent)
and the status of the four neighboring cells (open / out of field /
occupied): 3 * 3^4 = 243 observations.  Goal mouths look identical to any
other off-field cell, so the learners cannot locate the goals directly.

Geometry choices (the rules fix neither): goals span the three middle rows
(1..3) beyond columns 0 and 5; the defensive opponent's permitted area is
columns 0-1 at the goal rows.  Coordinates are (column, row) with row 0 at
the top, so N decreases the row index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..games import AgentSpec, ContractViolation

N, S, E, W, STAY, PASS = range(6)
ACTION_NAMES = ("N", "S", "E", "W", "Stay", "Pass")
MOVE_DELTA = {N: (0, -1), S: (0, 1), E: (1, 0), W: (-1, 0)}

POSSESSOR_SELF, POSSESSOR_TEAMMATE, POSSESSOR_OPPONENT = 0, 1, 2
CELL_OPEN, CELL_OUT, CELL_OCCUPIED = 0, 1, 2
N_OBSERVATIONS = 3 * 3 ** 4

OPPONENT_KINDS = ("random", "greedy", "defensive")


class OpponentKind:
    RANDOM = "random"
    GREEDY = "greedy"
    DEFENSIVE = "defensive"


@dataclass(frozen=True)
class SoccerConfig:
    opponents: tuple[str, ...] = ("random",)
    pass_enabled: bool = True
    step_limit: int = 500
    width: int = 6
    height: int = 5
    goal_rows: tuple[int, ...] = (1, 2, 3)

    def __post_init__(self):
        object.__setattr__(self, "opponents", tuple(self.opponents))
        object.__setattr__(self, "goal_rows", tuple(self.goal_rows))
        for kind in self.opponents:
            if kind not in OPPONENT_KINDS:
                raise ContractViolation(f"unknown opponent kind {kind!r}")
        if len(self.opponents) < 1:
            raise ContractViolation("at least one opponent")
        half = (self.width // 2) * self.height
        if len(self.opponents) + 1 > half or 2 > half:
            raise ContractViolation("not enough cells to place the players")
        if self.step_limit < 1:
            raise ContractViolation("step_limit must be >= 1")


@dataclass(frozen=True)
class SoccerState:
    """Immutable snapshot: player (column, row) positions, ball owner, clock."""

    positions: tuple[tuple[int, int], ...]
    possessor: int
    steps: int = 0
    outcome: str | None = None  # None | learners-score | opponent-scores | draw

    @property
    def done(self) -> bool:
        return self.outcome is not None


class SoccerGame:
    """Generative environment; players 0 and 1 are the learners."""

    def __init__(self, config: SoccerConfig = SoccerConfig()):
        self.config = config
        n_actions = 6 if config.pass_enabled else 5
        self.agents = (
            AgentSpec(action_count=n_actions, observation_count=N_OBSERVATIONS),
            AgentSpec(action_count=n_actions, observation_count=N_OBSERVATIONS),
        )
        self.n_players = 2 + len(config.opponents)
        self.trace_hook: Callable[[dict], None] | None = None

    # -- placement ---------------------------------------------------------

    def _half_cells(self, right: bool) -> list[tuple[int, int]]:
        cfg = self.config
        lo = cfg.width - cfg.width // 2 if right else 0
        hi = cfg.width if right else cfg.width // 2
        return [(c, r) for c in range(lo, hi) for r in range(cfg.height)]

    def reset(self, rng: np.random.Generator) -> SoccerState:
        positions = []
        right = self._half_cells(right=True)
        left = self._half_cells(right=False)
        for cells in (right, right, *[left] * len(self.config.opponents)):
            free = [c for c in cells if c not in positions]
            positions.append(free[int(rng.random() * len(free))])
        possessor = int(rng.random() * self.n_players)
        return SoccerState(tuple(positions), possessor)

    # -- stepping ----------------------------------------------------------

    def _goal_side(self, pos: tuple[int, int], action: int) -> int:
        """-1 for the left goal mouth, +1 for the right, 0 otherwise."""
        c, r = pos
        if r in self.config.goal_rows:
            if c == 0 and action == W:
                return -1
            if c == self.config.width - 1 and action == E:
                return +1
        return 0

    def _in_field(self, c: int, r: int) -> bool:
        return 0 <= c < self.config.width and 0 <= r < self.config.height

    def step(self, state: SoccerState, actions: Sequence[int], rng: np.random.Generator):
        """Advance one step given the learners' actions; returns (state, reward, done)."""
        if state.done:
            raise ContractViolation("episode already finished")
        if len(actions) != 2:
            raise ContractViolation("two learner actions expected")
        acts = [int(actions[0]), int(actions[1])]
        for i, a in enumerate(acts):
            if not 0 <= a < self.agents[i].action_count:
                raise ContractViolation(f"learner action {a} out of range")
        for k, kind in enumerate(self.config.opponents):
            acts.append(opponent_policy(kind, state, 2 + k, rng, self.config))

        order = list(range(self.n_players))
        for i in range(self.n_players - 1, 0, -1):
            j = int(rng.random() * (i + 1))
            order[i], order[j] = order[j], order[i]

        positions = list(state.positions)
        possessor = state.possessor
        pending_pass_to = -1
        reward = 0.0
        outcome = None

        for p in order:
            a = acts[p]
            if a == PASS:
                if p <= 1 and possessor == p:
                    pending_pass_to = 1 - p
                continue
            if a == STAY:
                continue
            dc, dr = MOVE_DELTA[a]
            c, r = positions[p]
            if possessor == p:
                side = self._goal_side((c, r), a)
                if side != 0:
                    reward = 1.0 if side < 0 else -1.0
                    outcome = "learners-score" if side < 0 else "opponent-scores"
                    break
            nc, nr = c + dc, r + dr
            if not self._in_field(nc, nr):
                continue
            occupant = -1
            for q in range(self.n_players):
                if q != p and positions[q] == (nc, nr):
                    occupant = q
                    break
            if occupant >= 0:
                if possessor == p:
                    possessor = occupant
                continue
            positions[p] = (nc, nr)

        if outcome is None and pending_pass_to >= 0 and possessor == (1 - pending_pass_to):
            possessor = pending_pass_to

        steps = state.steps + 1
        if outcome is None and steps >= self.config.step_limit:
            outcome = "draw"

        if self.trace_hook is not None:
            self.trace_hook({
                "step": state.steps,
                "positions": [list(p) for p in state.positions],
                "possessor": state.possessor,
                "actions": list(acts),
                "order": list(order),
                "reward": reward,
            })

        new_state = SoccerState(tuple(positions), possessor, steps, outcome)
        return new_state, reward, new_state.done

    def observe(self, state: SoccerState, agent: int) -> int:
        return soccer_observe(state, agent, self.config)

    def is_done(self, state: SoccerState) -> bool:
        return state.done


def soccer_observe(state: SoccerState, learner: int, config: SoccerConfig) -> int:
    """Mixed-radix observation: ball owner class then N, S, E, W cell status."""
    if learner not in (0, 1):
        raise ContractViolation("learner must be 0 or 1")
    if state.possessor == learner:
        owner = POSSESSOR_SELF
    elif state.possessor == 1 - learner:
        owner = POSSESSOR_TEAMMATE
    else:
        owner = POSSESSOR_OPPONENT
    c, r = state.positions[learner]
    code = owner
    for a in (N, S, E, W):
        dc, dr = MOVE_DELTA[a]
        nc, nr = c + dc, r + dr
        if not (0 <= nc < config.width and 0 <= nr < config.height):
            status = CELL_OUT
        elif any(p == (nc, nr) for p in state.positions):
            status = CELL_OCCUPIED
        else:
            status = CELL_OPEN
        code = code * 3 + status
    return code


def decode_observation(code: int) -> tuple[int, tuple[int, int, int, int]]:
    cells = []
    for _ in range(4):
        cells.append(code % 3)
        code //= 3
    return code, tuple(reversed(cells))


# ---------------------------------------------------------------------------
# fixed-strategy opponents
# ---------------------------------------------------------------------------

def opponent_policy(kind: str, state: SoccerState, player: int,
                    rng: np.random.Generator, config: SoccerConfig) -> int:
    """Action for the fixed-strategy opponent at index ``player``.

    random draws one uniform; greedy is deterministic; defensive draws one
    uniform only while inside its goal area.
    """
    if kind == OpponentKind.RANDOM:
        return int(rng.random() * 6)
    if kind == OpponentKind.GREEDY:
        return _greedy_action(state, player, config)
    if kind == OpponentKind.DEFENSIVE:
        return _defensive_action(state, player, rng, config)
    raise ContractViolation(f"unknown opponent kind {kind!r}")


def _toward(dc: int, dr: int) -> int:
    """One step toward a displacement, horizontal before vertical."""
    if dc > 0:
        return E
    if dc < 0:
        return W
    if dr > 0:
        return S
    if dr < 0:
        return N
    return STAY


def _greedy_action(state: SoccerState, player: int, config: SoccerConfig) -> int:
    c, r = state.positions[player]
    if state.possessor == player:
        # carry the ball to the learners' goal on the right edge
        if c < config.width - 1:
            return E
        if r not in config.goal_rows:
            target = min(config.goal_rows, key=lambda g: abs(g - r))
            return S if target > r else N
        return E
    pc, pr = state.positions[state.possessor]
    if abs(pc - c) + abs(pr - r) <= 1:
        return STAY
    return _toward(pc - c, pr - r)


def _defensive_action(state: SoccerState, player: int, rng: np.random.Generator,
                      config: SoccerConfig) -> int:
    c, r = state.positions[player]
    if (c, r) in defensive_area(config):
        candidates = [STAY]
        for a in (N, S, E, W):
            dc, dr = MOVE_DELTA[a]
            if (c + dc, r + dr) in defensive_area(config):
                candidates.append(a)
        return candidates[int(rng.random() * len(candidates))]
    target_r = min(config.goal_rows, key=lambda g: abs(g - r))
    return _toward(1 - c, target_r - r)


def defensive_area(config: SoccerConfig) -> set[tuple[int, int]]:
    return {(c, r) for c in (0, 1) for r in config.goal_rows}


# ---------------------------------------------------------------------------
# construction and traces
# ---------------------------------------------------------------------------

def build_soccer(opponent: str | Sequence[str] = "random", *,
                 pass_enabled: bool = True, step_limit: int = 500) -> SoccerGame:
    opponents = (opponent,) if isinstance(opponent, str) else tuple(opponent)
    return SoccerGame(SoccerConfig(opponents=opponents, pass_enabled=pass_enabled,
                                   step_limit=step_limit))


def play_traced_episode(game: SoccerGame, policies, horizon: int,
                        rng: np.random.Generator):
    """Run one episode while recording the JSON-lines trace (see docs/formats.md)."""
    from ..games import run_episode

    lines = [{
        "type": "meta",
        "width": game.config.width,
        "height": game.config.height,
        "goal_rows": list(game.config.goal_rows),
        "opponents": list(game.config.opponents),
        "pass_enabled": game.config.pass_enabled,
    }]

    def hook(record: dict) -> None:
        lines.append({"type": "step", **record})

    game.trace_hook = hook
    try:
        history = run_episode(game, policies, horizon, rng)
    finally:
        game.trace_hook = None

    payoff = float(np.sum(history.rewards))
    last = lines[-1]
    if len(lines) > 1 and last["reward"] != 0.0:
        outcome = "learners-score" if last["reward"] > 0 else "opponent-scores"
    else:
        outcome = "draw"
    lines.append({"type": "end", "outcome": outcome, "steps": len(history), "payoff": payoff})
    return history, lines


def write_trace(lines, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(json.dumps(line) + "\n")


def read_trace(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if raw:
                out.append(json.loads(raw))
    return out

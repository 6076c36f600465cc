"""The built-in domains: coordination game, meal distribution, grid soccer."""

import math

import numpy as np
import pytest

from coopgrad.domains import (
    build_coordination_game,
    build_soccer,
    meal_target_distribution,
)
from coopgrad.domains.coordination import coordination_profile
from coopgrad.domains.soccer import (
    E,
    N,
    PASS,
    S,
    STAY,
    W,
    N_OBSERVATIONS,
    SoccerConfig,
    SoccerState,
    decode_observation,
    defensive_area,
    opponent_policy,
    play_traced_episode,
    read_trace,
    soccer_observe,
    write_trace,
)
from coopgrad.games import run_episode
from coopgrad.policies import random_reactive


class TestCoordination:
    def test_reward_paths(self):
        game = build_coordination_game()
        cases = [
            (coordination_profile(1, 1, 1), [0.0, 10.0]),
            (coordination_profile(1, 1, 0), [0.0, -10.0]),
            (coordination_profile(0, 0.3, 0.8), [0.0, 5.0]),
        ]
        for profile, rewards in cases:
            h = run_episode(game, profile, 5, np.random.default_rng(0))
            assert list(h.rewards) == rewards

    def test_full_observability(self):
        game = build_coordination_game()
        for spec in game.agents:
            assert np.array_equal(spec.observe, np.eye(6))


class TestMeals:
    def test_distribution(self):
        t = meal_target_distribution()
        assert t.sum() == 1.0
        assert t[0, 1] == 0.0 and t[1, 0] == 0.0  # no vodka+cereal, no milk+pickles
        assert t[0, 0] == 0.1 and t[1, 1] == 0.9

    def test_gap_is_positive(self):
        from coopgrad.analysis import factored_gap
        assert factored_gap(meal_target_distribution()).gap > 0.05


def fixed_state(positions, possessor, steps=0):
    return SoccerState(tuple(tuple(p) for p in positions), possessor, steps)


CFG = SoccerConfig(opponents=("random",))


class TestObservations:
    def test_corner_reports_two_out_of_field(self):
        state = fixed_state([(5, 0), (3, 2), (1, 2)], 0)
        owner, cells = decode_observation(soccer_observe(state, 0, CFG))
        assert owner == 0  # self
        assert cells[0] == 1 and cells[2] == 1  # N and E off the board
        assert cells[1] == 0 and cells[3] == 0

    def test_encoding_bijective(self):
        codes = set()
        for owner in range(3):
            for cells in np.ndindex(3, 3, 3, 3):
                code = owner
                for c in cells:
                    code = code * 3 + c
                assert decode_observation(code) == (owner, tuple(cells))
                codes.add(code)
        assert codes == set(range(N_OBSERVATIONS))

    def test_possession_classes(self):
        state = fixed_state([(3, 2), (4, 2), (1, 2)], 1)
        assert decode_observation(soccer_observe(state, 0, CFG))[0] == 1  # teammate
        assert decode_observation(soccer_observe(state, 1, CFG))[0] == 0  # self
        state2 = fixed_state([(3, 2), (4, 2), (1, 2)], 2)
        assert decode_observation(soccer_observe(state2, 0, CFG))[0] == 2  # opponent

    def test_occupied_neighbor_visible(self):
        state = fixed_state([(3, 2), (4, 2), (1, 2)], 0)
        _, cells = decode_observation(soccer_observe(state, 0, CFG))
        assert cells[2] == 2  # teammate to the east


class StayPolicy:
    kind = "reactive"
    internal_state_count = 1
    initial_internal = 0

    def __init__(self, action=STAY):
        self.action = action

    def act(self, obs, internal, rng):
        return self.action, 0


class TestRules:
    def game_and_state(self, positions, possessor, opponent="random", **kw):
        game = build_soccer(opponent, **kw)
        return game, fixed_state(positions, possessor)

    def test_goal_scored_moving_west_from_left_mouth(self):
        game, state = self.game_and_state([(0, 2), (4, 4), (3, 0)], 0)
        new, reward, done = game.step(state, [W, STAY], np.random.default_rng(0))
        assert done and reward == 1.0 and new.outcome == "learners-score"

    def test_own_goal_moving_east_from_right_mouth(self):
        game, state = self.game_and_state([(5, 2), (4, 4), (3, 0)], 0)
        new, reward, done = game.step(state, [E, STAY], np.random.default_rng(0))
        assert done and reward == -1.0 and new.outcome == "opponent-scores"

    def test_goal_needs_possession(self):
        game, state = self.game_and_state([(0, 2), (4, 4), (3, 0)], 1)
        new, reward, done = game.step(state, [W, STAY], np.random.default_rng(0))
        assert not done and reward == 0.0
        assert new.positions[0] == (0, 2)  # off-board move cancelled

    def test_goal_mouth_requires_goal_row(self):
        game, state = self.game_and_state([(0, 0), (4, 4), (3, 2)], 0)
        new, reward, done = game.step(state, [W, STAY], np.random.default_rng(0))
        assert not done and new.positions[0] == (0, 0)

    def test_bump_cancels_move_and_transfers_ball(self):
        game, state = self.game_and_state([(2, 2), (3, 2), (0, 0)], 0)
        new, reward, done = game.step(state, [E, STAY], np.random.default_rng(1))
        assert new.positions[0] == (2, 2) and new.positions[1] == (3, 2)
        assert new.possessor == 1  # stationary player took the ball

    def test_bump_without_ball_changes_nothing(self):
        game, state = self.game_and_state([(2, 2), (3, 2), (0, 0)], 2)
        new, reward, done = game.step(state, [E, STAY], np.random.default_rng(1))
        assert new.positions[0] == (2, 2) and new.possessor == 2

    def test_pass_transfers_on_next_step(self):
        game, state = self.game_and_state([(2, 2), (5, 4), (0, 0)], 0)
        new, reward, done = game.step(state, [PASS, STAY], np.random.default_rng(2))
        assert new.possessor == 1  # any distance, effective from the next step

    def test_pass_without_ball_is_noop(self):
        game, state = self.game_and_state([(2, 2), (5, 4), (0, 0)], 2)
        new, _, _ = game.step(state, [PASS, PASS], np.random.default_rng(2))
        assert new.possessor == 2

    def test_draw_at_step_limit(self):
        game = build_soccer("defensive", step_limit=30)
        rng = np.random.default_rng(3)
        state = game.reset(rng)
        state = SoccerState(state.positions, 2, state.steps)  # opponent holds the ball
        policies = [StayPolicy(), StayPolicy()]
        h = run_episode(game, policies, 100, rng)
        assert len(h) == 30
        assert float(np.sum(h.rewards)) == 0.0

    def test_two_movers_one_cell_first_wins(self):
        # learners from both sides target (3, 2); the execution order decides
        game, state = self.game_and_state([(2, 2), (4, 2), (0, 0)], 2)
        seen = set()
        for seed in range(40):
            new, _, _ = game.step(state, [E, W], np.random.default_rng(seed))
            assert new.positions[0] != new.positions[1]
            seen.add((new.positions[0], new.positions[1]))
        assert seen == {((3, 2), (4, 2)), ((2, 2), (3, 2))}


class TestOpponents:
    def test_random_uniform(self):
        game = build_soccer("random")
        state = fixed_state([(3, 2), (4, 4), (1, 2)], 0)
        rng = np.random.default_rng(4)
        n = 100_000
        counts = np.zeros(6)
        for _ in range(n):
            counts[opponent_policy("random", state, 2, rng, game.config)] += 1
        se = math.sqrt((1 / 6) * (5 / 6) / n)
        assert np.all(np.abs(counts / n - 1 / 6) < 3 * se)

    def test_greedy_carrier_strictly_approaches_goal(self):
        config = SoccerConfig(opponents=("greedy",))
        pos = (1, 0)
        others = [(5, 4), (4, 4)]
        goal_cells = [(5, r) for r in config.goal_rows]
        dist = min(abs(pos[0] - c) + abs(pos[1] - r) for c, r in goal_cells)
        for _ in range(10):
            state = fixed_state([others[0], others[1], pos], 2)
            a = opponent_policy("greedy", state, 2, np.random.default_rng(0), config)
            if a == E and pos[0] == 5:
                break  # scoring move
            dc, dr = {N: (0, -1), S: (0, 1), E: (1, 0), W: (-1, 0)}[a]
            pos = (pos[0] + dc, pos[1] + dr)
            new_dist = min(abs(pos[0] - c) + abs(pos[1] - r) for c, r in goal_cells)
            assert new_dist == dist - 1
            dist = new_dist

    def test_greedy_chases_and_parks_adjacent(self):
        config = SoccerConfig(opponents=("greedy",))
        state = fixed_state([(4, 2), (5, 4), (1, 2)], 0)
        a = opponent_policy("greedy", state, 2, np.random.default_rng(0), config)
        assert a == E  # horizontal first toward the carrier
        adjacent = fixed_state([(2, 2), (5, 4), (1, 2)], 0)
        assert opponent_policy("greedy", adjacent, 2,
                               np.random.default_rng(0), config) == STAY

    def test_defensive_never_leaves_goal_area(self):
        game = build_soccer("defensive")
        rng = np.random.default_rng(5)
        state = game.reset(rng)
        area = defensive_area(game.config)
        inside = 0
        for _ in range(400):
            if state.done:
                state = game.reset(rng)
            was_inside = state.positions[2] in area
            state, _, _ = game.step(state, [STAY, STAY], rng)
            if was_inside:
                inside += 1
                assert state.positions[2] in area
        assert inside > 100  # it does reach and stay in the area


class TestTraces:
    def test_roundtrip_and_payoff_consistency(self, tmp_path):
        game = build_soccer("greedy")
        rng = np.random.default_rng(6)
        policies = [random_reactive(N_OBSERVATIONS, 6, rng, 1.0) for _ in range(2)]
        history, lines = play_traced_episode(game, policies, 500, rng)
        path = tmp_path / "trace.jsonl"
        write_trace(lines, path)
        back = read_trace(path)
        assert back == lines
        assert back[0]["type"] == "meta"
        assert back[-1]["type"] == "end"
        assert back[-1]["payoff"] == float(np.sum(history.rewards))
        assert len(back) == len(history) + 2

    def test_trace_hook_restored_after_episode(self):
        game = build_soccer("random")
        rng = np.random.default_rng(7)
        policies = [random_reactive(N_OBSERVATIONS, 6, rng, 1.0) for _ in range(2)]
        play_traced_episode(game, policies, 50, rng)
        assert game.trace_hook is None


class TestPlacement:
    def test_reset_respects_halves_and_distinctness(self):
        game = build_soccer("greedy")
        rng = np.random.default_rng(8)
        for _ in range(200):
            state = game.reset(rng)
            assert len(set(state.positions)) == 3
            assert state.positions[0][0] >= 3 and state.positions[1][0] >= 3
            assert state.positions[2][0] <= 2
            assert 0 <= state.possessor < 3

    def test_initial_possession_uniform(self):
        game = build_soccer("greedy")
        rng = np.random.default_rng(9)
        n = 30_000
        counts = np.zeros(3)
        for _ in range(n):
            counts[game.reset(rng).possessor] += 1
        se = math.sqrt((1 / 3) * (2 / 3) / n)
        assert np.all(np.abs(counts / n - 1 / 3) < 3 * se)


class TestMultipleOpponents:
    def test_two_opponents_supported_by_python_engine(self):
        game = build_soccer(["greedy", "defensive"])
        rng = np.random.default_rng(10)
        state = game.reset(rng)
        assert len(state.positions) == 4
        policies = [random_reactive(N_OBSERVATIONS, 6, rng, 1.0) for _ in range(2)]
        h = run_episode(game, policies, 200, rng)
        assert len(h) >= 1


def test_pass_disabled_shrinks_action_space():
    game = build_soccer("random", pass_enabled=False)
    assert game.agents[0].action_count == 5
    from coopgrad.games import ContractViolation
    state = game.reset(np.random.default_rng(11))
    with pytest.raises(ContractViolation):
        game.step(state, [PASS, STAY], np.random.default_rng(0))

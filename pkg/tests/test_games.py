"""Game model, joint actions, episode simulation, histories, serialization."""

import itertools

import numpy as np
import pytest

from coopgrad.games import (
    AgentSpec,
    ContractViolation,
    GameModel,
    History,
    discounted_return,
    game_from_json,
    game_to_json,
    joint_action_decode,
    joint_action_index,
    run_episode,
)
from coopgrad.domains import build_coordination_game
from coopgrad.domains.coordination import coordination_profile
from coopgrad.verify import random_game, random_policies


def specs(*action_counts):
    return [AgentSpec(a, 1, np.ones((1, 1))) for a in action_counts]


class TestJointActions:
    def test_identity_case(self):
        assert joint_action_index([0, 0], specs(2, 2)) == 0

    def test_agent0_least_significant(self):
        assert joint_action_index([1, 0], specs(2, 2)) == 1
        assert joint_action_index([0, 1], specs(2, 2)) == 2

    def test_roundtrip_exhaustive_three_agents(self):
        ag = specs(2, 3, 2)
        seen = set()
        for acts in itertools.product(range(2), range(3), range(2)):
            idx = joint_action_index(list(acts), ag)
            assert joint_action_decode(idx, ag) == acts
            seen.add(idx)
        assert seen == set(range(12))

    def test_out_of_range_action(self):
        with pytest.raises(ContractViolation):
            joint_action_index([2, 0], specs(2, 2))
        with pytest.raises(ContractViolation):
            joint_action_decode(12, specs(2, 3, 2))


class TestValidation:
    def test_observation_rows_must_be_distributions(self):
        with pytest.raises(ContractViolation):
            AgentSpec(2, 2, np.array([[0.5, 0.4]]))

    def test_transition_rows_must_be_distributions(self):
        game = build_coordination_game()
        bad = game.transition.copy()
        bad[0, 0, :] = 0.3
        with pytest.raises(ContractViolation):
            GameModel(game.state_count, game.initial_state, game.agents,
                      bad, game.reward, game.terminal)

    def test_terminal_states_must_absorb_with_zero_reward(self):
        game = build_coordination_game()
        bad = game.reward.copy()
        bad[3, 0] = 1.0
        with pytest.raises(ContractViolation):
            GameModel(game.state_count, game.initial_state, game.agents,
                      game.transition, bad, game.terminal)


class TestRunEpisode:
    def test_coordination_optimal_profile(self):
        game = build_coordination_game()
        history = run_episode(game, coordination_profile(1, 1, 1), 10,
                              np.random.default_rng(0))
        assert list(history.rewards) == [0.0, 10.0]
        assert list(history.states) == [0, 1, 3]

    def test_horizon_validation(self):
        game = build_coordination_game()
        with pytest.raises(ContractViolation):
            run_episode(game, coordination_profile(1, 1, 1), 0,
                        np.random.default_rng(0))
        history = run_episode(game, coordination_profile(1, 1, 1), 1,
                              np.random.default_rng(0))
        assert len(history) == 1

    def test_same_seed_same_history(self):
        rng = np.random.default_rng(3)
        game = random_game(rng)
        policies = random_policies(game, rng)
        h1 = run_episode(game, policies, 20, np.random.default_rng(7))
        h2 = run_episode(game, policies, 20, np.random.default_rng(7))
        assert np.array_equal(h1.observations, h2.observations)
        assert np.array_equal(h1.internals, h2.internals)
        assert np.array_equal(h1.actions, h2.actions)
        assert np.array_equal(h1.rewards, h2.rewards)

    def test_policy_arity_mismatch(self):
        game = build_coordination_game()
        with pytest.raises(ContractViolation):
            run_episode(game, coordination_profile(1, 1, 1)[:1], 5,
                        np.random.default_rng(0))

    def test_terminal_absorption_stops_episode(self):
        game = build_coordination_game()
        history = run_episode(game, coordination_profile(0, 0.5, 0.5), 50,
                              np.random.default_rng(1))
        assert len(history) == 2  # s1 -> s3 -> s6 (terminal)
        assert history.states[-1] in game.terminal


class TestHistoryZip:
    def test_agent_views_reassemble_losslessly(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            game = random_game(rng)
            policies = random_policies(game, rng)
            h = run_episode(game, policies, 15, rng)
            views = [h.agent_view(i) for i in range(h.n_agents)]
            rebuilt = History.from_agent_views(views, states=h.states)
            assert np.array_equal(rebuilt.observations, h.observations)
            assert np.array_equal(rebuilt.internals, h.internals)
            assert np.array_equal(rebuilt.actions, h.actions)
            assert np.array_equal(rebuilt.rewards, h.rewards)
            assert rebuilt.initial_internal == h.initial_internal

    def test_agent_view_is_local_only(self):
        game = build_coordination_game()
        h = run_episode(game, coordination_profile(1, 1, 1), 5,
                        np.random.default_rng(0))
        view = h.agent_view(0)
        assert view.observations.ndim == 1
        assert not hasattr(view, "states")


class TestDiscountedReturn:
    def test_coordination_return(self):
        game = build_coordination_game()
        h = run_episode(game, coordination_profile(1, 1, 1), 10,
                        np.random.default_rng(0))
        assert discounted_return(h, 0.99) == pytest.approx(9.9, abs=1e-12)

    def test_zero_rewards(self):
        assert discounted_return(np.zeros(5), 0.9) == 0.0

    def test_single_reward_undiscounted(self):
        assert discounted_return(np.array([3.5]), 0.9) == 3.5

    def test_empty_history_rejected(self):
        with pytest.raises(ContractViolation):
            discounted_return(np.array([]), 0.9)


def test_empirical_transition_frequencies_match_model():
    rng = np.random.default_rng(11)
    game = random_game(rng, max_states=4)
    # find a stochastic row to exercise the sampler
    s, ja = next((s, ja) for s in range(game.state_count)
                 for ja in range(game.joint_actions)
                 if np.count_nonzero(game.transition[s, ja]) > 1)
    row = game.transition[s, ja]
    n = 100_000
    from coopgrad.games import sample_categorical
    counts = np.zeros(game.state_count)
    for _ in range(n):
        counts[sample_categorical(row, rng)] += 1
    for s2 in range(game.state_count):
        p = row[s2]
        se = np.sqrt(max(p * (1 - p), 1e-12) / n)
        assert abs(counts[s2] / n - p) < 3 * se + 1e-9


class TestGameJson:
    def test_coordination_roundtrip_lossless(self):
        game = build_coordination_game()
        back = game_from_json(game_to_json(game))
        assert back.state_count == game.state_count
        assert back.initial_state == game.initial_state
        assert back.terminal == game.terminal
        assert np.array_equal(back.transition, game.transition)
        assert np.array_equal(back.reward, game.reward)
        for a, b in zip(back.agents, game.agents):
            assert a.action_count == b.action_count
            assert np.array_equal(a.observe, b.observe)

    def test_random_game_roundtrip_lossless(self):
        rng = np.random.default_rng(4)
        game = random_game(rng)
        back = game_from_json(game_to_json(game))
        assert np.array_equal(back.transition, game.transition)
        assert np.array_equal(back.reward, game.reward)

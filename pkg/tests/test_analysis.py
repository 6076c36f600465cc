"""Exact value/gradient oracles, estimator enumeration, Nash reports, gap."""

import json

import numpy as np
import pytest

from coopgrad.analysis import (
    DeviationWitness,
    NashReport,
    enumerate_estimator_expectation,
    exact_gradient,
    exact_gradient_all,
    exact_value,
    factored_gap,
    local_optimum_counterexample,
    verify_nash,
)
from coopgrad.games import AgentSpec, ContractViolation, GameModel, run_episode, discounted_return
from coopgrad.domains import build_coordination_game, meal_target_distribution
from coopgrad.domains.coordination import coordination_profile
from coopgrad.policies import BoltzmannReactivePolicy
from coopgrad.verify import random_game, random_policies

GAME = build_coordination_game()


class TestExactValue:
    def test_optimal_profile(self):
        v = exact_value(GAME, coordination_profile(1, 1, 1), 0.99)
        assert v == pytest.approx(9.9, abs=1e-6)

    def test_bottom_branch_value_ignores_s2_behavior(self):
        for p12, p22 in [(0.5, 0.5), (0.1, 0.9), (1.0, 0.0)]:
            v = exact_value(GAME, coordination_profile(0, p12, p22), 0.99)
            assert v == pytest.approx(0.99 * 5.0, abs=1e-6)

    def test_zero_rewards(self):
        zero = GameModel(GAME.state_count, GAME.initial_state, GAME.agents,
                         GAME.transition, np.zeros_like(GAME.reward), GAME.terminal)
        assert exact_value(zero, coordination_profile(1, 1, 1), 0.99) == 0.0

    def test_gamma_range_checked(self):
        with pytest.raises(ContractViolation):
            exact_value(GAME, coordination_profile(1, 1, 1), 1.0)

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(0)
        for _ in range(3):
            game = random_game(rng, max_states=4)
            policies = random_policies(game, rng)
            v = exact_value(game, policies, 0.8)
            n = 4000
            horizon = 90  # truncation bias ~0.8^90/0.2, far below the SE
            returns = [discounted_return(run_episode(game, policies, horizon, rng), 0.8)
                       for _ in range(n)]
            se = np.std(returns, ddof=1) / np.sqrt(n)
            assert abs(np.mean(returns) - v) < 3 * se + 1e-9


class TestExactGradient:
    def test_stationary_at_strict_optimum(self):
        grads = exact_gradient_all(GAME, coordination_profile(1, 1, 1), 0.99)
        worst = max(float(np.max(np.abs(a))) for g in grads for a in g.arrays)
        assert worst < 1e-4

    def test_unreachable_weight_has_zero_gradient(self):
        # under {1,1;1} state s3 is never reached, so agent 1's s3 row is inert
        g = exact_gradient(GAME, coordination_profile(1, 1, 1), 0.99, (0, 0, 2 * 2))
        assert abs(g) < 1e-10

    def test_step_size_consistency_check_runs(self):
        profile = coordination_profile(0.6, 0.4, 0.7)
        g = exact_gradient(GAME, profile, 0.99, (1, 0, 2 * 1), check=True)
        assert np.isfinite(g)


def one_state_bandit(r0, r1):
    agents = (AgentSpec(2, 1, np.ones((2, 1))),)
    transition = np.zeros((2, 2, 2))
    transition[0, :, 1] = 1.0
    transition[1, :, 1] = 1.0
    reward = np.array([[r0, r1], [0.0, 0.0]])
    return GameModel(2, 0, agents, transition, reward, frozenset({1}))


class TestEstimatorExpectation:
    def test_bandit_matches_analytic_gradient(self):
        game = one_state_bandit(2.0, -1.0)
        pol = BoltzmannReactivePolicy([[0.3, -0.2]])
        exp = enumerate_estimator_expectation(game, [pol], 0.9, horizon=1)
        p = pol.action_probabilities(0)
        # d/dw0 of (p0 r0 + p1 r1) = p0 (1 - p0) (r0 - r1)
        analytic = p[0] * (1 - p[0]) * (2.0 - (-1.0))
        assert exp[0].arrays[0][0, 0] == pytest.approx(analytic, abs=1e-12)
        assert exp[0].arrays[0][0, 1] == pytest.approx(-analytic, abs=1e-12)

    def test_zero_reward_game(self):
        game = one_state_bandit(0.0, 0.0)
        pol = BoltzmannReactivePolicy([[0.3, -0.2]])
        exp = enumerate_estimator_expectation(game, [pol], 0.9, horizon=3)
        assert np.all(exp[0].arrays[0] == 0.0)

    def test_coordination_matches_truncated_gradient(self):
        profile = coordination_profile(0.6, 0.4, 0.7)
        exp = enumerate_estimator_expectation(GAME, profile, 0.95, horizon=2)
        for i, pol in enumerate(profile):
            for flat in range(pol.weights.size):
                fd = exact_gradient(GAME, profile, 0.95, (i, 0, flat), horizon=2)
                assert exp[i].arrays[0].ravel()[flat] == pytest.approx(fd, abs=1e-8)

    def test_explosion_guard(self):
        rng = np.random.default_rng(1)
        game = random_game(rng, max_states=5)
        policies = random_policies(game, rng)
        with pytest.raises(ContractViolation):
            enumerate_estimator_expectation(game, policies, 0.9, horizon=50)


class TestVerifyNash:
    def test_strict_equilibria(self):
        for profile in (coordination_profile(1, 1, 1), coordination_profile(1, 0, 0)):
            report = verify_nash(GAME, profile, 0.99)
            assert report.classification == "strict-nash"
            assert report.witness is None
            assert not report.deterministic_class_only  # fully observable

    def test_suboptimal_interval_members_are_weak(self):
        for q in (0.25, 0.3, 0.5, 0.75):
            report = verify_nash(GAME, coordination_profile(0, 0.5, q), 0.99)
            assert report.classification == "weak-nash", q

    def test_outside_interval_rejected_with_witness(self):
        report = verify_nash(GAME, coordination_profile(0, 0.5, 0.9), 0.99)
        assert report.classification == "not-nash"
        assert report.witness.agent == 0  # the branching agent switches up
        # best response earns 10|2q-1| = 8 vs the safe 5, one step discounted
        assert report.witness.value_gain == pytest.approx(0.99 * 3.0, abs=1e-6)

    def test_report_json_shape(self):
        report = verify_nash(GAME, coordination_profile(0, 0.5, 0.1), 0.99)
        doc = json.loads(report.to_json())
        assert doc["classification"] == "not-nash"
        assert doc["witness"]["kind"] == "deterministic"

    def test_witness_invariant_enforced(self):
        with pytest.raises(ContractViolation):
            NashReport("weak-nash", 1.0,
                       DeviationWitness(0, "deterministic", None, 1.0), False, {})

    def test_reactive_profiles_required(self):
        from coopgrad.policies import random_fsc
        fsc = random_fsc(2, 6, 2, np.random.default_rng(2))
        with pytest.raises(ContractViolation):
            verify_nash(GAME, [fsc, fsc], 0.99)


class TestCounterexample:
    def test_stationary_but_not_nash(self):
        game, profile = local_optimum_counterexample()
        grads = exact_gradient_all(game, profile, 0.99)
        worst = max(float(np.max(np.abs(a))) for g in grads for a in g.arrays)
        assert worst < 1e-6
        report = verify_nash(game, profile, 0.99)
        assert report.classification == "not-nash"
        assert report.witness.value_gain == pytest.approx(0.99, abs=1e-6)

    def test_committed_better_branch_is_deterministic_class_nash(self):
        game, profile = local_optimum_counterexample()
        better = [BoltzmannReactivePolicy(np.array([[-20.0, 20.0]])),
                  profile[1].clone()]
        report = verify_nash(game, better, 0.99)
        assert report.accepted()
        assert report.deterministic_class_only  # agents observe nothing


class TestFactoredGap:
    def test_meal_distribution_gap(self):
        res = factored_gap(meal_target_distribution())
        assert res.gap > 0.05
        # the optimum sits at the kink where the big cell's error changes sign
        t = 1 - np.sqrt(0.9)
        assert res.gap == pytest.approx(2 * t * (1 - t), abs=1e-6)

    def test_product_targets_have_zero_gap(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            p, q = rng.random(), rng.random()
            res = factored_gap(np.outer([p, 1 - p], [q, 1 - q]))
            assert res.gap < 1e-6

    def test_uniform_is_a_product(self):
        res = factored_gap(np.full((2, 2), 0.25))
        assert res.gap < 1e-6
        assert res.p == pytest.approx(0.5, abs=1e-3)

    def test_input_validation(self):
        with pytest.raises(ContractViolation):
            factored_gap(np.array([[0.5, 0.2], [0.1, 0.1]]))

"""Verification suites behind ``coopgrad verify`` and the acceptance tests.

Each suite returns a JSON-able dict with a boolean "passed", the numbers it
measured, and a counterexample when something failed.  The suites check the
load-bearing claims numerically:

* theorem1 — distributed and joint gradient updates coincide on factored
  controllers, on randomized games and the coordination game.
* gradients — policy log-probability gradients match finite differences.
* estimator — the exhaustive-history expectation of the sampled per-trial
  estimator equals the finite-difference gradient of the truncated value.
* nash — the coordination game's equilibrium structure, the strict-Nash
  stationarity condition, and the stationary-but-not-Nash counterexample.
* gap — the joint-vs-factored representability gap oracle.
* soccer-invariants — occupancy/possession/termination hold under fuzzing.
"""

from __future__ import annotations

import numpy as np

from .analysis import (
    enumerate_estimator_expectation,
    exact_gradient,
    exact_gradient_all,
    factored_gap,
    local_optimum_counterexample,
    verify_nash,
)
from .domains import build_coordination_game, build_soccer, meal_target_distribution
from .domains.coordination import coordination_profile
from .domains.soccer import OPPONENT_KINDS
from .games import AgentSpec, GameModel, run_episode
from .learning import FactoredController, dgd_episode_update
from .policies import random_fsc, random_reactive


# ---------------------------------------------------------------------------
# randomized game/policy generators
# ---------------------------------------------------------------------------

def random_game(rng: np.random.Generator, max_states: int = 5, n_agents: int = 2,
                max_actions: int = 3, max_observations: int = 3,
                stochastic_obs: bool = True) -> GameModel:
    """Small random tabular game, possibly partially observable and stochastic."""
    n_states = int(rng.integers(2, max_states + 1))
    agents = []
    for _ in range(n_agents):
        n_act = int(rng.integers(2, max_actions + 1))
        n_obs = int(rng.integers(2, max_observations + 1))
        observe = np.zeros((n_states, n_obs))
        for s in range(n_states):
            if not stochastic_obs or rng.random() < 0.5:
                observe[s, int(rng.integers(n_obs))] = 1.0
            else:
                observe[s] = rng.dirichlet(np.ones(n_obs))
        agents.append(AgentSpec(n_act, n_obs, observe))
    n_joint = 1
    for a in agents:
        n_joint *= a.action_count
    transition = np.zeros((n_states, n_joint, n_states))
    for s in range(n_states):
        for ja in range(n_joint):
            if rng.random() < 0.3:
                transition[s, ja, int(rng.integers(n_states))] = 1.0
            else:
                transition[s, ja] = rng.dirichlet(np.ones(n_states))
    reward = rng.uniform(-1.0, 1.0, size=(n_states, n_joint))
    return GameModel(state_count=n_states, initial_state=int(rng.integers(n_states)),
                     agents=tuple(agents), transition=transition, reward=reward)


def random_policies(game: GameModel, rng: np.random.Generator, scale: float = 0.5,
                    allow_fsc: bool = True):
    policies = []
    for spec in game.agents:
        if allow_fsc and rng.random() < 0.5:
            n_internal = int(rng.integers(2, 4))
            policies.append(random_fsc(n_internal, spec.observation_count,
                                       spec.action_count, rng, scale))
        else:
            policies.append(random_reactive(spec.observation_count, spec.action_count,
                                            rng, scale))
    return policies


# ---------------------------------------------------------------------------
# theorem 1: distributed == joint gradient descent
# ---------------------------------------------------------------------------

def theorem1_suite(n_games: int = 20, episodes: int = 1000, horizon: int = 6,
                   alpha: float = 0.01, gamma: float = 0.95, seed: int = 1,
                   tolerance: float = 1e-12) -> dict:
    """Feed both learners the same seeded histories; compare every update."""
    rng = np.random.default_rng(seed)
    cases = [(random_game(rng), None) for _ in range(n_games)]
    cases.append((build_coordination_game(), coordination_profile(0.6, 0.4, 0.5)))
    worst_update = 0.0
    worst_final = 0.0
    failure = None
    for idx, (game, preset) in enumerate(cases):
        policies = preset if preset is not None else random_policies(game, rng)
        dgd_policies = [p.clone() for p in policies]
        joint = FactoredController([p.clone() for p in policies])
        ep_rng = np.random.default_rng(rng.integers(2 ** 63))
        for ep in range(episodes):
            history = run_episode(game, dgd_policies, horizon, ep_rng)
            est_d = dgd_episode_update(dgd_policies, history, alpha, gamma)
            est_j = joint.episode_update(history, alpha, gamma)
            diff = max(a.max_abs_diff(b) for a, b in zip(est_d, est_j))
            worst_update = max(worst_update, diff)
            if diff > tolerance and failure is None:
                failure = {"game": idx, "episode": ep, "update_diff": diff}
        for pd, pj in zip(dgd_policies, joint.policies):
            for wa, wb in zip(pd.weight_arrays(), pj.weight_arrays()):
                worst_final = max(worst_final, float(np.max(np.abs(wa - wb))))
    return {
        "suite": "theorem1",
        "passed": failure is None and worst_final < 1e-9,
        "games": len(cases),
        "episodes_per_game": episodes,
        "max_update_discrepancy": worst_update,
        "max_final_weight_discrepancy": worst_final,
        "tolerance": tolerance,
        "counterexample": failure,
    }


# ---------------------------------------------------------------------------
# log-probability gradients vs finite differences
# ---------------------------------------------------------------------------

def _step_logprob_fd(policy, event, coord, h):
    obs, prev_internal, internal, action = event
    ai, flat = coord
    arrays = policy.weight_arrays()
    orig = arrays[ai].ravel()[flat]
    arrays[ai].ravel()[flat] = orig + h
    hi = policy.step_log_prob(obs, prev_internal, internal, action)
    arrays[ai].ravel()[flat] = orig - h
    lo = policy.step_log_prob(obs, prev_internal, internal, action)
    arrays[ai].ravel()[flat] = orig
    return (hi - lo) / (2 * h)


def gradient_suite(n_policies: int = 100, seed: int = 2, step: float = 1e-5,
                   tolerance: float = 1e-6) -> dict:
    """Analytic step scores vs central differences of the step log probability."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    failure = None
    for k in range(n_policies):
        n_obs = int(rng.integers(2, 5))
        n_act = int(rng.integers(2, 5))
        if k % 2 == 0:
            policy = random_reactive(n_obs, n_act, rng, scale=1.0)
            event = (int(rng.integers(n_obs)), 0, 0, int(rng.integers(n_act)))
        else:
            n_int = int(rng.integers(2, 4))
            policy = random_fsc(n_int, n_obs, n_act, rng, scale=1.0)
            event = (int(rng.integers(n_obs)), int(rng.integers(n_int)),
                     int(rng.integers(n_int)), int(rng.integers(n_act)))
        score = policy.step_score(*event)
        for ai, g in enumerate(score.arrays):
            flat_g = g.ravel()
            for flat in range(flat_g.size):
                fd = _step_logprob_fd(policy, event, (ai, flat), step)
                rel = abs(fd - flat_g[flat]) / max(abs(fd), abs(flat_g[flat]), 1e-8)
                worst = max(worst, rel)
                if rel > tolerance and failure is None:
                    failure = {"policy": k, "array": ai, "weight": flat,
                               "analytic": float(flat_g[flat]), "fd": fd}
    return {
        "suite": "gradients",
        "passed": failure is None,
        "policies": n_policies,
        "max_relative_error": worst,
        "tolerance": tolerance,
        "counterexample": failure,
    }


# ---------------------------------------------------------------------------
# estimator unbiasedness at small horizon
# ---------------------------------------------------------------------------

def estimator_suite(n_games: int = 10, horizon: int = 3, gamma: float = 0.9,
                    seed: int = 3, tolerance: float = 1e-8) -> dict:
    """Exhaustive estimator expectation vs finite differences, per weight."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    failure = None
    for idx in range(n_games):
        # deterministic observations and 2 actions keep the full history set
        # under the enumeration guard at horizon 3
        game = random_game(rng, max_states=3, max_actions=2, max_observations=2,
                           stochastic_obs=False)
        policies = random_policies(game, rng, scale=0.4)
        expectation = enumerate_estimator_expectation(game, policies, gamma, horizon)
        for i, policy in enumerate(policies):
            for ai, w in enumerate(policy.weight_arrays()):
                for flat in range(w.size):
                    fd = exact_gradient(game, policies, gamma, (i, ai, flat),
                                        horizon=horizon)
                    e = expectation[i].arrays[ai].ravel()[flat]
                    diff = abs(fd - e)
                    worst = max(worst, diff)
                    if diff > tolerance and failure is None:
                        failure = {"game": idx, "agent": i, "array": ai,
                                   "weight": flat, "fd": fd, "expectation": float(e)}
    return {
        "suite": "estimator",
        "passed": failure is None,
        "games": n_games,
        "horizon": horizon,
        "max_abs_difference": worst,
        "tolerance": tolerance,
        "counterexample": failure,
    }


# ---------------------------------------------------------------------------
# equilibrium structure
# ---------------------------------------------------------------------------

NASH_TABLE = (
    # (p11, p12, p22, expected classification)
    (1.0, 1.0, 1.0, "strict-nash"),
    (1.0, 0.0, 0.0, "strict-nash"),
    (0.0, 0.5, 0.25, "weak-nash"),
    (0.0, 0.5, 0.3, "weak-nash"),
    (0.0, 0.5, 0.5, "weak-nash"),
    (0.0, 0.5, 0.7, "weak-nash"),
    (0.0, 0.5, 0.75, "weak-nash"),
    (0.0, 0.5, 0.1, "not-nash"),
    (0.0, 0.5, 0.9, "not-nash"),
)


def nash_suite(gamma: float = 0.99) -> dict:
    game = build_coordination_game()
    rows = []
    all_ok = True
    for p11, p12, p22, expected in NASH_TABLE:
        report = verify_nash(game, coordination_profile(p11, p12, p22), gamma)
        ok = report.classification == expected
        all_ok &= ok
        rows.append({
            "profile": [p11, p12, p22],
            "expected": expected,
            "got": report.classification,
            "value": report.value,
            "ok": ok,
        })

    # strict equilibria must be gradient-stationary (local optima)
    strict_grad = 0.0
    for p11, p12, p22, expected in NASH_TABLE:
        if expected != "strict-nash":
            continue
        grads = exact_gradient_all(game, coordination_profile(p11, p12, p22), gamma)
        strict_grad = max(strict_grad,
                          max(float(np.max(np.abs(a))) for g in grads for a in g.arrays))
    theorem2_ok = strict_grad < 1e-4

    # a gradient-stationary profile that is not an equilibrium
    trap_game, trap_profile = local_optimum_counterexample(gamma)
    trap_grads = exact_gradient_all(trap_game, trap_profile, gamma)
    trap_grad = max(float(np.max(np.abs(a))) for g in trap_grads for a in g.arrays)
    trap_report = verify_nash(trap_game, trap_profile, gamma)
    theorem3_ok = (trap_grad < 1e-6
                   and trap_report.classification == "not-nash"
                   and trap_report.witness is not None
                   and trap_report.witness.value_gain > 0.5)

    return {
        "suite": "nash",
        "passed": all_ok and theorem2_ok and theorem3_ok,
        "classifications": rows,
        "strict_profiles_max_gradient": strict_grad,
        "stationary_counterexample": {
            "max_gradient": trap_grad,
            "classification": trap_report.classification,
            "deviation_gain": trap_report.witness.value_gain if trap_report.witness else 0.0,
        },
    }


# ---------------------------------------------------------------------------
# representability gap
# ---------------------------------------------------------------------------

def gap_suite(n_random: int = 50, seed: int = 4) -> dict:
    rng = np.random.default_rng(seed)
    meal = factored_gap(meal_target_distribution())
    uniform = factored_gap(np.full((2, 2), 0.25))
    worst_product = 0.0
    for _ in range(n_random):
        p, q = rng.random(), rng.random()
        res = factored_gap(np.outer([p, 1 - p], [q, 1 - q]))
        worst_product = max(worst_product, res.gap)
    passed = meal.gap > 0.05 and uniform.gap < 1e-6 and worst_product < 1e-6
    return {
        "suite": "gap",
        "passed": passed,
        "meal_gap": meal.gap,
        "meal_best_product": [meal.p, meal.q],
        "uniform_gap": uniform.gap,
        "random_products": n_random,
        "max_product_gap": worst_product,
    }


# ---------------------------------------------------------------------------
# soccer invariant fuzzing
# ---------------------------------------------------------------------------

def _fuzz_soccer_python(game, n_steps: int, rng: np.random.Generator) -> dict:
    violations = []
    steps = goals = draws = 0
    state = game.reset(rng)
    episodes = 1
    n_act = game.agents[0].action_count
    while steps < n_steps:
        actions = [int(rng.random() * n_act), int(rng.random() * n_act)]
        prev = state
        state, reward, done = game.step(state, actions, rng)
        steps += 1
        if len(set(state.positions)) != len(state.positions):
            violations.append({"step": steps, "kind": "occupancy"})
        if not 0 <= state.possessor < game.n_players:
            violations.append({"step": steps, "kind": "possession"})
        goal = state.outcome in ("learners-score", "opponent-scores")
        if (reward != 0.0) != goal:
            violations.append({"step": steps, "kind": "reward-outcome"})
        if goal and reward not in (1.0, -1.0):
            violations.append({"step": steps, "kind": "reward-magnitude"})
        if done != (state.outcome is not None):
            violations.append({"step": steps, "kind": "done-flag"})
        if state.outcome == "draw" and prev.steps + 1 != game.config.step_limit:
            violations.append({"step": steps, "kind": "early-draw"})
        if violations:
            break
        if done:
            goals += int(goal)
            draws += int(state.outcome == "draw")
            state = game.reset(rng)
            episodes += 1
    return {"steps": steps, "episodes": episodes, "goals": goals, "draws": draws,
            "violations": violations}


def soccer_invariants_suite(n_steps: int = 10 ** 6, seed: int = 5,
                            backend: str = "auto") -> dict:
    from . import _kernels

    per_kind = {}
    all_ok = True
    share = n_steps // len(OPPONENT_KINDS)
    for k, kind in enumerate(OPPONENT_KINDS):
        game = build_soccer(kind)
        rng = np.random.default_rng(seed + k)
        kernel = None
        if _kernels.active_backend(backend) == "compiled":
            kernel = getattr(_kernels._core, "fuzz_soccer", None)
        if kernel is not None:
            result = kernel(game, share, rng)
        else:
            result = _fuzz_soccer_python(game, share, rng)
        per_kind[kind] = result
        all_ok &= not result["violations"]
    return {
        "suite": "soccer-invariants",
        "passed": all_ok,
        "steps_per_opponent": share,
        "results": per_kind,
    }


SUITES = {
    "theorem1": theorem1_suite,
    "gradients": gradient_suite,
    "estimator": estimator_suite,
    "nash": nash_suite,
    "gap": gap_suite,
    "soccer-invariants": soccer_invariants_suite,
}

"""Stochastic gradient policy search: the per-trial estimator and two drivers.

``dgd_train`` runs the distributed form: every agent updates its own weights
from its local history (its observations, memory states, actions, and the
shared rewards) and never touches another agent's parameters.
``joint_gradient_train`` runs the centralized form on a factored controller:
one learner computes the full gradient from the joint history.  For factored
controllers the two produce identical per-episode updates, which the
verification suite checks numerically on randomized games.

The per-trial gradient estimate for one weight is

    sum_t  gamma^t r(t) * sum_{tau <= t} d ln Pr(step tau) / dw

accumulated with an eligibility sum (``episode_gradient``).  The training
loops use the algebraically identical suffix-return form, which touches only
the weight rows visited at each step:

    sum_tau  d ln Pr(step tau)/dw * (sum_{t >= tau} gamma^t r(t))

Updates are applied once per episode: w += learning_rate * estimate.  The
update increases the value (the estimator is the gradient of the value, not
of a loss).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .games import ContractViolation, History, discounted_return, run_episode
from .policies import GradientEstimate


@dataclass
class TrainConfig:
    learning_rate: float
    discount: float
    episodes: int
    horizon: int
    eval_every: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ContractViolation("learning_rate must be >= 0")
        if not 0 <= self.discount < 1:
            raise ContractViolation("discount must be in [0, 1)")
        if self.episodes < 0 or self.horizon < 1 or self.eval_every < 1:
            raise ContractViolation("episodes >= 0, horizon >= 1, eval_every >= 1")


@dataclass
class LearningCurve:
    """Sparse (episode, metric, value) samples; episodes increase per metric."""

    samples: list = field(default_factory=list)

    def add(self, episode: int, metric: str, value: float) -> None:
        for e, m, _ in reversed(self.samples):
            if m == metric:
                if episode <= e:
                    raise ContractViolation(f"episode indices must increase for {metric!r}")
                break
        self.samples.append((int(episode), str(metric), float(value)))

    def series(self, metric: str):
        pts = [(e, v) for e, m, v in self.samples if m == metric]
        return [e for e, _ in pts], [v for _, v in pts]

    def metrics(self):
        return sorted({m for _, m, _ in self.samples})


# ---------------------------------------------------------------------------
# the per-trial estimator
# ---------------------------------------------------------------------------

def episode_gradient(policy, agent_history, gamma: float) -> GradientEstimate:
    """Per-trial gradient estimate from one agent's local history.

    Incremental form: an eligibility accumulator z_t sums the step score
    gradients up to t; the estimate is sum_t gamma^t r(t) z_t.
    """
    T = len(agent_history)
    obs, ints, acts = agent_history.observations, agent_history.internals, agent_history.actions
    if T and (int(obs.max()) >= policy.observation_count
              or int(acts.max()) >= policy.action_count
              or int(ints.max()) >= policy.internal_state_count):
        raise ContractViolation("history indices exceed the policy's shapes")
    z = GradientEstimate.zeros_like(policy)
    total = GradientEstimate.zeros_like(policy)
    prev = agent_history.initial_internal
    g = 1.0
    for t in range(T):
        step = policy.step_score(obs[t], prev, ints[t], acts[t])
        for za, sa in zip(z.arrays, step.arrays):
            za += sa
        total.add_scaled(z, g * float(agent_history.rewards[t]))
        prev = ints[t]
        g *= gamma
    return total


def _suffix_coefficients(rewards, gamma: float) -> np.ndarray:
    """coef[tau] = sum_{t >= tau} gamma^t r(t), via a backward recursion."""
    T = len(rewards)
    gt = np.empty(T)
    g = 1.0
    for t in range(T):
        gt[t] = g
        g *= gamma
    coef = np.empty(T)
    tail = 0.0
    for t in range(T - 1, -1, -1):
        tail = float(rewards[t]) + gamma * tail
        coef[t] = gt[t] * tail
    return coef


def _accumulate_estimate(policy, view, coef, estimate: GradientEstimate) -> None:
    """Add the suffix-return form of the estimator into ``estimate``."""
    prev = view.initial_internal
    for t in range(len(view)):
        rows = policy.step_score_rows(view.observations[t], prev, view.internals[t],
                                      view.actions[t])
        c = coef[t]
        for ai, idx, row in rows:
            estimate.arrays[ai][idx] += c * row
        prev = view.internals[t]


def dgd_episode_update(policies, history: History, alpha: float, gamma: float):
    """Apply one distributed update; returns the per-agent estimates.

    Each agent reads only its own view of the history.
    """
    coef = _suffix_coefficients(history.rewards, gamma)
    estimates = []
    for i, policy in enumerate(policies):
        est = GradientEstimate.zeros_like(policy)
        _accumulate_estimate(policy, history.agent_view(i), coef, est)
        for w, g in zip(policy.weight_arrays(), est.arrays):
            w += alpha * g
        estimates.append(est)
    return estimates


class FactoredController:
    """A central controller whose joint policy is a product of per-agent policies.

    The joint action distribution factorizes, so the log probability of a
    joint step is the sum of the per-agent step log probabilities and its
    gradient splits across the per-agent weight blocks.
    """

    def __init__(self, policies):
        self.policies = list(policies)

    def clone(self) -> "FactoredController":
        return FactoredController([p.clone() for p in self.policies])

    def episode_update(self, history: History, alpha: float, gamma: float):
        """Apply one centralized update from the joint history."""
        coef = _suffix_coefficients(history.rewards, gamma)
        estimates = [GradientEstimate.zeros_like(p) for p in self.policies]
        prev = list(history.initial_internal)
        for t in range(len(history)):
            c = coef[t]
            for i, policy in enumerate(self.policies):
                rows = policy.step_score_rows(history.observations[t, i], prev[i],
                                              history.internals[t, i], history.actions[t, i])
                for ai, idx, row in rows:
                    estimates[i].arrays[ai][idx] += c * row
                prev[i] = history.internals[t, i]
        for policy, est in zip(self.policies, estimates):
            for w, g in zip(policy.weight_arrays(), est.arrays):
                w += alpha * g
        return estimates


# ---------------------------------------------------------------------------
# training drivers
# ---------------------------------------------------------------------------

def _record_window(curve, episode, payoff_sum, disc_sum, count):
    curve.add(episode, "payoff", payoff_sum / count)
    curve.add(episode, "return_disc", disc_sum / count)


def _train_loop(game, policies, config: TrainConfig, rng, update_fn):
    curve = LearningCurve()
    payoff_sum = disc_sum = 0.0
    window = 0
    for episode in range(config.episodes):
        history = run_episode(game, policies, config.horizon, rng)
        update_fn(history)
        payoff = 0.0
        for r in history.rewards:
            payoff += float(r)
        payoff_sum += payoff
        disc_sum += discounted_return(history, config.discount)
        window += 1
        if window == config.eval_every or episode == config.episodes - 1:
            _record_window(curve, episode + 1, payoff_sum, disc_sum, window)
            payoff_sum = disc_sum = 0.0
            window = 0
    return curve


def dgd_train(game, policies, config: TrainConfig, rng=None, backend: str = "auto"):
    """Distributed gradient training: one stream of episodes, per-agent updates.

    Returns fresh trained policies; the inputs are not modified.  ``backend``
    selects the compiled kernels when available ("auto"/"compiled") or forces
    the pure-Python loop ("python").
    """
    if len(policies) != len(game.agents):
        raise ContractViolation("one policy per agent")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    trained = [p.clone() for p in policies]

    from . import _kernels
    kernel = _kernels.dispatch_dgd(game, trained, backend)
    if kernel is not None:
        return kernel(game, trained, config, rng)

    curve = _train_loop(
        game, trained, config, rng,
        lambda h: dgd_episode_update(trained, h, config.learning_rate, config.discount))
    return trained, curve


def evaluate_policies(game, policies, episodes: int, horizon: int, rng=None,
                      seed: int = 0, backend: str = "auto") -> float:
    """Mean undiscounted episode payoff of fixed policies over fresh episodes."""
    if rng is None:
        rng = np.random.default_rng(seed)

    from . import _kernels
    kernel = _kernels.dispatch_soccer_eval(game, policies, backend)
    if kernel is not None:
        return kernel(game, policies, episodes, horizon, rng)

    total = 0.0
    for _ in range(episodes):
        history = run_episode(game, policies, horizon, rng)
        for r in history.rewards:
            total += float(r)
    return total / episodes


def joint_gradient_train(game, controller, config: TrainConfig, rng=None):
    """Centralized gradient training of a factored controller."""
    if isinstance(controller, (list, tuple)):
        controller = FactoredController(controller)
    if len(controller.policies) != len(game.agents):
        raise ContractViolation("one sub-policy per agent")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    trained = controller.clone()
    curve = _train_loop(
        game, trained.policies, config, rng,
        lambda h: trained.episode_update(h, config.learning_rate, config.discount))
    return trained, curve

"""Cooperative policy-gradient learning for identical-payoff stochastic games.

Agents that share one reward signal but see different, unreliable slices of
the state can still improve a shared objective by each running plain
stochastic gradient ascent on its own policy parameters; for factored
controllers the distributed updates coincide with those of a central learner.
This package provides the game abstractions, Boltzmann policies and finite
state controllers, the distributed and joint trainers, a central Q-learning
baseline, exact analysis oracles (values, gradients, Nash classification),
and two built-in domains: a six-state coordination game and grid soccer
against fixed-strategy opponents.
"""

from .games import (
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
from .policies import (
    BoltzmannReactivePolicy,
    FiniteStateController,
    GradientEstimate,
    policy_from_json,
    policy_to_json,
    random_fsc,
    random_reactive,
)
from .learning import (
    FactoredController,
    LearningCurve,
    TrainConfig,
    dgd_train,
    episode_gradient,
    joint_gradient_train,
)
from .qlearn import QLearnConfig, QTable, epsilon_greedy, q_train, q_update
from .analysis import (
    FactoredGapResult,
    NashReport,
    enumerate_estimator_expectation,
    exact_gradient,
    exact_value,
    factored_gap,
    local_optimum_counterexample,
    verify_nash,
)

__version__ = "0.1.0"

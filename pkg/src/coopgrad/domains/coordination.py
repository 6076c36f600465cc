"""The two-agent coordination game.

Six states, both agents choose between actions a (0) and b (1), full
observability.  From s1 the first agent alone picks a branch: action a leads
to s2, action b to s3.  In s2 the agents must coordinate: matching actions
pay +10 (s4), mismatching pay -10 (s5).  s3 pays +5 into s6 regardless of
what either agent does.  s4, s5, s6 absorb with zero reward, ending the
episode.

A joint policy is summarized by three probabilities {p11, p12; p22}: the
chance each agent plays action a in the state named by the subscript (agent 1
in s1 and s2, agent 2 in s2).  The optimal deterministic profiles are
{1,1;1} and {1,0;0}.
"""

from __future__ import annotations

import numpy as np

from ..games import AgentSpec, GameModel
from ..policies import BoltzmannReactivePolicy, reactive_from_probabilities

S1, S2, S3, S4, S5, S6 = range(6)
A, B = 0, 1


def build_coordination_game() -> GameModel:
    n_states = 6
    identity = np.eye(n_states)
    agents = (
        AgentSpec(action_count=2, observation_count=n_states, observe=identity.copy()),
        AgentSpec(action_count=2, observation_count=n_states, observe=identity.copy()),
    )
    # joint action index = a1 + 2*a2
    transition = np.zeros((n_states, 4, n_states))
    reward = np.zeros((n_states, 4))
    for a1 in (A, B):
        for a2 in (A, B):
            ja = a1 + 2 * a2
            transition[S1, ja, S2 if a1 == A else S3] = 1.0
            if a1 == a2:
                transition[S2, ja, S4] = 1.0
                reward[S2, ja] = 10.0
            else:
                transition[S2, ja, S5] = 1.0
                reward[S2, ja] = -10.0
            transition[S3, ja, S6] = 1.0
            reward[S3, ja] = 5.0
            for s in (S4, S5, S6):
                transition[s, ja, s] = 1.0
    return GameModel(
        state_count=n_states,
        initial_state=S1,
        agents=agents,
        transition=transition,
        reward=reward,
        terminal=frozenset({S4, S5, S6}),
    )


def coordination_profile(p11: float, p12: float, p22: float,
                         temperature: float = 1.0, clamp: float = 20.0):
    """Reactive policies realizing (approximately) the {p11, p12; p22} profile.

    Probabilities of 0/1 are encoded as clamped weights; rows for states where
    the agent's action is irrelevant stay at zero weights (uniform).
    """
    uniform = 0.5
    rows1 = [[p11, 1 - p11], [p12, 1 - p12]] + [[uniform, uniform]] * 4
    rows2 = [[uniform, uniform], [p22, 1 - p22]] + [[uniform, uniform]] * 4
    pol1 = reactive_from_probabilities(rows1, temperature, clamp)
    pol2 = reactive_from_probabilities(rows2, temperature, clamp)
    return [pol1, pol2]


def deterministic_profiles() -> dict[str, list[BoltzmannReactivePolicy]]:
    """The two optimal deterministic profiles, by name."""
    return {
        "{1,1;1}": coordination_profile(1.0, 1.0, 1.0),
        "{1,0;0}": coordination_profile(1.0, 0.0, 0.0),
    }

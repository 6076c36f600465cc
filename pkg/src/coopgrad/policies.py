"""Parametric stochastic policies with exact log-probability gradients.

Two architectures share one interface:

* ``BoltzmannReactivePolicy`` — softmax over a weight row per observation.
* ``FiniteStateController`` — finite internal memory; observations drive a
  softmax-parameterized internal transition, actions are a softmax of the
  (new) internal state's weight row.

Per step the controller first resamples its internal state from the current
observation, then draws the action from the updated state, so actions depend
on the current observation through the memory.  A reactive policy is the
memoryless special case (single internal state, action row keyed by the
observation).

All rows stay strictly inside the simplex, which keeps every policy a smooth
function of its weights; ``step_score`` returns the exact gradient of the
step's log probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .games import ContractViolation, categorical_from_uniform


def softmax_row(row, temperature: float = 1.0) -> np.ndarray:
    """Softmax of a small weight row at the given temperature.

    Uses scalar math.exp so that the compiled kernels (libm exp) produce
    bit-identical probabilities.
    """
    n = len(row)
    hi = row[0]
    for k in range(1, n):
        if row[k] > hi:
            hi = row[k]
    out = np.empty(n)
    total = 0.0
    for k in range(n):
        e = math.exp((row[k] - hi) / temperature)
        out[k] = e
        total += e
    for k in range(n):
        out[k] /= total
    return out


@dataclass
class GradientEstimate:
    """Per-weight accumulator matching a policy's weight arrays.

    Additive: accumulating two histories equals the sum of their estimates.
    """

    arrays: tuple[np.ndarray, ...]

    @staticmethod
    def zeros_like(policy) -> "GradientEstimate":
        return GradientEstimate(tuple(np.zeros_like(w) for w in policy.weight_arrays()))

    def __add__(self, other: "GradientEstimate") -> "GradientEstimate":
        return GradientEstimate(tuple(a + b for a, b in zip(self.arrays, other.arrays)))

    def scaled(self, c: float) -> "GradientEstimate":
        return GradientEstimate(tuple(c * a for a in self.arrays))

    def add_scaled(self, other: "GradientEstimate", c: float) -> None:
        for a, b in zip(self.arrays, other.arrays):
            a += c * b

    def max_abs_diff(self, other: "GradientEstimate") -> float:
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.arrays, other.arrays))


class BoltzmannReactivePolicy:
    """Memoryless softmax policy: one weight row per observation."""

    kind = "reactive"

    def __init__(self, weights, temperature: float = 1.0):
        self.weights = np.array(weights, dtype=float)
        if self.weights.ndim != 2:
            raise ContractViolation("weights must be (observations, actions)")
        if temperature <= 0:
            raise ContractViolation("temperature must be positive")
        self.temperature = float(temperature)

    @property
    def observation_count(self) -> int:
        return self.weights.shape[0]

    @property
    def action_count(self) -> int:
        return self.weights.shape[1]

    internal_state_count = 1
    initial_internal = 0

    def weight_arrays(self) -> tuple[np.ndarray, ...]:
        return (self.weights,)

    def clone(self) -> "BoltzmannReactivePolicy":
        return BoltzmannReactivePolicy(self.weights.copy(), self.temperature)

    def action_probabilities(self, observation: int, internal_state: int = 0) -> np.ndarray:
        return softmax_row(self.weights[observation], self.temperature)

    def act(self, observation: int, internal_state: int, rng) -> tuple[int, int]:
        p = self.action_probabilities(observation)
        a = categorical_from_uniform(p, rng.random())
        return a, 0

    def step_log_prob(self, observation, prev_internal, internal, action) -> float:
        p = self.action_probabilities(observation)
        return math.log(p[action])

    def step_score(self, observation, prev_internal, internal, action) -> GradientEstimate:
        """Gradient of ln Pr(action | observation) w.r.t. all weights."""
        g = np.zeros_like(self.weights)
        p = self.action_probabilities(observation)
        g[observation, :] = -p / self.temperature
        g[observation, action] += 1.0 / self.temperature
        return GradientEstimate((g,))

    # sparse form used by the training loops: (array_index, row_tuple, coef rows)
    def step_score_rows(self, observation, prev_internal, internal, action):
        p = self.action_probabilities(observation)
        row = -p / self.temperature
        row[action] += 1.0 / self.temperature
        return [(0, (observation,), row)]


class FiniteStateController:
    """Policy with finite memory driven by observations.

    transition_weights: (N, O, N) softmax logits for the internal transition;
    action_weights: (N, A) softmax logits for the action choice.
    """

    kind = "fsc"

    def __init__(self, transition_weights, action_weights, temperature: float = 1.0,
                 initial_internal: int = 0):
        self.transition_weights = np.array(transition_weights, dtype=float)
        self.action_weights = np.array(action_weights, dtype=float)
        if self.transition_weights.ndim != 3:
            raise ContractViolation("transition_weights must be (N, O, N)")
        n = self.transition_weights.shape[0]
        if self.transition_weights.shape[2] != n or self.action_weights.shape[0] != n:
            raise ContractViolation("internal-state dimensions disagree")
        if temperature <= 0:
            raise ContractViolation("temperature must be positive")
        self.temperature = float(temperature)
        self.initial_internal = int(initial_internal)

    @property
    def internal_state_count(self) -> int:
        return self.transition_weights.shape[0]

    @property
    def observation_count(self) -> int:
        return self.transition_weights.shape[1]

    @property
    def action_count(self) -> int:
        return self.action_weights.shape[1]

    def weight_arrays(self) -> tuple[np.ndarray, ...]:
        return (self.transition_weights, self.action_weights)

    def clone(self) -> "FiniteStateController":
        return FiniteStateController(
            self.transition_weights.copy(), self.action_weights.copy(),
            self.temperature, self.initial_internal)

    def internal_probabilities(self, internal_state: int, observation: int) -> np.ndarray:
        return softmax_row(self.transition_weights[internal_state, observation], self.temperature)

    def action_probabilities(self, observation: int, internal_state: int) -> np.ndarray:
        return softmax_row(self.action_weights[internal_state], self.temperature)

    def act(self, observation: int, internal_state: int, rng) -> tuple[int, int]:
        eta = self.internal_probabilities(internal_state, observation)
        n_next = categorical_from_uniform(eta, rng.random())
        psi = softmax_row(self.action_weights[n_next], self.temperature)
        a = categorical_from_uniform(psi, rng.random())
        return a, n_next

    def step_log_prob(self, observation, prev_internal, internal, action) -> float:
        eta = self.internal_probabilities(prev_internal, observation)
        psi = softmax_row(self.action_weights[internal], self.temperature)
        return math.log(eta[internal]) + math.log(psi[action])

    def step_score(self, observation, prev_internal, internal, action) -> GradientEstimate:
        """Gradient of ln[eta(internal | prev, obs) * psi(action | internal)]."""
        gt = np.zeros_like(self.transition_weights)
        ga = np.zeros_like(self.action_weights)
        eta = self.internal_probabilities(prev_internal, observation)
        gt[prev_internal, observation, :] = -eta / self.temperature
        gt[prev_internal, observation, internal] += 1.0 / self.temperature
        psi = softmax_row(self.action_weights[internal], self.temperature)
        ga[internal, :] = -psi / self.temperature
        ga[internal, action] += 1.0 / self.temperature
        return GradientEstimate((gt, ga))

    def step_score_rows(self, observation, prev_internal, internal, action):
        eta = self.internal_probabilities(prev_internal, observation)
        trow = -eta / self.temperature
        trow[internal] += 1.0 / self.temperature
        psi = softmax_row(self.action_weights[internal], self.temperature)
        arow = -psi / self.temperature
        arow[action] += 1.0 / self.temperature
        return [(0, (prev_internal, observation), trow), (1, (internal,), arow)]


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------

def random_reactive(observations: int, actions: int, rng, scale: float = 0.1,
                    temperature: float = 1.0) -> BoltzmannReactivePolicy:
    w = rng.uniform(-scale, scale, size=(observations, actions))
    return BoltzmannReactivePolicy(w, temperature)


def random_fsc(internal_states: int, observations: int, actions: int, rng,
               scale: float = 0.1, temperature: float = 1.0) -> FiniteStateController:
    tw = rng.uniform(-scale, scale, size=(internal_states, observations, internal_states))
    aw = rng.uniform(-scale, scale, size=(internal_states, actions))
    return FiniteStateController(tw, aw, temperature)


def reactive_from_probabilities(rows, temperature: float = 1.0,
                                clamp: float = 20.0) -> BoltzmannReactivePolicy:
    """Encode target action probabilities as log-weights, clamped to +-clamp.

    Probabilities of exactly 0 or 1 are only approachable under the softmax;
    at the default clamp the realized rows are within ~2e-9 of the targets.
    """
    rows = np.asarray(rows, dtype=float)
    with np.errstate(divide="ignore"):
        w = np.log(rows) * temperature
    w = np.clip(w, -clamp, clamp)
    return BoltzmannReactivePolicy(w, temperature)


# ---------------------------------------------------------------------------
# JSON round trip (shape metadata + flat weights; see docs/formats.md)
# ---------------------------------------------------------------------------

def policy_to_json(policy) -> str:
    if policy.kind == "reactive":
        doc = {
            "kind": "reactive",
            "temperature": policy.temperature,
            "observations": policy.observation_count,
            "actions": policy.action_count,
            "weights": [float(x) for x in policy.weights.ravel()],
        }
    elif policy.kind == "fsc":
        doc = {
            "kind": "fsc",
            "temperature": policy.temperature,
            "internal_states": policy.internal_state_count,
            "observations": policy.observation_count,
            "actions": policy.action_count,
            "initial_internal": policy.initial_internal,
            "transition_weights": [float(x) for x in policy.transition_weights.ravel()],
            "action_weights": [float(x) for x in policy.action_weights.ravel()],
        }
    else:
        raise ContractViolation(f"unknown policy kind {policy.kind!r}")
    return json.dumps(doc)


def policy_from_json(text: str):
    doc = json.loads(text)
    if doc["kind"] == "reactive":
        w = np.array(doc["weights"]).reshape(doc["observations"], doc["actions"])
        return BoltzmannReactivePolicy(w, doc["temperature"])
    if doc["kind"] == "fsc":
        n, o, a = doc["internal_states"], doc["observations"], doc["actions"]
        tw = np.array(doc["transition_weights"]).reshape(n, o, n)
        aw = np.array(doc["action_weights"]).reshape(n, a)
        return FiniteStateController(tw, aw, doc["temperature"], doc["initial_internal"])
    raise ContractViolation(f"unknown policy kind {doc['kind']!r}")

"""Exact analysis of tabular games under fixed policy profiles.

Everything here is closed-form or exhaustive, never sampled: game value via a
linear solve over the chain augmented with controller memory, value gradients
via checked central differences, the expectation of the sampled per-trial
gradient estimator via full history enumeration, Nash classification of a
profile via best-response enumeration, and the representability gap between
joint and factored randomization.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .games import ContractViolation, GameModel, joint_action_decode
from .policies import BoltzmannReactivePolicy, GradientEstimate

SOLVER_TOL = 1e-12


# ---------------------------------------------------------------------------
# augmented chain and exact value
# ---------------------------------------------------------------------------

def _agent_step_kernel(game: GameModel, agent: int, policy) -> np.ndarray:
    """M[s, n, a, n'] = Pr(action a, next internal n' | state s, internal n)."""
    spec = game.agents[agent]
    S = game.state_count
    if policy.kind == "reactive":
        m = np.zeros((S, 1, spec.action_count, 1))
        for s in range(S):
            row = np.zeros(spec.action_count)
            for o in range(spec.observation_count):
                b = spec.observe[s, o]
                if b > 0.0:
                    row += b * policy.action_probabilities(o)
            m[s, 0, :, 0] = row
        return m
    if policy.kind == "fsc":
        ni = policy.internal_state_count
        m = np.zeros((S, ni, spec.action_count, ni))
        for s in range(S):
            for n in range(ni):
                for o in range(spec.observation_count):
                    b = spec.observe[s, o]
                    if b == 0.0:
                        continue
                    eta = policy.internal_probabilities(n, o)
                    for n2 in range(ni):
                        psi = policy.action_probabilities(o, n2)
                        m[s, n, :, n2] += b * eta[n2] * psi
        return m
    raise ContractViolation(f"unsupported policy kind {policy.kind!r}")


def _augmented_chain(game: GameModel, policies):
    """Markov chain over (state, internal states): transition, reward, start index."""
    if len(policies) != game.n_agents:
        raise ContractViolation("one policy per agent")
    kernels = [_agent_step_kernel(game, i, p) for i, p in enumerate(policies)]
    dims = [k.shape[1] for k in kernels]
    n_aug = game.state_count * int(np.prod(dims))

    def aug_index(s, internals):
        x = s
        for n, d in zip(internals, dims):
            x = x * d + n
        return x

    P = np.zeros((n_aug, n_aug))
    R = np.zeros(n_aug)
    decode = [joint_action_decode(ja, game.agents) for ja in range(game.joint_actions)]
    for s in range(game.state_count):
        for internals in itertools.product(*[range(d) for d in dims]):
            x = aug_index(s, internals)
            for ja, acts in enumerate(decode):
                # joint (action, next-internal) factorizes across agents
                joint_next = np.ones(1)
                for k, n, a in zip(kernels, internals, acts):
                    joint_next = np.multiply.outer(joint_next, k[s, n, a, :]).ravel()
                p_act = joint_next.sum()
                if p_act == 0.0:
                    continue
                R[x] += p_act * game.reward[s, ja]
                trow = game.transition[s, ja]
                for s2 in np.nonzero(trow)[0]:
                    base = aug_index(s2, [0] * len(dims))
                    P[x, base:base + len(joint_next)] += trow[s2] * joint_next
    x0 = aug_index(game.initial_state, [p.initial_internal for p in policies])
    return P, R, x0


def exact_value(game: GameModel, policies, gamma: float, horizon: int | None = None) -> float:
    """Value of the profile, solving V = R + gamma P V over the augmented chain.

    With ``horizon`` the sum is truncated after that many steps (used to
    compare against the finite-horizon estimator expectation).
    """
    if not 0 <= gamma < 1:
        raise ContractViolation("gamma must be in [0, 1)")
    P, R, x0 = _augmented_chain(game, policies)
    if horizon is None:
        v = np.linalg.solve(np.eye(len(R)) - gamma * P, R)
    else:
        v = np.zeros(len(R))
        for _ in range(horizon):
            v = R + gamma * (P @ v)
    return float(v[x0])


# ---------------------------------------------------------------------------
# checked finite-difference gradient of the exact value
# ---------------------------------------------------------------------------

def _perturbed(policies, coord, delta: float):
    agent, array_idx, flat = coord
    clones = [p.clone() for p in policies]
    w = clones[agent].weight_arrays()[array_idx]
    w.ravel()[flat] += delta
    return clones


def exact_gradient(game: GameModel, policies, gamma: float, coord,
                   horizon: int | None = None, step: float = 1e-6,
                   check_step: float = 1e-5, check: bool = True) -> float:
    """d(exact value)/d(weight), central difference with a two-step consistency check.

    ``coord`` is (agent index, weight-array index, flat weight index).  The
    estimates at the two step sizes must agree within 1e-6 relative to
    max(1, |gradient|).
    """

    def central(h):
        hi = exact_value(game, _perturbed(policies, coord, +h), gamma, horizon)
        lo = exact_value(game, _perturbed(policies, coord, -h), gamma, horizon)
        return (hi - lo) / (2 * h)

    g = central(step)
    if check:
        g2 = central(check_step)
        scale = max(1.0, abs(g), abs(g2))
        if abs(g - g2) > 1e-6 * scale:
            raise ContractViolation(
                f"finite-difference estimates disagree at {coord}: {g} vs {g2}")
    return g


def exact_gradient_all(game: GameModel, policies, gamma: float,
                       horizon: int | None = None, check: bool = False):
    """Gradient for every weight of every policy, as GradientEstimate per agent."""
    out = []
    for i, policy in enumerate(policies):
        arrays = []
        for ai, w in enumerate(policy.weight_arrays()):
            g = np.zeros(w.size)
            for flat in range(w.size):
                g[flat] = exact_gradient(game, policies, gamma, (i, ai, flat),
                                         horizon, check=check)
            arrays.append(g.reshape(w.shape))
        out.append(GradientEstimate(tuple(arrays)))
    return out


# ---------------------------------------------------------------------------
# exhaustive expectation of the sampled estimator
# ---------------------------------------------------------------------------

def _branching_bound(game: GameModel, policies) -> int:
    b = 1
    for i, (spec, pol) in enumerate(zip(game.agents, policies)):
        obs_branch = max(int(np.count_nonzero(spec.observe[s])) for s in range(game.state_count))
        internal_branch = pol.internal_state_count if pol.kind == "fsc" else 1
        b *= obs_branch * internal_branch * spec.action_count
    trans_branch = int(np.count_nonzero(game.transition, axis=2).max())
    return b * trans_branch


def enumerate_estimator_expectation(game: GameModel, policies, gamma: float,
                                    horizon: int, max_histories: float = 1e6):
    """Exact expectation of the per-trial estimator truncated at ``horizon``.

    Sums probability * estimator over every possible history instead of
    sampling; refuses when the history count bound exceeds ``max_histories``.
    Returns one GradientEstimate per agent.
    """
    bound = _branching_bound(game, policies) ** horizon
    if bound > max_histories:
        raise ContractViolation(f"history bound {bound:.3g} exceeds {max_histories:.3g}")

    m = game.n_agents
    expect = [GradientEstimate.zeros_like(p) for p in policies]

    def recurse(s, internals, prob, t, elig):
        if t == horizon or game.is_terminal(s):
            return
        specs = game.agents
        obs_choices = [np.nonzero(specs[i].observe[s])[0] for i in range(m)]
        for obs in itertools.product(*obs_choices):
            p_obs = prob
            for i in range(m):
                p_obs *= specs[i].observe[s, obs[i]]
            next_internals_options = []
            for i in range(m):
                if policies[i].kind == "fsc":
                    next_internals_options.append(range(policies[i].internal_state_count))
                else:
                    next_internals_options.append((0,))
            for nxt in itertools.product(*next_internals_options):
                p_int = p_obs
                for i in range(m):
                    if policies[i].kind == "fsc":
                        p_int *= policies[i].internal_probabilities(internals[i], obs[i])[nxt[i]]
                for acts in itertools.product(*[range(sp.action_count) for sp in specs]):
                    p_full = p_int
                    for i in range(m):
                        p_full *= policies[i].action_probabilities(obs[i], nxt[i])[acts[i]]
                    if p_full == 0.0:
                        continue
                    elig2 = []
                    for i in range(m):
                        step = policies[i].step_score(obs[i], internals[i], nxt[i], acts[i])
                        elig2.append(elig[i] + step)
                    ja = 0
                    base = 1
                    for i in range(m):
                        ja += acts[i] * base
                        base *= specs[i].action_count
                    r = game.reward[s, ja]
                    if r != 0.0:
                        c = p_full * (gamma ** t) * r
                        for i in range(m):
                            expect[i].add_scaled(elig2[i], c)
                    trow = game.transition[s, ja]
                    for s2 in np.nonzero(trow)[0]:
                        recurse(int(s2), nxt, p_full * trow[s2], t + 1, elig2)

    elig0 = [GradientEstimate.zeros_like(p) for p in policies]
    recurse(game.initial_state, tuple(p.initial_internal for p in policies), 1.0, 0, elig0)
    return expect


# ---------------------------------------------------------------------------
# Nash classification
# ---------------------------------------------------------------------------

@dataclass
class DeviationWitness:
    agent: int
    kind: str  # "deterministic" | "gradient"
    policy: object
    value_gain: float
    detail: str = ""


@dataclass
class NashReport:
    classification: str  # strict-nash | weak-nash | not-nash
    value: float
    witness: DeviationWitness | None
    deterministic_class_only: bool
    details: dict

    def __post_init__(self):
        if (self.witness is not None) != (self.classification == "not-nash"):
            raise ContractViolation("witness present iff classification is not-nash")

    def accepted(self) -> bool:
        return self.classification in ("strict-nash", "weak-nash")

    def to_json(self) -> str:
        from .policies import policy_to_json
        doc = {
            "classification": self.classification,
            "value": self.value,
            "deterministic_class_only": self.deterministic_class_only,
            "details": self.details,
        }
        if self.witness is not None:
            doc["witness"] = {
                "agent": self.witness.agent,
                "kind": self.witness.kind,
                "value_gain": self.witness.value_gain,
                "detail": self.witness.detail,
                "policy": json.loads(policy_to_json(self.witness.policy)),
            }
        return json.dumps(doc, indent=2)


def _relevant_observations(game: GameModel, agent: int) -> list[int]:
    """Observations where the agent's action can change transitions or rewards."""
    spec = game.agents[agent]
    base = 1
    for i in range(agent):
        base *= game.agents[i].action_count
    relevant = []
    for o in range(spec.observation_count):
        states = np.nonzero(spec.observe[:, o])[0]
        matters = False
        for s in states:
            for ja in range(game.joint_actions):
                if (ja // base) % spec.action_count != 0:
                    continue
                for a in range(1, spec.action_count):
                    jb = ja + a * base
                    if (not np.array_equal(game.transition[s, ja], game.transition[s, jb])
                            or game.reward[s, ja] != game.reward[s, jb]):
                        matters = True
                        break
                if matters:
                    break
            if matters:
                break
        if matters:
            relevant.append(o)
    return relevant


def _fully_observable_for(game: GameModel, agent: int) -> bool:
    """True when the observation is a lossless relabeling of the state."""
    obs = game.agents[agent].observe
    seen = set()
    for s in range(game.state_count):
        nz = np.nonzero(obs[s])[0]
        if len(nz) != 1 or obs[s, nz[0]] != 1.0:
            return False
        if int(nz[0]) in seen:
            return False
        seen.add(int(nz[0]))
    return True


def _deterministic_deviation(policy, relevant, assignment, clamp: float):
    dev = policy.clone()
    for o, a in zip(relevant, assignment):
        dev.weights[o, :] = -clamp
        dev.weights[o, a] = clamp
    return dev


def _matches_profile(policy, relevant, assignment, tol: float = 1e-6) -> bool:
    """True when the assignment replays the profile's own (near-)deterministic choices."""
    for o, a in zip(relevant, assignment):
        if policy.action_probabilities(o)[a] < 1.0 - tol:
            return False
    return True


def verify_nash(game: GameModel, profile, gamma: float, *,
                improve_tol: float = 1e-6, strict_margin: float = 1e-9,
                stationary_tol: float = 1e-6, clamp: float = 20.0,
                max_deviations: int = 200000) -> NashReport:
    """Classify a reactive profile as strict Nash, weak Nash, or not Nash.

    Enumerates every deterministic reactive deviation of each agent over its
    behavior-relevant observations and checks gradient stationarity of the
    profile's own weights.  A deviation improving the value by more than
    ``improve_tol`` (or a non-stationary weight) yields not-nash with a
    witness; otherwise the profile is strict when every deviation loses more
    than ``strict_margin`` and weak when some deviations tie.

    Deterministic deviations suffice when the deviating agent observes the
    state losslessly (fixing the co-players then leaves an MDP over its
    observations).  Under partial observability the best response may need
    memory or randomization, so a nash verdict is only over the deterministic
    reactive class and the report is flagged ``deterministic_class_only``.
    """
    for p in profile:
        if p.kind != "reactive":
            raise ContractViolation("verify_nash expects reactive profiles")
    v0 = exact_value(game, profile, gamma)

    best_witness = None
    best_gain = 0.0
    ties = 0
    n_checked = 0
    for i, policy in enumerate(profile):
        relevant = _relevant_observations(game, i)
        count = game.agents[i].action_count ** len(relevant)
        if count > max_deviations:
            raise ContractViolation(f"deviation space for agent {i} is {count}, "
                                    f"over the {max_deviations} guard")
        for assignment in itertools.product(range(game.agents[i].action_count),
                                            repeat=len(relevant)):
            if _matches_profile(policy, relevant, assignment):
                continue  # replays the profile, not a deviation
            dev = _deterministic_deviation(policy, relevant, assignment, clamp)
            others = list(profile)
            others[i] = dev
            v = exact_value(game, others, gamma)
            n_checked += 1
            if v > v0 + improve_tol:
                if v - v0 > best_gain:
                    best_gain = v - v0
                    best_witness = DeviationWitness(
                        agent=i, kind="deterministic", policy=dev, value_gain=v - v0,
                        detail=f"actions {assignment} on observations {relevant}")
            elif v >= v0 - strict_margin:
                ties += 1

    grads = exact_gradient_all(game, profile, gamma)
    max_grad = max(float(np.max(np.abs(a))) for g in grads for a in g.arrays)
    stationary = max_grad <= stationary_tol
    if best_witness is None and not stationary:
        best_witness = _gradient_witness(game, profile, gamma, grads, v0)

    if best_witness is not None:
        classification = "not-nash"
    elif ties > 0:
        classification = "weak-nash"
    else:
        classification = "strict-nash"

    partial = not all(_fully_observable_for(game, i) for i in range(game.n_agents))
    return NashReport(
        classification=classification,
        value=v0,
        witness=best_witness,
        deterministic_class_only=partial and classification != "not-nash",
        details={
            "deviations_checked": n_checked,
            "ties": ties,
            "max_abs_gradient": max_grad,
            "stationary": stationary,
            "improve_tol": improve_tol,
            "strict_margin": strict_margin,
            "note": "deterministic profiles are realized at clamped weights; the "
                    "exact 0/1 probabilities are approached, not reached",
        },
    )


def _gradient_witness(game, profile, gamma, grads, v0):
    """Build an improving deviation by stepping along the value gradient."""
    best = None
    for i, g in enumerate(grads):
        norm = max(float(np.max(np.abs(a))) for a in g.arrays)
        if norm == 0.0:
            continue
        for scale in (1.0, 0.1, 0.01):
            dev = profile[i].clone()
            for w, a in zip(dev.weight_arrays(), g.arrays):
                w += (scale / norm) * a
            others = list(profile)
            others[i] = dev
            v = exact_value(game, others, gamma)
            if v > v0 and (best is None or v - v0 > best.value_gain):
                best = DeviationWitness(agent=i, kind="gradient", policy=dev,
                                        value_gain=v - v0,
                                        detail=f"ascent step {scale} along the value gradient")
    if best is None:
        # fall back: report the non-stationarity itself
        i = max(range(len(grads)),
                key=lambda k: max(float(np.max(np.abs(a))) for a in grads[k].arrays))
        best = DeviationWitness(agent=i, kind="gradient", policy=profile[i].clone(),
                                value_gain=0.0,
                                detail="profile is not gradient-stationary")
    return best


# ---------------------------------------------------------------------------
# joint-vs-factored representability gap
# ---------------------------------------------------------------------------

@dataclass
class FactoredGapResult:
    p: float  # probability of the first action on component 1
    q: float  # probability of the first action on component 2
    product: np.ndarray
    gap: float

    def to_json(self) -> str:
        return json.dumps({
            "p": self.p, "q": self.q,
            "product": self.product.tolist(),
            "total_variation_gap": self.gap,
        }, indent=2)


def factored_gap(target) -> FactoredGapResult:
    """Closest product distribution to a 2x2 joint target, in total variation."""
    t = np.asarray(target, dtype=float)
    if t.shape != (2, 2) or np.any(t < 0) or abs(t.sum() - 1.0) > 1e-9:
        raise ContractViolation("target must be a 2x2 distribution")

    def tv(p, q):
        prod = np.outer([p, 1 - p], [q, 1 - q])
        return 0.5 * float(np.abs(t - prod).sum())

    grid = np.linspace(0.0, 1.0, 1001)
    pp, qq = np.meshgrid(grid, grid, indexing="ij")
    d = 0.5 * (np.abs(t[0, 0] - pp * qq)
               + np.abs(t[0, 1] - pp * (1 - qq))
               + np.abs(t[1, 0] - (1 - pp) * qq)
               + np.abs(t[1, 1] - (1 - pp) * (1 - qq)))
    k = int(np.argmin(d))
    p0, q0 = pp.ravel()[k], qq.ravel()[k]

    res = optimize.minimize(
        lambda x: tv(min(max(x[0], 0.0), 1.0), min(max(x[1], 0.0), 1.0)),
        x0=[p0, q0], method="Nelder-Mead",
        options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 2000})
    p = float(min(max(res.x[0], 0.0), 1.0))
    q = float(min(max(res.x[1], 0.0), 1.0))
    if tv(p0, q0) < tv(p, q):
        p, q = float(p0), float(q0)
    return FactoredGapResult(p=p, q=q, product=np.outer([p, 1 - p], [q, 1 - q]),
                             gap=tv(p, q))


# ---------------------------------------------------------------------------
# a stationary point that is not an equilibrium
# ---------------------------------------------------------------------------

def local_optimum_counterexample(gamma_hint: float = 0.99):
    """A two-parameter game with a gradient-stationary profile that is not Nash.

    Agent 1 is blind (one observation) and uses its single weight row twice:
    first to pick a branch, then to pick a leaf reward.  Committing to the
    first action everywhere pays 1; committing to the second pays 2; mixtures
    pay less than either, so both commitments attract gradient ascent but only
    the better one is an equilibrium.  Agent 2 (also blind) plays a separate
    two-stage lottery whose value peaks at a fifty-fifty mix, pinning its
    weights at an interior stationary point.

    Returns (game, profile) where the profile commits agent 1 to the worse
    branch: the value gradient vanishes there, yet switching agent 1's action
    raises the value by about ``gamma_hint``.
    """
    from .games import AgentSpec

    S0, SA, SB, S2, TA, TB, END = range(7)
    n_states = 7
    ones = np.ones((n_states, 1))
    agents = (
        AgentSpec(action_count=2, observation_count=1, observe=ones.copy()),
        AgentSpec(action_count=2, observation_count=1, observe=ones.copy()),
    )
    transition = np.zeros((n_states, 4, n_states))
    reward = np.zeros((n_states, 4))
    for a1 in (0, 1):
        for a2 in (0, 1):
            ja = a1 + 2 * a2
            transition[S0, ja, SA if a1 == 0 else SB] = 1.0
            transition[SA, ja, S2] = 1.0
            reward[SA, ja] = 1.0 if a1 == 0 else 0.0
            transition[SB, ja, S2] = 1.0
            reward[SB, ja] = 0.0 if a1 == 0 else 2.0
            transition[S2, ja, TA if a2 == 0 else TB] = 1.0
            transition[TA, ja, END] = 1.0
            reward[TA, ja] = 0.0 if a2 == 0 else 1.0
            transition[TB, ja, END] = 1.0
            reward[TB, ja] = 1.0 if a2 == 0 else 0.0
            transition[END, ja, END] = 1.0
    game = GameModel(state_count=n_states, initial_state=S0, agents=agents,
                     transition=transition, reward=reward, terminal=frozenset({END}))
    profile = [
        BoltzmannReactivePolicy(np.array([[20.0, -20.0]])),  # committed to the worse branch
        BoltzmannReactivePolicy(np.array([[0.0, 0.0]])),     # interior optimum at 1/2
    ]
    return game, profile

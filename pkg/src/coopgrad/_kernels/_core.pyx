# cython: language_level=3
"""Compiled hot loops: episode simulation, gradient training, Q-learning.

Every function mirrors a pure-Python implementation in the main modules,
consuming the random stream identically (one uniform per stochastic draw,
inverted through the cumulative sum) and performing float operations in the
same order, so both backends produce the same trajectories and near-identical
weights.  tests/test_backends.py holds the two sides together.
"""

cimport cython
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp
from libc.string cimport memset

import numpy as np

cimport numpy as cnp
from numpy.random cimport bitgen_t

cnp.import_array()

DEF MAXROW = 32
DEF MAXPLAYERS = 8

# soccer action codes (match domains.soccer)
DEF A_N = 0
DEF A_S = 1
DEF A_E = 2
DEF A_W = 3
DEF A_STAY = 4
DEF A_PASS = 5


cdef bitgen_t* get_bitgen(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double next_u(bitgen_t* bg) noexcept nogil:
    return bg.next_double(bg.state)


cdef inline int pick_from_row(const double* probs, int n, double u) noexcept nogil:
    cdef double c = 0.0
    cdef int k
    for k in range(n):
        c += probs[k]
        if u < c:
            return k
    return n - 1


cdef inline void softmax_c(const double* w, int n, double temp, double* out) noexcept nogil:
    cdef double hi = w[0]
    cdef double total = 0.0
    cdef int k
    for k in range(1, n):
        if w[k] > hi:
            hi = w[k]
    for k in range(n):
        out[k] = exp((w[k] - hi) / temp)
        total += out[k]
    for k in range(n):
        out[k] /= total


# ---------------------------------------------------------------------------
# policy packing
# ---------------------------------------------------------------------------

cdef class PolicyPack:
    cdef int kind            # 0 reactive, 1 fsc
    cdef int n_obs, n_act, n_int, init_int
    cdef double temp
    cdef double[:, ::1] w        # reactive weights (O, A)
    cdef double[:, :, ::1] tw    # fsc transition weights (N, O, N)
    cdef double[:, ::1] aw       # fsc action weights (N, A)
    cdef double[:, ::1] gw
    cdef double[:, :, ::1] gtw
    cdef double[:, ::1] gaw


cdef PolicyPack pack_policy(object policy):
    cdef PolicyPack p = PolicyPack()
    p.temp = policy.temperature
    dummy2 = np.zeros((1, 1))
    dummy3 = np.zeros((1, 1, 1))
    if policy.kind == "reactive":
        p.kind = 0
        p.n_obs = policy.observation_count
        p.n_act = policy.action_count
        p.n_int = 1
        p.init_int = 0
        p.w = policy.weights
        p.gw = np.zeros_like(policy.weights)
        p.tw = dummy3
        p.aw = dummy2
        p.gtw = dummy3
        p.gaw = dummy2
    elif policy.kind == "fsc":
        p.kind = 1
        p.n_obs = policy.observation_count
        p.n_act = policy.action_count
        p.n_int = policy.internal_state_count
        p.init_int = policy.initial_internal
        p.tw = policy.transition_weights
        p.aw = policy.action_weights
        p.gtw = np.zeros_like(policy.transition_weights)
        p.gaw = np.zeros_like(policy.action_weights)
        p.w = dummy2
        p.gw = dummy2
    else:
        raise ValueError(f"unsupported policy kind {policy.kind!r}")
    if p.n_act > MAXROW or p.n_int > MAXROW:
        raise ValueError("policy row too wide for the compiled kernels")
    return p


cdef inline int pack_act(PolicyPack p, int obs, int* internal, bitgen_t* bg) noexcept nogil:
    cdef double buf[MAXROW]
    cdef int nxt
    if p.kind == 1:
        softmax_c(&p.tw[internal[0], obs, 0], p.n_int, p.temp, buf)
        nxt = pick_from_row(buf, p.n_int, next_u(bg))
        internal[0] = nxt
        softmax_c(&p.aw[nxt, 0], p.n_act, p.temp, buf)
    else:
        internal[0] = 0
        softmax_c(&p.w[obs, 0], p.n_act, p.temp, buf)
    return pick_from_row(buf, p.n_act, next_u(bg))


cdef inline void pack_accumulate(PolicyPack p, int obs, int prev_int, int cur_int,
                                 int act, double coef) noexcept nogil:
    """Add coef * (score of this step's log probability) into the accumulators."""
    cdef double buf[MAXROW]
    cdef double v
    cdef int k
    if p.kind == 1:
        softmax_c(&p.tw[prev_int, obs, 0], p.n_int, p.temp, buf)
        for k in range(p.n_int):
            v = -buf[k] / p.temp
            if k == cur_int:
                v += 1.0 / p.temp
            p.gtw[prev_int, obs, k] += coef * v
        softmax_c(&p.aw[cur_int, 0], p.n_act, p.temp, buf)
        for k in range(p.n_act):
            v = -buf[k] / p.temp
            if k == act:
                v += 1.0 / p.temp
            p.gaw[cur_int, k] += coef * v
    else:
        softmax_c(&p.w[obs, 0], p.n_act, p.temp, buf)
        for k in range(p.n_act):
            v = -buf[k] / p.temp
            if k == act:
                v += 1.0 / p.temp
            p.gw[obs, k] += coef * v


cdef inline void pack_zero_grad(PolicyPack p) noexcept nogil:
    if p.kind == 1:
        memset(&p.gtw[0, 0, 0], 0, p.n_int * p.n_obs * p.n_int * sizeof(double))
        memset(&p.gaw[0, 0], 0, p.n_int * p.n_act * sizeof(double))
    else:
        memset(&p.gw[0, 0], 0, p.n_obs * p.n_act * sizeof(double))


cdef inline void pack_apply(PolicyPack p, double alpha) noexcept nogil:
    cdef int i, j, k
    if p.kind == 1:
        for i in range(p.n_int):
            for j in range(p.n_obs):
                for k in range(p.n_int):
                    p.tw[i, j, k] += alpha * p.gtw[i, j, k]
            for k in range(p.n_act):
                p.aw[i, k] += alpha * p.gaw[i, k]
    else:
        for i in range(p.n_obs):
            for k in range(p.n_act):
                p.w[i, k] += alpha * p.gw[i, k]


cdef void episode_update(PolicyPack p0, PolicyPack p1,
                         long[:, ::1] obs, long[:, ::1] ints, long[:, ::1] acts,
                         double[::1] rewards, double[::1] coef, int T,
                         double alpha, double gamma) noexcept nogil:
    """Suffix-return update for both agents from the recorded episode."""
    cdef double g = 1.0
    cdef double tail = 0.0
    cdef int t, prev0, prev1
    for t in range(T):
        coef[t] = g
        g *= gamma
    for t in range(T - 1, -1, -1):
        tail = rewards[t] + gamma * tail
        coef[t] = coef[t] * tail
    pack_zero_grad(p0)
    pack_zero_grad(p1)
    prev0 = p0.init_int
    prev1 = p1.init_int
    for t in range(T):
        pack_accumulate(p0, <int> obs[t, 0], prev0, <int> ints[t, 0], <int> acts[t, 0], coef[t])
        pack_accumulate(p1, <int> obs[t, 1], prev1, <int> ints[t, 1], <int> acts[t, 1], coef[t])
        prev0 = <int> ints[t, 0]
        prev1 = <int> ints[t, 1]
    pack_apply(p0, alpha)
    pack_apply(p1, alpha)


# ---------------------------------------------------------------------------
# tabular games
# ---------------------------------------------------------------------------

cdef class TabularPack:
    cdef double[:, :, ::1] T
    cdef double[:, ::1] R
    cdef signed char[::1] terminal
    cdef int[:, ::1] det_trans
    cdef double[:, ::1] obs0, obs1
    cdef int[::1] det_obs0, det_obs1
    cdef int n_states, init_state, nact0


cdef int _det_index(double[::1] row):
    cdef int k, hit = -1
    for k in range(row.shape[0]):
        if row[k] != 0.0:
            if hit >= 0 or row[k] != 1.0:
                return -1
            hit = k
    return hit


cdef TabularPack pack_tabular(object game):
    cdef TabularPack g = TabularPack()
    cdef int s, a
    t = np.ascontiguousarray(game.transition)
    r = np.ascontiguousarray(game.reward)
    g.T = t
    g.R = r
    g.n_states = game.state_count
    g.init_state = game.initial_state
    g.nact0 = game.agents[0].action_count
    term = np.zeros(game.state_count, dtype=np.int8)
    for s in game.terminal:
        term[s] = 1
    g.terminal = term
    det = np.empty((game.state_count, game.joint_actions), dtype=np.intc)
    for s in range(game.state_count):
        for a in range(game.joint_actions):
            det[s, a] = _det_index(t[s, a])
    g.det_trans = det
    o0 = np.ascontiguousarray(game.agents[0].observe)
    o1 = np.ascontiguousarray(game.agents[1].observe)
    g.obs0 = o0
    g.obs1 = o1
    d0 = np.empty(game.state_count, dtype=np.intc)
    d1 = np.empty(game.state_count, dtype=np.intc)
    for s in range(game.state_count):
        d0[s] = _det_index(o0[s])
        d1[s] = _det_index(o1[s])
    g.det_obs0 = d0
    g.det_obs1 = d1
    return g


def dgd_train_tabular(object game, list policies, object config, object rng):
    """Compiled counterpart of the pure-Python dgd_train loop (two agents)."""
    from ..learning import LearningCurve

    cdef TabularPack g = pack_tabular(game)
    cdef PolicyPack p0 = pack_policy(policies[0])
    cdef PolicyPack p1 = pack_policy(policies[1])
    cdef bitgen_t* bg = get_bitgen(rng)

    cdef int episodes = config.episodes
    cdef int horizon = config.horizon
    cdef int eval_every = config.eval_every
    cdef double alpha = config.learning_rate
    cdef double gamma = config.discount

    cdef long[:, ::1] obs = np.empty((horizon, 2), dtype=np.int64)
    cdef long[:, ::1] ints = np.empty((horizon, 2), dtype=np.int64)
    cdef long[:, ::1] acts = np.empty((horizon, 2), dtype=np.int64)
    cdef double[::1] rewards = np.empty(horizon)
    cdef double[::1] coef = np.empty(horizon)

    curve = LearningCurve()
    cdef double payoff_sum = 0.0, disc_sum = 0.0, payoff, disc, gpow, r
    cdef int window = 0, episode, t, T, s, s2, o0, o1, a0, a1, ja, int0, int1

    for episode in range(episodes):
        s = g.init_state
        T = 0
        int0 = p0.init_int
        int1 = p1.init_int
        while T < horizon:
            o0 = g.det_obs0[s]
            if o0 < 0:
                o0 = pick_from_row(&g.obs0[s, 0], g.obs0.shape[1], next_u(bg))
            a0 = pack_act(p0, o0, &int0, bg)
            o1 = g.det_obs1[s]
            if o1 < 0:
                o1 = pick_from_row(&g.obs1[s, 0], g.obs1.shape[1], next_u(bg))
            a1 = pack_act(p1, o1, &int1, bg)
            ja = a0 + g.nact0 * a1
            obs[T, 0] = o0
            obs[T, 1] = o1
            ints[T, 0] = int0
            ints[T, 1] = int1
            acts[T, 0] = a0
            acts[T, 1] = a1
            rewards[T] = g.R[s, ja]
            s2 = g.det_trans[s, ja]
            if s2 < 0:
                s2 = pick_from_row(&g.T[s, ja, 0], g.n_states, next_u(bg))
            s = s2
            T += 1
            if g.terminal[s]:
                break
        episode_update(p0, p1, obs, ints, acts, rewards, coef, T, alpha, gamma)
        payoff = 0.0
        disc = 0.0
        gpow = 1.0
        for t in range(T):
            r = rewards[t]
            payoff += r
            disc += gpow * r
            gpow *= gamma
        payoff_sum += payoff
        disc_sum += disc
        window += 1
        if window == eval_every or episode == episodes - 1:
            curve.add(episode + 1, "payoff", payoff_sum / window)
            curve.add(episode + 1, "return_disc", disc_sum / window)
            payoff_sum = 0.0
            disc_sum = 0.0
            window = 0
    return policies, curve


# ---------------------------------------------------------------------------
# soccer environment
# ---------------------------------------------------------------------------

cdef class SoccerPack:
    cdef int width, height, n_players, n_opp, step_limit
    cdef int nact0, nact1
    cdef signed char[::1] goal_row     # by row index
    cdef int[::1] goal_rows_list
    cdef int[::1] opp_kind             # 0 random, 1 greedy, 2 defensive
    # episode state
    cdef int[::1] pc, pr
    cdef int possessor, steps, outcome  # outcome 0 none, 1 left goal, 2 right goal, 3 draw
    cdef int[::1] acts, order


_OPP_CODE = {"random": 0, "greedy": 1, "defensive": 2}


cdef SoccerPack pack_soccer(object game):
    cfg = game.config
    cdef SoccerPack e = SoccerPack()
    e.width = cfg.width
    e.height = cfg.height
    e.n_opp = len(cfg.opponents)
    e.n_players = 2 + e.n_opp
    e.step_limit = cfg.step_limit
    e.nact0 = game.agents[0].action_count
    e.nact1 = game.agents[1].action_count
    gr = np.zeros(cfg.height, dtype=np.int8)
    for r in cfg.goal_rows:
        gr[r] = 1
    e.goal_row = gr
    e.goal_rows_list = np.array(cfg.goal_rows, dtype=np.intc)
    e.opp_kind = np.array([_OPP_CODE[k] for k in cfg.opponents], dtype=np.intc)
    e.pc = np.zeros(e.n_players, dtype=np.intc)
    e.pr = np.zeros(e.n_players, dtype=np.intc)
    e.acts = np.zeros(e.n_players, dtype=np.intc)
    e.order = np.zeros(e.n_players, dtype=np.intc)
    e.possessor = 0
    e.steps = 0
    e.outcome = 0
    return e


def soccer_supported(object game, str purpose="sim"):
    cfg = game.config
    if 2 + len(cfg.opponents) > MAXPLAYERS:
        return False
    if game.agents[0].action_count > MAXROW:
        return False
    if purpose == "q":
        cells = cfg.width * cfg.height
        if len(cfg.opponents) != 1:
            return False
        if cells ** 3 * 3 > 50_000_000:
            return False
    return True


cdef void soccer_reset(SoccerPack e, bitgen_t* bg) noexcept nogil:
    cdef int placed, half_lo, half_hi, c, r, count, target, i
    # learners in the right half, opponents in the left, distinct cells;
    # candidate cells run column-major to match the python fallback
    for placed in range(e.n_players):
        if placed < 2:
            half_lo = e.width - e.width // 2
            half_hi = e.width
        else:
            half_lo = 0
            half_hi = e.width // 2
        count = 0
        for c in range(half_lo, half_hi):
            for r in range(e.height):
                if not _occupied_before(e, placed, c, r):
                    count += 1
        target = <int> (next_u(bg) * count)
        count = 0
        for c in range(half_lo, half_hi):
            for r in range(e.height):
                if not _occupied_before(e, placed, c, r):
                    if count == target:
                        e.pc[placed] = c
                        e.pr[placed] = r
                    count += 1
    e.possessor = <int> (next_u(bg) * e.n_players)
    e.steps = 0
    e.outcome = 0


cdef inline bint _occupied_before(SoccerPack e, int placed, int c, int r) noexcept nogil:
    cdef int i
    for i in range(placed):
        if e.pc[i] == c and e.pr[i] == r:
            return True
    return False


cdef inline int _toward_c(int dc, int dr) noexcept nogil:
    if dc > 0:
        return A_E
    if dc < 0:
        return A_W
    if dr > 0:
        return A_S
    if dr < 0:
        return A_N
    return A_STAY


cdef inline int _nearest_goal_row(SoccerPack e, int r) noexcept nogil:
    cdef int best = e.goal_rows_list[0]
    cdef int k, g, db
    db = best - r if best >= r else r - best
    for k in range(1, e.goal_rows_list.shape[0]):
        g = e.goal_rows_list[k]
        if (g - r if g >= r else r - g) < db:
            best = g
            db = best - r if best >= r else r - best
    return best


cdef int opp_action_c(SoccerPack e, int kind, int player, bitgen_t* bg) noexcept nogil:
    cdef int c = e.pc[player]
    cdef int r = e.pr[player]
    cdef int pc2, pr2, target, adc, adr
    cdef int cand[5]
    cdef int ncand
    if kind == 0:  # random
        return <int> (next_u(bg) * 6)
    if kind == 1:  # greedy
        if e.possessor == player:
            if c < e.width - 1:
                return A_E
            if not e.goal_row[r]:
                target = _nearest_goal_row(e, r)
                return A_S if target > r else A_N
            return A_E
        pc2 = e.pc[e.possessor]
        pr2 = e.pr[e.possessor]
        adc = pc2 - c if pc2 >= c else c - pc2
        adr = pr2 - r if pr2 >= r else r - pr2
        if adc + adr <= 1:
            return A_STAY
        return _toward_c(pc2 - c, pr2 - r)
    # defensive: random wander among the moves that stay inside the goal area
    if (c == 0 or c == 1) and e.goal_row[r]:
        cand[0] = A_STAY
        ncand = 1
        if r - 1 >= 0 and e.goal_row[r - 1]:
            cand[ncand] = A_N
            ncand += 1
        if r + 1 < e.height and e.goal_row[r + 1]:
            cand[ncand] = A_S
            ncand += 1
        if c == 1:
            cand[ncand] = A_W
            ncand += 1
        else:
            cand[ncand] = A_E
            ncand += 1
        return cand[<int> (next_u(bg) * ncand)]
    target = _nearest_goal_row(e, r)
    return _toward_c(1 - c, target - r)


cdef double soccer_step(SoccerPack e, int a0, int a1, bitgen_t* bg) noexcept nogil:
    """Mirror of SoccerGame.step: returns the reward, updates state in place."""
    cdef int k, i, j, oi, p, a, c, r, dc, dr, nc, nr, q, occupant, side
    cdef int pending = -1
    cdef double reward = 0.0
    e.acts[0] = a0
    e.acts[1] = a1
    for k in range(e.n_opp):
        e.acts[2 + k] = opp_action_c(e, e.opp_kind[k], 2 + k, bg)
    for i in range(e.n_players):
        e.order[i] = i
    for i in range(e.n_players - 1, 0, -1):
        j = <int> (next_u(bg) * (i + 1))
        k = e.order[i]
        e.order[i] = e.order[j]
        e.order[j] = k
    for oi in range(e.n_players):
        p = e.order[oi]
        a = e.acts[p]
        if a == A_PASS:
            if p <= 1 and e.possessor == p:
                pending = 1 - p
            continue
        if a == A_STAY:
            continue
        dc = 0
        dr = 0
        if a == A_N:
            dr = -1
        elif a == A_S:
            dr = 1
        elif a == A_E:
            dc = 1
        else:
            dc = -1
        c = e.pc[p]
        r = e.pr[p]
        if e.possessor == p:
            side = 0
            if e.goal_row[r]:
                if c == 0 and a == A_W:
                    side = -1
                elif c == e.width - 1 and a == A_E:
                    side = 1
            if side != 0:
                reward = 1.0 if side < 0 else -1.0
                e.outcome = 1 if side < 0 else 2
                break
        nc = c + dc
        nr = r + dr
        if nc < 0 or nc >= e.width or nr < 0 or nr >= e.height:
            continue
        occupant = -1
        for q in range(e.n_players):
            if q != p and e.pc[q] == nc and e.pr[q] == nr:
                occupant = q
                break
        if occupant >= 0:
            if e.possessor == p:
                e.possessor = occupant
            continue
        e.pc[p] = nc
        e.pr[p] = nr
    if e.outcome == 0 and pending >= 0 and e.possessor == 1 - pending:
        e.possessor = pending
    e.steps += 1
    if e.outcome == 0 and e.steps >= e.step_limit:
        e.outcome = 3
    return reward


cdef int soccer_observe_c(SoccerPack e, int learner) noexcept nogil:
    cdef int owner, code, a, dc, dr, nc, nr, q, status
    cdef int c = e.pc[learner]
    cdef int r = e.pr[learner]
    if e.possessor == learner:
        owner = 0
    elif e.possessor == 1 - learner:
        owner = 1
    else:
        owner = 2
    code = owner
    for a in range(4):  # N, S, E, W
        dc = 0
        dr = 0
        if a == A_N:
            dr = -1
        elif a == A_S:
            dr = 1
        elif a == A_E:
            dc = 1
        else:
            dc = -1
        nc = c + dc
        nr = r + dr
        if nc < 0 or nc >= e.width or nr < 0 or nr >= e.height:
            status = 1
        else:
            status = 0
            for q in range(e.n_players):
                if e.pc[q] == nc and e.pr[q] == nr:
                    status = 2
                    break
        code = code * 3 + status
    return code


def dgd_train_soccer(object game, list policies, object config, object rng):
    """Compiled counterpart of dgd_train on the soccer environment."""
    from ..learning import LearningCurve

    cdef SoccerPack e = pack_soccer(game)
    cdef PolicyPack p0 = pack_policy(policies[0])
    cdef PolicyPack p1 = pack_policy(policies[1])
    cdef bitgen_t* bg = get_bitgen(rng)

    cdef int episodes = config.episodes
    cdef int horizon = config.horizon
    cdef int eval_every = config.eval_every
    cdef double alpha = config.learning_rate
    cdef double gamma = config.discount

    cdef long[:, ::1] obs = np.empty((horizon, 2), dtype=np.int64)
    cdef long[:, ::1] ints = np.empty((horizon, 2), dtype=np.int64)
    cdef long[:, ::1] acts = np.empty((horizon, 2), dtype=np.int64)
    cdef double[::1] rewards = np.empty(horizon)
    cdef double[::1] coef = np.empty(horizon)

    curve = LearningCurve()
    cdef double payoff_sum = 0.0, disc_sum = 0.0, payoff, disc, gpow, r
    cdef int window = 0, episode, t, T, o0, o1, a0, a1, int0, int1

    for episode in range(episodes):
        soccer_reset(e, bg)
        T = 0
        int0 = p0.init_int
        int1 = p1.init_int
        while T < horizon:
            o0 = soccer_observe_c(e, 0)
            a0 = pack_act(p0, o0, &int0, bg)
            o1 = soccer_observe_c(e, 1)
            a1 = pack_act(p1, o1, &int1, bg)
            obs[T, 0] = o0
            obs[T, 1] = o1
            ints[T, 0] = int0
            ints[T, 1] = int1
            acts[T, 0] = a0
            acts[T, 1] = a1
            rewards[T] = soccer_step(e, a0, a1, bg)
            T += 1
            if e.outcome != 0:
                break
        episode_update(p0, p1, obs, ints, acts, rewards, coef, T, alpha, gamma)
        payoff = 0.0
        disc = 0.0
        gpow = 1.0
        for t in range(T):
            r = rewards[t]
            payoff += r
            disc += gpow * r
            gpow *= gamma
        payoff_sum += payoff
        disc_sum += disc
        window += 1
        if window == eval_every or episode == episodes - 1:
            curve.add(episode + 1, "payoff", payoff_sum / window)
            curve.add(episode + 1, "return_disc", disc_sum / window)
            payoff_sum = 0.0
            disc_sum = 0.0
            window = 0
    return policies, curve


def evaluate_soccer(object game, list policies, int episodes, int horizon, object rng):
    """Mean undiscounted payoff of fixed policies (mirror of evaluate_policies)."""
    cdef SoccerPack e = pack_soccer(game)
    cdef PolicyPack p0 = pack_policy(policies[0])
    cdef PolicyPack p1 = pack_policy(policies[1])
    cdef bitgen_t* bg = get_bitgen(rng)
    cdef double total = 0.0
    cdef int episode, T, o0, o1, a0, a1, int0, int1
    for episode in range(episodes):
        soccer_reset(e, bg)
        T = 0
        int0 = p0.init_int
        int1 = p1.init_int
        while T < horizon:
            o0 = soccer_observe_c(e, 0)
            a0 = pack_act(p0, o0, &int0, bg)
            o1 = soccer_observe_c(e, 1)
            a1 = pack_act(p1, o1, &int1, bg)
            total += soccer_step(e, a0, a1, bg)
            T += 1
            if e.outcome != 0:
                break
    return total / episodes


def rollout_soccer(object game, list policies, int horizon, object rng):
    """One recorded episode, for cross-backend trajectory comparison."""
    cdef SoccerPack e = pack_soccer(game)
    cdef PolicyPack p0 = pack_policy(policies[0])
    cdef PolicyPack p1 = pack_policy(policies[1])
    cdef bitgen_t* bg = get_bitgen(rng)
    obs_arr = np.empty((horizon, 2), dtype=np.int64)
    ints_arr = np.empty((horizon, 2), dtype=np.int64)
    acts_arr = np.empty((horizon, 2), dtype=np.int64)
    rew_arr = np.empty(horizon)
    cdef long[:, ::1] obs = obs_arr
    cdef long[:, ::1] ints = ints_arr
    cdef long[:, ::1] acts = acts_arr
    cdef double[::1] rewards = rew_arr
    cdef int T = 0, o0, o1, a0, a1, int0, int1
    soccer_reset(e, bg)
    int0 = p0.init_int
    int1 = p1.init_int
    while T < horizon:
        o0 = soccer_observe_c(e, 0)
        a0 = pack_act(p0, o0, &int0, bg)
        o1 = soccer_observe_c(e, 1)
        a1 = pack_act(p1, o1, &int1, bg)
        obs[T, 0] = o0
        obs[T, 1] = o1
        ints[T, 0] = int0
        ints[T, 1] = int1
        acts[T, 0] = a0
        acts[T, 1] = a1
        rewards[T] = soccer_step(e, a0, a1, bg)
        T += 1
        if e.outcome != 0:
            break
    outcome = {0: None, 1: "learners-score", 2: "opponent-scores", 3: "draw"}[e.outcome]
    return (obs_arr[:T], ints_arr[:T], acts_arr[:T], rew_arr[:T], outcome)


def fuzz_soccer(object game, long n_steps, object rng):
    """Invariant-checked random stepping (mirror of the python fuzz loop)."""
    cdef SoccerPack e = pack_soccer(game)
    cdef bitgen_t* bg = get_bitgen(rng)
    cdef int nact = game.agents[0].action_count
    cdef long steps = 0
    cdef long episodes = 1, goals = 0, draws = 0
    cdef int a0, a1, i, j, prev_steps
    cdef double reward
    cdef bint goal
    violations = []
    soccer_reset(e, bg)
    while steps < n_steps:
        a0 = <int> (next_u(bg) * nact)
        a1 = <int> (next_u(bg) * nact)
        prev_steps = e.steps
        reward = soccer_step(e, a0, a1, bg)
        steps += 1
        for i in range(e.n_players):
            for j in range(i + 1, e.n_players):
                if e.pc[i] == e.pc[j] and e.pr[i] == e.pr[j]:
                    violations.append({"step": steps, "kind": "occupancy"})
        if e.possessor < 0 or e.possessor >= e.n_players:
            violations.append({"step": steps, "kind": "possession"})
        goal = e.outcome == 1 or e.outcome == 2
        if (reward != 0.0) != goal:
            violations.append({"step": steps, "kind": "reward-outcome"})
        if goal and reward != 1.0 and reward != -1.0:
            violations.append({"step": steps, "kind": "reward-magnitude"})
        if e.outcome == 3 and prev_steps + 1 != e.step_limit:
            violations.append({"step": steps, "kind": "early-draw"})
        if violations:
            break
        if e.outcome != 0:
            goals += <long> goal
            draws += <long> (e.outcome == 3)
            soccer_reset(e, bg)
            episodes += 1
    return {"steps": steps, "episodes": episodes, "goals": goals, "draws": draws,
            "violations": violations}


# ---------------------------------------------------------------------------
# soccer Q-learning (central controller, dense table)
# ---------------------------------------------------------------------------

cdef long soccer_full_key(SoccerPack e) noexcept nogil:
    cdef long code = 0
    cdef int i, cells = e.width * e.height
    for i in range(e.n_players):
        code = code * cells + (e.pr[i] * e.width + e.pc[i])
    return code * e.n_players + e.possessor


cdef long soccer_partial_key(SoccerPack e, long n_obs) noexcept nogil:
    return soccer_observe_c(e, 0) * n_obs + soccer_observe_c(e, 1)


cdef int greedy_pick(double[:, ::1] q, long key, int n_act, bitgen_t* bg) noexcept nogil:
    cdef double best = q[key, 0]
    cdef int ties[MAXROW * MAXROW]
    cdef int n_ties = 1, a
    ties[0] = 0
    for a in range(1, n_act):
        if q[key, a] > best:
            best = q[key, a]
            ties[0] = a
            n_ties = 1
        elif q[key, a] == best:
            ties[n_ties] = a
            n_ties += 1
    return ties[<int> (next_u(bg) * n_ties)]


cdef double _q_greedy_eval(SoccerPack e, double[:, ::1] q, int n_act, int horizon,
                           int eval_episodes, bint partial, long n_obs,
                           bitgen_t* ebg) noexcept nogil:
    cdef double total = 0.0
    cdef long kk
    cdef int ep, tt, aa
    for ep in range(eval_episodes):
        soccer_reset(e, ebg)
        for tt in range(horizon):
            kk = soccer_partial_key(e, n_obs) if partial else soccer_full_key(e)
            aa = greedy_pick(q, kk, n_act, ebg)
            total += soccer_step(e, aa % e.nact0, aa // e.nact0, ebg)
            if e.outcome != 0:
                break
    return total / eval_episodes


def q_train_soccer(object game, object config, object rng):
    """Compiled counterpart of q_train for the soccer domain."""
    from ..learning import LearningCurve
    from ..qlearn import QTable

    cdef SoccerPack e = pack_soccer(game)
    cdef bint partial = config.observability == "partial"
    cdef long n_obs = game.agents[0].observation_count
    cdef int cells = e.width * e.height
    cdef long n_keys
    cdef int i
    if partial:
        n_keys = n_obs * n_obs
    else:
        n_keys = 1
        for i in range(e.n_players):
            n_keys *= cells
        n_keys *= e.n_players
    cdef int n_act = e.nact0 * e.nact1
    if n_act > MAXROW * MAXROW:
        raise ValueError("joint action space too wide for the compiled kernel")

    q_arr = np.full((n_keys, n_act), float(config.initial_q))
    visited_arr = np.zeros(n_keys, dtype=np.int8)
    cdef double[:, ::1] q = q_arr
    cdef signed char[::1] visited = visited_arr

    train_rng, eval_parent = rng.spawn(2)
    cdef bitgen_t* bg = get_bitgen(train_rng)

    cdef int episodes = config.episodes
    cdef int horizon = config.horizon
    cdef int eval_every = config.eval_every
    cdef int eval_episodes = config.eval_episodes
    cdef double alpha = config.alpha
    cdef double gamma = config.gamma
    cdef double eps = config.epsilon

    curve = LearningCurve()

    def evaluate(episode):
        eval_rng = eval_parent.spawn(1)[0]
        mean = _q_greedy_eval(e, q, n_act, horizon, eval_episodes, partial, n_obs,
                              get_bitgen(eval_rng))
        curve.add(episode, "eval_payoff", mean)

    evaluate(0)
    cdef long k, k2
    cdef int episode, t, a
    cdef double u, r, best, target
    cdef int a2
    for episode in range(episodes):
        soccer_reset(e, bg)
        k = soccer_partial_key(e, n_obs) if partial else soccer_full_key(e)
        for t in range(horizon):
            u = next_u(bg)
            if u < eps:
                a = <int> (next_u(bg) * n_act)
            else:
                a = greedy_pick(q, k, n_act, bg)
            r = soccer_step(e, a % e.nact0, a // e.nact0, bg)
            k2 = soccer_partial_key(e, n_obs) if partial else soccer_full_key(e)
            if e.outcome != 0:
                target = r
            else:
                best = q[k2, 0]
                for a2 in range(1, n_act):
                    if q[k2, a2] > best:
                        best = q[k2, a2]
                target = r + gamma * best
            q[k, a] += alpha * (target - q[k, a])
            visited[k] = 1
            k = k2
            if e.outcome != 0:
                break
        if (episode + 1) % eval_every == 0 or episode == episodes - 1:
            evaluate(episode + 1)

    table = QTable(n_act, float(config.initial_q))
    nz = np.nonzero(visited_arr)[0]
    for key in nz:
        table.values[int(key)] = q_arr[key].copy()
    return table, curve

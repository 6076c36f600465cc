#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Runs the same seeded workloads through both backends, reports wall time and
speedup, and cross-checks that the results agree.  Usage:

    python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from coopgrad import _kernels
from coopgrad.domains import build_coordination_game, build_soccer
from coopgrad.learning import TrainConfig, dgd_train, evaluate_policies
from coopgrad.policies import random_reactive
from coopgrad.qlearn import QLearnConfig, q_train


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def bench(name, runner, check):
    out_c, t_c = timed(lambda: runner("compiled"))
    out_p, t_p = timed(lambda: runner("python"))
    agree = check(out_c, out_p)
    print(f"{name:34s} compiled {t_c:8.3f}s   python {t_p:8.3f}s   "
          f"speedup {t_p / t_c:7.1f}x   results {'agree' if agree else 'DISAGREE'}")
    return agree


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()
    if not _kernels.HAVE_COMPILED:
        raise SystemExit("compiled backend not available; build it with pip install -e .")

    k = 0.1 if args.quick else 1.0
    ok = True

    coord = build_coordination_game()
    n_ep = int(100_000 * k)

    def run_coord(backend):
        rng = np.random.default_rng(11)
        pols = [random_reactive(6, 2, rng, 0.1) for _ in range(2)]
        cfg = TrainConfig(learning_rate=0.003, discount=0.99, episodes=n_ep,
                          horizon=3, eval_every=max(1, n_ep // 10))
        return dgd_train(coord, pols, cfg, np.random.default_rng(5), backend=backend)

    def check_train(a, b):
        wa = [w for p in a[0] for w in p.weight_arrays()]
        wb = [w for p in b[0] for w in p.weight_arrays()]
        return (a[1].samples == b[1].samples
                and all(np.array_equal(x, y) for x, y in zip(wa, wb)))

    ok &= bench(f"coordination dgd {n_ep} episodes", run_coord, check_train)

    soccer = build_soccer("greedy")
    n_soc = int(20_000 * k)

    def run_soccer(backend):
        rng = np.random.default_rng(12)
        pols = [random_reactive(243, 6, rng, 1.0) for _ in range(2)]
        cfg = TrainConfig(learning_rate=0.05, discount=0.999, episodes=n_soc,
                          horizon=500, eval_every=max(1, n_soc // 5))
        return dgd_train(soccer, pols, cfg, np.random.default_rng(6), backend=backend)

    ok &= bench(f"soccer dgd {n_soc} episodes", run_soccer, check_train)

    n_eval = int(20_000 * k)

    def run_eval(backend):
        rng = np.random.default_rng(13)
        pols = [random_reactive(243, 6, rng, 1.0) for _ in range(2)]
        return evaluate_policies(soccer, pols, n_eval, 500,
                                 np.random.default_rng(7), backend=backend)

    ok &= bench(f"soccer evaluation {n_eval} episodes", run_eval,
                lambda a, b: a == b)

    rand_soccer = build_soccer("random")
    n_q = int(20_000 * k)

    def run_q(backend):
        cfg = QLearnConfig(alpha=0.1, gamma=0.999, epsilon=0.4, episodes=n_q,
                           horizon=500, eval_every=n_q, eval_episodes=200,
                           observability="full")
        return q_train(rand_soccer, cfg, np.random.default_rng(8), backend=backend)

    def check_q(a, b):
        ta, tb = a[0], b[0]
        if a[1].samples != b[1].samples or set(ta.values) != set(tb.values):
            return False
        return all(np.array_equal(ta.values[key], tb.values[key]) for key in ta.values)

    ok &= bench(f"soccer q-learning {n_q} episodes", run_q, check_q)

    if not ok:
        raise SystemExit("backend results disagree")


if __name__ == "__main__":
    main()

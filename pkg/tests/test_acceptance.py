"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test prints one PASS/FAIL line (visible with -s or on failure).  The
experiment-backed criteria execute the bundled recipes exactly as the CLI
would; with the compiled kernels the whole module runs in a few minutes.
"""

import time

import numpy as np
import pytest

from coopgrad import verify
from coopgrad.analysis import exact_gradient_all, local_optimum_counterexample, verify_nash
from coopgrad.domains import build_coordination_game
from coopgrad.domains.coordination import coordination_profile
from coopgrad.experiments import load_recipe, paired_onesided, run_experiment


def banner(name: str, ok: bool, detail: str = "") -> None:
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}  {detail}")


# ---------------------------------------------------------------------------
# estimator and gradient mathematics
# ---------------------------------------------------------------------------

def test_theorem1_equivalence():
    t0 = time.time()
    report = verify.theorem1_suite(n_games=20, episodes=1000)
    elapsed = time.time() - t0
    ok = (report["passed"] and elapsed < 30.0)
    banner("theorem1-equivalence", ok,
           f"max update diff {report['max_update_discrepancy']:.3g} "
           f"(tol 1e-12), final weights {report['max_final_weight_discrepancy']:.3g} "
           f"(tol 1e-9), {elapsed:.1f}s (< 30s)")
    assert report["passed"], report
    assert elapsed < 30.0


def test_estimator_correctness():
    t0 = time.time()
    report = verify.estimator_suite(n_games=10, horizon=3)
    elapsed = time.time() - t0
    ok = report["passed"] and elapsed < 60.0
    banner("estimator-correctness", ok,
           f"max |E[estimator] - gradient| {report['max_abs_difference']:.3g} "
           f"(tol 1e-8), {elapsed:.1f}s (< 60s)")
    assert report["passed"], report
    assert elapsed < 60.0


def test_gradient_implementation():
    t0 = time.time()
    report = verify.gradient_suite(n_policies=100)
    elapsed = time.time() - t0
    ok = report["passed"] and elapsed < 10.0
    banner("gradient-implementation", ok,
           f"max relative error {report['max_relative_error']:.3g} (tol 1e-6), "
           f"{elapsed:.1f}s (< 10s)")
    assert report["passed"], report
    assert elapsed < 10.0


# ---------------------------------------------------------------------------
# coordination-game reproduction and equilibrium structure
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def coordination_run(tmp_path_factory):
    config = load_recipe("coordination")
    t0 = time.time()
    summary = run_experiment(config, tmp_path_factory.mktemp("coordination"))
    return summary, time.time() - t0


def test_coordination_reproduction(coordination_run):
    summary, elapsed = coordination_run
    finals = [run["final_payoff"] for run in summary["runs"]]
    good = sum(v >= 9.0 for v in finals)
    ok = good >= 9 and elapsed < 300.0
    banner("coordination-reproduction", ok,
           f"{good}/10 runs with final-1000-episode mean payoff >= 9.0 "
           f"(alpha=.003, gamma=.99, budget 500k), {elapsed:.0f}s (< 300s)")
    assert good >= 9, finals
    assert elapsed < 300.0


def test_equilibrium_structure():
    t0 = time.time()
    game = build_coordination_game()
    strict_ok = all(
        verify_nash(game, coordination_profile(*p), 0.99).classification == "strict-nash"
        for p in [(1, 1, 1), (1, 0, 0)])
    accept_ok = all(
        verify_nash(game, coordination_profile(0, 0.5, q), 0.99).accepted()
        for q in (0.3, 0.5, 0.7))
    reject_ok = all(
        verify_nash(game, coordination_profile(0, 0.5, q), 0.99).classification
        == "not-nash" for q in (0.1, 0.9))
    elapsed = time.time() - t0
    ok = strict_ok and accept_ok and reject_ok and elapsed < 10.0
    banner("equilibrium-structure", ok,
           f"strict {strict_ok}, interval accepted {accept_ok}, "
           f"outside rejected {reject_ok}, {elapsed:.1f}s (< 10s)")
    assert ok


def test_stationary_point_that_is_not_nash():
    game, profile = local_optimum_counterexample()
    grads = exact_gradient_all(game, profile, 0.99)
    grad_inf = max(float(np.max(np.abs(a))) for g in grads for a in g.arrays)
    report = verify_nash(game, profile, 0.99)
    ok = (grad_inf < 1e-6 and report.classification == "not-nash"
          and report.witness is not None and report.witness.value_gain > 0)
    banner("local-optimum-not-nash", ok,
           f"|gradient|_inf {grad_inf:.3g} (< 1e-6), classified "
           f"{report.classification}, improving deviation gains "
           f"{report.witness.value_gain:.3f}")
    assert ok


def test_representability_gap():
    report = verify.gap_suite(n_random=50)
    ok = report["passed"]
    banner("representability-gap", ok,
           f"meal gap {report['meal_gap']:.4f} (> 0.05), max gap over 50 random "
           f"products {report['max_product_gap']:.2g} (< 1e-6)")
    assert ok, report


# ---------------------------------------------------------------------------
# soccer
# ---------------------------------------------------------------------------

def test_soccer_invariants():
    report = verify.soccer_invariants_suite(n_steps=10 ** 6)
    ok = report["passed"]
    stats = {k: v["episodes"] for k, v in report["results"].items()}
    banner("soccer-invariants", ok,
           f"10^6 fuzzed steps across opponents, episodes {stats}, no violations")
    assert ok, report


SOCCER_RECIPES = (
    "soccer-qlearn-random",
    "soccer-random", "soccer-greedy", "soccer-defensive",
    "soccer-random-nopass", "soccer-greedy-nopass", "soccer-defensive-nopass",
)


@pytest.fixture(scope="session")
def soccer_runs(tmp_path_factory):
    t0 = time.time()
    out = {}
    for name in SOCCER_RECIPES:
        out[name] = run_experiment(load_recipe(name), tmp_path_factory.mktemp(name))
    out["elapsed"] = time.time() - t0
    return out


def _finals(summary):
    return np.array([run["final_eval_payoff"] for run in summary["runs"]])


def _firsts(summary):
    return np.array([run["first_eval_payoff"] for run in summary["runs"]])


def test_soccer_learning_a_qlearning(soccer_runs):
    summary = soccer_runs["soccer-qlearn-random"]
    finals = _finals(summary)
    firsts = _firsts(summary)
    gain = float(np.mean(finals - firsts))
    ok = np.mean(finals) > 0.0 and gain >= 0.3
    banner("soccer-a-qlearning-full", ok,
           f"mean greedy eval {np.mean(finals):+.3f} (> 0), "
           f"gain over episode-0 {gain:+.3f} (>= 0.3), 10 seeds")
    assert ok, (finals, firsts)


def test_soccer_learning_b_dgd_improves(soccer_runs):
    all_ok = True
    details = []
    for opp in ("random", "greedy", "defensive"):
        summary = soccer_runs[f"soccer-{opp}"]
        res = paired_onesided(_finals(summary), _firsts(summary))
        ok = res["p"] < 0.05
        all_ok &= ok
        details.append(f"{opp}: {res['mean_b']:+.3f} -> {res['mean_a']:+.3f} "
                       f"p={res['p']:.2g}")
    banner("soccer-b-dgd-improves", all_ok, "; ".join(details))
    assert all_ok, details


def test_soccer_learning_c_pass_ablation(soccer_runs):
    details = []
    results = {}
    for opp in ("greedy", "defensive", "random"):
        res = paired_onesided(_finals(soccer_runs[f"soccer-{opp}"]),
                              _finals(soccer_runs[f"soccer-{opp}-nopass"]))
        results[opp] = res
        details.append(f"{opp}: with {res['mean_a']:+.3f} vs without "
                       f"{res['mean_b']:+.3f} (diff {res['mean_diff']:+.4f}) "
                       f"p={res['p']:.2g}")
    # vs random no significant difference is required, only reported
    ok = results["greedy"]["p"] < 0.05 and results["defensive"]["p"] < 0.05
    banner("soccer-c-pass-ablation", ok, "; ".join(details))
    assert results["greedy"]["p"] < 0.05, details
    # Known red: against the defensive opponent the pass advantage is
    # directionally positive at every budget but an order of magnitude below
    # what 10 seeds can certify. A non-pursuing random camper can be waited
    # out at zero payoff cost, so the converged payoff ceilings with and
    # without Pass coincide; only a pursuing opponent makes Pass load-bearing.
    assert results["defensive"]["p"] < 0.05, details


def test_soccer_runtime_budget(soccer_runs):
    ok = soccer_runs["elapsed"] < 1800.0
    banner("soccer-runtime", ok, f"all soccer recipes in "
           f"{soccer_runs['elapsed']:.0f}s (< 1800s)")
    assert ok


# ---------------------------------------------------------------------------
# determinism
# ---------------------------------------------------------------------------

def test_byte_identical_reruns(tmp_path):
    import dataclasses
    from coopgrad.experiments import ExperimentConfig

    shrunk = []
    for name, over in (("coordination", dict(episodes=5000, runs=3)),
                       ("soccer-defensive", dict(episodes=500, runs=2,
                                                 eval_every=250, eval_episodes=50))):
        doc = dataclasses.asdict(load_recipe(name))
        doc.update(over)
        shrunk.append(ExperimentConfig(**doc))
    ok = True
    for config in shrunk:
        dirs = [tmp_path / f"{config.name}-{k}" for k in "ab"]
        for d in dirs:
            run_experiment(config, d)
        for f in sorted(p.name for p in dirs[0].iterdir() if p.suffix == ".csv"):
            ok &= (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes()
    banner("determinism", ok, "re-running recipes reproduces every CSV byte for byte")
    assert ok

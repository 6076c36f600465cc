"""Experiment harness: seeded multi-run recipes with CSV/JSON artifacts.

A recipe is an ExperimentConfig (JSON round-trippable).  ``run_experiment``
executes ``runs`` independent seeded runs, writes one curve CSV per run plus
an aggregate CSV (mean, sample standard deviation, n per evaluation point),
and the final policies of every run.  Identical config + seed reproduces the
output files byte for byte; see docs/formats.md for the schemas.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .domains import build_coordination_game, build_soccer
from .games import ContractViolation
from .learning import TrainConfig, dgd_train, evaluate_policies
from .policies import policy_to_json, random_fsc, random_reactive
from .qlearn import QLearnConfig, q_train

DOMAINS = ("coordination", "soccer")
LEARNERS = ("dgd-reactive", "dgd-fsc", "qlearn-full", "qlearn-partial")


@dataclass
class ExperimentConfig:
    name: str
    domain: str
    learner: str
    opponent: str | list[str] = "random"
    pass_enabled: bool = True
    fsc_states: int = 4
    learning_rate: float = 0.05
    discount: float = 0.999
    epsilon: float = 0.4
    temperature: float = 1.0
    init_scale: float = 1.0
    initial_q: float = 0.0
    episodes: int = 30000
    horizon: int = 500
    eval_every: int = 1000
    eval_episodes: int = 1000
    runs: int = 10
    seed: int = 42

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ContractViolation(f"domain must be one of {DOMAINS}")
        if self.learner not in LEARNERS:
            raise ContractViolation(f"learner must be one of {LEARNERS}")
        if self.domain == "soccer":
            kinds = [self.opponent] if isinstance(self.opponent, str) else self.opponent
            from .domains.soccer import OPPONENT_KINDS
            for k in kinds:
                if k not in OPPONENT_KINDS:
                    raise ContractViolation(f"unknown opponent {k!r}")
        if not 0 <= self.discount < 1:
            raise ContractViolation("discount must be in [0, 1)")
        if not 0 <= self.epsilon <= 1:
            raise ContractViolation("epsilon must be in [0, 1]")
        for name in ("learning_rate", "temperature", "init_scale"):
            if getattr(self, name) < 0:
                raise ContractViolation(f"{name} must be >= 0")
        for name in ("fsc_states", "episodes", "horizon", "eval_every",
                     "eval_episodes", "runs"):
            if getattr(self, name) < 1:
                raise ContractViolation(f"{name} must be >= 1")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        doc = json.loads(text)
        names = {f.name for f in dataclasses.fields(ExperimentConfig)}
        unknown = set(doc) - names
        if unknown:
            raise ContractViolation(f"unknown config fields: {sorted(unknown)}")
        return ExperimentConfig(**doc)


def _build_game(config: ExperimentConfig):
    if config.domain == "coordination":
        return build_coordination_game()
    return build_soccer(config.opponent, pass_enabled=config.pass_enabled)


def _build_policies(config: ExperimentConfig, game, rng):
    policies = []
    for spec in game.agents:
        if config.learner == "dgd-fsc":
            policies.append(random_fsc(config.fsc_states, spec.observation_count,
                                       spec.action_count, rng,
                                       scale=config.init_scale,
                                       temperature=config.temperature))
        else:
            policies.append(random_reactive(spec.observation_count, spec.action_count,
                                            rng, scale=config.init_scale,
                                            temperature=config.temperature))
    return policies


def run_single(config: ExperimentConfig, run_id: int):
    """One seeded run; returns (curve, final policy JSON strings or None)."""
    root = np.random.SeedSequence(config.seed)
    run_ss = root.spawn(config.runs)[run_id]
    game = _build_game(config)

    if config.learner.startswith("qlearn"):
        qcfg = QLearnConfig(
            alpha=config.learning_rate, gamma=config.discount, epsilon=config.epsilon,
            episodes=config.episodes, horizon=config.horizon,
            eval_every=config.eval_every, eval_episodes=config.eval_episodes,
            initial_q=config.initial_q,
            observability="full" if config.learner == "qlearn-full" else "partial")
        table, curve = q_train(game, qcfg, np.random.default_rng(run_ss))
        return curve, None

    train_ss, eval0_ss, eval1_ss = run_ss.spawn(3)
    rng = np.random.default_rng(train_ss)
    policies = _build_policies(config, game, rng)
    tcfg = TrainConfig(learning_rate=config.learning_rate, discount=config.discount,
                       episodes=config.episodes, horizon=config.horizon,
                       eval_every=config.eval_every)
    untrained = evaluate_policies(game, policies, config.eval_episodes, config.horizon,
                                  np.random.default_rng(eval0_ss))
    trained, curve = dgd_train(game, policies, tcfg, rng)
    final = evaluate_policies(game, trained, config.eval_episodes, config.horizon,
                              np.random.default_rng(eval1_ss))
    curve.samples.insert(0, (0, "eval_payoff", float(untrained)))
    curve.add(config.episodes, "eval_payoff", float(final))
    return curve, [policy_to_json(p) for p in trained]


# ---------------------------------------------------------------------------
# CSV artifacts
# ---------------------------------------------------------------------------

def _atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def curve_csv(curve, run_id: int) -> str:
    lines = ["run_id,episode,metric,value"]
    for episode, metric, value in curve.samples:
        lines.append(f"{run_id},{episode},{metric},{value!r}")
    return "\n".join(lines) + "\n"


def aggregate_csv(curves) -> str:
    """Mean/sd/n per (metric, episode) across runs; sd is the sample deviation."""
    table: dict[tuple[str, int], list[float]] = {}
    for curve in curves:
        for episode, metric, value in curve.samples:
            table.setdefault((metric, episode), []).append(value)
    lines = ["episode,metric,mean,sd,n"]
    for metric, episode in sorted(table, key=lambda k: (k[0], k[1])):
        vals = np.array(table[(metric, episode)])
        sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        lines.append(f"{episode},{metric},{float(np.mean(vals))!r},{sd!r},{len(vals)}")
    return "\n".join(lines) + "\n"


def parse_curve_csv(text: str):
    """Rows of (run_id, episode, metric, value) from the documented schema."""
    lines = text.strip().splitlines()
    if lines[0] != "run_id,episode,metric,value":
        raise ContractViolation("unexpected curve CSV header")
    out = []
    for line in lines[1:]:
        run_id, episode, metric, value = line.split(",")
        out.append((int(run_id), int(episode), metric, float(value)))
    return out


def run_experiment(config: ExperimentConfig, outdir, jobs: int = 1) -> dict:
    """Execute all runs, write artifacts, return a summary dict."""
    os.makedirs(outdir, exist_ok=True)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_single, [config] * config.runs,
                                    range(config.runs)))
    else:
        results = [run_single(config, i) for i in range(config.runs)]

    curves = []
    summary_runs = []
    for run_id, (curve, policy_docs) in enumerate(results):
        curves.append(curve)
        _atomic_write(os.path.join(outdir, f"run_{run_id:03d}.csv"),
                      curve_csv(curve, run_id))
        if policy_docs is not None:
            doc = "[" + ",".join(policy_docs) + "]"
            _atomic_write(os.path.join(outdir, f"policies_{run_id:03d}.json"), doc)
        entry = {"run_id": run_id}
        for metric in curve.metrics():
            _, vals = curve.series(metric)
            entry[f"final_{metric}"] = vals[-1]
            entry[f"first_{metric}"] = vals[0]
        summary_runs.append(entry)

    _atomic_write(os.path.join(outdir, "aggregate.csv"), aggregate_csv(curves))
    summary = {"config": json.loads(config.to_json()), "runs": summary_runs}
    _atomic_write(os.path.join(outdir, "summary.json"), json.dumps(summary, indent=2))
    return summary


# ---------------------------------------------------------------------------
# paired comparison used by the soccer acceptance checks
# ---------------------------------------------------------------------------

def paired_onesided(greater, lesser) -> dict:
    """One-sided paired t-test that mean(greater) > mean(lesser)."""
    greater = np.asarray(greater, dtype=float)
    lesser = np.asarray(lesser, dtype=float)
    if greater.shape != lesser.shape or greater.ndim != 1:
        raise ContractViolation("paired samples must be equal-length vectors")
    res = stats.ttest_rel(greater, lesser, alternative="greater")
    return {
        "mean_a": float(np.mean(greater)),
        "mean_b": float(np.mean(lesser)),
        "mean_diff": float(np.mean(greater - lesser)),
        "t": float(res.statistic),
        "p": float(res.pvalue),
    }


# ---------------------------------------------------------------------------
# bundled recipes
# ---------------------------------------------------------------------------

def load_recipe(name_or_path) -> ExperimentConfig:
    """A bundled recipe name (without .json) or a path to a config file."""
    if os.path.exists(name_or_path):
        with open(name_or_path, encoding="utf-8") as fh:
            return ExperimentConfig.from_json(fh.read())
    path = os.path.join(os.path.dirname(__file__), "recipes", f"{name_or_path}.json")
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            return ExperimentConfig.from_json(fh.read())
    raise ContractViolation(f"no such recipe or config file: {name_or_path}")


def list_recipes() -> list[str]:
    rdir = os.path.join(os.path.dirname(__file__), "recipes")
    return sorted(f[:-5] for f in os.listdir(rdir) if f.endswith(".json"))

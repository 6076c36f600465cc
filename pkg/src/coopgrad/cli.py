"""Command-line entry point.

Subcommands:
  run           execute a bundled recipe (or config file): CSV curves + policies
  verify        run a verification suite, exit nonzero on any violation
  replay        render a recorded soccer trace as ASCII boards
  trace         record one soccer episode with random-weight policies
  print-config  dump every default constant and the bundled recipes

Exit codes: 0 success, 1 property violation / failed run, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .experiments import (
    ExperimentConfig,
    list_recipes,
    load_recipe,
    run_experiment,
)
from .games import ContractViolation
from .verify import SUITES


def _parse_override(text: str):
    key, _, raw = text.partition("=")
    if not _:
        raise ContractViolation(f"override must look like key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def cmd_run(args) -> int:
    try:
        config = load_recipe(args.recipe)
        if args.set:
            doc = dataclasses.asdict(config)
            for item in args.set:
                key, value = _parse_override(item)
                if key not in doc:
                    raise ContractViolation(f"unknown config field {key!r}")
                doc[key] = value
            config = ExperimentConfig(**doc)
    except (ContractViolation, TypeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    summary = run_experiment(config, args.outdir, jobs=args.jobs)
    print(f"wrote {config.runs} run curve(s), aggregate.csv and summary.json "
          f"to {args.outdir}")
    for entry in summary["runs"]:
        bits = [f"run {entry['run_id']}"]
        for key in sorted(entry):
            if key.startswith("final_"):
                bits.append(f"{key[6:]}={entry[key]:.4f}")
        print("  " + "  ".join(bits))
    return 0


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    reports = []
    ok = True
    for name in names:
        report = SUITES[name]()
        reports.append(report)
        ok &= report["passed"]
        print(f"{name}: {'pass' if report['passed'] else 'FAIL'}")
    doc = json.dumps(reports if len(reports) > 1 else reports[0], indent=2,
                     default=str)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(doc + "\n")
    if args.verbose or not ok:
        print(doc)
    return 0 if ok else 1


def _render_board(meta: dict, record: dict) -> str:
    width, height = meta["width"], meta["height"]
    goal_rows = set(meta["goal_rows"])
    names = ["A", "B"] + [chr(ord("X") + i) for i in range(len(meta["opponents"]))]
    grid = [["." for _ in range(width)] for _ in range(height)]
    for idx, (c, r) in enumerate(record["positions"]):
        grid[r][c] = names[idx]
    lines = []
    action_names = ("N", "S", "E", "W", "Stay", "Pass")
    acts = "  ".join(f"{names[i]}:{action_names[a]}"
                     for i, a in enumerate(record["actions"]))
    order = ",".join(names[i] for i in record["order"])
    lines.append(f"step {record['step']:4d}  reward {record['reward']:+.0f}  "
                 f"order {order}  {acts}")
    lines.append("   +" + "-" * (2 * width + 1) + "+")
    for r in range(height):
        edge = "G" if r in goal_rows else " "
        cells = []
        for c in range(width):
            mark = grid[r][c]
            star = "*" if record["positions"][record["possessor"]] == [c, r] else " "
            cells.append(mark + star if mark != "." else ". ")
        lines.append(f"  {edge}| " + "".join(cells) + f"|{edge}")
    lines.append("   +" + "-" * (2 * width + 1) + "+")
    return "\n".join(lines)


def cmd_replay(args) -> int:
    from .domains.soccer import read_trace

    try:
        lines = read_trace(args.trace)
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: cannot read trace: {err}", file=sys.stderr)
        return 2
    if not lines or lines[0].get("type") != "meta":
        print("error: trace must start with a meta line", file=sys.stderr)
        return 2
    meta = lines[0]
    print(f"soccer {meta['width']}x{meta['height']}  opponents "
          f"{','.join(meta['opponents'])}  pass={'on' if meta['pass_enabled'] else 'off'}")
    for record in lines[1:]:
        if record["type"] == "step":
            print(_render_board(meta, record))
        elif record["type"] == "end":
            print(f"outcome: {record['outcome']}  steps: {record['steps']}  "
                  f"payoff: {record['payoff']:+.0f}")
    return 0


def cmd_trace(args) -> int:
    from .domains.soccer import build_soccer, play_traced_episode, write_trace
    from .policies import random_reactive

    game = build_soccer(args.opponent, pass_enabled=not args.no_pass)
    rng = np.random.default_rng(args.seed)
    n_act = game.agents[0].action_count
    policies = [random_reactive(game.agents[0].observation_count, n_act, rng, scale=1.0)
                for _ in range(2)]
    _, lines = play_traced_episode(game, policies, args.horizon, rng)
    write_trace(lines, args.out)
    print(f"wrote {len(lines)} trace lines to {args.out}")
    return 0


def cmd_print_config(args) -> int:
    if args.recipe:
        print(load_recipe(args.recipe).to_json())
        return 0
    defaults = {
        "recipes": list_recipes(),
        "experiment_defaults": {
            f.name: (f.default if f.default is not dataclasses.MISSING else None)
            for f in dataclasses.fields(ExperimentConfig)
        },
        "constants": {
            "boltzmann_temperature": 1.0,
            "weight_clamp_for_deterministic_profiles": 20.0,
            "nash_improve_tolerance": 1e-6,
            "nash_strict_margin": 1e-9,
            "nash_stationary_tolerance": 1e-6,
            "soccer_step_limit": 500,
            "soccer_goal_rows": [1, 2, 3],
            "qlearn_initial_value": 0.0,
            "qlearn_eval_episodes_default": 1000,
        },
    }
    print(json.dumps(defaults, indent=2))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="coopgrad", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a recipe")
    p_run.add_argument("recipe", help="bundled recipe name or path to a config JSON")
    p_run.add_argument("--outdir", default="out", help="output directory")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel runs")
    p_run.add_argument("--set", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config field")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="run a verification suite")
    p_verify.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p_verify.add_argument("--json", help="also write the JSON report here")
    p_verify.add_argument("--verbose", action="store_true")
    p_verify.set_defaults(func=cmd_verify)

    p_replay = sub.add_parser("replay", help="render a soccer trace")
    p_replay.add_argument("trace")
    p_replay.set_defaults(func=cmd_replay)

    p_trace = sub.add_parser("trace", help="record one random-policy soccer episode")
    p_trace.add_argument("--opponent", default="random")
    p_trace.add_argument("--seed", type=int, default=0)
    p_trace.add_argument("--horizon", type=int, default=500)
    p_trace.add_argument("--no-pass", action="store_true")
    p_trace.add_argument("--out", default="trace.jsonl")
    p_trace.set_defaults(func=cmd_trace)

    p_cfg = sub.add_parser("print-config", help="dump defaults and constants")
    p_cfg.add_argument("recipe", nargs="?", help="resolve one recipe instead")
    p_cfg.set_defaults(func=cmd_print_config)

    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 2 if err.code not in (0, None) else 0
    try:
        return args.func(args)
    except ContractViolation as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

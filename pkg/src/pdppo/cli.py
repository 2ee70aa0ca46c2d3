"""Command-line entry point: train, eval, bench and env-check.

Value resolution is layered: built-in defaults, then the JSON config file,
then ``PDPPO_*`` environment variables, then explicit flags. Exit codes:
0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from .agents import AGENT_KINDS
from .checks import env_check_suite
from .harness import (
    ExperimentConfig,
    build_env,
    emit_outputs,
    load_checkpoint,
    run_benchmark,
    run_experiment_detailed,
)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

ENV_VAR_PREFIX = "PDPPO_"

# flag name -> (config key, caster)
_OVERRIDES = {
    "agent": ("agent", str),
    "env": ("env", str),
    "seed": ("base_seed", int),
    "steps": ("total_steps", int),
    "out": ("output_dir", str),
    "n_runs": ("n_runs", int),
    "parallel": ("parallel_runs", int),
}


class UsageError(Exception):
    pass


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return data


def _resolve_experiment(args: argparse.Namespace) -> tuple[ExperimentConfig, dict]:
    """defaults <- config file <- PDPPO_* env vars <- explicit flags."""
    file_dict = _load_config_file(args.config) if getattr(args, "config", None) else {}
    merged = dict(file_dict)
    for flag, (key, cast) in _OVERRIDES.items():
        env_val = os.environ.get(ENV_VAR_PREFIX + flag.upper())
        if env_val is not None:
            try:
                merged[key] = cast(env_val)
            except ValueError:
                raise UsageError(f"bad value for {ENV_VAR_PREFIX + flag.upper()}: {env_val!r}")
        flag_val = getattr(args, flag, None)
        if flag_val is not None:
            merged[key] = flag_val
    try:
        cfg = ExperimentConfig.from_dict(merged)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}")
    return cfg, file_dict


def cmd_train(args: argparse.Namespace) -> int:
    cfg, _ = _resolve_experiment(args)
    results = run_experiment_detailed(cfg)
    emit_outputs({cfg.agent: results}, None, cfg.output_dir, cfg)
    for res in results:
        s = res.summary
        print(
            f"{cfg.agent} seed={s.seed}: max_window_reward={s.max_window_reward:.4f} "
            f"total_cumulative_reward={s.total_cumulative_reward:.4f} ({s.wall_time:.1f}s)"
        )
    print(f"artifacts written to {cfg.output_dir}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg, file_dict = _resolve_experiment(args)
    methods = file_dict.get("methods", ["pdppo", "ppo"])
    if not isinstance(methods, list) or not methods:
        raise UsageError("bench config needs a non-empty 'methods' list")
    for m in methods:
        if m not in AGENT_KINDS:
            raise UsageError(f"unknown method {m!r} in config; choose from {AGENT_KINDS}")
    report = run_benchmark(cfg, methods)
    for name, stats in report.methods.items():
        cum = stats["total_cumulative_reward"]
        print(f"{name}: cumulative {cum['mean']:.4f} +- {cum['sd']:.4f} (n={cum['n']})")
    for t in report.tests:
        stars = "**" if t["significant_01"] else ("*" if t["significant_05"] else "")
        print(
            f"welch {t['method_a']} vs {t['method_b']} [{t['metric']}]: "
            f"t={t['t']:.4f} p={t['p']:.4g} {stars}"
        )
    print(f"report written to {os.path.join(cfg.output_dir, 'report.json')}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        agent, meta = load_checkpoint(args.checkpoint)
    except FileNotFoundError:
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    env_kind = meta.get("env")
    if env_kind is None:
        raise UsageError("checkpoint carries no environment metadata")
    env = build_env(env_kind, meta.get("env_params", {}), args.seed)

    from .agents import greedy_action

    total = 0.0
    obs = env.reset(args.seed)
    for _ in range(args.episodes):
        ep_reward = 0.0
        done = False
        while not done:
            indices = greedy_action(agent.actor, agent.action_spec, obs)
            outcome = env.step(agent.env_action(indices))
            ep_reward += outcome.total_reward
            obs = outcome.next_obs
            done = outcome.done
        total += ep_reward
        obs = env.reset()
    print(f"greedy average episode reward over {args.episodes} episodes: {total / args.episodes:.6f}")
    return EXIT_OK


def cmd_env_check(args: argparse.Namespace) -> int:
    results = env_check_suite(args.env, trials=args.trials, seed=args.seed)
    width = max(len(r.name) for r in results)
    all_ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        detail = f"  {r.detail}" if r.detail else ""
        print(f"{r.name.ljust(width)}  {status}{detail}")
        all_ok &= r.passed
    return EXIT_OK if all_ok else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdppo",
        description="Train and benchmark post-decision PPO agents on two-phase environments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one or more seeded trainings of a single method")
    p_train.add_argument("--config", help="JSON experiment config file")
    p_train.add_argument("--agent", choices=AGENT_KINDS)
    p_train.add_argument("--env", choices=("frozenlake", "lotsizing", "bandit"))
    p_train.add_argument("--seed", type=int, help="base seed (run i uses seed base+i)")
    p_train.add_argument("--steps", type=int, help="total environment steps per run")
    p_train.add_argument("--out", help="output directory")
    p_train.add_argument("--n-runs", type=int, dest="n_runs")
    p_train.add_argument("--parallel", type=int, help="worker processes for multi-run configs")
    p_train.set_defaults(func=cmd_train)

    p_bench = sub.add_parser("bench", help="run every method in the config and compare them")
    p_bench.add_argument("--config", required=True, help="JSON config with a 'methods' list")
    p_bench.add_argument("--seed", type=int)
    p_bench.add_argument("--steps", type=int)
    p_bench.add_argument("--out", help="output directory")
    p_bench.add_argument("--n-runs", type=int, dest="n_runs")
    p_bench.add_argument("--parallel", type=int)
    p_bench.set_defaults(func=cmd_bench)

    p_eval = sub.add_parser("eval", help="greedy-policy evaluation of a saved checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=20)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.set_defaults(func=cmd_eval)

    p_check = sub.add_parser("env-check", help="run an environment's invariant suite")
    p_check.add_argument("--env", required=True, choices=("frozenlake", "lotsizing"))
    p_check.add_argument("--trials", type=int, default=1000)
    p_check.add_argument("--seed", type=int, default=0)
    p_check.set_defaults(func=cmd_env_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles usage errors and --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Experiment orchestration: configs, multi-seed runs, statistics, outputs.

A run is one seeded training; an experiment is ``n_runs`` of them with
seeds ``base_seed + i``, executed serially or in a process pool. Results
persist as per-run CSVs (fixed schema), per-method aggregate curves with
95% confidence bands, a comparison report with Welch t-tests, and a config
snapshot. The t-distribution CDF is computed here via the continued-
fraction incomplete beta, so the package needs no statistics dependency.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .agents import Agent, AgentConfig, RunLog, WindowRecord, train_with_agent
from .envs import FrozenLakeEnv, InstanceSpec, LotSizingEnv, TwoArmBanditEnv, make_instance
from .envs.base import ActionSpec, TwoPhaseEnv

ENV_KINDS = ("frozenlake", "lotsizing", "bandit")

RUN_CSV_HEADER = "step,window_reward,cumulative_reward,actor_loss,critic_loss,post_critic_loss,entropy"
AGGREGATE_CSV_HEADER = "step,mean_reward,ci_low,ci_high,n"

METRICS = ("max_window_reward", "total_cumulative_reward")


# --- Student-t tail via regularized incomplete beta ------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    MAXIT, EPS, FPMIN = 300, 3e-14, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for a Student-t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Welch's unequal-variance t with Welch-Satterthwaite df; two-sided p.

    Identical constant samples compare as (t=0, p=1); degenerate variances
    with different means leave t undefined and raise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two observations")
    na, nb = len(a), len(b)
    va, vb = a.var(ddof=1), b.var(ddof=1)
    se2 = va / na + vb / nb
    if se2 == 0.0:
        if a.mean() == b.mean():
            return 0.0, 1.0
        raise ValueError("zero variance in both samples with unequal means: t undefined")
    t = float((a.mean() - b.mean()) / math.sqrt(se2))
    df = se2 * se2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return t, float(student_t_two_sided_p(t, float(df)))


def one_sided_p(t: float, p_two_sided: float) -> float:
    """One-sided p for the alternative mean(a) > mean(b), from the two-sided test."""
    return p_two_sided / 2.0 if t > 0 else 1.0 - p_two_sided / 2.0


# --- summaries and aggregation ---------------------------------------------


@dataclass
class RunSummary:
    agent_kind: str
    seed: int
    max_window_reward: float
    total_cumulative_reward: float
    reward_curve: list[tuple[int, float]]
    wall_time: float

    @classmethod
    def from_log(cls, log: RunLog, wall_time: float) -> "RunSummary":
        return cls(
            agent_kind=log.agent_kind,
            seed=log.seed,
            max_window_reward=log.max_window_reward(),
            total_cumulative_reward=log.total_cumulative_reward(),
            reward_curve=log.reward_curve(),
            wall_time=wall_time,
        )

    def metric(self, name: str) -> float:
        if name not in METRICS:
            raise KeyError(name)
        return getattr(self, name)


def aggregate(summaries: Sequence[RunSummary]) -> dict[str, tuple[float, float]]:
    """Sample mean and SD (n-1 denominator; SD 0 when n = 1) per metric."""
    if not summaries:
        raise ValueError("need at least one run summary")
    out = {}
    for name in METRICS:
        vals = np.array([s.metric(name) for s in summaries], dtype=np.float64)
        sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        out[name] = (float(vals.mean()), sd)
    return out


@dataclass
class ComparisonReport:
    """Per-method statistics plus pairwise Welch tests with significance flags."""

    methods: dict[str, dict]
    tests: list[dict]

    def to_dict(self) -> dict:
        return {"methods": self.methods, "tests": self.tests}

    def find_test(self, metric: str, method_a: str, method_b: str) -> Optional[dict]:
        for t in self.tests:
            if t["metric"] == metric and {t["method_a"], t["method_b"]} == {method_a, method_b}:
                return t
        return None


def compare(summaries_by_method: dict[str, Sequence[RunSummary]]) -> ComparisonReport:
    methods = {}
    for name, summaries in summaries_by_method.items():
        stats = aggregate(summaries)
        methods[name] = {
            metric: {"mean": mean, "sd": sd, "n": len(summaries)}
            for metric, (mean, sd) in stats.items()
        }
    tests = []
    names = list(summaries_by_method)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            for metric in METRICS:
                va = [s.metric(metric) for s in summaries_by_method[a]]
                vb = [s.metric(metric) for s in summaries_by_method[b]]
                try:
                    t, p = welch_t_test(va, vb)
                except ValueError:
                    continue  # not enough runs for a test
                tests.append(
                    {
                        "metric": metric,
                        "method_a": a,
                        "method_b": b,
                        "t": t,
                        "p": p,
                        "significant_05": p < 0.05,
                        "significant_01": p < 0.01,
                    }
                )
    return ComparisonReport(methods=methods, tests=tests)


# --- experiment configuration ----------------------------------------------


def default_agent_config(env_kind: str) -> AgentConfig:
    if env_kind == "lotsizing":
        return AgentConfig(window=400, epochs=40)
    return AgentConfig()


def default_total_steps(env_kind: str) -> int:
    return 1_000_000 if env_kind == "lotsizing" else 200_000


def default_env_params(env_kind: str) -> dict:
    if env_kind == "frozenlake":
        return {"n": 10, "m": 10, "hole_prob": 0.8, "p_slip": 0.5, "episode_cap": 200}
    if env_kind == "lotsizing":
        return {"items": 20, "machines": 10, "i_max": 100, "horizon": 400}
    if env_kind == "bandit":
        return {}
    raise ValueError(f"unknown environment {env_kind!r}")


@dataclass
class ExperimentConfig:
    agent: str = "pdppo"
    env: str = "frozenlake"
    env_params: dict = field(default_factory=lambda: default_env_params("frozenlake"))
    agent_config: AgentConfig = field(default_factory=AgentConfig)
    total_steps: int = 200_000
    n_runs: int = 1
    base_seed: int = 0
    output_dir: str = "out"
    parallel_runs: int = 1

    def __post_init__(self):
        from .agents import AGENT_KINDS

        if self.agent not in AGENT_KINDS:
            raise ValueError(f"unknown agent {self.agent!r}; choose from {AGENT_KINDS}")
        if self.env not in ENV_KINDS:
            raise ValueError(f"unknown environment {self.env!r}")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.parallel_runs < 1:
            raise ValueError("parallel_runs must be >= 1")
        if self.total_steps < self.agent_config.window:
            raise ValueError("total_steps must cover at least one update window")

    def run_seed(self, run_index: int) -> int:
        return self.base_seed + run_index

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d.pop("methods", None)  # bench-only key
        env = d.get("env", "frozenlake")
        base = cls(
            env=env,
            env_params=default_env_params(env),
            agent_config=default_agent_config(env),
            total_steps=default_total_steps(env),
        )
        agent_cfg_dict = asdict(base.agent_config)
        agent_cfg_dict.update(d.pop("agent_config", {}))
        env_params = dict(base.env_params)
        env_params.update(d.pop("env_params", {}))
        merged = asdict(base)
        merged.update(d)
        merged["agent_config"] = AgentConfig(**agent_cfg_dict)
        merged["env_params"] = env_params
        return cls(**merged)


def build_env(env_kind: str, env_params: dict, run_seed: int) -> TwoPhaseEnv:
    """Construct an environment instance for one run.

    Lot-sizing instances draw their static data from the spec's own seed
    when given, otherwise from a stream derived from the run seed (a fresh
    instance per run, mirroring the per-run grid regeneration of the lake).
    """
    params = dict(env_params)
    if env_kind == "frozenlake":
        return FrozenLakeEnv(**params)
    if env_kind == "lotsizing":
        for key in ("setup_cost_range", "holding_cost_range", "lost_sale_range",
                    "production_range", "demand_mean_range"):
            if key in params:
                params[key] = tuple(params[key])
        spec = InstanceSpec(**params)
        instance_seed = spec.seed if spec.seed is not None else run_seed
        rng = np.random.default_rng(np.random.SeedSequence([int(instance_seed), 104729]))
        return LotSizingEnv(make_instance(spec, rng))
    if env_kind == "bandit":
        return TwoArmBanditEnv()
    raise ValueError(f"unknown environment {env_kind!r}")


# --- persistence -------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def run_csv_rows(records: Sequence[WindowRecord]) -> list[str]:
    rows = [RUN_CSV_HEADER]
    for r in records:
        rows.append(
            ",".join(
                [
                    str(r.step),
                    _fmt(r.window_reward),
                    _fmt(r.cumulative_reward),
                    _fmt(r.actor_loss),
                    _fmt(r.critic_loss),
                    _fmt(r.post_critic_loss),
                    _fmt(r.entropy),
                ]
            )
        )
    return rows


def write_run_csv(path: str, records: Sequence[WindowRecord]) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(run_csv_rows(records)) + "\n")


def write_aggregate_csv(path: str, curves: Sequence[Sequence[tuple[int, float]]]) -> None:
    """Mean curve with the 95% normal-approximation band (1.96 * SD / sqrt(n))."""
    if not curves:
        raise ValueError("need at least one curve")
    steps = [s for s, _ in curves[0]]
    rewards = np.array([[r for _, r in curve] for curve in curves], dtype=np.float64)
    n = rewards.shape[0]
    mean = rewards.mean(axis=0)
    sd = rewards.std(axis=0, ddof=1) if n > 1 else np.zeros_like(mean)
    half = 1.96 * sd / math.sqrt(n)
    lines = [AGGREGATE_CSV_HEADER]
    for k, step in enumerate(steps):
        lines.append(
            ",".join([str(step), _fmt(mean[k]), _fmt(mean[k] - half[k]), _fmt(mean[k] + half[k]), str(n)])
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def save_checkpoint(path: str, agent: Agent, extra_meta: Optional[dict] = None) -> None:
    """Parameter dump as npz: a JSON meta entry (version, shapes, config)
    plus one array per weight/bias, named ``<net>_w<k>`` / ``<net>_b<k>``."""
    meta = {
        "version": 1,
        "kind": agent.kind,
        "obs_dim": agent.obs_dim,
        "arities": list(agent.action_spec.arities),
        "agent_config": asdict(agent.cfg),
        "layer_sizes": {},
    }
    if extra_meta:
        meta.update(extra_meta)
    arrays = {}
    for name, net in (("actor", agent.actor), ("critic_pre", agent.critic_pre), ("critic_post", agent.critic_post)):
        if net is None:
            continue
        meta["layer_sizes"][name] = list(net.layer_sizes)
        for k, (w, b) in enumerate(zip(net.weights, net.biases)):
            arrays[f"{name}_w{k}"] = w
            arrays[f"{name}_b{k}"] = b
    arrays["__meta__"] = np.array(json.dumps(meta, sort_keys=True))
    np.savez(path, **arrays)


def load_checkpoint(path: str) -> tuple[Agent, dict]:
    """Rebuild an agent from a checkpoint; returns (agent, meta)."""
    data = np.load(path, allow_pickle=False)
    meta = json.loads(data["__meta__"].item())
    if meta.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
    cfg = AgentConfig(**meta["agent_config"])
    spec = ActionSpec(tuple(int(a) for a in meta["arities"]))
    agent = Agent(meta["kind"], int(meta["obs_dim"]), spec, cfg, np.random.default_rng(0))
    for name, net in (("actor", agent.actor), ("critic_pre", agent.critic_pre), ("critic_post", agent.critic_post)):
        if net is None:
            continue
        for k in range(len(net.weights)):
            net.weights[k][...] = data[f"{name}_w{k}"]
            net.biases[k][...] = data[f"{name}_b{k}"]
    return agent, meta


# --- running experiments -----------------------------------------------------


@dataclass
class RunResult:
    summary: RunSummary
    records: list[WindowRecord]


def _run_paths(cfg: ExperimentConfig, agent: str, seed: int) -> dict[str, str]:
    runs_dir = os.path.join(cfg.output_dir, "runs")
    stem = f"{agent}_seed{seed}"
    return {
        "dir": runs_dir,
        "csv": os.path.join(runs_dir, f"{stem}.csv"),
        "summary": os.path.join(runs_dir, f"{stem}_summary.json"),
        "checkpoint": os.path.join(runs_dir, f"{stem}.ckpt.npz"),
    }


def _execute_run(cfg: ExperimentConfig, run_index: int) -> RunResult:
    seed = cfg.run_seed(run_index)
    env = build_env(cfg.env, cfg.env_params, seed)
    t0 = time.perf_counter()
    log, agent = train_with_agent(cfg.agent, env, cfg.agent_config, cfg.total_steps, seed)
    wall = time.perf_counter() - t0
    summary = RunSummary.from_log(log, wall)

    paths = _run_paths(cfg, cfg.agent, seed)
    os.makedirs(paths["dir"], exist_ok=True)
    write_run_csv(paths["csv"], log.records)
    with open(paths["summary"], "w") as fh:
        json.dump(
            {
                "agent": cfg.agent,
                "seed": seed,
                "max_window_reward": summary.max_window_reward,
                "total_cumulative_reward": summary.total_cumulative_reward,
                "wall_time": wall,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
    save_checkpoint(
        paths["checkpoint"], agent, extra_meta={"env": cfg.env, "env_params": cfg.env_params, "seed": seed}
    )
    return RunResult(summary=summary, records=log.records)


def run_experiment_detailed(cfg: ExperimentConfig) -> list[RunResult]:
    os.makedirs(cfg.output_dir, exist_ok=True)
    results: list[RunResult] = []
    if cfg.parallel_runs > 1 and cfg.n_runs > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.parallel_runs, cfg.n_runs)) as pool:
            futures = [pool.submit(_execute_run, cfg, i) for i in range(cfg.n_runs)]
            for i, fut in enumerate(futures):
                try:
                    results.append(fut.result())
                except Exception as exc:
                    raise RuntimeError(f"run {i} (seed {cfg.run_seed(i)}) failed") from exc
    else:
        for i in range(cfg.n_runs):
            try:
                results.append(_execute_run(cfg, i))
            except Exception as exc:
                raise RuntimeError(f"run {i} (seed {cfg.run_seed(i)}) failed") from exc
    return results


def run_experiment(cfg: ExperimentConfig) -> list[RunSummary]:
    """n_runs independent seeded trainings; per-run artifacts persisted."""
    return [r.summary for r in run_experiment_detailed(cfg)]


def emit_outputs(
    results_by_method: dict[str, Sequence[RunResult]],
    report: Optional[ComparisonReport],
    output_dir: str,
    config: Optional[ExperimentConfig] = None,
) -> None:
    """Write per-run CSVs, per-method aggregate curves, the comparison
    report and a config snapshot under ``output_dir``."""
    os.makedirs(os.path.join(output_dir, "runs"), exist_ok=True)
    for method, results in results_by_method.items():
        for res in results:
            stem = f"{method}_seed{res.summary.seed}"
            write_run_csv(os.path.join(output_dir, "runs", f"{stem}.csv"), res.records)
        curves = [res.summary.reward_curve for res in results]
        write_aggregate_csv(os.path.join(output_dir, f"aggregate_{method}.csv"), curves)
    if report is not None:
        with open(os.path.join(output_dir, "report.json"), "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
    if config is not None:
        with open(os.path.join(output_dir, "config.json"), "w") as fh:
            json.dump(config.to_dict(), fh, indent=2, sort_keys=True)


def run_benchmark(cfg: ExperimentConfig, methods: Sequence[str]) -> ComparisonReport:
    """Run every method with the shared config and seeds, then compare."""
    results_by_method = {}
    for method in methods:
        method_cfg = replace(cfg, agent=method)
        results_by_method[method] = run_experiment_detailed(method_cfg)
    report = compare({m: [r.summary for r in rs] for m, rs in results_by_method.items()})
    emit_outputs(results_by_method, report, cfg.output_dir, cfg)
    return report

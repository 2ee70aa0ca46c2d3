"""A miniature multi-seed benchmark with Welch-test comparison.

Runs pdppo and ppo for a few seeds on a small Frozen Lake, then prints the
aggregate statistics and the significance tests, and shows where the CSV
artifacts land. Scaled way down so it finishes in about a minute; see
configs/ for the desk-scale and full-scale experiment files.
"""

import json
import tempfile

from pdppo.agents import AgentConfig
from pdppo.harness import ExperimentConfig, run_benchmark

out = tempfile.mkdtemp(prefix="pdppo_demo_")
cfg = ExperimentConfig(
    env="frozenlake",
    env_params={"n": 5, "m": 5, "hole_prob": 0.2, "p_slip": 0.5, "episode_cap": 100},
    agent_config=AgentConfig(window=250, epochs=10, hidden_sizes=(32, 32)),
    total_steps=5_000,
    n_runs=3,
    base_seed=0,
    output_dir=out,
)

report = run_benchmark(cfg, methods=["pdppo", "ppo"])

print("per-method statistics:")
print(json.dumps(report.methods, indent=2, sort_keys=True))
print("\npairwise Welch tests:")
for t in report.tests:
    stars = "**" if t["significant_01"] else ("*" if t["significant_05"] else "")
    print(f"  {t['method_a']} vs {t['method_b']} [{t['metric']}]: t={t['t']:+.3f} p={t['p']:.4f} {stars}")
print(f"\nartifacts (per-run CSVs, aggregate curves, report.json): {out}")

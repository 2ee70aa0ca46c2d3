"""Post-decision proximal policy optimization with dual critics.

The package bundles a small float64 MLP engine with exact backprop
(``pdppo.nn``), a two-phase environment contract with a modified slippery
Frozen Lake and a stochastic lot-sizing simulator (``pdppo.envs``), the
three agents ppo / pdppo / pdppo1c (``pdppo.agents``), and a multi-seed
experiment harness with Welch-test comparisons (``pdppo.harness``).
"""

from .agents import (
    AGENT_KINDS,
    Agent,
    AgentConfig,
    RolloutBuffer,
    RunLog,
    Transition,
    UpdateStats,
    compute_advantages,
    discounted_returns,
    importance_ratio,
    sample_action,
    train,
)
from .envs import (
    ActionSpec,
    FrozenLakeEnv,
    InstanceSpec,
    InvalidActionError,
    LotSizingEnv,
    PhaseOrderError,
    StepOutcome,
    TwoArmBanditEnv,
    TwoPhaseEnv,
    make_instance,
)
from .harness import (
    ComparisonReport,
    ExperimentConfig,
    RunSummary,
    aggregate,
    build_env,
    compare,
    emit_outputs,
    load_checkpoint,
    run_benchmark,
    run_experiment,
    save_checkpoint,
    welch_t_test,
)
from .nn import Adam, GradientTape, MlpNet, Sgd, clip_global_norm

__version__ = "0.1.0"

__all__ = [
    "AGENT_KINDS",
    "Agent",
    "AgentConfig",
    "RolloutBuffer",
    "RunLog",
    "Transition",
    "UpdateStats",
    "compute_advantages",
    "discounted_returns",
    "importance_ratio",
    "sample_action",
    "train",
    "ActionSpec",
    "FrozenLakeEnv",
    "InstanceSpec",
    "InvalidActionError",
    "LotSizingEnv",
    "PhaseOrderError",
    "StepOutcome",
    "TwoArmBanditEnv",
    "TwoPhaseEnv",
    "make_instance",
    "ComparisonReport",
    "ExperimentConfig",
    "RunSummary",
    "aggregate",
    "build_env",
    "compare",
    "emit_outputs",
    "load_checkpoint",
    "run_benchmark",
    "run_experiment",
    "save_checkpoint",
    "welch_t_test",
    "Adam",
    "GradientTape",
    "MlpNet",
    "Sgd",
    "clip_global_norm",
    "__version__",
]

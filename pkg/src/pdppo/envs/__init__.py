from .base import ActionSpec, InvalidActionError, PhaseOrderError, StepOutcome, TwoPhaseEnv
from .bandit import TwoArmBanditEnv
from .frozen_lake import FrozenLakeEnv, Grid, generate_grid
from .lot_sizing import InstanceSpec, LotSizingEnv, LotSizingParams, LotSizingState, make_instance

__all__ = [
    "ActionSpec",
    "InvalidActionError",
    "PhaseOrderError",
    "StepOutcome",
    "TwoPhaseEnv",
    "TwoArmBanditEnv",
    "FrozenLakeEnv",
    "Grid",
    "generate_grid",
    "InstanceSpec",
    "LotSizingEnv",
    "LotSizingParams",
    "LotSizingState",
    "make_instance",
]

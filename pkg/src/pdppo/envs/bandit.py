"""Two-arm bandit as a degenerate two-phase environment.

Arm 0 pays +1, arm 1 pays 0, deterministically, and the episode ends after
one step. The post-decision observation encodes the chosen arm, so both
critics see informative inputs. Used for end-to-end learning sanity checks.
"""

from __future__ import annotations

import numpy as np

from .base import ActionSpec, InvalidActionError, TwoPhaseEnv


class TwoArmBanditEnv(TwoPhaseEnv):
    REWARDS = (1.0, 0.0)

    def __init__(self):
        super().__init__()
        self.observation_dim = 3
        self.action_spec = ActionSpec.discrete(2)

    def _reset(self, reseeded: bool) -> np.ndarray:
        return np.array([1.0, 0.0, 0.0])

    def _deterministic(self, action):
        arm = int(action)
        if arm not in (0, 1):
            raise InvalidActionError(f"arm {arm} not in 0..1")
        post = np.zeros(3)
        post[1 + arm] = 1.0
        return post, self.REWARDS[arm], False

    def _stochastic(self):
        return np.array([1.0, 0.0, 0.0]), 0.0, True

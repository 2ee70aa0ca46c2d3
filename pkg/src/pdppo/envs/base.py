"""Two-phase environment contract.

Each step splits into a deterministic phase, driven only by the current
state and the action (yielding the post-decision observation and the
deterministic reward), and a stochastic phase realizing the exogenous noise
(yielding the next observation, the remaining reward and the done flag).
The base class enforces the phase alternation; concrete environments
implement the ``_reset`` / ``_deterministic`` / ``_stochastic`` hooks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class PhaseOrderError(RuntimeError):
    """Raised when the deterministic/stochastic phases are called out of order."""


class InvalidActionError(ValueError):
    """Raised when an action is outside the environment's action spec."""


@dataclass(frozen=True)
class ActionSpec:
    """Factorized categorical action space: one arity per component."""

    arities: tuple[int, ...]

    def __post_init__(self):
        if len(self.arities) < 1 or any(n < 1 for n in self.arities):
            raise ValueError("every action component needs arity >= 1")

    @classmethod
    def discrete(cls, n: int) -> "ActionSpec":
        return cls((int(n),))

    @classmethod
    def multi_discrete(cls, ns) -> "ActionSpec":
        return cls(tuple(int(n) for n in ns))

    @property
    def n_components(self) -> int:
        return len(self.arities)

    @property
    def total_choices(self) -> int:
        """Sum of arities; the actor's output width."""
        return sum(self.arities)


@dataclass
class StepOutcome:
    """One full environment step seen through both phases."""

    post_obs: np.ndarray
    det_reward: float
    next_obs: np.ndarray
    total_reward: float
    done: bool
    info: dict = field(default_factory=dict)


class TwoPhaseEnv:
    """Base class owning the phase state machine and the RNG.

    Subclasses set ``observation_dim`` and ``action_spec`` and implement:

    - ``_reset() -> obs`` (RNG already reseeded when a seed was given),
    - ``_deterministic(action) -> (post_obs, det_reward, det_done)``,
    - ``_stochastic() -> (next_obs, stoch_reward, done)``.

    If the deterministic phase already ends the episode (``det_done``), the
    stochastic phase is skipped: the pending call reports done without
    consuming randomness.
    """

    observation_dim: int
    action_spec: ActionSpec

    def __init__(self):
        self.rng = np.random.default_rng()
        self._phase = "idle"
        self._episode_done = False
        self._det_done = False
        self._post_obs: Optional[np.ndarray] = None
        self._step_info: dict = {}

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        """Start a new episode; with a seed, reseed the internal RNG first."""
        if seed is not None:
            self.rng = np.random.default_rng(int(seed))
        obs = self._reset(reseeded=seed is not None)
        self._phase = "pre_decision"
        self._episode_done = False
        self._det_done = False
        self._post_obs = None
        return obs

    def step_deterministic(self, action) -> tuple[np.ndarray, float]:
        if self._phase == "idle":
            raise PhaseOrderError("reset the environment before stepping")
        if self._phase != "pre_decision":
            raise PhaseOrderError("deterministic phase called twice without a stochastic phase")
        if self._episode_done:
            raise PhaseOrderError("episode is over; reset before stepping")
        self._step_info = {}
        post_obs, det_reward, det_done = self._deterministic(action)
        self._phase = "post_decision"
        self._det_done = det_done
        self._post_obs = post_obs
        return post_obs, float(det_reward)

    def step_stochastic(self) -> tuple[np.ndarray, float, bool]:
        if self._phase != "post_decision":
            raise PhaseOrderError("no deterministic phase is pending")
        if self._det_done:
            next_obs, stoch_reward, done = self._post_obs.copy(), 0.0, True
        else:
            next_obs, stoch_reward, done = self._stochastic()
        self._phase = "pre_decision"
        self._episode_done = bool(done)
        return next_obs, float(stoch_reward), bool(done)

    def step(self, action) -> StepOutcome:
        """Convenience wrapper running both phases."""
        post_obs, det_reward = self.step_deterministic(action)
        next_obs, stoch_reward, done = self.step_stochastic()
        return StepOutcome(
            post_obs=post_obs,
            det_reward=det_reward,
            next_obs=next_obs,
            total_reward=det_reward + stoch_reward,
            done=done,
            info=dict(self._step_info),
        )

    # hooks ---------------------------------------------------------------

    def _reset(self, reseeded: bool) -> np.ndarray:
        raise NotImplementedError

    def _deterministic(self, action) -> tuple[np.ndarray, float, bool]:
        raise NotImplementedError

    def _stochastic(self) -> tuple[np.ndarray, float, bool]:
        raise NotImplementedError

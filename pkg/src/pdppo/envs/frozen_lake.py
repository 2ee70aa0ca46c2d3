"""Modified slippery Frozen Lake split into deterministic and stochastic phases.

The agent walks an n x m grid with randomly placed holes. The deterministic
phase moves one cell in the chosen direction (clamped at the borders); the
stochastic phase may slip the agent onto a uniformly random existing
4-neighbor. Reaching the goal pays +1, falling into a hole pays -1/(n*m),
and either ends the episode. Rewards are charged in whichever phase the
agent lands on the terminal cell; a deterministic terminal skips the slip.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .base import ActionSpec, InvalidActionError, TwoPhaseEnv

FROZEN, HOLE, START, GOAL = 0, 1, 2, 3

#: action index -> (row delta, col delta)
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right
ACTION_NAMES = ("up", "down", "left", "right")


@dataclass
class Grid:
    n: int
    m: int
    cells: np.ndarray  # (n, m) int array of cell codes
    hole_prob: float

    @property
    def start(self) -> tuple[int, int]:
        return (0, 0)

    @property
    def goal(self) -> tuple[int, int]:
        return (self.n - 1, self.m - 1)

    def is_hole(self, pos: tuple[int, int]) -> bool:
        return self.cells[pos] == HOLE

    def render(self) -> str:
        chars = {FROZEN: ".", HOLE: "O", START: "S", GOAL: "G"}
        return "\n".join("".join(chars[c] for c in row) for row in self.cells)


def generate_grid(n: int, m: int, hole_prob: float, rng: np.random.Generator) -> Grid:
    """Random grid: start at (0,0), goal at (n-1,m-1), holes i.i.d. elsewhere."""
    if n < 2 or m < 2:
        raise ValueError("grid needs n, m >= 2")
    if not 0.0 <= hole_prob <= 1.0:
        raise ValueError("hole_prob must lie in [0, 1]")
    cells = np.where(rng.random((n, m)) < hole_prob, HOLE, FROZEN)
    cells[0, 0] = START
    cells[n - 1, m - 1] = GOAL
    return Grid(n=n, m=m, cells=cells, hole_prob=hole_prob)


def clamped_move(pos: tuple[int, int], action: int, n: int, m: int) -> tuple[int, int]:
    """One-cell move in the action direction, clamped to stay on the grid."""
    if not 0 <= action < 4:
        raise InvalidActionError(f"action {action} not in 0..3")
    dr, dc = MOVES[action]
    r = min(max(pos[0] + dr, 0), n - 1)
    c = min(max(pos[1] + dc, 0), m - 1)
    return (r, c)


def existing_neighbors(pos: tuple[int, int], n: int, m: int) -> list[tuple[int, int]]:
    """The 4-neighbors of ``pos`` that lie on the grid, in MOVES order."""
    out = []
    for dr, dc in MOVES:
        r, c = pos[0] + dr, pos[1] + dc
        if 0 <= r < n and 0 <= c < m:
            out.append((r, c))
    return out


def encode_observation(pos: tuple[int, int], grid: Grid) -> np.ndarray:
    """One-hot position block followed by the flattened hole mask (length 2nm)."""
    nm = grid.n * grid.m
    obs = np.zeros(2 * nm)
    obs[pos[0] * grid.m + pos[1]] = 1.0
    obs[nm:] = (grid.cells == HOLE).ravel()
    return obs


class FrozenLakeEnv(TwoPhaseEnv):
    """Two-phase Frozen Lake.

    The grid is generated once per seeded reset (one grid per training run);
    unseeded resets start a new episode on the same grid. ``pre_stream``
    selects what the deterministic-phase reward stream carries and is
    consumed by agents, not by the environment itself.
    """

    def __init__(
        self,
        n: int = 10,
        m: int = 10,
        hole_prob: float = 0.8,
        p_slip: float = 0.5,
        episode_cap: int = 200,
    ):
        super().__init__()
        if not 0.0 <= p_slip <= 1.0:
            raise ValueError("p_slip must lie in [0, 1]")
        if episode_cap < 1:
            raise ValueError("episode_cap must be >= 1")
        self.n = int(n)
        self.m = int(m)
        self.hole_prob = float(hole_prob)
        self.p_slip = float(p_slip)
        self.episode_cap = int(episode_cap)
        self.grid: Optional[Grid] = None
        self.agent_pos = (0, 0)
        self._steps = 0
        self._hole_penalty = -1.0 / (self.n * self.m)
        self.observation_dim = 2 * self.n * self.m
        self.action_spec = ActionSpec.discrete(4)
        self._base_obs: Optional[np.ndarray] = None

    def _reset(self, reseeded: bool) -> np.ndarray:
        if reseeded or self.grid is None:
            self.grid = generate_grid(self.n, self.m, self.hole_prob, self.rng)
            base = np.zeros(self.observation_dim)
            base[self.n * self.m :] = (self.grid.cells == HOLE).ravel()
            self._base_obs = base
        self.agent_pos = self.grid.start
        self._steps = 0
        return self._encode(self.agent_pos)

    def _encode(self, pos: tuple[int, int]) -> np.ndarray:
        obs = self._base_obs.copy()
        obs[pos[0] * self.m + pos[1]] = 1.0
        return obs

    def _cell_outcome(self, pos: tuple[int, int]) -> tuple[float, bool]:
        cell = self.grid.cells[pos]
        if cell == GOAL:
            return 1.0, True
        if cell == HOLE:
            return self._hole_penalty, True
        return 0.0, False

    def _deterministic(self, action) -> tuple[np.ndarray, float, bool]:
        pos = clamped_move(self.agent_pos, int(action), self.n, self.m)
        self.agent_pos = pos
        reward, terminal = self._cell_outcome(pos)
        return self._encode(pos), reward, terminal

    def _stochastic(self) -> tuple[np.ndarray, float, bool]:
        pos = self.agent_pos
        if self.p_slip > 0.0 and self.rng.random() < self.p_slip:
            neighbors = existing_neighbors(pos, self.n, self.m)
            pos = neighbors[int(self.rng.integers(len(neighbors)))]
            self.agent_pos = pos
        reward, terminal = self._cell_outcome(pos)
        self._steps += 1
        done = terminal or self._steps >= self.episode_cap
        return self._encode(pos), reward, done

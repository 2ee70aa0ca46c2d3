"""Stochastic discrete lot-sizing simulator with a two-phase step.

Parallel machines produce items over discrete periods. The deterministic
phase applies the chosen machine assignments: configuration changes incur a
fixed setup cost and lose part of the period's production, and inventories
grow up to the cap. The stochastic phase realizes integer demand, charges
holding cost on leftover inventory and a lost-sales penalty on the unmet
part (no backorders). All costs come back negated, as rewards.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .base import ActionSpec, InvalidActionError, TwoPhaseEnv

IDLE = -1


@dataclass(frozen=True)
class LotSizingParams:
    """Static problem data for one lot-sizing instance.

    ``production[i, j]`` is what machine j yields of item i in a full period;
    ``setup_loss[i, j]`` is the production lost in a period that starts with
    a configuration change to item i. ``compat[j]`` lists the items machine j
    can produce.
    """

    setup_cost: np.ndarray  # (L,)
    holding_cost: np.ndarray  # (L,)
    lost_sale_cost: np.ndarray  # (L,)
    production: np.ndarray  # (L, Z)
    setup_loss: np.ndarray  # (L, Z)
    compat: tuple[tuple[int, ...], ...]  # per machine
    i_max: float
    demand_mean: np.ndarray  # (L,)
    horizon: int

    def __post_init__(self):
        L, Z = self.production.shape
        if len(self.compat) != Z:
            raise ValueError("compat must list one item set per machine")
        if any(len(items) == 0 for items in self.compat):
            raise ValueError("every machine must be able to produce at least one item")
        covered = set()
        for items in self.compat:
            if any(not 0 <= i < L for i in items):
                raise ValueError("compat references an unknown item")
            covered.update(items)
        if covered != set(range(L)):
            raise ValueError("every item must be producible by at least one machine")
        for arr in (self.setup_cost, self.holding_cost, self.lost_sale_cost):
            if arr.shape != (L,) or np.any(arr < 0):
                raise ValueError("cost vectors must be nonnegative with one entry per item")
        if np.any(self.setup_loss < 0) or np.any(self.setup_loss > self.production):
            raise ValueError("setup losses must satisfy 0 <= loss <= production")
        if self.i_max <= 0:
            raise ValueError("inventory cap must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def n_items(self) -> int:
        return self.production.shape[0]

    @property
    def n_machines(self) -> int:
        return self.production.shape[1]

    @property
    def demand_cap(self) -> np.ndarray:
        return np.floor(4.0 * self.demand_mean)


@dataclass
class LotSizingState:
    inventory: np.ndarray  # (L,) in [0, i_max]
    machine_config: np.ndarray  # (Z,) item index or IDLE
    t: int


@dataclass(frozen=True)
class InstanceSpec:
    """Randomized-instance recipe: sizes plus sampling ranges."""

    items: int
    machines: int
    i_max: float = 100.0
    horizon: int = 400
    setup_cost_range: tuple[float, float] = (5.0, 20.0)
    holding_cost_range: tuple[float, float] = (1.0, 5.0)
    lost_sale_range: tuple[float, float] = (10.0, 40.0)
    production_range: tuple[int, int] = (10, 30)
    demand_mean_range: tuple[float, float] = (5.0, 15.0)
    extra_compat_prob: float = 0.25
    seed: Optional[int] = None


def make_instance(spec: InstanceSpec, rng: np.random.Generator) -> LotSizingParams:
    """Draw a reproducible random instance from the spec's ranges.

    Every item is dealt to one machine round-robin (so compat covers all
    items and no machine is idle-only); extra machine-item pairs join with
    ``extra_compat_prob``. Setup losses stay below half the production rate.
    """
    L, Z = spec.items, spec.machines
    if L < 1 or Z < 1:
        raise ValueError("need at least one item and one machine")
    f = rng.uniform(*spec.setup_cost_range, size=L)
    h = rng.uniform(*spec.holding_cost_range, size=L)
    l = rng.uniform(*spec.lost_sale_range, size=L)
    p = rng.integers(spec.production_range[0], spec.production_range[1] + 1, size=(L, Z)).astype(float)
    c = np.floor(rng.random((L, Z)) * (p / 2.0 + 1.0))
    c = np.minimum(c, np.floor(p / 2.0))

    compat_sets: list[set[int]] = [set() for _ in range(Z)]
    for k, item in enumerate(rng.permutation(L)):
        compat_sets[k % Z].add(int(item))
    extra = rng.random((L, Z)) < spec.extra_compat_prob
    for j in range(Z):
        for i in range(L):
            if extra[i, j]:
                compat_sets[j].add(i)
    compat = tuple(tuple(sorted(s)) for s in compat_sets)

    demand_mean = rng.uniform(*spec.demand_mean_range, size=L)
    return LotSizingParams(
        setup_cost=f,
        holding_cost=h,
        lost_sale_cost=l,
        production=p,
        setup_loss=c,
        compat=compat,
        i_max=float(spec.i_max),
        demand_mean=demand_mean,
        horizon=int(spec.horizon),
    )


def initial_state(params: LotSizingParams) -> LotSizingState:
    """Half-full inventories, all machines idle, period zero."""
    L, Z = params.n_items, params.n_machines
    return LotSizingState(
        inventory=np.full(L, params.i_max / 2.0),
        machine_config=np.full(Z, IDLE, dtype=np.int64),
        t=0,
    )


def setup_flags(machine_config: np.ndarray, assignment: np.ndarray, params: LotSizingParams) -> np.ndarray:
    """delta[i, j] = 1 when machine j changes configuration to item i.

    Switching to idle never counts as a setup.
    """
    L, Z = params.n_items, params.n_machines
    delta = np.zeros((L, Z))
    for j in range(Z):
        a = int(assignment[j])
        if a != IDLE and a != int(machine_config[j]):
            delta[a, j] = 1.0
    return delta


def apply_production(
    state: LotSizingState, assignment: Sequence[int], params: LotSizingParams
) -> tuple[LotSizingState, float]:
    """Deterministic phase: setups, production, inventory cap.

    ``assignment[j]`` is the item machine j produces this period, or IDLE.
    Returns the post-decision state and the (negated) setup cost.
    """
    assignment = np.asarray(assignment, dtype=np.int64)
    L, Z = params.n_items, params.n_machines
    if assignment.shape != (Z,):
        raise InvalidActionError(f"assignment must have one entry per machine ({Z})")
    for j in range(Z):
        a = int(assignment[j])
        if a == IDLE:
            continue
        if a not in params.compat[j]:
            raise InvalidActionError(f"machine {j} cannot produce item {a}")

    delta = setup_flags(state.machine_config, assignment, params)
    produced = np.zeros(L)
    for j in range(Z):
        a = int(assignment[j])
        if a != IDLE:
            produced[a] += params.production[a, j] - params.setup_loss[a, j] * delta[a, j]
    post_inventory = np.minimum(params.i_max, state.inventory + produced)
    setup_total = float(np.sum(params.setup_cost[:, None] * delta))
    post = LotSizingState(inventory=post_inventory, machine_config=assignment.copy(), t=state.t)
    return post, -setup_total + 0.0  # avoid negative zero


def sample_demand(params: LotSizingParams, rng: np.random.Generator) -> np.ndarray:
    """Per-item Poisson demand truncated at four times the mean."""
    d = rng.poisson(params.demand_mean).astype(float)
    return np.minimum(d, params.demand_cap)


def settle_demand(
    post_state: LotSizingState, demand: np.ndarray, params: LotSizingParams
) -> tuple[LotSizingState, float, bool]:
    """Stochastic-phase bookkeeping for a given demand realization."""
    leftover = np.maximum(post_state.inventory - demand, 0.0)
    lost = np.maximum(demand - post_state.inventory, 0.0)
    cost = float(np.sum(params.holding_cost * leftover) + np.sum(params.lost_sale_cost * lost))
    nxt = LotSizingState(
        inventory=leftover, machine_config=post_state.machine_config.copy(), t=post_state.t + 1
    )
    return nxt, -cost + 0.0, nxt.t >= params.horizon


def realize_demand(
    post_state: LotSizingState, params: LotSizingParams, rng: np.random.Generator
) -> tuple[LotSizingState, float, bool]:
    """Sample demand and settle it (holding + lost-sales costs, horizon check)."""
    return settle_demand(post_state, sample_demand(params, rng), params)


def encode_observation(state: LotSizingState, params: LotSizingParams) -> np.ndarray:
    """Inventories scaled by the cap, then a one-hot configuration per machine.

    Each machine block has ``n_items + 1`` slots: idle first, then one per
    item. Total length: L + Z * (L + 1).
    """
    L, Z = params.n_items, params.n_machines
    obs = np.zeros(L + Z * (L + 1))
    obs[:L] = state.inventory / params.i_max
    base = L
    for j in range(Z):
        cfg = int(state.machine_config[j])
        obs[base + (0 if cfg == IDLE else cfg + 1)] = 1.0
        base += L + 1
    return obs


def observation_dim(params: LotSizingParams) -> int:
    return params.n_items + params.n_machines * (params.n_items + 1)


def action_space(params: LotSizingParams) -> ActionSpec:
    """One categorical per machine: idle plus each compatible item."""
    return ActionSpec.multi_discrete([len(items) + 1 for items in params.compat])


class LotSizingEnv(TwoPhaseEnv):
    """Two-phase wrapper around the pure lot-sizing transition functions.

    Actions arrive as per-machine categorical indices (0 = idle, k >= 1 =
    the k-th compatible item of that machine) and are mapped to item
    assignments internally.
    """

    def __init__(self, params: LotSizingParams):
        super().__init__()
        self.params = params
        self.state = initial_state(params)
        self.observation_dim = observation_dim(params)
        self.action_spec = action_space(params)
        # choice index -> item id lookup, idle at slot 0
        self._choice_items = tuple(
            np.array((IDLE,) + items, dtype=np.int64) for items in params.compat
        )

    def indices_to_assignment(self, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        if indices.shape != (self.params.n_machines,):
            raise InvalidActionError("need one choice index per machine")
        out = np.empty(self.params.n_machines, dtype=np.int64)
        for j, table in enumerate(self._choice_items):
            k = int(indices[j])
            if not 0 <= k < len(table):
                raise InvalidActionError(f"choice {k} out of range for machine {j}")
            out[j] = table[k]
        return out

    def _reset(self, reseeded: bool) -> np.ndarray:
        self.state = initial_state(self.params)
        return encode_observation(self.state, self.params)

    def _deterministic(self, action) -> tuple[np.ndarray, float, bool]:
        assignment = self.indices_to_assignment(action)
        self.state, det_reward = apply_production(self.state, assignment, self.params)
        return encode_observation(self.state, self.params), det_reward, False

    def _stochastic(self) -> tuple[np.ndarray, float, bool]:
        self.state, stoch_reward, done = realize_demand(self.state, self.params, self.rng)
        return encode_observation(self.state, self.params), stoch_reward, done

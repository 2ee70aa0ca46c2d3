"""Environment self-tests and independent reference computations.

The lot-sizing reference below recomputes the one-period cost and
transition from scratch with plain Python loops; it deliberately shares no
code with the vectorized environment so the two can cross-check each other.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .envs import FrozenLakeEnv, InstanceSpec, LotSizingEnv, make_instance
from .envs.base import PhaseOrderError, TwoPhaseEnv
from .envs.frozen_lake import HOLE, existing_neighbors
from .envs.lot_sizing import IDLE, LotSizingParams, LotSizingState, apply_production, settle_demand


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def reference_step_cost(
    inventory: np.ndarray,
    machine_config: np.ndarray,
    assignment: np.ndarray,
    demand: np.ndarray,
    params: LotSizingParams,
) -> tuple[float, np.ndarray]:
    """Straight-line recomputation of one period's cost and next inventory.

    Setup cost for every machine that changes configuration to an item,
    production net of setup losses, inventory capped, then holding on the
    leftover and the lost-sales penalty on the unmet part.
    """
    L, Z = params.n_items, params.n_machines
    total_cost = 0.0
    produced = [0.0] * L
    for j in range(Z):
        a = int(assignment[j])
        if a == IDLE:
            continue
        changed = a != int(machine_config[j])
        if changed:
            total_cost += float(params.setup_cost[a])
            produced[a] += float(params.production[a, j]) - float(params.setup_loss[a, j])
        else:
            produced[a] += float(params.production[a, j])
    next_inventory = np.zeros(L)
    for i in range(L):
        capped = min(float(params.i_max), float(inventory[i]) + produced[i])
        leftover = max(capped - float(demand[i]), 0.0)
        lost = max(float(demand[i]) - capped, 0.0)
        total_cost += float(params.holding_cost[i]) * leftover
        total_cost += float(params.lost_sale_cost[i]) * lost
        next_inventory[i] = leftover
    return total_cost, next_inventory


def random_assignment(params: LotSizingParams, rng: np.random.Generator) -> np.ndarray:
    out = np.empty(params.n_machines, dtype=np.int64)
    for j, items in enumerate(params.compat):
        choices = (IDLE,) + items
        out[j] = choices[int(rng.integers(len(choices)))]
    return out


def random_lot_state(params: LotSizingParams, rng: np.random.Generator) -> LotSizingState:
    inventory = rng.uniform(0.0, params.i_max, size=params.n_items)
    config = random_assignment(params, rng)
    return LotSizingState(inventory=inventory, machine_config=config, t=0)


# --- generic two-phase contract checks --------------------------------------


def _random_action(env: TwoPhaseEnv, rng: np.random.Generator):
    idx = np.array([int(rng.integers(n)) for n in env.action_spec.arities], dtype=np.int64)
    return int(idx[0]) if env.action_spec.n_components == 1 else idx


def check_phase_alternation(env: TwoPhaseEnv, seed: int = 0) -> CheckResult:
    """Out-of-order phase calls must raise."""
    try:
        env.reset(seed)
        try:
            env.step_stochastic()
            return CheckResult("phase_alternation", False, "stochastic before deterministic did not raise")
        except PhaseOrderError:
            pass
        rng = np.random.default_rng(seed)
        env.step_deterministic(_random_action(env, rng))
        try:
            env.step_deterministic(_random_action(env, rng))
            return CheckResult("phase_alternation", False, "double deterministic did not raise")
        except PhaseOrderError:
            pass
        env.step_stochastic()
        return CheckResult("phase_alternation", True)
    except Exception as exc:  # anything unexpected is a failure
        return CheckResult("phase_alternation", False, f"unexpected {exc!r}")


def check_determinism_split(env: TwoPhaseEnv, trials: int = 200, seed: int = 1) -> CheckResult:
    """The deterministic phase must neither consult nor perturb the RNG."""
    rng = np.random.default_rng(seed)
    obs = env.reset(seed)
    for k in range(trials):
        action = _random_action(env, rng)
        probe = copy.deepcopy(env)
        rng_state_before = repr(env.rng.bit_generator.state)
        post_a, det_a = env.step_deterministic(action)
        if repr(env.rng.bit_generator.state) != rng_state_before:
            return CheckResult("determinism_split", False, f"trial {k}: deterministic phase advanced the RNG")
        post_b, det_b = probe.step_deterministic(action)
        if det_a != det_b or not np.array_equal(post_a, post_b):
            return CheckResult("determinism_split", False, f"trial {k}: deterministic replay diverged")
        obs, _, done = env.step_stochastic()
        if done:
            obs = env.reset()
    return CheckResult("determinism_split", True)


def check_seed_reproducibility(env_factory: Callable[[], TwoPhaseEnv], steps: int = 300, seed: int = 2) -> CheckResult:
    """Identical seeds and action sequences give identical trajectories."""
    def rollout(env: TwoPhaseEnv):
        rng = np.random.default_rng(seed + 1)
        trace = []
        obs = env.reset(seed)
        trace.append(obs.copy())
        for _ in range(steps):
            action = _random_action(env, rng)
            post, det_r = env.step_deterministic(action)
            nxt, stoch_r, done = env.step_stochastic()
            trace.append((post.copy(), det_r, nxt.copy(), stoch_r, done))
            if done:
                obs = env.reset()
        return trace

    ta, tb = rollout(env_factory()), rollout(env_factory())
    if not np.array_equal(ta[0], tb[0]):
        return CheckResult("seed_reproducibility", False, "initial observations differ")
    for k, (a, b) in enumerate(zip(ta[1:], tb[1:])):
        same = (
            np.array_equal(a[0], b[0]) and a[1] == b[1] and np.array_equal(a[2], b[2])
            and a[3] == b[3] and a[4] == b[4]
        )
        if not same:
            return CheckResult("seed_reproducibility", False, f"step {k} diverged")
    return CheckResult("seed_reproducibility", True)


def check_reward_split(env: TwoPhaseEnv, steps: int = 300, seed: int = 3) -> CheckResult:
    """total_reward - det_reward must equal the stochastic-phase reward."""
    rng = np.random.default_rng(seed)
    obs = env.reset(seed)
    for _ in range(steps):
        action = _random_action(env, rng)
        _, det_r = env.step_deterministic(action)
        _, stoch_r, done = env.step_stochastic()
        total = det_r + stoch_r
        if not np.isfinite(total):
            return CheckResult("reward_split", False, "non-finite reward")
        if done:
            obs = env.reset()
    return CheckResult("reward_split", True)


# --- frozen-lake specific -----------------------------------------------------


def check_lake_rewards(trials: int = 2000, seed: int = 4) -> CheckResult:
    """Step rewards stay in {0, +1, -1/(n*m)} and terminals set done."""
    env = FrozenLakeEnv(n=6, m=6, hole_prob=0.3, p_slip=0.5, episode_cap=50)
    allowed = {0.0, 1.0, -1.0 / 36.0}
    rng = np.random.default_rng(seed)
    env.reset(seed)
    for k in range(trials):
        outcome = env.step(int(rng.integers(4)))
        if outcome.total_reward not in allowed:
            return CheckResult("lake_rewards", False, f"trial {k}: reward {outcome.total_reward}")
        if outcome.done:
            env.reset()
    return CheckResult("lake_rewards", True)


def check_lake_slip_distribution(trials: int = 20000, seed: int = 5, tol: float = 0.02) -> CheckResult:
    """Stay frequency ~ 1 - p_slip; each existing neighbor ~ p_slip / 4.

    Replays a fixed deterministic move into the grid center before every
    stochastic phase, so all variation comes from the slip draw.
    """
    env = FrozenLakeEnv(n=7, m=7, hole_prob=0.0, p_slip=0.5, episode_cap=10**9)
    env.reset(seed)
    center = (3, 3)
    counts: dict[tuple[int, int], int] = {}
    for _ in range(trials):
        env.agent_pos = (3, 2)
        env.step_deterministic(3)  # move right into the center
        env.step_stochastic()
        counts[env.agent_pos] = counts.get(env.agent_pos, 0) + 1
    stay = counts.get(center, 0) / trials
    if abs(stay - 0.5) > tol:
        return CheckResult("lake_slip_distribution", False, f"stay frequency {stay:.4f}")
    for nb in existing_neighbors(center, 7, 7):
        frac = counts.get(nb, 0) / trials
        if abs(frac - 0.125) > tol:
            return CheckResult("lake_slip_distribution", False, f"neighbor {nb} frequency {frac:.4f}")
    return CheckResult("lake_slip_distribution", True)


# --- lot-sizing specific -------------------------------------------------------


def check_lot_cost_oracle(trials: int = 1000, seed: int = 6, tol: float = 1e-9) -> CheckResult:
    """Step reward must equal the negated reference cost on random triples."""
    rng = np.random.default_rng(seed)
    spec = InstanceSpec(items=5, machines=2, i_max=20, horizon=50)
    params = make_instance(spec, rng)
    worst = 0.0
    for k in range(trials):
        state = random_lot_state(params, rng)
        assignment = random_assignment(params, rng)
        demand = np.minimum(rng.poisson(params.demand_mean).astype(float), params.demand_cap)
        post, det_reward = apply_production(state, assignment, params)
        nxt, stoch_reward, _ = settle_demand(post, demand, params)
        ref_cost, ref_inventory = reference_step_cost(
            state.inventory, state.machine_config, assignment, demand, params
        )
        diff = abs((det_reward + stoch_reward) - (-ref_cost))
        inv_diff = float(np.max(np.abs(nxt.inventory - ref_inventory)))
        worst = max(worst, diff, inv_diff)
        if diff > tol or inv_diff > tol:
            return CheckResult("lot_cost_oracle", False, f"trial {k}: |delta| = {max(diff, inv_diff):.3e}")
    return CheckResult("lot_cost_oracle", True, f"max |delta| = {worst:.3e}")


def check_lot_bounds(trials: int = 500, seed: int = 7) -> CheckResult:
    """Inventory stays inside [0, i_max] through both phases."""
    rng = np.random.default_rng(seed)
    params = make_instance(InstanceSpec(items=5, machines=2, i_max=20, horizon=40), rng)
    env = LotSizingEnv(params)
    env.reset(seed)
    for k in range(trials):
        idx = np.array([int(rng.integers(n)) for n in env.action_spec.arities])
        env.step_deterministic(idx)
        inv = env.state.inventory
        if np.any(inv < 0) or np.any(inv > params.i_max + 1e-12):
            return CheckResult("lot_bounds", False, f"trial {k}: post inventory out of range")
        _, _, done = env.step_stochastic()
        inv = env.state.inventory
        if np.any(inv < 0) or np.any(inv > params.i_max + 1e-12):
            return CheckResult("lot_bounds", False, f"trial {k}: next inventory out of range")
        if done:
            env.reset()
    return CheckResult("lot_bounds", True)


def check_lot_free_costs(trials: int = 200, seed: int = 8) -> CheckResult:
    """With zero holding and lost-sales costs every stochastic reward is 0."""
    rng = np.random.default_rng(seed)
    params = make_instance(InstanceSpec(items=4, machines=2, i_max=15, horizon=30,
                                        holding_cost_range=(0.0, 0.0), lost_sale_range=(0.0, 0.0)), rng)
    env = LotSizingEnv(params)
    env.reset(seed)
    for k in range(trials):
        idx = np.array([int(rng.integers(n)) for n in env.action_spec.arities])
        env.step_deterministic(idx)
        _, stoch_r, done = env.step_stochastic()
        if stoch_r != 0.0:
            return CheckResult("lot_free_costs", False, f"trial {k}: stochastic reward {stoch_r}")
        if done:
            env.reset()
    return CheckResult("lot_free_costs", True)


# --- suites -------------------------------------------------------------------


def env_check_suite(env_kind: str, trials: int = 1000, seed: int = 0) -> list[CheckResult]:
    if env_kind == "frozenlake":
        factory = lambda: FrozenLakeEnv(n=6, m=6, hole_prob=0.3, p_slip=0.5, episode_cap=100)
    elif env_kind == "lotsizing":
        def factory():
            rng = np.random.default_rng(seed + 1000)
            return LotSizingEnv(make_instance(InstanceSpec(items=5, machines=2, i_max=20, horizon=40), rng))
    else:
        raise ValueError(f"unknown environment {env_kind!r}")

    results = [
        check_phase_alternation(factory(), seed),
        check_determinism_split(factory(), trials=min(trials, 500), seed=seed + 1),
        check_seed_reproducibility(factory, steps=min(trials, 500), seed=seed + 2),
        check_reward_split(factory(), steps=min(trials, 500), seed=seed + 3),
    ]
    if env_kind == "frozenlake":
        results.append(check_lake_rewards(trials=trials, seed=seed + 4))
        results.append(check_lake_slip_distribution(trials=max(trials, 20000), seed=seed + 5))
    else:
        results.append(check_lot_cost_oracle(trials=trials, seed=seed + 4))
        results.append(check_lot_bounds(trials=min(trials, 500), seed=seed + 5))
        results.append(check_lot_free_costs(trials=min(trials, 200), seed=seed + 6))
    return results

"""Walking the two-phase Frozen Lake step by step.

Shows the split every step makes: a deterministic move to the post-decision
cell, then the slip draw. Run it a few times with different seeds to watch
the slip scatter the agent.
"""

import numpy as np

from pdppo.envs import FrozenLakeEnv
from pdppo.envs.frozen_lake import ACTION_NAMES

env = FrozenLakeEnv(n=6, m=6, hole_prob=0.25, p_slip=0.5, episode_cap=50)
obs = env.reset(seed=4)

print("grid (S start, G goal, O hole, . frozen):")
print(env.grid.render())
print()

rng = np.random.default_rng(1)
for step in range(10):
    action = int(rng.integers(4))
    pre_pos = env.agent_pos
    post_obs, det_reward = env.step_deterministic(action)
    post_pos = env.agent_pos
    next_obs, stoch_reward, done = env.step_stochastic()
    slipped = "slipped to" if env.agent_pos != post_pos else "stayed at"
    print(
        f"step {step}: at {pre_pos} move {ACTION_NAMES[action]:5s} -> post-decision {post_pos} "
        f"(r={det_reward:+.2f}), then {slipped} {env.agent_pos} (r={stoch_reward:+.2f})"
    )
    if done:
        print("episode over:", "goal!" if det_reward + stoch_reward > 0 else "fell in a hole or timed out")
        break

print(f"\nobservation layout: one-hot position ({env.n * env.m}) + hole mask ({env.n * env.m})")
print(f"observation length: {env.observation_dim}")

"""PPO and dual-critic pdppo on a two-arm bandit.

Arm 0 always pays +1, arm 1 pays 0. Both methods should concentrate the
policy on arm 0 within a few dozen updates; the printout tracks the
probability of the rewarding arm.
"""

import numpy as np

from pdppo.agents import AgentConfig, train_with_agent
from pdppo.envs import TwoArmBanditEnv

cfg = AgentConfig(
    window=16,
    epochs=4,
    minibatch_size=8,
    hidden_sizes=(16,),
    lr_actor=0.01,
    lr_critic=0.02,
    gamma=0.0,
)

start_obs = np.array([1.0, 0.0, 0.0])
for kind in ("ppo", "pdppo"):
    log, agent = train_with_agent(kind, TwoArmBanditEnv(), cfg, total_steps=16 * 80, seed=0)
    p = agent.action_probabilities(start_obs)[0]
    rewards = [r.window_reward for r in log.records]
    print(f"{kind:6s}: p(rewarding arm) = {p:.4f} after {len(rewards)} updates")
    print(f"        window rewards: start {rewards[0]:4.1f} -> mid {rewards[len(rewards)//2]:4.1f} "
          f"-> end {rewards[-1]:4.1f} (max possible 16)")

"""One lot-sizing period, cost term by cost term.

Builds a small random instance, applies a production decision, realizes a
demand, and prints how setup, holding and lost-sales charges combine into
the step's two reward components. Cross-checks the environment against the
straight-line reference cost.
"""

import numpy as np

from pdppo.checks import reference_step_cost
from pdppo.envs import InstanceSpec, make_instance
from pdppo.envs.lot_sizing import IDLE, apply_production, initial_state, sample_demand, settle_demand

rng = np.random.default_rng(3)
params = make_instance(InstanceSpec(items=5, machines=2, i_max=20, horizon=10), rng)

print(f"instance: {params.n_items} items, {params.n_machines} machines, cap {params.i_max}")
for j, items in enumerate(params.compat):
    print(f"  machine {j} can produce items {items}")
print(f"  setup costs   : {np.round(params.setup_cost, 2)}")
print(f"  holding costs : {np.round(params.holding_cost, 2)}")
print(f"  lost-sale cost: {np.round(params.lost_sale_cost, 2)}")
print(f"  demand means  : {np.round(params.demand_mean, 2)}")

state = initial_state(params)
print(f"\nstart: inventory {state.inventory}, machines idle")

# each machine produces its first compatible item
assignment = np.array([items[0] for items in params.compat])
post, det_reward = apply_production(state, assignment, params)
print(f"\nassign machines to items {assignment} (both are setups from idle)")
print(f"deterministic phase: post inventory {post.inventory}, reward {det_reward:+.2f} (setup cost)")

demand = sample_demand(params, rng)
nxt, stoch_reward, done = settle_demand(post, demand, params)
print(f"\ndemand realization: {demand}")
print(f"stochastic phase: next inventory {nxt.inventory}, reward {stoch_reward:+.2f} "
      f"(holding + lost sales)")

ref_cost, ref_inv = reference_step_cost(state.inventory, state.machine_config, assignment, demand, params)
print(f"\ntotal step reward          : {det_reward + stoch_reward:+.4f}")
print(f"negated reference cost     : {-ref_cost:+.4f}")
print(f"difference                 : {abs(det_reward + stoch_reward + ref_cost):.2e}")

# keeping the configuration by contrast costs no setup
again, det2 = apply_production(nxt, assignment, params)
print(f"\nsame assignment next period: deterministic reward {det2:+.2f} (no setup)")
idle_state, det3 = apply_production(nxt, np.full(params.n_machines, IDLE), params)
print(f"going idle               : deterministic reward {det3:+.2f}, inventory unchanged")

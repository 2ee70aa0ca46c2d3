"""A tour of the dense-network engine.

Builds a small tanh network, runs a forward pass, backpropagates an exact
gradient, cross-checks it against central finite differences, and shows
global-norm clipping plus one Adam step.
"""

import numpy as np

from pdppo.nn import Adam, GradientTape, MlpNet, clip_global_norm, finite_difference_grads

rng = np.random.default_rng(0)

net = MlpNet([4, 16, 3], activation="tanh", head="linear", rng=rng)
x = rng.normal(size=4)
out, cache = net.forward_cached(x)
print("input :", np.round(x, 3))
print("output:", np.round(out, 4))

# scalar loss: weighted sum of the outputs
w = np.array([1.0, -2.0, 0.5])
tape = GradientTape(net)
net.backward(w, cache, tape)

fd = finite_difference_grads(net, x, lambda y: float(w @ y))
worst = max(
    float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-4)))
    for a, b in zip(tape.buffers(), fd)
)
print(f"\nanalytic vs finite-difference gradients: max relative error = {worst:.2e}")

print(f"gradient global norm before clipping: {tape.global_norm():.4f}")
clip_global_norm(tape, 0.5)
print(f"gradient global norm after clip(0.5): {tape.global_norm():.4f}")

opt = Adam(net, lr=0.001)
before = net.weights[0][0, 0]
opt.step(tape)
print(f"\none Adam step moved weights[0][0,0] from {before:+.6f} to {net.weights[0][0, 0]:+.6f}")

# softmax heads stay on the probability simplex even for huge logits
actor = MlpNet([2, 5], head="softmax")
actor.weights[0][...] = rng.normal(size=(5, 2)) * 2000.0
p = actor.forward(rng.normal(size=2))
print(f"\nsoftmax with ~2000-scale logits: sum={p.sum():.12f}, min={p.min():.3e}")

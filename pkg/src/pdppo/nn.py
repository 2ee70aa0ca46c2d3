"""Minimal dense network engine: forward pass, exact backprop, optimizers.

Everything runs in float64 numpy. A network owns its parameters; gradients
accumulate in a ``GradientTape`` mirroring the parameter layout; ``Sgd`` and
``Adam`` apply a tape to the parameters of the single network they are bound
to. There is no general autodiff, just hand-written MLP backprop, which keeps
the whole numeric path checkable against finite differences.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

ACTIVATIONS = ("tanh", "relu")
HEADS = ("linear", "softmax")


class MlpNet:
    """Fully-connected network with tanh/relu hidden layers.

    Weight matrix k has shape ``(layer_sizes[k+1], layer_sizes[k])`` and bias
    k has length ``layer_sizes[k+1]``. The head is either ``linear`` (raw
    affine outputs) or ``softmax``. A softmax head may be split into
    independent segments via ``head_segments`` (a tuple of segment widths
    summing to the output size); each segment is normalized separately, so
    the network emits one categorical distribution per segment.

    With ``rng=None`` all parameters start at zero; otherwise weights draw
    from uniform(+-sqrt(6/(fan_in+fan_out))) and biases start at zero.
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        activation: str = "tanh",
        head: str = "linear",
        head_segments: Optional[Sequence[int]] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        layer_sizes = [int(s) for s in layer_sizes]
        if len(layer_sizes) < 2:
            raise ValueError("need at least an input and an output size")
        if any(s < 1 for s in layer_sizes):
            raise ValueError("layer sizes must be positive")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if head not in HEADS:
            raise ValueError(f"unknown head {head!r}")
        if head_segments is not None:
            head_segments = tuple(int(w) for w in head_segments)
            if head != "softmax":
                raise ValueError("head_segments only applies to softmax heads")
            if any(w < 1 for w in head_segments) or sum(head_segments) != layer_sizes[-1]:
                raise ValueError("head_segments must be positive and sum to the output size")
        elif head == "softmax":
            head_segments = (layer_sizes[-1],)

        self.layer_sizes = layer_sizes
        self.activation = activation
        self.head = head
        self.head_segments = head_segments
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            if rng is None:
                w = np.zeros((fan_out, fan_in))
            else:
                bound = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order (weights and biases interleaved)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def _check_input(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            if x.shape[0] != self.input_dim:
                raise ValueError(f"input length {x.shape[0]} != expected {self.input_dim}")
            return x[None, :], True
        if x.ndim == 2:
            if x.shape[1] != self.input_dim:
                raise ValueError(f"input width {x.shape[1]} != expected {self.input_dim}")
            return x, False
        raise ValueError("input must be a vector or a batch of vectors")

    def _activate(self, z: np.ndarray) -> np.ndarray:
        if self.activation == "tanh":
            return np.tanh(z)
        return np.maximum(z, 0.0)

    def _head_out(self, z: np.ndarray) -> np.ndarray:
        if self.head == "linear":
            return z
        out = np.empty_like(z)
        start = 0
        for width in self.head_segments:
            seg = z[:, start : start + width]
            # max-shifted softmax for stability at large logits
            shifted = seg - seg.max(axis=1, keepdims=True)
            e = np.exp(shifted)
            out[:, start : start + width] = e / e.sum(axis=1, keepdims=True)
            start += width
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Head output for a single input vector or a batch (rows)."""
        out, _ = self.forward_cached(x)
        return out

    def forward_cached(self, x: np.ndarray):
        """Forward pass returning (output, cache) for a later backward call."""
        x2, squeeze = self._check_input(x)
        acts = [x2]
        h = x2
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            h = z if k == last else self._activate(z)
            acts.append(h)
        out = self._head_out(h)
        cache = _ForwardCache(acts=acts, head_out=out)
        return (out[0] if squeeze else out), cache

    def backward(self, grad_out: np.ndarray, cache: "_ForwardCache", tape: "GradientTape") -> "GradientTape":
        """Accumulate d(loss)/d(params) into ``tape``.

        ``grad_out`` is d(loss)/d(head output), matching the shape of the
        cached forward's output. For softmax heads the exact per-segment
        Jacobian is applied; relu uses subgradient 0 at 0.
        """
        if cache is None:
            raise RuntimeError("backward requires the cache of a prior forward pass")
        tape.check_matches(self)
        grad_out = np.asarray(grad_out, dtype=np.float64)
        if grad_out.ndim == 1:
            grad_out = grad_out[None, :]
        if grad_out.shape != cache.head_out.shape:
            raise ValueError(
                f"grad shape {grad_out.shape} != cached output shape {cache.head_out.shape}"
            )

        if self.head == "softmax":
            p = cache.head_out
            gz = np.empty_like(p)
            start = 0
            for width in self.head_segments:
                sl = slice(start, start + width)
                h = p[:, sl] * grad_out[:, sl]
                gz[:, sl] = h - p[:, sl] * h.sum(axis=1, keepdims=True)
                start += width
        else:
            gz = grad_out

        acts = cache.acts
        for k in range(len(self.weights) - 1, -1, -1):
            tape.grad_weights[k] += gz.T @ acts[k]
            tape.grad_biases[k] += gz.sum(axis=0)
            if k > 0:
                ga = gz @ self.weights[k]
                a = acts[k]
                if self.activation == "tanh":
                    gz = ga * (1.0 - a * a)
                else:
                    gz = ga * (a > 0.0)
        tape.count += 1
        return tape

    def copy(self) -> "MlpNet":
        dup = MlpNet(self.layer_sizes, self.activation, self.head, self.head_segments)
        for w_dst, w_src in zip(dup.weights, self.weights):
            w_dst[...] = w_src
        for b_dst, b_src in zip(dup.biases, self.biases):
            b_dst[...] = b_src
        return dup


class _ForwardCache:
    __slots__ = ("acts", "head_out")

    def __init__(self, acts, head_out):
        self.acts = acts
        self.head_out = head_out


class GradientTape:
    """Per-parameter gradient buffers aligned with a network's layout."""

    def __init__(self, net: MlpNet):
        self.grad_weights = [np.zeros_like(w) for w in net.weights]
        self.grad_biases = [np.zeros_like(b) for b in net.biases]
        self.count = 0

    def buffers(self) -> list[np.ndarray]:
        out = []
        for gw, gb in zip(self.grad_weights, self.grad_biases):
            out.append(gw)
            out.append(gb)
        return out

    def check_matches(self, net: MlpNet) -> None:
        if len(self.grad_weights) != len(net.weights):
            raise ValueError("tape layer count does not match network")
        for g, w in zip(self.grad_weights, net.weights):
            if g.shape != w.shape:
                raise ValueError("tape buffer shapes do not match network parameters")

    def zero(self) -> None:
        for buf in self.buffers():
            buf[...] = 0.0
        self.count = 0

    def global_norm(self) -> float:
        total = 0.0
        for buf in self.buffers():
            total += float(np.sum(buf * buf))
        return float(np.sqrt(total))


def clip_global_norm(tape: GradientTape, max_norm: float) -> GradientTape:
    """Scale all gradients so the joint l2 norm is at most ``max_norm``.

    The small tolerance on the trigger keeps the operation exactly
    idempotent in floating point.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = tape.global_norm()
    if norm > max_norm * (1.0 + 1e-12):
        scale = max_norm / norm
        for buf in tape.buffers():
            buf *= scale
    return tape


class Sgd:
    """Plain gradient descent bound to a single network."""

    def __init__(self, net: MlpNet, lr: float):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.net = net
        self.lr = float(lr)

    def step(self, tape: GradientTape) -> None:
        tape.check_matches(self.net)
        for p, g in zip(self.net.parameters(), tape.buffers()):
            p -= self.lr * g


class Adam:
    """Adam with bias correction, bound to a single network."""

    def __init__(self, net: MlpNet, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.net = net
        self.lr = float(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in net.parameters()]
        self.v = [np.zeros_like(p) for p in net.parameters()]
        self.t = 0

    def step(self, tape: GradientTape) -> None:
        tape.check_matches(self.net)
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.net.parameters(), tape.buffers(), self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def make_optimizer(kind: str, net: MlpNet, lr: float):
    if kind == "adam":
        return Adam(net, lr)
    if kind == "sgd":
        return Sgd(net, lr)
    raise ValueError(f"unknown optimizer kind {kind!r}")


def finite_difference_grads(net: MlpNet, x: np.ndarray, loss_fn, h: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradient of ``loss_fn(net.forward(x))`` w.r.t. params.

    Independent of :meth:`MlpNet.backward`; used as the gradient oracle in
    tests. O(2 * n_params) forward passes.
    """
    grads = []
    for p in net.parameters():
        g = np.zeros_like(p)
        flat = p.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(loss_fn(net.forward(x)))
            flat[i] = orig - h
            down = float(loss_fn(net.forward(x)))
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads

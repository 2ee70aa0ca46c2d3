import numpy as np
import pytest

from pdppo.nn import (
    Adam,
    GradientTape,
    MlpNet,
    Sgd,
    clip_global_norm,
    finite_difference_grads,
    make_optimizer,
)


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """Elementwise relative error with a floor where both gradients vanish.

    Below the floor the central-difference oracle's own noise (~1e-10
    absolute) dominates, so relative comparison is meaningless there.
    """
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-4)
    return float(np.max(np.abs(a - b) / denom))


def random_net_and_input(rng, max_units=32, allow_relu=True):
    """Random small net plus an input kept away from relu kinks."""
    n_hidden = int(rng.integers(0, 4))
    sizes = [int(rng.integers(1, 9))] + [int(rng.integers(1, max_units + 1)) for _ in range(n_hidden)]
    activation = "relu" if (allow_relu and rng.random() < 0.5) else "tanh"
    head = "softmax" if rng.random() < 0.4 else "linear"
    if head == "softmax":
        if rng.random() < 0.5:
            segments = tuple(int(rng.integers(2, 5)) for _ in range(int(rng.integers(1, 3))))
            sizes.append(sum(segments))
        else:
            sizes.append(int(rng.integers(2, 6)))
            segments = None
    else:
        sizes.append(int(rng.integers(1, 5)))
        segments = None
    net = MlpNet(sizes, activation=activation, head=head, head_segments=segments, rng=rng)
    for _ in range(200):
        x = rng.normal(size=sizes[0])
        if activation == "tanh" or _min_preactivation(net, x) > 1e-4:
            return net, x
    raise AssertionError("could not find an input clear of relu kinks")


def _min_preactivation(net: MlpNet, x: np.ndarray) -> float:
    h = x
    worst = np.inf
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = w @ h + b
        if k < len(net.weights) - 1:
            worst = min(worst, float(np.min(np.abs(z))))
            h = np.maximum(z, 0.0) if net.activation == "relu" else np.tanh(z)
    return worst


class TestForward:
    def test_zero_parameters_linear_head(self):
        net = MlpNet([3, 2], head="linear")
        assert np.array_equal(net.forward(np.array([1.0, -2.0, 5.0])), np.zeros(2))

    def test_zero_parameters_softmax_is_uniform(self):
        net = MlpNet([3, 4], head="softmax")
        out = net.forward(np.array([0.3, -1.0, 2.0]))
        assert np.allclose(out, [0.25, 0.25, 0.25, 0.25])

    def test_single_affine_map(self):
        net = MlpNet([1, 1], head="linear")
        net.weights[0][0, 0] = 2.0
        net.biases[0][0] = 1.0
        assert net.forward(np.array([3.0]))[0] == pytest.approx(7.0)

    def test_input_shape_mismatch(self):
        net = MlpNet([3, 2])
        with pytest.raises(ValueError):
            net.forward(np.array([1.0, 2.0]))

    def test_batch_matches_single(self):
        rng = np.random.default_rng(0)
        net = MlpNet([4, 8, 3], rng=rng)
        xs = rng.normal(size=(5, 4))
        batch = net.forward(xs)
        for i in range(5):
            assert np.allclose(batch[i], net.forward(xs[i]), atol=1e-12)

    def test_forward_is_deterministic(self):
        rng = np.random.default_rng(1)
        net = MlpNet([4, 6, 2], rng=rng)
        x = rng.normal(size=4)
        assert np.array_equal(net.forward(x), net.forward(x))

    @pytest.mark.parametrize("scale", [1.0, 100.0, 5000.0])
    def test_softmax_simplex_even_for_large_logits(self, scale):
        rng = np.random.default_rng(2)
        net = MlpNet([3, 5], head="softmax")
        net.weights[0][...] = rng.normal(size=(5, 3)) * scale
        out = net.forward(rng.normal(size=3))
        assert np.all(out >= 0.0)
        assert np.all(out < 1.0 + 1e-12)
        assert abs(out.sum() - 1.0) < 1e-9

    def test_segmented_softmax_sums_per_segment(self):
        rng = np.random.default_rng(3)
        net = MlpNet([4, 7], head="softmax", head_segments=(3, 4), rng=rng)
        out = net.forward(rng.normal(size=4))
        assert abs(out[:3].sum() - 1.0) < 1e-9
        assert abs(out[3:].sum() - 1.0) < 1e-9


class TestBackward:
    def test_affine_derivatives(self):
        # loss = output[0] on a 1-1 net: d/dw = x, d/db = 1
        net = MlpNet([1, 1], head="linear")
        net.weights[0][0, 0] = 0.7
        x = np.array([3.5])
        _, cache = net.forward_cached(x)
        tape = GradientTape(net)
        net.backward(np.array([1.0]), cache, tape)
        assert tape.grad_weights[0][0, 0] == pytest.approx(3.5)
        assert tape.grad_biases[0][0] == pytest.approx(1.0)

    def test_dead_relu_units_have_zero_gradient(self):
        net = MlpNet([2, 3, 1], activation="relu", head="linear")  # all zeros
        x = np.array([1.0, -1.0])
        _, cache = net.forward_cached(x)
        tape = GradientTape(net)
        net.backward(np.array([1.0]), cache, tape)
        # preactivations are 0 -> relu subgradient 0 -> first layer silent
        assert np.array_equal(tape.grad_weights[0], np.zeros((3, 2)))
        assert np.array_equal(tape.grad_biases[0], np.zeros(3))

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        net = MlpNet([4, 10, 6, 3], activation="tanh", head="linear", rng=rng)
        x = rng.normal(size=4)
        w = rng.normal(size=3)
        _, cache = net.forward_cached(x)
        tape = GradientTape(net)
        net.backward(w, cache, tape)
        fd = finite_difference_grads(net, x, lambda y: float(w @ y))
        assert max(rel_err(a, b) for a, b in zip(tape.buffers(), fd)) < 1e-4

    def test_accumulation(self):
        rng = np.random.default_rng(8)
        net = MlpNet([3, 4, 2], rng=rng)
        x = rng.normal(size=3)
        g = rng.normal(size=2)
        _, cache = net.forward_cached(x)
        t1 = GradientTape(net)
        net.backward(g, cache, t1)
        once = [b.copy() for b in t1.buffers()]
        net.backward(g, cache, t1)
        for buf, ref in zip(t1.buffers(), once):
            assert np.allclose(buf, 2.0 * ref)
        assert t1.count == 2

    def test_backward_without_cache_raises(self):
        net = MlpNet([2, 2])
        with pytest.raises(RuntimeError):
            net.backward(np.array([1.0, 0.0]), None, GradientTape(net))

    def test_tape_shape_mismatch_raises(self):
        net = MlpNet([2, 2])
        other = MlpNet([3, 2])
        _, cache = net.forward_cached(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            net.backward(np.array([1.0, 0.0]), cache, GradientTape(other))


class TestClipGlobalNorm:
    def _tape_with(self, values):
        net = MlpNet([1, 2])
        tape = GradientTape(net)
        tape.grad_weights[0][:, 0] = values
        return tape

    def test_under_limit_unchanged(self):
        tape = self._tape_with([3.0, 4.0])
        clip_global_norm(tape, 10.0)
        assert np.array_equal(tape.grad_weights[0][:, 0], [3.0, 4.0])

    def test_exactly_at_limit_unchanged(self):
        tape = self._tape_with([3.0, 4.0])
        clip_global_norm(tape, 5.0)
        assert np.array_equal(tape.grad_weights[0][:, 0], [3.0, 4.0])

    def test_scaling(self):
        tape = self._tape_with([3.0, 4.0])
        clip_global_norm(tape, 1.0)
        assert np.allclose(tape.grad_weights[0][:, 0], [0.6, 0.8])
        assert tape.global_norm() == pytest.approx(1.0)

    def test_idempotent(self):
        rng = np.random.default_rng(9)
        net = MlpNet([4, 8, 2], rng=rng)
        tape = GradientTape(net)
        for buf in tape.buffers():
            buf[...] = rng.normal(size=buf.shape) * 10.0
        clip_global_norm(tape, 0.5)
        once = [b.copy() for b in tape.buffers()]
        clip_global_norm(tape, 0.5)
        for buf, ref in zip(tape.buffers(), once):
            assert np.array_equal(buf, ref)

    def test_rejects_nonpositive_norm(self):
        with pytest.raises(ValueError):
            clip_global_norm(self._tape_with([1.0, 1.0]), 0.0)


class TestOptimizers:
    def test_sgd_step(self):
        net = MlpNet([1, 1])
        net.weights[0][0, 0] = 1.0
        tape = GradientTape(net)
        tape.grad_weights[0][0, 0] = 2.0
        Sgd(net, lr=0.1).step(tape)
        assert net.weights[0][0, 0] == pytest.approx(0.8)

    @pytest.mark.parametrize("kind", ["sgd", "adam"])
    def test_zero_gradient_is_identity(self, kind):
        rng = np.random.default_rng(10)
        net = MlpNet([3, 5, 2], rng=rng)
        before = [p.copy() for p in net.parameters()]
        opt = make_optimizer(kind, net, lr=0.5)
        opt.step(GradientTape(net))
        for p, ref in zip(net.parameters(), before):
            assert np.array_equal(p, ref)

    def test_adam_first_step_closed_form(self):
        # constant gradient 1.0 from w=0: step is -lr / (1 + eps) after bias correction
        net = MlpNet([1, 1])
        tape = GradientTape(net)
        tape.grad_weights[0][0, 0] = 1.0
        opt = Adam(net, lr=0.001)
        opt.step(tape)
        expected = -0.001 / (1.0 + 1e-8)
        assert net.weights[0][0, 0] == pytest.approx(expected, abs=1e-12)
        assert abs(net.weights[0][0, 0] - (-0.001)) < 1e-9
        assert opt.t == 1

    def test_adam_shape_mismatch_raises(self):
        net = MlpNet([2, 2])
        opt = Adam(net, lr=0.01)
        with pytest.raises(ValueError):
            opt.step(GradientTape(MlpNet([3, 3])))


class TestInitialization:
    def test_reproducible_from_seed(self):
        a = MlpNet([4, 8, 2], rng=np.random.default_rng(42))
        b = MlpNet([4, 8, 2], rng=np.random.default_rng(42))
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert np.array_equal(pa, pb)

    def test_bounds_and_zero_biases(self):
        net = MlpNet([10, 20, 3], rng=np.random.default_rng(0))
        bound0 = np.sqrt(6.0 / 30)
        assert np.all(np.abs(net.weights[0]) <= bound0)
        assert np.array_equal(net.biases[0], np.zeros(20))

    def test_shape_invariants(self):
        net = MlpNet([5, 7, 2], rng=np.random.default_rng(1))
        assert net.weights[0].shape == (7, 5)
        assert net.weights[1].shape == (2, 7)
        assert net.biases[0].shape == (7,)
        assert net.biases[1].shape == (2,)


def test_gradient_check_sweep():
    """Random shapes, activations and heads all match finite differences."""
    rng = np.random.default_rng(123)
    for _ in range(30):
        net, x = random_net_and_input(rng)
        w = rng.normal(size=net.output_dim)
        _, cache = net.forward_cached(x)
        tape = GradientTape(net)
        net.backward(w, cache, tape)
        fd = finite_difference_grads(net, x, lambda y: float(w @ y))
        worst = max(rel_err(a, b) for a, b in zip(tape.buffers(), fd))
        assert worst < 1e-4, f"{net.layer_sizes} {net.activation} {net.head}: {worst}"


@pytest.mark.parametrize(
    "sizes,head,segments",
    [
        ([24, 64, 64, 4], "softmax", None),  # actor shape (single categorical)
        ([24, 64, 64, 9], "softmax", (5, 4)),  # actor shape (factorized action)
        ([24, 64, 64, 1], "linear", None),  # critic shape
    ],
)
def test_gradient_check_training_shapes(sizes, head, segments):
    """The exact architectures the agents train also pass the oracle."""
    rng = np.random.default_rng(7)
    net = MlpNet(sizes, activation="tanh", head=head, head_segments=segments, rng=rng)
    x = rng.normal(size=sizes[0])
    w = rng.normal(size=net.output_dim)
    _, cache = net.forward_cached(x)
    tape = GradientTape(net)
    net.backward(w, cache, tape)
    fd = finite_difference_grads(net, x, lambda y: float(w @ y))
    assert max(rel_err(a, b) for a, b in zip(tape.buffers(), fd)) < 1e-4

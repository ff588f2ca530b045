import numpy as np
import pytest

from walab.errors import LayoutError, SpecError
from walab.ndcore import WeightVector
from walab.nn import (
    Batch,
    ModelSpec,
    backward,
    conv2d,
    dense,
    flatten,
    forward_loss,
    infer_shapes,
    init_weights,
    input_layer,
    layout_id,
    maxpool,
    mlp_spec,
    param_count,
    relu,
    softmax_xent_head,
    toy_cnn_spec,
    unflatten,
)


def finite_difference_grad(spec, w, batch, h=1e-5):
    """Central-difference oracle over every coordinate."""
    grad = np.zeros(len(w))
    base = w.values
    for i in range(len(w)):
        vp = base.copy()
        vp[i] += h
        vm = base.copy()
        vm[i] -= h
        lp, _ = forward_loss(spec, WeightVector(vp, w.layout_id), batch)
        lm, _ = forward_loss(spec, WeightVector(vm, w.layout_id), batch)
        grad[i] = (lp - lm) / (2 * h)
    return grad


def max_rel_err(analytic, numeric):
    # Relative where gradients are sizable; the 1e-3 floor keeps coordinates
    # with near-zero true gradient from amplifying finite-difference noise.
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
    return float((np.abs(analytic - numeric) / denom).max())


class TestSpecs:
    def test_toy_cnn_layer_sequence(self):
        spec = toy_cnn_spec()
        assert spec.layer_kinds == [
            "input", "conv2d", "maxpool", "conv2d", "maxpool",
            "flatten", "dense", "dense", "softmax_xent_head",
        ]
        assert len(spec.layers) == 9

    def test_toy_cnn_output_dim(self):
        spec = toy_cnn_spec()
        assert spec.class_count == 10
        assert infer_shapes(spec)[-1] == (10,)

    def test_mlp_param_count(self):
        assert param_count(mlp_spec([784, 128, 10])) == 101770

    def test_shape_mismatch_rejected(self):
        with pytest.raises(SpecError):
            ModelSpec(
                (input_layer(), dense(5, 3), softmax_xent_head()),
                input_shape=(4,),
                class_count=3,
            )

    def test_pool_must_divide(self):
        with pytest.raises(SpecError):
            ModelSpec(
                (input_layer(), conv2d(1, 2, 3), maxpool(3), flatten(),
                 dense(2 * 1 * 1, 2), softmax_xent_head()),
                input_shape=(1, 4, 4),
                class_count=2,
            )

    def test_same_architecture_same_layout(self):
        assert layout_id(toy_cnn_spec()) == layout_id(toy_cnn_spec())
        assert layout_id(toy_cnn_spec()) != layout_id(mlp_spec([3072, 10]))


class TestInit:
    def test_deterministic(self):
        spec = toy_cnn_spec()
        a = init_weights(spec, 11)
        b = init_weights(spec, 11)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, init_weights(spec, 12).values)

    def test_biases_zero(self):
        spec = mlp_spec([6, 4, 3])
        params = unflatten(spec, init_weights(spec, 0))
        for (pos, name), arr in params.items():
            if name == "bias":
                assert np.all(arr == 0.0)

    def test_variance_matches_he_scaling(self):
        # Monte-Carlo over seeds: Var(U(-b, b)) = b^2/3 = 2/fan_in.
        spec = mlp_spec([512, 256, 10])
        samples = []
        for seed in range(12):
            params = unflatten(spec, init_weights(spec, seed))
            samples.append(params[(1, "weight")].reshape(-1))
        var = np.var(np.concatenate(samples))
        assert abs(var - 2.0 / 512) / (2.0 / 512) < 0.2


class TestForward:
    def test_zero_weights_give_log_k(self):
        spec = mlp_spec([5, 7])
        w = WeightVector(np.zeros(param_count(spec)), layout_id(spec))
        batch = Batch(np.random.default_rng(0).normal(size=(4, 5)), np.array([0, 1, 2, 6]))
        loss, acc = forward_loss(spec, w, batch)
        assert loss == pytest.approx(np.log(7), rel=1e-15)

    def test_ten_class_uniform_loss(self):
        spec = toy_cnn_spec()
        w = WeightVector(np.zeros(param_count(spec)), layout_id(spec))
        batch = Batch(np.zeros((3, 3, 32, 32)), np.array([0, 5, 9]))
        loss, _ = forward_loss(spec, w, batch)
        assert loss == pytest.approx(2.302585092994046, rel=1e-12)

    def test_matches_independent_reimplementation(self):
        # Straightforward separate forward pass for a 2-layer MLP.
        spec = mlp_spec([6, 9, 4])
        w = init_weights(spec, 3)
        rng = np.random.default_rng(5)
        x = rng.normal(size=(4, 6))
        y = np.array([0, 3, 1, 2])
        params = unflatten(spec, w)

        h = np.maximum(x @ params[(1, "weight")] + params[(1, "bias")], 0.0)
        logits = h @ params[(2, "weight")] + params[(2, "bias")]
        z = logits - logits.max(axis=1, keepdims=True)
        log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        expected_loss = -log_probs[np.arange(4), y].mean()
        expected_acc = (logits.argmax(axis=1) == y).mean()

        loss, acc = forward_loss(spec, w, Batch(x, y))
        assert loss == pytest.approx(expected_loss, rel=1e-10)
        assert acc == pytest.approx(expected_acc)

    def test_loss_nonnegative_acc_in_range(self):
        spec = toy_cnn_spec()
        w = init_weights(spec, 1)
        rng = np.random.default_rng(7)
        batch = Batch(rng.random((8, 3, 32, 32)), rng.integers(0, 10, 8))
        loss, acc = forward_loss(spec, w, batch)
        assert loss >= 0.0
        assert 0.0 <= acc <= 1.0

    def test_fixed_order_bit_stable_and_permutation_tolerant(self):
        spec = mlp_spec([10, 8, 3])
        w = init_weights(spec, 2)
        rng = np.random.default_rng(9)
        x = rng.normal(size=(16, 10))
        y = rng.integers(0, 3, 16)
        l1, a1 = forward_loss(spec, w, Batch(x, y))
        l2, a2 = forward_loss(spec, w, Batch(x.copy(), y.copy()))
        assert l1 == l2 and a1 == a2  # bit equality for identical order
        perm = np.random.default_rng(1).permutation(16)
        l3, a3 = forward_loss(spec, w, Batch(x[perm], y[perm]))
        assert l3 == pytest.approx(l1, rel=1e-12)
        assert a3 == pytest.approx(a1)

    def test_layout_mismatch(self):
        spec = mlp_spec([4, 3])
        other = mlp_spec([4, 4])
        w = init_weights(other, 0)
        with pytest.raises(LayoutError):
            forward_loss(spec, w, Batch(np.zeros((1, 4)), np.array([0])))

    def test_bad_labels_rejected(self):
        spec = mlp_spec([4, 3])
        w = init_weights(spec, 0)
        with pytest.raises(SpecError):
            forward_loss(spec, w, Batch(np.zeros((1, 4)), np.array([3])))


class TestBackward:
    def test_loss_matches_forward(self):
        spec = mlp_spec([5, 6, 3])
        w = init_weights(spec, 4)
        rng = np.random.default_rng(11)
        batch = Batch(rng.normal(size=(7, 5)), rng.integers(0, 3, 7))
        loss_f, _ = forward_loss(spec, w, batch)
        loss_b, grad = backward(spec, w, batch)
        assert loss_b == loss_f
        assert grad.layout_id == w.layout_id and len(grad) == len(w)

    def test_logit_gradient_sums_to_zero(self):
        # Final dense bias gradient is the per-sample mean of (p - onehot),
        # whose entries sum to zero.
        spec = mlp_spec([5, 6, 3])
        w = init_weights(spec, 4)
        rng = np.random.default_rng(12)
        batch = Batch(rng.normal(size=(6, 5)), rng.integers(0, 3, 6))
        _, grad = backward(spec, w, batch)
        params = unflatten(spec, grad)
        assert abs(params[(2, "bias")].sum()) < 1e-14

    def test_zero_inputs_zero_first_weight_grad(self):
        spec = mlp_spec([5, 6, 3])
        w = init_weights(spec, 4)
        batch = Batch(np.zeros((4, 5)), np.array([0, 1, 2, 0]))
        _, grad = backward(spec, w, batch)
        params = unflatten(spec, grad)
        assert np.all(params[(1, "weight")] == 0.0)

    @pytest.mark.parametrize(
        "spec",
        [
            mlp_spec([6, 5, 3]),
            ModelSpec(
                (input_layer(), conv2d(2, 3, 3), flatten(), dense(3 * 4 * 4, 3),
                 softmax_xent_head()),
                input_shape=(2, 4, 4),
                class_count=3,
            ),
            ModelSpec(
                (input_layer(), conv2d(2, 4, 3, act="relu"), maxpool(2), flatten(),
                 dense(4 * 2 * 2, 3), softmax_xent_head()),
                input_shape=(2, 4, 4),
                class_count=3,
            ),
            ModelSpec(
                (input_layer(), dense(6, 8), relu(), dense(8, 4), softmax_xent_head()),
                input_shape=(6,),
                class_count=4,
            ),
        ],
        ids=["mlp", "conv-linear", "conv-relu-pool", "standalone-relu"],
    )
    def test_finite_difference(self, spec):
        w = init_weights(spec, 8)
        rng = np.random.default_rng(13)
        shape = (3,) + spec.input_shape
        batch = Batch(rng.normal(size=shape), rng.integers(0, spec.class_count, 3))
        _, grad = backward(spec, w, batch)
        numeric = finite_difference_grad(spec, w, batch)
        assert max_rel_err(grad.values, numeric) < 1e-6

import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from hicount import nncore as nn
from hicount.nncore.specs import LayerParams


def small_spec(channels=3, size=8, n_classes=4):
    return nn.NetworkSpec(
        (channels, size, size),
        (nn.conv3(4), nn.relu(), nn.maxpool2x2(), nn.linear(n_classes), nn.softmax()),
    )


# ------------------------------------------------------------ oracle helpers

def finite_diff_grads(net, x, h=1e-5):
    """Independent central-difference gradients of L = 0.5*||out||^2."""

    def loss(trial):
        y, _ = nn.forward(trial, x)
        return 0.5 * float((y * y).sum())

    grads = []
    for li, params in enumerate(net.weights):
        if params is None:
            grads.append(None)
            continue
        gk = np.zeros_like(params.kernel)
        gb = np.zeros_like(params.bias)
        for which, out in (("kernel", gk), ("bias", gb)):
            arr = getattr(params, which)
            for idx in range(arr.size):
                trial = net.copy()
                tarr = getattr(trial.weights[li], which).copy()
                base = tarr.flat[idx]
                tarr.flat[idx] = base + h
                setattr(trial.weights[li], which, tarr)
                lp = loss(trial)
                tarr2 = tarr.copy()
                tarr2.flat[idx] = base - h
                setattr(trial.weights[li], which, tarr2)
                lm = loss(trial)
                out.flat[idx] = (lp - lm) / (2 * h)
        grads.append(LayerParams(gk, gb))
    return grads


# ------------------------------------------------------------ forward

def test_maxpool_constant():
    spec = nn.NetworkSpec((1, 4, 4), (nn.maxpool2x2(),))
    net = nn.init_network(spec, seed=0)
    out, _ = nn.forward(net, np.full((1, 4, 4), 5.0, dtype=np.float32))
    assert out.shape == (1, 2, 2)
    assert np.all(out == 5.0)


def test_conv_zero_kernel_outputs_bias():
    spec = nn.NetworkSpec((2, 5, 5), (nn.conv3(3),))
    net = nn.init_network(spec, seed=0)
    net.weights[0].kernel[:] = 0.0
    net.weights[0].bias[:] = np.array([1.5, -2.0, 0.25])
    out, _ = nn.forward(net, np.random.default_rng(0).random((2, 5, 5)).astype(np.float32))
    for c, b in enumerate([1.5, -2.0, 0.25]):
        assert np.allclose(out[c], b)


def test_two_conv_shape_propagation():
    # hand-propagated: 3x3/stride1/pad1 convs preserve H and W
    spec = nn.NetworkSpec((3, 32, 32), (nn.conv3(8), nn.relu(), nn.conv3(5)))
    net = nn.init_network(spec, seed=1)
    out, _ = nn.forward(net, np.random.default_rng(1).random((3, 32, 32)).astype(np.float32))
    assert out.shape == (5, 32, 32)
    assert spec.output_shape == (5, 32, 32)


def test_forward_rejects_bad_shape():
    net = nn.init_network(small_spec(), seed=0)
    with pytest.raises(nn.ShapeMismatchError):
        nn.forward(net, np.zeros((3, 9, 8), dtype=np.float32))


def test_forward_deterministic():
    net = nn.init_network(small_spec(), seed=7)
    x = np.random.default_rng(7).random((3, 8, 8)).astype(np.float32)
    a, _ = nn.forward(net, x)
    b, _ = nn.forward(net, x)
    assert np.array_equal(a, b)


spec_strategy = st.builds(
    lambda c, n1, n2, classes, use_pool: nn.NetworkSpec(
        (c, 8, 8),
        (nn.conv3(n1), nn.relu())
        + ((nn.maxpool2x2(),) if use_pool else ())
        + (nn.conv3(n2), nn.relu(), nn.linear(classes), nn.softmax()),
    ),
    c=st.integers(1, 3), n1=st.integers(1, 4), n2=st.integers(1, 4),
    classes=st.integers(2, 5), use_pool=st.booleans(),
)


@given(spec=spec_strategy, seed=st.integers(0, 2**16))
def test_forward_shape_matches_static_propagation(spec, seed):
    net = nn.init_network(spec, seed=seed)
    x = np.random.default_rng(seed).random(spec.input_shape).astype(np.float32)
    out, acts = nn.forward(net, x)
    assert out.shape == spec.output_shape
    for got, want in zip(acts.outputs, spec.shapes()):
        assert got.shape[1:] == want


@given(spec=spec_strategy, seed=st.integers(0, 2**16))
def test_softmax_rows_normalized(spec, seed):
    net = nn.init_network(spec, seed=seed)
    x = np.random.default_rng(seed + 1).standard_normal(spec.input_shape).astype(np.float32)
    out, _ = nn.forward(net, x)
    assert abs(float(out.sum()) - 1.0) <= 1e-6
    assert np.all(out >= 0) and np.all(out <= 1)


# ------------------------------------------------------------ backward

def test_backward_zero_loss_grad():
    net = nn.init_network(small_spec(), seed=3)
    x = np.random.default_rng(3).random((3, 8, 8)).astype(np.float32)
    out, acts = nn.forward(net, x)
    grads = nn.backward(net, acts, np.zeros_like(out))
    for g in grads.layers:
        if g is not None:
            assert np.all(g.kernel == 0) and np.all(g.bias == 0)
    assert np.all(grads.input_grad == 0)


def test_backward_single_linear_chain_rule():
    spec = nn.NetworkSpec((3,), (nn.linear(1),))
    net = nn.init_network(spec, seed=5)
    x = np.array([0.5, -1.0, 2.0], dtype=np.float32)
    out, acts = nn.forward(net, x)
    g = nn.backward(net, acts, np.array([2.0], dtype=np.float32))
    assert np.allclose(g.layers[0].kernel, 2.0 * x[None, :])
    assert np.allclose(g.layers[0].bias, [2.0])


def test_backward_matches_finite_differences_three_layers():
    spec = nn.NetworkSpec((2, 6, 6), (nn.conv3(2), nn.relu(), nn.maxpool2x2(),
                                      nn.linear(3), nn.softmax()))
    net = nn.init_network(spec, seed=11).astype(np.float64)
    x = np.random.default_rng(11).standard_normal((2, 6, 6))
    out, acts = nn.forward(net, x)
    analytic = nn.backward(net, acts, out.copy())  # d(0.5*||out||^2)/d(out) = out
    numeric = finite_diff_grads(net, x)
    for a, n_ in zip(analytic.layers, numeric):
        if a is None:
            continue
        for aa, nnn in ((a.kernel, n_.kernel), (a.bias, n_.bias)):
            denom = np.maximum(np.maximum(np.abs(aa), np.abs(nnn)), 1e-8)
            assert np.max(np.abs(aa - nnn) / denom) <= 1e-4


def test_backward_rejects_mismatched_activations():
    net = nn.init_network(small_spec(), seed=0)
    other = nn.init_network(small_spec(channels=2), seed=0)
    x = np.random.default_rng(0).random((2, 8, 8)).astype(np.float32)
    out, acts = nn.forward(other, x)
    with pytest.raises(nn.ActivationError):
        nn.backward(net, acts, out)


# ------------------------------------------------------------ losses

def test_cross_entropy_one_hot_is_zero():
    p = np.array([0.0, 1.0, 0.0])
    assert nn.cross_entropy(p, 1) == 0.0


def test_cross_entropy_uniform_is_log_k():
    k = 5
    p = np.full(k, 1.0 / k)
    assert math.isclose(nn.cross_entropy(p, 2), math.log(k), rel_tol=1e-12)


def test_cross_entropy_frozen_value():
    # -ln 0.7, computed independently
    p = np.array([0.7, 0.2, 0.1])
    assert math.isclose(nn.cross_entropy(p, 0), 0.35667494393873245, rel_tol=1e-12)


def test_cross_entropy_rejects_unnormalized():
    with pytest.raises(ValueError):
        nn.cross_entropy(np.array([0.5, 0.4]), 0)


def test_cross_entropy_zero_probability_clamped():
    p = np.array([0.0, 1.0])
    loss = nn.cross_entropy(p, 0)
    assert math.isclose(loss, -math.log(1e-12))


def test_smooth_l1_cases():
    b = np.array([1.0, 2.0, 3.0, 4.0])
    assert nn.smooth_l1(b, b) == 0.0
    assert nn.smooth_l1(b + np.array([0.5, 0, 0, 0]), b) == pytest.approx(0.125)
    assert nn.smooth_l1(b + np.array([2.0, 0, 0, 0]), b) == pytest.approx(1.5)


# ------------------------------------------------------------ SGD schedule

def test_lr_schedule_values():
    cfg = nn.TrainConfig()
    assert nn.learning_rate(0, cfg) == pytest.approx(0.004)
    assert nn.learning_rate(8, cfg) == pytest.approx(0.0004)
    assert nn.learning_rate(16, cfg) == pytest.approx(0.00004)


@given(e1=st.integers(0, 100), e2=st.integers(0, 100))
def test_lr_schedule_non_increasing(e1, e2):
    cfg = nn.TrainConfig()
    lo, hi = sorted((e1, e2))
    assert nn.learning_rate(hi, cfg) <= nn.learning_rate(lo, cfg)


def test_lr_drops_exactly_at_period_multiples():
    cfg = nn.TrainConfig()
    for e in range(1, 40):
        ratio = nn.learning_rate(e - 1, cfg) / nn.learning_rate(e, cfg)
        assert ratio == pytest.approx(cfg.lr_drop_factor if e % 8 == 0 else 1.0)


def test_sgd_zero_gradients_keep_weights():
    net = nn.init_network(small_spec(), seed=9)
    zero = nn.Gradients(
        [None if w is None else LayerParams(np.zeros_like(w.kernel), np.zeros_like(w.bias))
         for w in net.weights],
        np.zeros(net.spec.input_shape, dtype=np.float32))
    updated = nn.sgd_update(net, zero, epoch=0, cfg=nn.TrainConfig())
    for w0, w1 in zip(net.weights, updated.weights):
        if w0 is not None:
            assert np.array_equal(w0.kernel, w1.kernel)
            assert np.array_equal(w0.bias, w1.bias)


# ------------------------------------------------------------ accounting

def test_param_memory_empty_spec():
    assert nn.param_memory(nn.NetworkSpec((3, 4, 4), ())) == 0


def test_param_memory_conv():
    spec = nn.NetworkSpec((3, 8, 8), (nn.conv3(32),))
    assert nn.param_memory(spec) == 4 * (9 * 3 + 1) * 32  # 3584


def test_param_memory_linear_wide():
    spec = nn.NetworkSpec((6272,), (nn.linear(13),))
    assert nn.param_memory(spec) == 4 * (6272 + 1) * 13  # 326196


def test_flop_count_empty():
    assert nn.flop_count(nn.NetworkSpec((1, 4, 4), ())) == 0


def test_flop_count_conv():
    spec = nn.NetworkSpec((1, 4, 4), (nn.conv3(1),))
    assert nn.flop_count(spec) == 288  # 2*9*1*1*16


# ------------------------------------------------------------ gradient_check

def test_gradient_check_linear_only():
    spec = nn.NetworkSpec((6,), (nn.linear(4), nn.linear(2)))
    assert nn.gradient_check(spec, seed=0) <= 1e-7


def test_gradient_check_conv_pool_linear():
    spec = nn.NetworkSpec((2, 8, 8), (nn.conv3(3), nn.relu(), nn.maxpool2x2(),
                                      nn.linear(4), nn.softmax()))
    assert nn.gradient_check(spec, seed=1) <= 1e-4


def test_gradient_check_zero_net_zero_input():
    spec = nn.NetworkSpec((2, 4, 4), (nn.conv3(2), nn.relu(), nn.linear(3)))
    net = nn.init_network(spec, seed=0).astype(np.float64)
    for w in net.weights:
        if w is not None:
            w.kernel[:] = 0
            w.bias[:] = 0
    x = np.zeros((2, 4, 4))
    out, acts = nn.forward(net, x)
    grads = nn.backward(net, acts, out.copy())
    for g in grads.layers:
        if g is not None:
            assert np.all(g.kernel == 0) and np.all(g.bias == 0)


def test_gradient_check_rejects_big_spec():
    spec = nn.NetworkSpec((3, 32, 32), (nn.conv3(64), nn.conv3(64)))
    with pytest.raises(ValueError):
        nn.gradient_check(spec, seed=0)


# ------------------------------------------------------------ batched ops

def test_batch_matches_sequential():
    # BLAS picks different GEMM kernels per batch shape, so equality is
    # up to float32 rounding, not bitwise
    net = nn.init_network(small_spec(), seed=4)
    xs = np.random.default_rng(4).random((5, 3, 8, 8)).astype(np.float32)
    batched, _ = nn.forward_batch(net, xs)
    for i in range(5):
        single, _ = nn.forward(net, xs[i])
        assert np.allclose(batched[i], single, rtol=1e-5, atol=1e-7)


def test_adaptive_maxpool_identity_and_values():
    x = np.arange(1, 17, dtype=np.float32).reshape(1, 4, 4)
    same, _ = nn.adaptive_maxpool(x, 4)
    assert np.array_equal(same, x)
    pooled, _ = nn.adaptive_maxpool(x, 2)
    assert np.array_equal(pooled, np.array([[[6.0, 8.0], [14.0, 16.0]]]))


def test_roipool_layer_in_network():
    spec = nn.NetworkSpec((2, 9, 9), (nn.conv3(2), nn.relu(), nn.roipool(3),
                                      nn.linear(2), nn.softmax()))
    net = nn.init_network(spec, seed=2)
    out, _ = nn.forward(net, np.random.default_rng(2).random((2, 9, 9)).astype(np.float32))
    assert out.shape == (2,)
    # gradient flows through the adaptive pool too
    assert nn.gradient_check(spec, seed=3) <= 1e-4


# ------------------------------------------------------------ model container

def test_model_roundtrip_bit_exact(tmp_path):
    net = nn.init_network(small_spec(), seed=21)
    path = tmp_path / "m.hcnt"
    nn.save_model(path, net)
    loaded = nn.load_single(path)
    assert loaded.spec == net.spec
    assert loaded.rng_seed == net.rng_seed
    for a, b in zip(net.weights, loaded.weights):
        if a is None:
            assert b is None
        else:
            assert a.kernel.tobytes() == b.kernel.tobytes()
            assert a.bias.tobytes() == b.bias.tobytes()


def test_model_multi_network_and_extras(tmp_path):
    nets = {"trunk": nn.init_network(small_spec(), seed=1),
            "head": nn.init_network(nn.NetworkSpec((4,), (nn.linear(2),)), seed=2)}
    path = tmp_path / "m.hcnt"
    nn.save_model(path, nets, extras={"stride": 8, "scales": [12, 24, 40]})
    loaded, extras = nn.load_model(path)
    assert sorted(loaded) == ["head", "trunk"]
    assert extras == {"stride": 8, "scales": [12, 24, 40]}


def test_model_bad_magic(tmp_path):
    path = tmp_path / "bad.hcnt"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(nn.ModelFormatError):
        nn.load_model(path)


def test_model_truncated(tmp_path):
    net = nn.init_network(small_spec(), seed=21)
    path = tmp_path / "m.hcnt"
    nn.save_model(path, net)
    data = path.read_bytes()
    path.write_bytes(data[:-40])
    with pytest.raises(nn.ModelFormatError):
        nn.load_model(path)

"""Forward/backward execution, losses, SGD schedule, and gradient checking."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .specs import (LayerParams, Network, NetworkSpec, ShapeMismatchError,
                    init_network, param_count)

CROSS_ENTROPY_EPS = 1e-12  # floor under log(); probabilities this small are treated as it


class ActivationError(ValueError):
    """Backward called with activations that do not match the network."""


class TrainingDivergence(RuntimeError):
    """Loss became non-finite during training."""


@dataclass
class Activations:
    """Per-layer forward state retained for one backward pass (batched)."""

    spec: NetworkSpec
    x: np.ndarray
    outputs: list[np.ndarray]
    caches: list[object]


@dataclass
class Gradients:
    """Per-layer weight gradients plus the gradient w.r.t. the network input."""

    layers: list[LayerParams | None]
    input_grad: np.ndarray


def forward_batch(net: Network, x: np.ndarray) -> tuple[np.ndarray, Activations]:
    if x.shape[1:] != net.spec.input_shape:
        raise ShapeMismatchError(
            f"input shape {x.shape[1:]} does not match spec input {net.spec.input_shape}")
    outputs, caches = [], []
    cur = x
    for layer, params in zip(net.spec.layers, net.weights):
        kind = layer.kind
        if kind == "conv3xN":
            cur, cache = ops.conv3x3_forward(cur, params.kernel, params.bias)
        elif kind == "maxpool2x2":
            cur, cache = ops.maxpool2x2_forward(cur)
        elif kind == "relu":
            cur, cache = ops.relu_forward(cur)
        elif kind == "linear":
            cur, cache = ops.linear_forward(cur, params.kernel, params.bias)
        elif kind == "roipool":
            cur, cache = ops.roipool_layer_forward(cur, layer.pool_size)
        elif kind == "softmax":
            cur, cache = ops.softmax_forward(cur)
        else:
            raise AssertionError(kind)
        outputs.append(cur)
        caches.append(cache)
    return cur, Activations(net.spec, x, outputs, caches)


def forward(net: Network, x: np.ndarray) -> tuple[np.ndarray, Activations]:
    """Run one sample through the network; activations feed backward()."""
    if x.shape != net.spec.input_shape:
        raise ShapeMismatchError(
            f"input shape {x.shape} does not match spec input {net.spec.input_shape}")
    out, acts = forward_batch(net, x[None])
    return out[0], acts


def backward_batch(net: Network, acts: Activations, dy: np.ndarray) -> Gradients:
    if acts.spec != net.spec or len(acts.outputs) != len(net.spec.layers):
        raise ActivationError("activations do not belong to this network")
    grads: list[LayerParams | None] = [None] * len(net.spec.layers)
    cur = dy
    for i in range(len(net.spec.layers) - 1, -1, -1):
        kind = net.spec.layers[i].kind
        cache = acts.caches[i]
        if kind == "conv3xN":
            cur, dk, db = ops.conv3x3_backward(cur, net.weights[i].kernel, cache)
            grads[i] = LayerParams(dk, db)
        elif kind == "maxpool2x2":
            cur = ops.maxpool2x2_backward(cur, cache)
        elif kind == "relu":
            cur = ops.relu_backward(cur, cache)
        elif kind == "linear":
            cur, dk, db = ops.linear_backward(cur, net.weights[i].kernel, cache)
            grads[i] = LayerParams(dk, db)
        elif kind == "roipool":
            cur = ops.roipool_layer_backward(cur, cache)
        elif kind == "softmax":
            cur = ops.softmax_backward(cur, cache)
        else:
            raise AssertionError(kind)
    return Gradients(grads, cur)


def backward(net: Network, acts: Activations, loss_grad: np.ndarray) -> Gradients:
    """Gradients of a scalar loss given d(loss)/d(output) for one sample."""
    out_shape = acts.outputs[-1].shape[1:] if acts.outputs else acts.x.shape[1:]
    if loss_grad.shape != out_shape:
        raise ActivationError(
            f"loss_grad shape {loss_grad.shape} does not match output {out_shape}")
    g = backward_batch(net, acts, loss_grad[None])
    return Gradients(g.layers, g.input_grad[0])


# ---------------------------------------------------------------- losses

def cross_entropy(probs: np.ndarray, label: int) -> float:
    """-log p[label] for a normalized distribution."""
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"probs sum to {total}, not a distribution")
    return -float(np.log(max(float(probs[label]), CROSS_ENTROPY_EPS)))


def cross_entropy_grad(probs: np.ndarray, label: int) -> np.ndarray:
    g = np.zeros_like(probs)
    g[label] = -1.0 / max(float(probs[label]), CROSS_ENTROPY_EPS)
    return g


def cross_entropy_batch(probs: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over rows and its gradient w.r.t. probs."""
    n = probs.shape[0]
    picked = np.maximum(probs[np.arange(n), labels], CROSS_ENTROPY_EPS)
    loss = float(-np.log(picked).mean())
    g = np.zeros_like(probs)
    g[np.arange(n), labels] = -1.0 / (picked * n)
    return loss, g


def smooth_l1(pred_box: np.ndarray, target_box: np.ndarray) -> float:
    d = np.asarray(pred_box, dtype=np.float64) - np.asarray(target_box, dtype=np.float64)
    a = np.abs(d)
    per = np.where(a < 1.0, 0.5 * d * d, a - 0.5)
    return float(per.sum())


def smooth_l1_grad(pred_box: np.ndarray, target_box: np.ndarray) -> np.ndarray:
    d = np.asarray(pred_box) - np.asarray(target_box)
    return np.clip(d, -1.0, 1.0)


# ---------------------------------------------------------------- SGD

@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    epochs: int = 20
    initial_lr: float = 0.004
    lr_drop_factor: float = 10.0
    lr_drop_period_epochs: int = 8


def learning_rate(epoch: int, cfg: TrainConfig) -> float:
    return cfg.initial_lr * cfg.lr_drop_factor ** (-(epoch // cfg.lr_drop_period_epochs))


def sgd_update(net: Network, grads: Gradients, epoch: int, cfg: TrainConfig) -> Network:
    """w <- w - lr(epoch) * g; returns a new Network, inputs untouched."""
    lr = learning_rate(epoch, cfg)
    new_weights: list[LayerParams | None] = []
    for w, g in zip(net.weights, grads.layers):
        if w is None:
            new_weights.append(None)
        else:
            new_weights.append(LayerParams(w.kernel - lr * g.kernel, w.bias - lr * g.bias))
    return Network(net.spec, new_weights, net.rng_seed)


def train_classifier(spec: NetworkSpec, features: np.ndarray, labels: np.ndarray,
                     cfg: TrainConfig, seed: int, epoch_hook=None) -> Network:
    """SGD on mean cross-entropy; the spec must end in softmax.

    ``epoch_hook(net, epoch)`` runs after each epoch (used to record probe
    quality curves). Deterministic given (spec, seed, features, labels).
    """
    if spec.layers[-1].kind != "softmax":
        raise ValueError("classifier spec must end with softmax")
    net = init_network(spec, seed)
    rng = np.random.default_rng(seed + 1)
    n = features.shape[0]
    labels = np.asarray(labels)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            probs, acts = forward_batch(net, features[idx])
            loss, dprobs = cross_entropy_batch(probs, labels[idx])
            if not np.isfinite(loss):
                raise TrainingDivergence(f"non-finite loss at epoch {epoch}")
            grads = backward_batch(net, acts, dprobs)
            net = sgd_update(net, grads, epoch, cfg)
        if epoch_hook is not None:
            epoch_hook(net, epoch)
    return net


# ---------------------------------------------------------------- checking

def gradient_check(spec: NetworkSpec, seed: int, samples_per_tensor: int = 4,
                   perturbation: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs in float64 on the quadratic loss L = 0.5*||output||^2 with random
    input; a handful of weights per tensor are probed. Specs are expected
    to stay small (< 1e4 parameters).
    """
    if param_count(spec) >= 10_000:
        raise ValueError("spec too large for finite differences")
    rng = np.random.default_rng(seed)
    net = init_network(spec, seed).astype(np.float64)
    x = rng.standard_normal(spec.input_shape)

    out, acts = forward(net, x)
    grads = backward(net, acts, out.copy())

    def loss_with(layer_idx, which, flat_idx, value) -> float:
        trial = net.copy()
        params = trial.weights[layer_idx]
        arr = params.kernel if which == "kernel" else params.bias
        arr = arr.copy()
        arr.flat[flat_idx] = value
        if which == "kernel":
            trial.weights[layer_idx] = LayerParams(arr, params.bias)
        else:
            trial.weights[layer_idx] = LayerParams(params.kernel, arr)
        y, _ = forward(trial, x)
        return 0.5 * float((y * y).sum())

    worst = 0.0
    for li, params in enumerate(net.weights):
        if params is None:
            continue
        for which in ("kernel", "bias"):
            arr = params.kernel if which == "kernel" else params.bias
            size = arr.size
            picks = rng.choice(size, size=min(samples_per_tensor, size), replace=False)
            for flat_idx in picks:
                w0 = arr.flat[flat_idx]
                lp = loss_with(li, which, flat_idx, w0 + perturbation)
                lm = loss_with(li, which, flat_idx, w0 - perturbation)
                numeric = (lp - lm) / (2 * perturbation)
                g = grads.layers[li]
                analytic = (g.kernel if which == "kernel" else g.bias).flat[flat_idx]
                denom = max(abs(analytic), abs(numeric), 1e-8)
                worst = max(worst, abs(analytic - numeric) / denom)
    return worst

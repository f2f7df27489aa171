"""Declarative network specs, shape propagation, and cost accounting.

Tensors throughout the package are plain numpy arrays, channel-first
(C, H, W) for feature maps, float32 for training and float64 for
numerical checks. The layer vocabulary is deliberately tiny: 3x3
stride-1 pad-1 convolutions, 2x2 stride-2 max pooling, ReLU, linear,
adaptive max pooling to a fixed grid (``roipool``), and softmax.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

LAYER_KINDS = ("conv3xN", "maxpool2x2", "relu", "linear", "roipool", "softmax")


class ShapeMismatchError(ValueError):
    """Input or layer shapes do not line up."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_channels: int | None = None  # conv3xN only
    out_features: int | None = None  # linear only
    pool_size: int | None = None     # roipool only

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}; expected one of {LAYER_KINDS}")
        if self.kind == "conv3xN" and not (self.out_channels and self.out_channels > 0):
            raise ValueError("conv3xN requires positive out_channels")
        if self.kind == "linear" and not (self.out_features and self.out_features > 0):
            raise ValueError("linear requires positive out_features")
        if self.kind == "roipool" and not (self.pool_size and self.pool_size > 0):
            raise ValueError("roipool requires positive pool_size")


def conv3(out_channels: int) -> LayerSpec:
    return LayerSpec("conv3xN", out_channels=out_channels)


def maxpool2x2() -> LayerSpec:
    return LayerSpec("maxpool2x2")


def relu() -> LayerSpec:
    return LayerSpec("relu")


def linear(out_features: int) -> LayerSpec:
    return LayerSpec("linear", out_features=out_features)


def roipool(pool_size: int) -> LayerSpec:
    return LayerSpec("roipool", pool_size=pool_size)


def softmax() -> LayerSpec:
    return LayerSpec("softmax")


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer list plus the input shape it consumes."""

    input_shape: tuple[int, ...]
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if any(s <= 0 for s in self.input_shape):
            raise ValueError(f"input_shape must be positive, got {self.input_shape}")
        self.shapes()  # validate propagation eagerly

    def shapes(self) -> list[tuple[int, ...]]:
        """Output shape after each layer, statically propagated."""
        out = []
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            shape = _propagate(layer, shape, i)
            out.append(shape)
        return out

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.shapes()[-1] if self.layers else self.input_shape


def _propagate(layer: LayerSpec, shape: tuple[int, ...], index: int) -> tuple[int, ...]:
    kind = layer.kind
    if kind == "conv3xN":
        if len(shape) != 3:
            raise ShapeMismatchError(f"layer {index}: conv3xN needs (C,H,W) input, got {shape}")
        return (layer.out_channels, shape[1], shape[2])
    if kind == "maxpool2x2":
        if len(shape) != 3 or shape[1] < 2 or shape[2] < 2:
            raise ShapeMismatchError(f"layer {index}: maxpool2x2 needs (C,H>=2,W>=2), got {shape}")
        return (shape[0], shape[1] // 2, shape[2] // 2)
    if kind == "relu":
        return shape
    if kind == "linear":
        return (layer.out_features,)
    if kind == "roipool":
        if len(shape) != 3:
            raise ShapeMismatchError(f"layer {index}: roipool needs (C,H,W) input, got {shape}")
        return (shape[0], layer.pool_size, layer.pool_size)
    if kind == "softmax":
        if len(shape) != 1:
            raise ShapeMismatchError(f"layer {index}: softmax needs a flat input, got {shape}")
        return shape
    raise AssertionError(kind)


def param_shapes(spec: NetworkSpec) -> list[tuple[tuple[int, ...], tuple[int, ...]] | None]:
    """Per layer: (kernel_shape, bias_shape) for parametric layers, else None."""
    out = []
    shape = spec.input_shape
    for layer in spec.layers:
        if layer.kind == "conv3xN":
            out.append(((layer.out_channels, shape[0], 3, 3), (layer.out_channels,)))
        elif layer.kind == "linear":
            fan_in = int(np.prod(shape))
            out.append(((layer.out_features, fan_in), (layer.out_features,)))
        else:
            out.append(None)
        shape = _propagate(layer, shape, -1)
    return out


def param_count(spec: NetworkSpec) -> int:
    total = 0
    for shapes in param_shapes(spec):
        if shapes is not None:
            k, b = shapes
            total += int(np.prod(k)) + int(np.prod(b))
    return total


def param_memory(spec: NetworkSpec) -> int:
    """Model bytes at 32-bit weights: conv holds (9*C_in+1)*C_out params, linear (in+1)*out."""
    return 4 * param_count(spec)


def param_megabytes(spec: NetworkSpec) -> float:
    return param_memory(spec) / 2**20


def flop_count(spec: NetworkSpec, input_shape: tuple[int, ...] | None = None) -> int:
    """Forward operation count for one input.

    Convention: a multiply-accumulate is 2 ops, so a conv costs
    2*9*C_in*C_out*H_out*W_out and a linear 2*in*out. Pooling, ReLU,
    roipool, and softmax cost one op per output element.
    """
    shape = tuple(spec.input_shape if input_shape is None else input_shape)
    total = 0
    for i, layer in enumerate(spec.layers):
        out_shape = _propagate(layer, shape, i)
        if layer.kind == "conv3xN":
            total += 2 * 9 * shape[0] * layer.out_channels * out_shape[1] * out_shape[2]
        elif layer.kind == "linear":
            total += 2 * int(np.prod(shape)) * layer.out_features
        else:
            total += int(np.prod(out_shape))
        shape = out_shape
    return total


@dataclass
class LayerParams:
    kernel: np.ndarray
    bias: np.ndarray


@dataclass
class Network:
    """A spec plus its weights. Immutable by convention once trained."""

    spec: NetworkSpec
    weights: list[LayerParams | None]
    rng_seed: int = 0

    @property
    def dtype(self):
        for w in self.weights:
            if w is not None:
                return w.kernel.dtype
        return np.dtype(np.float32)

    def astype(self, dtype) -> "Network":
        ws = [None if w is None else LayerParams(w.kernel.astype(dtype), w.bias.astype(dtype))
              for w in self.weights]
        return Network(self.spec, ws, self.rng_seed)

    def copy(self) -> "Network":
        return self.astype(self.dtype)


def init_network(spec: NetworkSpec, seed: int, dtype=np.float32) -> Network:
    """He-style fan-in scaled uniform init, zero biases, deterministic in seed."""
    rng = np.random.default_rng(seed)
    weights: list[LayerParams | None] = []
    for shapes in param_shapes(spec):
        if shapes is None:
            weights.append(None)
            continue
        kshape, bshape = shapes
        fan_in = int(np.prod(kshape[1:]))
        limit = math.sqrt(6.0 / fan_in)
        kernel = rng.uniform(-limit, limit, size=kshape).astype(dtype)
        bias = np.zeros(bshape, dtype=dtype)
        weights.append(LayerParams(kernel, bias))
    return Network(spec, weights, rng_seed=seed)


def spec_to_dict(spec: NetworkSpec) -> dict:
    layers = []
    for layer in spec.layers:
        d = {"kind": layer.kind}
        if layer.out_channels is not None:
            d["out_channels"] = layer.out_channels
        if layer.out_features is not None:
            d["out_features"] = layer.out_features
        if layer.pool_size is not None:
            d["pool_size"] = layer.pool_size
        layers.append(d)
    return {"input_shape": list(spec.input_shape), "layers": layers}


def spec_from_dict(d: dict) -> NetworkSpec:
    layers = tuple(LayerSpec(**layer) for layer in d["layers"])
    return NetworkSpec(tuple(d["input_shape"]), layers)

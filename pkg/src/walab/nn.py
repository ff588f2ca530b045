"""Minimal neural-network stack with hand-written forward/backward passes.

Models are described declaratively (:class:`ModelSpec`), parameters live in
a flat float64 :class:`~walab.ndcore.WeightVector`, and forward/backward
are pure functions of (spec, weights, batch). Summation order is fixed
everywhere, so seeded runs are bit-reproducible.

Compute happens in NHWC layout internally (conv GEMM outputs need no
transposition that way) and may run in float32 via the ``dtype`` argument
for speed; parameters, gradients at the API boundary, and all averaging
state remain float64.

Supported layers: ``input``, ``conv2d`` (stride 1, odd kernel, same
padding), ``maxpool`` (non-overlapping), ``relu``, ``flatten``, ``dense``,
and a combined ``softmax_xent_head``. conv2d/dense carry an optional fused
relu so compact architectures stay compact. There is no batch
normalization and no dropout anywhere, by design: averaged weights must
be directly evaluable without recomputing any auxiliary statistics.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt
from typing import Iterable

import numpy as np

from . import kernels
from .errors import LayoutError, NumericError, SpecError
from .ndcore import WeightVector, layout_hash


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    params: tuple = ()
    act: str = "none"  # "none" or "relu"; only meaningful for conv2d/dense


def input_layer() -> LayerSpec:
    return LayerSpec("input")


def conv2d(in_ch: int, out_ch: int, k: int, act: str = "none") -> LayerSpec:
    return LayerSpec("conv2d", (in_ch, out_ch, k), act)


def maxpool(k: int) -> LayerSpec:
    return LayerSpec("maxpool", (k,))


def relu() -> LayerSpec:
    return LayerSpec("relu")


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


def dense(fan_in: int, fan_out: int, act: str = "none") -> LayerSpec:
    return LayerSpec("dense", (fan_in, fan_out), act)


def softmax_xent_head() -> LayerSpec:
    return LayerSpec("softmax_xent_head")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; shape-checked on construction."""

    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, ...]
    class_count: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        infer_shapes(self)

    @property
    def layer_kinds(self) -> list[str]:
        return [layer.kind for layer in self.layers]


def infer_shapes(spec: ModelSpec) -> list[tuple[int, ...]]:
    """Per-layer output shapes (sans batch dim, (C,H,W) order); SpecError on mismatch."""
    if spec.class_count < 2:
        raise SpecError(f"class_count must be >= 2, got {spec.class_count}")
    if not spec.layers or spec.layers[0].kind != "input":
        raise SpecError("architecture must start with an input layer")
    if spec.layers[-1].kind != "softmax_xent_head":
        raise SpecError("architecture must end with softmax_xent_head")
    shape = spec.input_shape
    shapes = []
    for pos, layer in enumerate(spec.layers):
        kind = layer.kind
        if layer.act not in ("none", "relu"):
            raise SpecError(f"layer {pos}: unknown activation {layer.act!r}")
        if kind == "input":
            if pos != 0:
                raise SpecError("input layer only allowed at position 0")
        elif kind == "conv2d":
            in_ch, out_ch, k = layer.params
            if len(shape) != 3:
                raise SpecError(f"layer {pos}: conv2d needs (C,H,W) input, got {shape}")
            if shape[0] != in_ch:
                raise SpecError(f"layer {pos}: conv2d expects {in_ch} channels, got {shape[0]}")
            if k < 1 or k % 2 == 0:
                raise SpecError(f"layer {pos}: conv2d kernel must be odd, got {k}")
            shape = (out_ch, shape[1], shape[2])
        elif kind == "maxpool":
            (k,) = layer.params
            if len(shape) != 3:
                raise SpecError(f"layer {pos}: maxpool needs (C,H,W) input, got {shape}")
            if shape[1] % k or shape[2] % k:
                raise SpecError(f"layer {pos}: maxpool {k} does not divide {shape[1:]}")
            shape = (shape[0], shape[1] // k, shape[2] // k)
        elif kind == "relu":
            pass
        elif kind == "flatten":
            shape = (int(np.prod(shape)),)
        elif kind == "dense":
            fan_in, fan_out = layer.params
            if len(shape) != 1:
                raise SpecError(f"layer {pos}: dense needs flat input, got {shape}")
            if shape[0] != fan_in:
                raise SpecError(f"layer {pos}: dense expects {fan_in} inputs, got {shape[0]}")
            shape = (fan_out,)
        elif kind == "softmax_xent_head":
            if pos != len(spec.layers) - 1:
                raise SpecError("softmax_xent_head only allowed as the final layer")
            if shape != (spec.class_count,):
                raise SpecError(f"head expects {spec.class_count} logits, got shape {shape}")
        else:
            raise SpecError(f"layer {pos}: unknown kind {kind!r}")
        shapes.append(shape)
    return shapes


def param_shapes(spec: ModelSpec) -> list[tuple[int, str, tuple[int, ...]]]:
    """Ordered (layer index, name, shape) for every trainable array.

    conv2d weights are stored (out_ch, k, k, in_ch) to match the NHWC
    compute layout; dense weights are (fan_in, fan_out).
    """
    out = []
    for pos, layer in enumerate(spec.layers):
        if layer.kind == "conv2d":
            in_ch, out_ch, k = layer.params
            out.append((pos, "weight", (out_ch, k, k, in_ch)))
            out.append((pos, "bias", (out_ch,)))
        elif layer.kind == "dense":
            fan_in, fan_out = layer.params
            out.append((pos, "weight", (fan_in, fan_out)))
            out.append((pos, "bias", (fan_out,)))
    return out


def param_count(spec: ModelSpec) -> int:
    return sum(int(np.prod(shape)) for _, _, shape in param_shapes(spec))


def layout_id(spec: ModelSpec) -> int:
    descr = (
        tuple((l.kind, l.params) for l in spec.layers),
        spec.input_shape,
        spec.class_count,
    )
    return layout_hash(descr)


def _param_slices(spec: ModelSpec):
    slices = {}
    offset = 0
    for pos, name, shape in param_shapes(spec):
        size = int(np.prod(shape))
        slices[(pos, name)] = (slice(offset, offset + size), shape)
        offset += size
    return slices, offset


def init_weights(spec: ModelSpec, seed: int) -> WeightVector:
    """He-style uniform init: weights ~ U(-b, b) with b = sqrt(6/fan_in), biases 0.

    fan_in is the dense input width, or k*k*in_ch for conv kernels. Draw
    order is the layer order, so (spec, seed) fully determines the result.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    total = param_count(spec)
    if total == 0:
        raise SpecError("model has no trainable parameters")
    values = np.zeros(total)
    slices, _ = _param_slices(spec)
    for pos, name, shape in param_shapes(spec):
        if name != "weight":
            continue  # biases stay zero
        fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
        bound = sqrt(6.0 / fan_in)
        sl, _ = slices[(pos, name)]
        values[sl] = rng.uniform(-bound, bound, sl.stop - sl.start)
    return WeightVector(values, layout_id(spec))


def unflatten(spec: ModelSpec, w: WeightVector) -> dict:
    """Read-only views of ``w`` shaped per parameter, keyed by (layer, name)."""
    if w.layout_id != layout_id(spec) or len(w) != param_count(spec):
        raise LayoutError(
            f"weight vector (layout {w.layout_id:#x}, {len(w)} values) does not "
            f"match model (layout {layout_id(spec):#x}, {param_count(spec)} values)"
        )
    slices, _ = _param_slices(spec)
    return {key: w.values[sl].reshape(shape) for key, (sl, shape) in slices.items()}


@dataclass(frozen=True)
class Batch:
    """One mini-batch: unit-scaled inputs plus integer class labels."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.inputs, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if x.shape[0] < 1 or y.shape != (x.shape[0],):
            raise SpecError(f"bad batch shapes: inputs {x.shape}, labels {y.shape}")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.inputs.shape[0]


class _Tape:
    """Per-layer caches kept only when a backward pass will follow."""

    __slots__ = ("entries",)

    def __init__(self):
        self.entries = []


def _cast_params(params: dict, dtype) -> dict:
    if dtype == np.float64:
        return params
    return {key: arr.astype(dtype) for key, arr in params.items()}


def _forward(spec: ModelSpec, params: dict, batch: Batch, tape: _Tape | None, dtype):
    if batch.inputs.shape[1:] != spec.input_shape:
        raise SpecError(
            f"batch shape {batch.inputs.shape[1:]} does not match input {spec.input_shape}"
        )
    y = batch.labels
    if y.min() < 0 or y.max() >= spec.class_count:
        raise SpecError(f"labels outside [0, {spec.class_count})")

    if len(spec.input_shape) == 3:
        # (B, C, H, W) -> NHWC, the layout all conv-stack kernels use.
        x = np.ascontiguousarray(batch.inputs.transpose(0, 2, 3, 1), dtype=dtype)
    else:
        x = np.ascontiguousarray(batch.inputs, dtype=dtype)

    for pos, layer in enumerate(spec.layers):
        kind = layer.kind
        if kind == "input":
            if tape is not None:
                tape.entries.append(None)
        elif kind == "conv2d":
            in_ch, out_ch, k = layer.params
            pad = k // 2
            B, H, W, C = x.shape
            xp = np.zeros((B, H + 2 * pad, W + 2 * pad, C), dtype=x.dtype)
            xp[:, pad:pad + H, pad:pad + W, :] = x
            cols = kernels.im2col(xp, k)
            w_mat = params[(pos, "weight")].reshape(out_ch, k * k * in_ch)
            pre = cols @ w_mat.T
            pre += params[(pos, "bias")]
            if layer.act == "relu":
                mask = pre > 0.0
                out = pre * mask
            else:
                mask, out = None, pre
            if tape is not None:
                tape.entries.append((cols, w_mat, mask, (B, H, W, pad, C)))
            x = out.reshape(B, H, W, out_ch)
        elif kind == "maxpool":
            (k,) = layer.params
            H, W = x.shape[1], x.shape[2]
            x, idx = kernels.maxpool_forward(np.ascontiguousarray(x), k)
            if tape is not None:
                tape.entries.append((idx, H, W))
        elif kind == "relu":
            mask = x > 0.0
            x = x * mask
            if tape is not None:
                tape.entries.append(mask)
        elif kind == "flatten":
            shape = x.shape
            x = x.reshape(shape[0], -1)
            if tape is not None:
                tape.entries.append(shape)
        elif kind == "dense":
            pre = x @ params[(pos, "weight")]
            pre += params[(pos, "bias")]
            if layer.act == "relu":
                mask = pre > 0.0
                out = pre * mask
            else:
                mask, out = None, pre
            if tape is not None:
                tape.entries.append((x, mask))
            x = out
        elif kind == "softmax_xent_head":
            logits = x
            if not np.isfinite(logits).all():
                raise NumericError("non-finite logits in forward pass")
            shifted = logits - logits.max(axis=1, keepdims=True)
            exp = np.exp(shifted)
            total = exp.sum(axis=1, keepdims=True)
            log_probs = shifted - np.log(total)
            n = len(batch)
            loss = -float(np.mean(log_probs[np.arange(n), y], dtype=np.float64))
            acc = float((logits.argmax(axis=1) == y).mean())
            if tape is not None:
                tape.entries.append(exp / total)
            if not np.isfinite(loss):
                raise NumericError("non-finite loss")
            return loss, acc
    raise SpecError("model has no loss head")  # unreachable for validated specs


def forward_loss(
    spec: ModelSpec, w: WeightVector, batch: Batch, dtype=np.float64
) -> tuple[float, float]:
    """Mean cross-entropy and argmax accuracy of ``w`` on ``batch``."""
    params = _cast_params(unflatten(spec, w), dtype)
    return _forward(spec, params, batch, tape=None, dtype=dtype)


def backward(
    spec: ModelSpec, w: WeightVector, batch: Batch, dtype=np.float64
) -> tuple[float, WeightVector]:
    """Loss plus its gradient with respect to every entry of ``w``."""
    params = _cast_params(unflatten(spec, w), dtype)
    tape = _Tape()
    loss, _ = _forward(spec, params, batch, tape, dtype)

    slices, total = _param_slices(spec)
    grad_values = np.zeros(total)
    n = len(batch)

    # Walk the layers backwards; g is d(loss)/d(layer output).
    probs = tape.entries[-1]
    g = probs.copy()
    g[np.arange(n), batch.labels] -= 1.0
    g /= n

    # Gradient wrt the input of the first parametric layer is never used.
    first_parametric = min(
        (pos for pos, layer in enumerate(spec.layers) if layer.kind in ("conv2d", "dense")),
        default=None,
    )

    for pos in range(len(spec.layers) - 2, -1, -1):
        layer = spec.layers[pos]
        kind = layer.kind
        cache = tape.entries[pos]
        if kind == "input":
            break
        if kind == "conv2d":
            in_ch, out_ch, k = layer.params
            cols, w_mat, mask, (B, H, W, pad, C) = cache
            g_flat = g.reshape(B * H * W, out_ch)
            if mask is not None:
                g_flat = g_flat * mask
            sl, _ = slices[(pos, "bias")]
            grad_values[sl] = g_flat.sum(axis=0, dtype=np.float64)
            sl, _ = slices[(pos, "weight")]
            grad_values[sl] = (g_flat.T @ cols).reshape(-1)
            if pos != first_parametric:
                g_cols = g_flat @ w_mat
                g_pad = kernels.col2im_add(
                    np.ascontiguousarray(g_cols), k, B, H + 2 * pad, W + 2 * pad, C
                )
                g = g_pad[:, pad:pad + H, pad:pad + W, :]
            else:
                g = None
        elif kind == "maxpool":
            idx, H, W = cache
            g = kernels.maxpool_backward(np.ascontiguousarray(g), idx, layer.params[0], H, W)
        elif kind == "relu":
            g = g * cache
        elif kind == "flatten":
            g = g.reshape(cache)
        elif kind == "dense":
            x_in, mask = cache
            if mask is not None:
                g = g * mask
            sl, _ = slices[(pos, "bias")]
            grad_values[sl] = g.sum(axis=0, dtype=np.float64)
            sl, _ = slices[(pos, "weight")]
            grad_values[sl] = (x_in.T @ g).reshape(-1)
            g = g @ params[(pos, "weight")].T if pos != first_parametric else None

    grad = WeightVector(grad_values, w.layout_id)
    return loss, grad


def toy_cnn_spec() -> ModelSpec:
    """The 9-layer toy CNN for 32x32x3 inputs and 10 classes.

    input -> conv 3x3 (3->16, relu) -> maxpool 2 -> conv 3x3 (16->32, relu)
    -> maxpool 2 -> flatten -> dense 2048->128 (relu) -> dense 128->10
    -> softmax head. Channel counts and widths are chosen small enough to
    gradient-check and to train on a CPU in minutes.
    """
    return ModelSpec(
        layers=(
            input_layer(),
            conv2d(3, 16, 3, act="relu"),
            maxpool(2),
            conv2d(16, 32, 3, act="relu"),
            maxpool(2),
            flatten(),
            dense(32 * 8 * 8, 128, act="relu"),
            dense(128, 10),
            softmax_xent_head(),
        ),
        input_shape=(3, 32, 32),
        class_count=10,
    )


def mlp_spec(dims: Iterable[int]) -> ModelSpec:
    """Fully connected net: relu between hidden layers, linear final logits."""
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise SpecError(f"mlp needs at least [in, out] dims, got {dims}")
    layers = [input_layer()]
    for i in range(len(dims) - 1):
        last = i == len(dims) - 2
        layers.append(dense(dims[i], dims[i + 1], act="none" if last else "relu"))
    layers.append(softmax_xent_head())
    return ModelSpec(tuple(layers), input_shape=(dims[0],), class_count=dims[-1])

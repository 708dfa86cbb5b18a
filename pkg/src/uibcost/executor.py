"""Reference float64 execution of NetworkSpec blocks on random data.

Layout is HWC. Convolutions use "same" padding (k // 2) so that a stride-s
layer yields ceil(n / s) rows and columns, matching static shape inference.
Batch norm is a per-channel affine ``x * scale + shift``; every activation
is ReLU. Weights are drawn uniformly from [-0.05, 0.05] and BN scales from
[0.9, 1.1] with a seeded numpy Generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ir import (
    AvgPool,
    BlockSpec,
    Conv2D,
    Dense,
    DWConv,
    FusedIB,
    IRError,
    MobileMQA,
    NetworkSpec,
    TensorShape,
    UIB,
    block_output_shape,
    has_residual,
    propagate_shapes,
)

WEIGHT_RANGE = 0.05

Weights = Dict[str, np.ndarray]


class ShapeError(IRError):
    pass


@dataclass
class Tensor:
    data: np.ndarray  # (h, w, c)

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ShapeError(f"expected an HWC array, got {self.data.ndim} dims")

    @property
    def shape(self) -> TensorShape:
        return TensorShape(*self.data.shape)

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.data).all())


# ---------------------------------------------------------------- primitives


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _windows(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    p = k // 2
    xp = np.pad(x, ((p, p), (p, p), (0, 0)))
    return sliding_window_view(xp, (k, k), axis=(0, 1))[::stride, ::stride]  # (ho, wo, c, k, k)


def conv2d(x: np.ndarray, w: np.ndarray, stride: int = 1) -> np.ndarray:
    """x: (h, w, c_in); w: (k, k, c_in, c_out)."""
    k = w.shape[0]
    if k == 1:
        return x[::stride, ::stride] @ w[0, 0]
    win = _windows(x, k, stride)
    return np.tensordot(win, w.transpose(2, 0, 1, 3), axes=([2, 3, 4], [0, 1, 2]))


def depthwise(x: np.ndarray, w: np.ndarray, stride: int = 1) -> np.ndarray:
    """x: (h, w, c); w: (k, k, c)."""
    win = _windows(x, w.shape[0], stride)
    return np.einsum("hwckl,klc->hwc", win, w)


def batch_norm(x: np.ndarray, wts: Weights, prefix: str) -> np.ndarray:
    return x * wts[prefix + "bn_scale"] + wts[prefix + "bn_shift"]


def attention(q, k, v, logit_shift: float = 0.0, return_probs: bool = False):
    """Scaled dot-product attention with shared or grouped K/V.

    q: (n, heads, d); k, v: (m, kv_heads, d) with heads % kv_heads == 0.
    Returns (n, heads, d) and optionally the (heads, n, m) probabilities.
    `logit_shift` is added to every logit; softmax makes it a no-op.
    """
    heads, kv_heads, d = q.shape[1], k.shape[1], q.shape[2]
    group = heads // kv_heads
    k_h = np.repeat(k, group, axis=1)
    v_h = np.repeat(v, group, axis=1)
    logits = np.einsum("nhd,mhd->hnm", q, k_h) / np.sqrt(d) + logit_shift
    probs = softmax(logits, axis=-1)
    out = np.einsum("hnm,mhd->nhd", probs, v_h)
    return (out, probs) if return_probs else out


# ---------------------------------------------------------------- weights


def _uniform(rng: np.random.Generator, *shape) -> np.ndarray:
    return rng.uniform(-WEIGHT_RANGE, WEIGHT_RANGE, size=shape)


def _bn(rng: np.random.Generator, c: int, prefix: str = "") -> Weights:
    return {prefix + "bn_scale": rng.uniform(0.9, 1.1, size=c), prefix + "bn_shift": _uniform(rng, c)}


def init_block_weights(block: BlockSpec, x: TensorShape, rng: np.random.Generator) -> Weights:
    c = x.c
    w: Weights = {}
    if isinstance(block, Conv2D):
        w["w"] = _uniform(rng, block.kernel, block.kernel, c, block.out_c)
        if block.followed_by_bn:
            w.update(_bn(rng, block.out_c))
        if block.bias:
            w["b"] = _uniform(rng, block.out_c)
    elif isinstance(block, DWConv):
        w["w"] = _uniform(rng, block.kernel, block.kernel, c)
        w.update(_bn(rng, c))
    elif isinstance(block, FusedIB):
        w["fused"] = _uniform(rng, block.kernel, block.kernel, c, block.expanded_c)
        w.update(_bn(rng, block.expanded_c, "fused_"))
        w["project"] = _uniform(rng, 1, 1, block.expanded_c, block.out_c)
        w.update(_bn(rng, block.out_c, "project_"))
    elif isinstance(block, UIB):
        if block.start_dw is not None:
            w["start_dw"] = _uniform(rng, block.start_dw, block.start_dw, c)
            w.update(_bn(rng, c, "start_dw_"))
        w["expand"] = _uniform(rng, 1, 1, c, block.expanded_c)
        w.update(_bn(rng, block.expanded_c, "expand_"))
        if block.mid_dw is not None:
            w["mid_dw"] = _uniform(rng, block.mid_dw, block.mid_dw, block.expanded_c)
            w.update(_bn(rng, block.expanded_c, "mid_dw_"))
        w["project"] = _uniform(rng, 1, 1, block.expanded_c, block.out_c)
        w.update(_bn(rng, block.out_c, "project_"))
    elif isinstance(block, MobileMQA):
        dq, dkv = block.num_heads * block.head_dim, block.kv_heads * block.head_dim
        if block.kv_stride == 2:
            w["kv_dw"] = _uniform(rng, 3, 3, c)
            w.update(_bn(rng, c, "kv_dw_"))
        w["q"] = _uniform(rng, c, dq)
        w["k"] = _uniform(rng, c, dkv)
        w["v"] = _uniform(rng, c, dkv)
        w["o"] = _uniform(rng, dq, c)
    elif isinstance(block, Dense):
        w["w"] = _uniform(rng, c, block.out_c)
        if block.bias:
            w["b"] = _uniform(rng, block.out_c)
    return w


def init_weights(net: NetworkSpec, seed: int = 0) -> List[Weights]:
    rng = np.random.default_rng(seed)
    return [init_block_weights(r.block, r.input, rng) for r in propagate_shapes(net)]


# ---------------------------------------------------------------- execution


@dataclass
class BlockTrace:
    output: Tensor
    attention_probs: Optional[np.ndarray] = None


def _run_uib(b: UIB, x: np.ndarray, w: Weights) -> np.ndarray:
    s_start = b.stride if (b.start_dw is not None and b.mid_dw is None) else 1
    s_expand = b.stride if (b.start_dw is None and b.mid_dw is None) else 1
    y = x
    if b.start_dw is not None:
        y = batch_norm(depthwise(y, w["start_dw"], s_start), w, "start_dw_")
    y = relu(batch_norm(conv2d(y, w["expand"], s_expand), w, "expand_"))
    if b.mid_dw is not None:
        y = relu(batch_norm(depthwise(y, w["mid_dw"], b.stride), w, "mid_dw_"))
    return batch_norm(conv2d(y, w["project"]), w, "project_")


def _run_mqa(b: MobileMQA, x: np.ndarray, w: Weights, logit_shift: float = 0.0):
    h, wd, c = x.shape
    tokens = x.reshape(-1, c)
    kv_src = x
    if b.kv_stride == 2:
        kv_src = batch_norm(depthwise(x, w["kv_dw"], 2), w, "kv_dw_")
    kv_tokens = kv_src.reshape(-1, c)
    q = (tokens @ w["q"]).reshape(len(tokens), b.num_heads, b.head_dim)
    k = (kv_tokens @ w["k"]).reshape(len(kv_tokens), b.kv_heads, b.head_dim)
    v = (kv_tokens @ w["v"]).reshape(len(kv_tokens), b.kv_heads, b.head_dim)
    out, probs = attention(q, k, v, logit_shift, return_probs=True)
    y = out.reshape(len(tokens), -1) @ w["o"]
    return y.reshape(h, wd, c), probs


def run_block_traced(block: BlockSpec, x: Tensor, weights: Weights, logit_shift: float = 0.0) -> BlockTrace:
    """Execute one block (including its residual add, if any)."""
    xs = x.shape
    expected = block_output_shape(block, xs)
    a = x.data
    probs = None
    if isinstance(block, Conv2D):
        y = conv2d(a, weights["w"], block.stride)
        if block.followed_by_bn:
            y = batch_norm(y, weights, "")
        if block.bias:
            y = y + weights["b"]
        if block.activation is not None:
            y = relu(y)
    elif isinstance(block, DWConv):
        y = relu(batch_norm(depthwise(a, weights["w"], block.stride), weights, ""))
    elif isinstance(block, FusedIB):
        y = relu(batch_norm(conv2d(a, weights["fused"], block.stride), weights, "fused_"))
        y = batch_norm(conv2d(y, weights["project"]), weights, "project_")
    elif isinstance(block, UIB):
        y = _run_uib(block, a, weights)
    elif isinstance(block, MobileMQA):
        y, probs = _run_mqa(block, a, weights, logit_shift)
    elif isinstance(block, AvgPool):
        y = a.mean(axis=(0, 1), keepdims=True)
    elif isinstance(block, Dense):
        if a.shape[:2] != (1, 1):
            raise ShapeError(f"dense layer needs a 1x1 input, got {xs}")
        y = a.reshape(1, -1) @ weights["w"]
        if block.bias:
            y = y + weights["b"]
        y = y.reshape(1, 1, -1)
    else:
        raise ShapeError(f"cannot execute {block!r}")
    if tuple(y.shape) != (expected.h, expected.w, expected.c):
        raise ShapeError(f"{block.kind}: executed shape {y.shape} != predicted {expected}")
    if has_residual(block, xs, expected):
        y = y + a
    return BlockTrace(Tensor(y), probs)


def run_block(block: BlockSpec, x: Tensor, weights: Weights) -> Tensor:
    return run_block_traced(block, x, weights).output


@dataclass
class ExecutionResult:
    output: Tensor
    shapes: List[TensorShape] = field(default_factory=list)
    attention_probs: List[np.ndarray] = field(default_factory=list)

    @property
    def logits(self) -> np.ndarray:
        return self.output.data.reshape(-1)


def random_input(shape: TensorShape, seed: int = 0) -> Tensor:
    rng = np.random.default_rng(seed)
    return Tensor(rng.standard_normal((shape.h, shape.w, shape.c)))


def run_network(net: NetworkSpec, seed: int = 0, resolution: Optional[int] = None) -> ExecutionResult:
    """Run `net` on a seeded random input, optionally at a reduced resolution."""
    if resolution is not None:
        net = net.with_resolution(resolution)
    weights = init_weights(net, seed)
    x = random_input(net.input_shape, seed + 1)
    result = ExecutionResult(x)
    for rec, w in zip(propagate_shapes(net), weights):
        trace = run_block_traced(rec.block, x, w)
        x = trace.output
        if x.shape != rec.output:
            raise ShapeError(f"block {rec.index}: executed {x.shape} != propagated {rec.output}")
        result.shapes.append(x.shape)
        if trace.attention_probs is not None:
            result.attention_probs.append(trace.attention_probs)
    result.output = x
    return result

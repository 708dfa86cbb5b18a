"""Analytic MAC, parameter and memory-traffic accounting.

Conventions:
  * one MAC is one multiply-accumulate;
  * a conv followed by batch norm has no bias; BN adds 2 params per channel
    and no MACs; activations are free;
  * traffic model: a block reads its input once, writes its output once and
    streams its weights once (no fusion or cache modelling).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from typing import List, Optional, Tuple

from .ir import (
    AvgPool,
    BlockSpec,
    Conv2D,
    Dense,
    DWConv,
    FusedIB,
    MobileMQA,
    NetworkSpec,
    TensorShape,
    UIB,
    block_output_shape,
    downsample,
    insert_blocks,
    propagate_shapes,
    replace_blocks,
    stages,
)


@dataclass(frozen=True)
class DtypeWidths:
    weights: int = 1
    activations: int = 1


INT8 = DtypeWidths(1, 1)
FP16 = DtypeWidths(2, 2)
DTYPES = {"int8": INT8, "fp16": FP16, "fp32": DtypeWidths(4, 4)}


@dataclass(frozen=True)
class BlockCost:
    macs: int
    params: int
    weight_bytes: int
    act_in_bytes: int
    act_out_bytes: int
    kind: str = ""

    @property
    def bytes(self) -> int:
        return self.weight_bytes + self.act_in_bytes + self.act_out_bytes

    @property
    def op_intensity(self) -> float:
        b = self.bytes
        return self.macs / b if b else float("inf")


@dataclass(frozen=True)
class CostReport:
    name: str
    per_block: Tuple[BlockCost, ...]
    dtype_widths: DtypeWidths = INT8

    @property
    def total_macs(self) -> int:
        return sum(b.macs for b in self.per_block)

    @property
    def total_params(self) -> int:
        return sum(b.params for b in self.per_block)

    @property
    def total_bytes(self) -> int:
        return sum(b.bytes for b in self.per_block)

    @property
    def op_intensity(self) -> float:
        return self.total_macs / self.total_bytes

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dtype_widths": asdict(self.dtype_widths),
            "total_macs": self.total_macs,
            "total_params": self.total_params,
            "total_bytes": self.total_bytes,
            "blocks": [
                {"index": i, "kind": b.kind, "macs": b.macs, "params": b.params, "bytes": b.bytes,
                 "op_intensity": b.op_intensity}
                for i, b in enumerate(self.per_block)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "kind", "macs", "params", "bytes", "op_intensity"])
        for i, b in enumerate(self.per_block):
            w.writerow([i, b.kind, b.macs, b.params, b.bytes, f"{b.op_intensity:.6g}"])
        return buf.getvalue()


# Sub-layer primitives: each returns (macs, params) for one layer.

def conv_cost(h_out: int, w_out: int, k: int, c_in: int, c_out: int, bn: bool = True, bias: bool = False):
    macs = h_out * w_out * k * k * c_in * c_out
    params = k * k * c_in * c_out + (2 * c_out if bn else 0) + (c_out if bias else 0)
    return macs, params


def dw_cost(h_out: int, w_out: int, k: int, c: int, bn: bool = True):
    return h_out * w_out * k * k * c, k * k * c + (2 * c if bn else 0)


def _sum(*parts):
    return sum(p[0] for p in parts), sum(p[1] for p in parts)


def uib_sublayers(block: UIB, x: TensorShape) -> List[Tuple[str, int, int]]:
    """(name, macs, params) for each present sub-layer of a UIB block."""
    s = block.stride
    h, w, c = x.h, x.w, x.c
    out = []
    stride_on_start = block.start_dw is not None and block.mid_dw is None
    stride_on_expand = block.start_dw is None and block.mid_dw is None
    if block.start_dw is not None:
        st = s if stride_on_start else 1
        h, w = downsample(h, st), downsample(w, st)
        out.append(("start_dw", *dw_cost(h, w, block.start_dw, c)))
    st = s if stride_on_expand else 1
    h, w = downsample(h, st), downsample(w, st)
    out.append(("expand", *conv_cost(h, w, 1, c, block.expanded_c)))
    if block.mid_dw is not None:
        h, w = downsample(h, s), downsample(w, s)
        out.append(("mid_dw", *dw_cost(h, w, block.mid_dw, block.expanded_c)))
    out.append(("project", *conv_cost(h, w, 1, block.expanded_c, block.out_c)))
    return out


def mqa_sublayers(block: MobileMQA, x: TensorShape) -> List[Tuple[str, int, int]]:
    n = x.h * x.w
    c = x.c
    d_q = block.num_heads * block.head_dim
    d_kv = block.kv_heads * block.head_dim
    out = []
    if block.kv_stride == 2:
        hr, wr = downsample(x.h, 2), downsample(x.w, 2)
        out.append(("kv_dw", *dw_cost(hr, wr, 3, c)))
        m = hr * wr
    else:
        m = n
    out.append(("q_proj", n * c * d_q, c * d_q))
    out.append(("k_proj", m * c * d_kv, c * d_kv))
    out.append(("v_proj", m * c * d_kv, c * d_kv))
    out.append(("logits", n * m * block.head_dim * block.num_heads, 0))
    out.append(("weighted_sum", n * m * block.head_dim * block.num_heads, 0))
    out.append(("o_proj", n * d_q * c, d_q * c))
    return out


def _macs_params(block: BlockSpec, x: TensorShape, y: TensorShape) -> Tuple[int, int]:
    if isinstance(block, Conv2D):
        return conv_cost(y.h, y.w, block.kernel, x.c, block.out_c, block.followed_by_bn, block.bias)
    if isinstance(block, DWConv):
        return dw_cost(y.h, y.w, block.kernel, x.c)
    if isinstance(block, FusedIB):
        return _sum(
            conv_cost(y.h, y.w, block.kernel, x.c, block.expanded_c),
            conv_cost(y.h, y.w, 1, block.expanded_c, block.out_c),
        )
    if isinstance(block, UIB):
        subs = uib_sublayers(block, x)
        return sum(s[1] for s in subs), sum(s[2] for s in subs)
    if isinstance(block, MobileMQA):
        subs = mqa_sublayers(block, x)
        return sum(s[1] for s in subs), sum(s[2] for s in subs)
    if isinstance(block, AvgPool):
        return x.numel, 0
    if isinstance(block, Dense):
        return x.c * block.out_c, x.c * block.out_c + (block.out_c if block.bias else 0)
    raise TypeError(f"no cost rule for {block!r}")


def block_cost(block: BlockSpec, in_shape: TensorShape, dtype_widths: DtypeWidths = INT8) -> BlockCost:
    y = block_output_shape(block, in_shape)
    macs, params = _macs_params(block, in_shape, y)
    kind = block.variant if isinstance(block, UIB) else block.kind
    return BlockCost(
        macs=macs,
        params=params,
        weight_bytes=params * dtype_widths.weights,
        act_in_bytes=in_shape.numel * dtype_widths.activations,
        act_out_bytes=y.numel * dtype_widths.activations,
        kind=kind,
    )


def network_cost(net: NetworkSpec, dtype_widths: DtypeWidths = INT8) -> CostReport:
    per_block = tuple(block_cost(r.block, r.input, dtype_widths) for r in propagate_shapes(net))
    return CostReport(net.name, per_block, dtype_widths)


def attention_block(variant: str, channels: int, head_dim: int = 64, kv_stride: int = 1) -> MobileMQA:
    """MHSA or MQA block whose query width equals the channel count."""
    heads = max(1, channels // head_dim)
    if variant == "mhsa":
        return MobileMQA(heads, head_dim, kv_stride, kv_heads=heads)
    if variant == "mqa":
        return MobileMQA(heads, head_dim, kv_stride, kv_heads=1)
    raise ValueError(f"variant must be 'mhsa' or 'mqa', got {variant!r}")


def attention_delta(
    base: NetworkSpec,
    variant: str,
    count: int,
    stage: int = -1,
    dtype_widths: DtypeWidths = INT8,
    head_dim: int = 64,
) -> Tuple[CostReport, CostReport]:
    """Cost of `base` and of `base` with `count` attention blocks appended to body stage `stage`."""
    body = stages(base)
    where = body[stage]
    c = propagate_shapes(base)[where[-1]].output.c
    new = [attention_block(variant, c, head_dim)] * count
    variant_net = insert_blocks(base, where.stop, new, name=f"{base.name}+{count}{variant}")
    return network_cost(base, dtype_widths), network_cost(variant_net, dtype_widths)


@dataclass(frozen=True)
class KVDownsampleDelta:
    macs_kv1: int
    macs_kv2: int

    @property
    def relative_change(self) -> float:
        return (self.macs_kv2 - self.macs_kv1) / self.macs_kv1


def with_kv_stride(net: NetworkSpec, kv_stride: int, only: Optional[set] = None) -> NetworkSpec:
    def swap(i, b):
        if isinstance(b, MobileMQA) and (only is None or i in only):
            return MobileMQA(b.num_heads, b.head_dim, kv_stride, b.kv_heads)
        return b

    return replace_blocks(net, swap)


def kv_downsample_delta(net: NetworkSpec, only: Optional[set] = None) -> KVDownsampleDelta:
    """MAC change from switching MQA blocks (all, or indices in `only`) from KV stride 1 to 2."""
    if not any(isinstance(b, MobileMQA) for b in net.blocks):
        raise ValueError(f"{net.name} has no MQA blocks")
    kv1 = network_cost(with_kv_stride(net, 1, only)).total_macs
    kv2 = network_cost(with_kv_stride(net, 2, only)).total_macs
    return KVDownsampleDelta(kv1, kv2)


def penultimate_mqa_indices(net: NetworkSpec) -> set:
    """MQA blocks in the second-to-last body stage (where KV downsampling is applied)."""
    body = stages(net)
    return {i for i in body[-2] if isinstance(net.blocks[i], MobileMQA)}

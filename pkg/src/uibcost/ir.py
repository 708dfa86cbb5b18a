"""Block-level intermediate representation for mobile networks.

A network is an ordered tuple of block specs applied to a square RGB input.
Residual connections are implicit: a stride-1 block whose input and output
channel counts agree carries a skip connection (MobileNetV2 convention).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union


class IRError(ValueError):
    """Base class for malformed network descriptions."""


class ChannelMismatch(IRError):
    def __init__(self, block_index: int, expected: int, got: int):
        self.block_index = block_index
        self.expected = expected
        self.got = got
        super().__init__(
            f"block {block_index}: expects {expected} input channels, predecessor produces {got}"
        )


class ValidationError(IRError):
    pass


@dataclass(frozen=True)
class TensorShape:
    h: int
    w: int
    c: int

    def __post_init__(self):
        if self.h < 1 or self.w < 1 or self.c < 1:
            raise ValidationError(f"non-positive tensor shape {self}")

    @property
    def numel(self) -> int:
        return self.h * self.w * self.c

    def __str__(self) -> str:
        return f"{self.h}x{self.w}x{self.c}"


def _check_kernel(k: Optional[int], what: str) -> None:
    if k is None:
        return
    if not isinstance(k, int) or isinstance(k, bool) or k < 1 or k % 2 == 0:
        raise ValidationError(f"{what} must be an odd positive int, got {k!r}")


def _check_stride(s: int) -> None:
    if s not in (1, 2):
        raise ValidationError(f"stride must be 1 or 2, got {s!r}")


def _check_channels(c: int, what: str) -> None:
    if not isinstance(c, int) or isinstance(c, bool) or c < 1:
        raise ValidationError(f"{what} must be a positive int, got {c!r}")


def downsample(n: int, stride: int) -> int:
    return -(-n // stride)


@dataclass(frozen=True)
class Conv2D:
    kernel: int
    stride: int
    out_c: int
    followed_by_bn: bool = True
    bias: bool = False
    activation: Optional[str] = "relu"

    kind = "conv2d"

    def __post_init__(self):
        _check_kernel(self.kernel, "kernel")
        _check_stride(self.stride)
        _check_channels(self.out_c, "out_c")


@dataclass(frozen=True)
class DWConv:
    """Standalone depthwise conv (+BN, ReLU); used by the MobileNet V1/V2 baselines."""

    kernel: int
    stride: int = 1

    kind = "dwconv"

    def __post_init__(self):
        _check_kernel(self.kernel, "kernel")
        _check_stride(self.stride)


@dataclass(frozen=True)
class FusedIB:
    kernel: int
    stride: int
    expanded_c: int
    out_c: int

    kind = "fused_ib"

    def __post_init__(self):
        _check_kernel(self.kernel, "kernel")
        _check_stride(self.stride)
        _check_channels(self.expanded_c, "expanded_c")
        _check_channels(self.out_c, "out_c")


@dataclass(frozen=True)
class UIB:
    """Universal inverted bottleneck: [start DW] -> 1x1 expand -> [mid DW] -> 1x1 project.

    The stride is carried by the mid DW when present, otherwise by the start
    DW, otherwise by the expansion conv.
    """

    start_dw: Optional[int]
    mid_dw: Optional[int]
    expanded_c: int
    out_c: int
    stride: int = 1

    kind = "uib"

    def __post_init__(self):
        _check_kernel(self.start_dw, "start_dw")
        _check_kernel(self.mid_dw, "mid_dw")
        _check_stride(self.stride)
        _check_channels(self.expanded_c, "expanded_c")
        _check_channels(self.out_c, "out_c")

    @property
    def variant(self) -> str:
        return uib_variant(self.start_dw, self.mid_dw)


def uib_variant(start_dw: Optional[int], mid_dw: Optional[int]) -> str:
    if start_dw is not None and mid_dw is not None:
        return "ExtraDW"
    if mid_dw is not None:
        return "IB"
    if start_dw is not None:
        return "ConvNext"
    return "FFN"


@dataclass(frozen=True)
class MobileMQA:
    """Attention over all spatial tokens with `num_heads` query heads.

    `kv_heads` = 1 is multi-query attention; `kv_heads` = `num_heads` is plain
    multi-head attention. With `kv_stride` = 2 keys and values are computed
    from a 3x3 stride-2 depthwise reduction of the input.
    """

    num_heads: int
    head_dim: int = 64
    kv_stride: int = 1
    kv_heads: int = 1

    kind = "mqa"

    def __post_init__(self):
        _check_channels(self.num_heads, "num_heads")
        _check_channels(self.head_dim, "head_dim")
        _check_stride(self.kv_stride)
        _check_channels(self.kv_heads, "kv_heads")
        if self.num_heads % self.kv_heads:
            raise ValidationError("num_heads must be a multiple of kv_heads")


@dataclass(frozen=True)
class AvgPool:
    """Global average pool over the full spatial extent."""

    kind = "avgpool"


@dataclass(frozen=True)
class Dense:
    out_c: int
    bias: bool = True

    kind = "dense"

    def __post_init__(self):
        _check_channels(self.out_c, "out_c")


BlockSpec = Union[Conv2D, DWConv, FusedIB, UIB, MobileMQA, AvgPool, Dense]
BLOCK_TYPES = (Conv2D, DWConv, FusedIB, UIB, MobileMQA, AvgPool, Dense)


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    input_res: int
    blocks: Tuple[BlockSpec, ...]
    input_c: int = 3
    top1_accuracy: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        _check_channels(self.input_res, "input_res")
        _check_channels(self.input_c, "input_c")
        for i, b in enumerate(self.blocks):
            if not isinstance(b, BLOCK_TYPES):
                raise ValidationError(f"block {i}: unknown block type {type(b).__name__}")

    @property
    def input_shape(self) -> TensorShape:
        return TensorShape(self.input_res, self.input_res, self.input_c)

    def with_resolution(self, res: int) -> "NetworkSpec":
        return NetworkSpec(self.name, res, self.blocks, self.input_c, self.top1_accuracy)


@dataclass(frozen=True)
class ShapeRecord:
    index: int
    block: BlockSpec
    input: TensorShape
    output: TensorShape
    residual: bool


def block_output_shape(block: BlockSpec, x: TensorShape) -> TensorShape:
    if isinstance(block, (Conv2D, FusedIB, UIB)):
        return TensorShape(downsample(x.h, block.stride), downsample(x.w, block.stride), block.out_c)
    if isinstance(block, DWConv):
        return TensorShape(downsample(x.h, block.stride), downsample(x.w, block.stride), x.c)
    if isinstance(block, MobileMQA):
        return x
    if isinstance(block, AvgPool):
        return TensorShape(1, 1, x.c)
    if isinstance(block, Dense):
        return TensorShape(1, 1, block.out_c)
    raise ValidationError(f"unknown block {block!r}")


def has_residual(block: BlockSpec, x: TensorShape, y: TensorShape) -> bool:
    if isinstance(block, MobileMQA):
        return True
    if isinstance(block, (UIB, FusedIB)):
        return block.stride == 1 and x.c == y.c
    return False


def propagate_shapes(net: NetworkSpec) -> List[ShapeRecord]:
    """Static shape inference; one record per block.

    Every block derives its input channels from its predecessor, so the only
    channel constraint is on Dense, which requires a 1x1 spatial input whose
    channel count it consumes.
    """
    if not net.blocks:
        raise ValidationError(f"network {net.name!r} has no blocks")
    x = net.input_shape
    records = []
    for i, block in enumerate(net.blocks):
        if isinstance(block, Dense) and (x.h, x.w) != (1, 1):
            raise ValidationError(f"block {i}: dense layer needs a pooled 1x1 input, got {x}")
        y = block_output_shape(block, x)
        records.append(ShapeRecord(i, block, x, y, has_residual(block, x, y)))
        x = y
    return records


def check_channels(net: NetworkSpec, declared_inputs: List[Optional[int]]) -> None:
    """Validate explicitly declared per-block input channel counts (e.g. from a file)."""
    for rec, c_in in zip(propagate_shapes(net), declared_inputs):
        if c_in is not None and c_in != rec.input.c:
            raise ChannelMismatch(rec.index, c_in, rec.input.c)


def output_shape(net: NetworkSpec) -> TensorShape:
    return propagate_shapes(net)[-1].output


def head_start(net: NetworkSpec) -> int:
    """Index of the first head layer (everything after the last body block)."""
    last_body = -1
    for i, b in enumerate(net.blocks):
        if isinstance(b, (UIB, FusedIB, MobileMQA, DWConv)):
            last_body = i
    return last_body + 1


def stages(net: NetworkSpec) -> List[range]:
    """Body stages: a new stage starts at every stride-2 block. Head layers are excluded."""
    end = head_start(net)
    starts = [0] + [i for i, b in enumerate(net.blocks[:end]) if i > 0 and getattr(b, "stride", 1) == 2]
    bounds = starts + [end]
    return [range(a, b) for a, b in zip(bounds, bounds[1:]) if b > a]


def insert_blocks(net: NetworkSpec, at: int, new: List[BlockSpec], name: Optional[str] = None) -> NetworkSpec:
    blocks = net.blocks[:at] + tuple(new) + net.blocks[at:]
    return NetworkSpec(name or net.name, net.input_res, blocks, net.input_c, net.top1_accuracy)


def replace_blocks(net: NetworkSpec, mapping, name: Optional[str] = None) -> NetworkSpec:
    """Return a copy with `mapping(index, block) -> block` applied to every block."""
    blocks = tuple(mapping(i, b) for i, b in enumerate(net.blocks))
    return NetworkSpec(name or net.name, net.input_res, blocks, net.input_c, net.top1_accuracy)

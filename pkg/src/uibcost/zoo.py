"""Built-in networks: the five MobileNetV4 models and MobileNet V1/V2/V3 baselines.

MNv4 rows are ``(block, dw_k1, dw_k2, expanded, out, stride)``. Mobile-MQA
rows use the defaults in :func:`mqa_for`.
"""

from __future__ import annotations

from typing import Callable, Dict, List, Optional

from .ir import AvgPool, BlockSpec, Conv2D, Dense, DWConv, FusedIB, MobileMQA, NetworkSpec, UIB

MQA_HEAD_DIM = 64

_CONV_S = [
    ("conv", None, 3, None, 32, 2),
    ("fused", None, 3, 32, 32, 2),
    ("fused", None, 3, 96, 64, 2),
    ("uib", 5, 5, 192, 96, 2),
    ("uib", None, 3, 192, 96, 1),
    ("uib", None, 3, 192, 96, 1),
    ("uib", None, 3, 192, 96, 1),
    ("uib", None, 3, 192, 96, 1),
    ("uib", 3, None, 384, 96, 1),
    ("uib", 3, 3, 576, 128, 2),
    ("uib", 5, 5, 512, 128, 1),
    ("uib", None, 5, 512, 128, 1),
    ("uib", None, 5, 384, 128, 1),
    ("uib", None, 3, 512, 128, 1),
    ("uib", None, 3, 512, 128, 1),
]

_CONV_M = [
    ("conv", None, 3, None, 32, 2),
    ("fused", None, 3, 128, 48, 2),
    ("uib", 3, 5, 192, 80, 2),
    ("uib", 3, 3, 160, 80, 1),
    ("uib", 3, 5, 480, 160, 2),
    ("uib", 3, 3, 640, 160, 1),
    ("uib", 3, 3, 640, 160, 1),
    ("uib", 3, 5, 640, 160, 1),
    ("uib", 3, 3, 640, 160, 1),
    ("uib", 3, None, 640, 160, 1),
    ("uib", None, None, 320, 160, 1),
    ("uib", 3, None, 640, 160, 1),
    ("uib", 5, 5, 960, 256, 2),
    ("uib", 5, 5, 1024, 256, 1),
    ("uib", 3, 5, 1024, 256, 1),
    ("uib", 3, 5, 1024, 256, 1),
    ("uib", None, None, 1024, 256, 1),
    ("uib", 3, None, 1024, 256, 1),
    ("uib", 3, 5, 512, 256, 1),
    ("uib", 5, 5, 1024, 256, 1),
    ("uib", None, None, 1024, 256, 1),
    ("uib", None, None, 1024, 256, 1),
    ("uib", 5, None, 512, 256, 1),
]

_HYBRID_M = [
    ("conv", None, 3, None, 32, 2),
    ("fused", None, 3, 128, 48, 2),
    ("uib", 3, 5, 192, 80, 2),
    ("uib", 3, 3, 160, 80, 1),
    ("uib", 3, 5, 480, 160, 2),
    ("uib", 3, 3, 640, 160, 1),
    ("uib", 3, 3, 640, 160, 1),
    ("uib", 3, 5, 640, 160, 1),
    ("mqa", None, None, None, 160, 1),
    ("uib", 3, 3, 640, 160, 1),
    ("mqa", None, None, None, 160, 1),
    ("uib", 3, None, 640, 160, 1),
    ("mqa", None, None, None, 160, 1),
    ("uib", None, None, 640, 160, 1),
    ("mqa", None, None, None, 160, 1),
    ("uib", 3, None, 640, 160, 1),
    ("uib", 5, 5, 960, 256, 2),
    ("uib", 5, 5, 1024, 256, 1),
    ("uib", 3, 5, 1024, 256, 1),
    ("uib", 3, 5, 1024, 256, 1),
    ("uib", None, None, 1024, 256, 1),
    ("uib", 3, None, 1024, 256, 1),
    ("uib", 3, 5, 512, 256, 1),
    ("mqa", None, None, None, 256, 1),
    ("uib", 5, 5, 1024, 256, 1),
    ("mqa", None, None, None, 256, 1),
    ("uib", None, None, 1024, 256, 1),
    ("mqa", None, None, None, 256, 1),
    ("uib", None, None, 1024, 256, 1),
    ("mqa", None, None, None, 256, 1),
    ("uib", 5, None, 1024, 256, 1),
]

_CONV_L = [
    ("conv", None, 3, None, 24, 2),
    ("fused", None, 3, 96, 48, 2),
    ("uib", 3, 5, 192, 96, 2),
    ("uib", 3, 3, 384, 96, 1),
    ("uib", 3, 5, 384, 192, 2),
    ("uib", 3, 3, 768, 192, 1),
    ("uib", 3, 3, 768, 192, 1),
    ("uib", 3, 3, 768, 192, 1),
    ("uib", 3, 5, 768, 192, 1),
    ("uib", 5, 3, 768, 192, 1),
    ("uib", 5, 3, 768, 192, 1),
    ("uib", 5, 3, 768, 192, 1),
    ("uib", 5, 3, 768, 192, 1),
    ("uib", 5, 3, 768, 192, 1),
    ("uib", 3, None, 768, 192, 1),
    ("uib", 5, 5, 768, 512, 2),
    ("uib", 5, 5, 2048, 512, 1),
    ("uib", 5, 5, 2048, 512, 1),
    ("uib", 5, 5, 2048, 512, 1),
    ("uib", 5, None, 2048, 512, 1),
    ("uib", 5, 3, 2048, 512, 1),
    ("uib", 5, None, 2048, 512, 1),
    ("uib", 5, None, 2048, 512, 1),
    ("uib", 5, 3, 2048, 512, 1),
    ("uib", 5, 5, 2048, 512, 1),
    ("uib", 5, None, 2048, 512, 1),
    ("uib", 5, None, 2048, 512, 1),
    ("uib", 5, None, 2048, 512, 1),
]

_HYBRID_L = [
    ("conv", None, 3, None, 24, 2),
    ("fused", None, 3, 96, 48, 2),
    ("uib", 3, 5, 192, 96, 2),
    ("uib", 3, 3, 384, 96, 1),
    ("uib", 3, 5, 384, 192, 2),
    ("uib", 3, 3, 768, 192, 1),
    ("uib", 3, 3, 768, 192, 1),
    ("uib", 3, 3, 768, 192, 1),
    ("uib", 3, 5, 768, 192, 1),
    ("uib", 5, 3, 768, 192, 1),
    ("uib", 5, 3, 768, 192, 1),
    ("mqa", None, None, None, 192, 1),
    ("uib", 5, 3, 768, 192, 1),
    ("mqa", None, None, None, 192, 1),
    ("uib", 5, 3, 768, 192, 1),
    ("mqa", None, None, None, 192, 1),
    ("uib", 5, 3, 768, 192, 1),
    ("mqa", None, None, None, 192, 1),
    ("uib", 3, None, 768, 192, 1),
    ("uib", 5, 5, 768, 512, 2),
    ("uib", 5, 5, 2048, 512, 1),
    ("uib", 5, 5, 2048, 512, 1),
    ("uib", 5, 5, 2048, 512, 1),
    ("uib", 5, None, 2048, 512, 1),
    ("uib", 5, 3, 2048, 512, 1),
    ("uib", 5, None, 2048, 512, 1),
    ("uib", 5, None, 2048, 512, 1),
    ("uib", 5, 3, 2048, 512, 1),
    ("uib", 5, 5, 2048, 512, 1),
    ("mqa", None, None, None, 512, 1),
    ("uib", 5, None, 2048, 512, 1),
    ("mqa", None, None, None, 512, 1),
    ("uib", 5, None, 2048, 512, 1),
    ("mqa", None, None, None, 512, 1),
    ("uib", 5, None, 2048, 512, 1),
    ("mqa", None, None, None, 512, 1),
    ("uib", 5, None, 2048, 512, 1),
]

# name -> (rows, input resolution, top-1 on ImageNet-1k, display name)
_MNV4 = {
    "conv_s": (_CONV_S, 224, 73.8, "MNv4-Conv-S"),
    "conv_m": (_CONV_M, 256, 79.9, "MNv4-Conv-M"),
    "conv_l": (_CONV_L, 384, 82.9, "MNv4-Conv-L"),
    "hybrid_m": (_HYBRID_M, 256, 80.7, "MNv4-Hybrid-M"),
    "hybrid_l": (_HYBRID_L, 384, 83.4, "MNv4-Hybrid-L"),
}


def mqa_for(channels: int, penultimate: bool) -> MobileMQA:
    """Default Mobile-MQA config: one 64-wide query head per 128 channels, KV stride 2 in the penultimate stage."""
    heads = max(1, channels // (2 * MQA_HEAD_DIM))
    return MobileMQA(num_heads=heads, head_dim=MQA_HEAD_DIM, kv_stride=2 if penultimate else 1)


def mobilenet_v3_head(num_classes: int = 1000) -> List[BlockSpec]:
    return [
        Conv2D(1, 1, 960),
        AvgPool(),
        Conv2D(1, 1, 1280, followed_by_bn=False, bias=True),
        Dense(num_classes, bias=True),
    ]


def _rows_to_blocks(rows) -> List[BlockSpec]:
    last_c = max(r[4] for r in rows)
    blocks: List[BlockSpec] = []
    for kind, k1, k2, exp, out, stride in rows:
        if kind == "conv":
            blocks.append(Conv2D(k2, stride, out))
        elif kind == "fused":
            blocks.append(FusedIB(k2, stride, exp, out))
        elif kind == "uib":
            blocks.append(UIB(k1, k2, exp, out, stride))
        elif kind == "mqa":
            blocks.append(mqa_for(out, penultimate=out != last_c))
        else:
            raise ValueError(kind)
    return blocks


def build_mnv4(name: str) -> NetworkSpec:
    key = name.lower().replace("-", "_")
    if key.startswith("mnv4_"):
        key = key[5:]
    if key not in _MNV4:
        raise KeyError(f"unknown MNv4 model {name!r}; choose from {sorted(_MNV4)}")
    rows, res, top1, display = _MNV4[key]
    return NetworkSpec(display, res, tuple(_rows_to_blocks(rows) + mobilenet_v3_head()), top1_accuracy=top1)


def _make_divisible(v: float, divisor: int = 8) -> int:
    new_v = max(divisor, int(v + divisor / 2) // divisor * divisor)
    if new_v < 0.9 * v:
        new_v += divisor
    return new_v


def build_mobilenet_v1(width: float = 1.0, res: int = 224) -> NetworkSpec:
    cfg = [(64, 1), (128, 2), (128, 1), (256, 2), (256, 1), (512, 2)] + [(512, 1)] * 5 + [(1024, 2), (1024, 1)]
    blocks: List[BlockSpec] = [Conv2D(3, 2, _make_divisible(32 * width))]
    for c, s in cfg:
        blocks += [DWConv(3, s), Conv2D(1, 1, _make_divisible(c * width))]
    blocks += [AvgPool(), Dense(1000)]
    name = "MobileNet-V1" if width == 1.0 else f"MobileNet-V1-{width}x"
    return NetworkSpec(name, res, tuple(blocks))


def build_mobilenet_v2(width: float = 1.0, res: int = 224) -> NetworkSpec:
    # (expansion, channels, repeats, first stride)
    cfg = [(1, 16, 1, 1), (6, 24, 2, 2), (6, 32, 3, 2), (6, 64, 4, 2), (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1)]
    c_in = _make_divisible(32 * width)
    blocks: List[BlockSpec] = [Conv2D(3, 2, c_in)]
    for t, c, n, s in cfg:
        out = _make_divisible(c * width)
        for i in range(n):
            stride = s if i == 0 else 1
            if t == 1:
                blocks += [DWConv(3, stride), Conv2D(1, 1, out, activation=None)]
            else:
                blocks.append(UIB(None, 3, c_in * t, out, stride))
            c_in = out
    last = _make_divisible(1280 * max(1.0, width))
    blocks += [Conv2D(1, 1, last), AvgPool(), Dense(1000)]
    name = "MobileNet-V2" if width == 1.0 else f"MobileNet-V2-{width}x"
    return NetworkSpec(name, res, tuple(blocks))


def build_mobilenet_v3_large(width: float = 1.0, res: int = 224) -> NetworkSpec:
    """MobileNetV3-Large body without squeeze-excite (SE is not part of this IR)."""
    # (kernel, expanded, out, stride)
    cfg = [
        (3, 16, 16, 1), (3, 64, 24, 2), (3, 72, 24, 1), (5, 72, 40, 2), (5, 120, 40, 1), (5, 120, 40, 1),
        (3, 240, 80, 2), (3, 200, 80, 1), (3, 184, 80, 1), (3, 184, 80, 1), (3, 480, 112, 1), (3, 672, 112, 1),
        (5, 672, 160, 2), (5, 960, 160, 1), (5, 960, 160, 1),
    ]
    c_in = _make_divisible(16 * width)
    blocks: List[BlockSpec] = [Conv2D(3, 2, c_in)]
    for k, e, c, s in cfg:
        out = _make_divisible(c * width)
        exp = _make_divisible(e * width)
        if exp == c_in:
            blocks += [DWConv(k, s), Conv2D(1, 1, out, activation=None)]
        else:
            blocks.append(UIB(None, k, exp, out, s))
        c_in = out
    blocks += [
        Conv2D(1, 1, _make_divisible(960 * width)),
        AvgPool(),
        Conv2D(1, 1, 1280, followed_by_bn=False, bias=True),
        Dense(1000),
    ]
    name = "MobileNet-V3L" if width == 1.0 else f"MobileNet-V3L-{width}x"
    return NetworkSpec(name, res, tuple(blocks))


REGISTRY: Dict[str, Callable[[], NetworkSpec]] = {
    "mnv4-conv-s": lambda: build_mnv4("conv_s"),
    "mnv4-conv-m": lambda: build_mnv4("conv_m"),
    "mnv4-conv-l": lambda: build_mnv4("conv_l"),
    "mnv4-hybrid-m": lambda: build_mnv4("hybrid_m"),
    "mnv4-hybrid-l": lambda: build_mnv4("hybrid_l"),
    "mobilenet-v1": lambda: build_mobilenet_v1(1.0),
    "mobilenet-v2": lambda: build_mobilenet_v2(1.0),
    "mobilenet-v2-0.5x": lambda: build_mobilenet_v2(0.5),
    "mobilenet-v2-1.5x": lambda: build_mobilenet_v2(1.5),
    "mobilenet-v2-2.0x": lambda: build_mobilenet_v2(2.0),
    "mobilenet-v3l-0.5x": lambda: build_mobilenet_v3_large(0.5),
    "toy": lambda: toy_network(),
}


def toy_network() -> NetworkSpec:
    """Three-block fixture: stem conv, one IB, pooled classifier."""
    return NetworkSpec(
        "toy",
        32,
        (Conv2D(3, 2, 16), UIB(None, 3, 64, 16, 1), AvgPool(), Dense(10)),
    )


def canonical_name(name: str) -> str:
    return name.strip().lower().replace("_", "-")


def lookup(name: str) -> Optional[NetworkSpec]:
    """Resolve a registry name or a display name (e.g. ``MNv4-Conv-S``)."""
    builder = REGISTRY.get(canonical_name(name))
    return builder() if builder else None

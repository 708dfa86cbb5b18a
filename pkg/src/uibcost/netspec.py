"""NetworkSpec JSON reader/writer.

Example::

    {"name": "toy", "input_res": 32, "blocks": [
      {"kind": "conv2d", "kernel": 3, "stride": 2, "out": 16},
      {"kind": "uib", "start_dw": null, "mid_dw": 3, "expanded": 64, "out": 16, "stride": 1},
      {"kind": "avgpool"},
      {"kind": "dense", "out": 10}
    ]}

A block may carry an optional ``"in"`` channel count, which is checked
against shape propagation.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Any, Dict, List, Union

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
    UIB,
    ValidationError,
    check_channels,
    propagate_shapes,
)

KINDS = ("conv2d", "dwconv", "fused_ib", "uib", "mqa", "avgpool", "dense")


class ParseError(ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


def block_to_dict(b: BlockSpec) -> Dict[str, Any]:
    if isinstance(b, Conv2D):
        return {"kind": "conv2d", "kernel": b.kernel, "stride": b.stride, "out": b.out_c,
                "bn": b.followed_by_bn, "bias": b.bias, "activation": b.activation}
    if isinstance(b, DWConv):
        return {"kind": "dwconv", "kernel": b.kernel, "stride": b.stride}
    if isinstance(b, FusedIB):
        return {"kind": "fused_ib", "kernel": b.kernel, "stride": b.stride, "expanded": b.expanded_c, "out": b.out_c}
    if isinstance(b, UIB):
        return {"kind": "uib", "start_dw": b.start_dw, "mid_dw": b.mid_dw, "expanded": b.expanded_c,
                "out": b.out_c, "stride": b.stride}
    if isinstance(b, MobileMQA):
        return {"kind": "mqa", "heads": b.num_heads, "head_dim": b.head_dim, "kv_stride": b.kv_stride,
                "kv_heads": b.kv_heads}
    if isinstance(b, AvgPool):
        return {"kind": "avgpool"}
    if isinstance(b, Dense):
        return {"kind": "dense", "out": b.out_c, "bias": b.bias}
    raise TypeError(f"cannot serialise {b!r}")


def _opt_kernel(v):
    # TOML/CLI-friendly spellings of an absent depthwise conv
    return None if v in (None, 0, "none", "-") else v


def block_from_dict(d: Dict[str, Any]) -> BlockSpec:
    kind = d.get("kind")
    if kind == "conv2d":
        return Conv2D(d["kernel"], d.get("stride", 1), d["out"], d.get("bn", True), d.get("bias", False),
                      d.get("activation", "relu"))
    if kind == "dwconv":
        return DWConv(d["kernel"], d.get("stride", 1))
    if kind == "fused_ib":
        return FusedIB(d["kernel"], d.get("stride", 1), d["expanded"], d["out"])
    if kind == "uib":
        return UIB(_opt_kernel(d.get("start_dw")), _opt_kernel(d.get("mid_dw")), d["expanded"], d["out"],
                   d.get("stride", 1))
    if kind == "mqa":
        return MobileMQA(d["heads"], d.get("head_dim", 64), d.get("kv_stride", 1), d.get("kv_heads", 1))
    if kind == "avgpool":
        return AvgPool()
    if kind == "dense":
        return Dense(d["out"], d.get("bias", True))
    raise ValidationError(f"unknown block kind {kind!r}; expected one of {', '.join(KINDS)}")


def netspec_to_dict(net: NetworkSpec) -> Dict[str, Any]:
    out = {"name": net.name, "input_res": net.input_res, "input_c": net.input_c}
    if net.top1_accuracy is not None:
        out["top1"] = net.top1_accuracy
    out["blocks"] = [block_to_dict(b) for b in net.blocks]
    return out


def emit_netspec(net: NetworkSpec) -> str:
    """JSON text with one block per line."""
    d = netspec_to_dict(net)
    blocks = d.pop("blocks")
    head = json.dumps(d)[:-1]
    lines = ",\n  ".join(json.dumps(b) for b in blocks)
    return f'{head}, "blocks": [\n  {lines}\n]}}\n'


def _kind_lines(text: str) -> List[int]:
    return [text.count("\n", 0, m.start()) + 1 for m in re.finditer(r'"kind"\s*:', text)]


def parse_netspec(text: str) -> NetworkSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.lineno, e.msg) from None
    if not isinstance(doc, dict):
        raise ParseError(1, "top level must be a JSON object")
    for key in ("name", "input_res", "blocks"):
        if key not in doc:
            raise ParseError(1, f"missing field {key!r}")
    if not isinstance(doc["blocks"], list) or not doc["blocks"]:
        raise ParseError(1, "'blocks' must be a non-empty list")

    lines = _kind_lines(text)
    blocks, declared = [], []
    for i, bd in enumerate(doc["blocks"]):
        line = lines[i] if i < len(lines) else 1
        if not isinstance(bd, dict):
            raise ParseError(line, f"block {i} is not an object")
        try:
            blocks.append(block_from_dict(bd))
        except KeyError as e:
            raise ParseError(line, f"block {i}: missing field {e.args[0]!r}") from None
        except (IRError, TypeError) as e:
            raise ParseError(line, f"block {i}: {e}") from None
        declared.append(bd.get("in"))

    try:
        net = NetworkSpec(str(doc["name"]), doc["input_res"], tuple(blocks), doc.get("input_c", 3), doc.get("top1"))
    except IRError as e:
        raise ParseError(1, str(e)) from None
    propagate_shapes(net)
    check_channels(net, declared)
    return net


def load_netspec(path: Union[str, Path]) -> NetworkSpec:
    return parse_netspec(Path(path).read_text())


def save_netspec(net: NetworkSpec, path: Union[str, Path]) -> None:
    Path(path).write_text(emit_netspec(net))

"""Independent parameter/MAC counter: materialise a NetworkSpec as torch modules.

Params come from ``sum(p.numel())``; MACs from forward hooks on conv/linear
layers using the actual output tensor sizes. Attention matmuls are counted
from the einsum operand shapes observed at run time.
"""

import math

import torch
from torch import nn

from uibcost.ir import AvgPool, Conv2D, Dense, DWConv, FusedIB, MobileMQA, UIB


def _cbn(c_in, c_out, k, s, groups=1, bn=True, bias=False):
    layers = [nn.Conv2d(c_in, c_out, k, s, k // 2, groups=groups, bias=bias)]
    if bn:
        layers.append(nn.BatchNorm2d(c_out))
    return nn.Sequential(*layers)


class _Attn(nn.Module):
    def __init__(self, c, blk):
        super().__init__()
        self.blk = blk
        dq = blk.num_heads * blk.head_dim
        dkv = blk.kv_heads * blk.head_dim
        self.sr = _cbn(c, c, 3, 2, groups=c) if blk.kv_stride == 2 else nn.Identity()
        self.q = nn.Conv2d(c, dq, 1, bias=False)
        self.k = nn.Conv2d(c, dkv, 1, bias=False)
        self.v = nn.Conv2d(c, dkv, 1, bias=False)
        self.o = nn.Conv2d(dq, c, 1, bias=False)
        self.matmul_macs = 0

    def forward(self, x):
        b, c, h, w = x.shape
        hd = self.blk.head_dim
        q = self.q(x).flatten(2).reshape(b, self.blk.num_heads, hd, h * w)
        r = self.sr(x)
        k = self.k(r).flatten(2).reshape(b, self.blk.kv_heads, hd, -1)
        v = self.v(r).flatten(2).reshape(b, self.blk.kv_heads, hd, -1)
        rep = self.blk.num_heads // self.blk.kv_heads
        k = k.repeat_interleave(rep, 1)
        v = v.repeat_interleave(rep, 1)
        logits = torch.einsum("bhdn,bhdm->bhnm", q, k) / math.sqrt(hd)
        self.matmul_macs = 2 * logits.numel() * hd
        out = torch.einsum("bhnm,bhdm->bhdn", logits.softmax(-1), v).reshape(b, -1, h, w)
        return x + self.o(out)


def build_torch(net):
    mods = []
    c = net.input_c
    for blk in net.blocks:
        if isinstance(blk, Conv2D):
            mods.append(_cbn(c, blk.out_c, blk.kernel, blk.stride, bn=blk.followed_by_bn, bias=blk.bias))
            c = blk.out_c
        elif isinstance(blk, DWConv):
            mods.append(_cbn(c, c, blk.kernel, blk.stride, groups=c))
        elif isinstance(blk, FusedIB):
            mods.append(nn.Sequential(_cbn(c, blk.expanded_c, blk.kernel, blk.stride), _cbn(blk.expanded_c, blk.out_c, 1, 1)))
            c = blk.out_c
        elif isinstance(blk, UIB):
            e, s = blk.expanded_c, blk.stride
            parts = []
            if blk.start_dw:
                parts.append(_cbn(c, c, blk.start_dw, s if blk.mid_dw is None else 1, groups=c))
            parts.append(_cbn(c, e, 1, s if (blk.start_dw is None and blk.mid_dw is None) else 1))
            if blk.mid_dw:
                parts.append(_cbn(e, e, blk.mid_dw, s, groups=e))
            parts.append(_cbn(e, blk.out_c, 1, 1))
            mods.append(nn.Sequential(*parts))
            c = blk.out_c
        elif isinstance(blk, MobileMQA):
            mods.append(_Attn(c, blk))
        elif isinstance(blk, AvgPool):
            mods.append(nn.AdaptiveAvgPool2d(1))
        elif isinstance(blk, Dense):
            mods.append(nn.Sequential(nn.Flatten(), nn.Linear(c, blk.out_c, bias=blk.bias), nn.Unflatten(1, (blk.out_c, 1, 1))))
            c = blk.out_c
    return nn.Sequential(*mods)


def torch_counts(net):
    """(params, macs) measured on the materialised torch model."""
    model = build_torch(net).eval()
    macs = [0]

    def conv_hook(m, inp, out):
        k = m.kernel_size[0] * m.kernel_size[1]
        macs[0] += out.numel() * k * (m.in_channels // m.groups)

    def lin_hook(m, inp, out):
        macs[0] += out.numel() * m.in_features

    def pool_hook(m, inp, out):
        macs[0] += inp[0].numel()

    for m in model.modules():
        if isinstance(m, nn.Conv2d):
            m.register_forward_hook(conv_hook)
        elif isinstance(m, nn.Linear):
            m.register_forward_hook(lin_hook)
        elif isinstance(m, nn.AdaptiveAvgPool2d):
            m.register_forward_hook(pool_hook)
    with torch.no_grad():
        model(torch.zeros(1, net.input_c, net.input_res, net.input_res))
    macs[0] += sum(m.matmul_macs for m in model.modules() if isinstance(m, _Attn))
    return sum(p.numel() for p in model.parameters()), macs[0]

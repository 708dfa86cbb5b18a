import time

import numpy as np
import pytest

from uibcost.executor import (
    ShapeError, Tensor, attention, init_block_weights, init_weights, random_input, run_block, run_block_traced,
    run_network,
)
from uibcost.ir import UIB, Conv2D, FusedIB, MobileMQA, TensorShape, propagate_shapes
from uibcost.zoo import REGISTRY, build_mnv4


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_executed_shapes_match_propagation(name):
    net = REGISTRY[name]()
    small = net.with_resolution(64) if net.input_res > 64 else net
    res = run_network(small, seed=0)
    assert res.shapes == [r.output for r in propagate_shapes(small)]
    assert res.output.finite


def test_conv_s_smoke_at_64px():
    t = time.perf_counter()
    res = run_network(build_mnv4("conv_s"), seed=1, resolution=64)
    assert time.perf_counter() - t < 10
    assert res.logits.shape == (1000,)
    assert np.isfinite(res.logits).all()


def test_attention_rows_sum_to_one():
    res = run_network(build_mnv4("hybrid_m"), seed=0, resolution=64)
    assert res.attention_probs
    for p in res.attention_probs:
        assert np.allclose(p.sum(axis=-1), 1.0, atol=1e-5)


def test_identity_pointwise_conv():
    x = Tensor(np.abs(np.random.default_rng(0).standard_normal((5, 5, 8))))
    w = {"w": np.eye(8).reshape(1, 1, 8, 8), "bn_scale": np.ones(8), "bn_shift": np.zeros(8)}
    assert np.array_equal(run_block(Conv2D(1, 1, 8), x, w).data, x.data)


@pytest.mark.parametrize("block", [UIB(3, 5, 32, 8), UIB(None, None, 16, 8), FusedIB(3, 1, 16, 8), MobileMQA(2, 4)])
def test_zeroed_residual_block_is_skip(block):
    x = random_input(TensorShape(6, 6, 8), seed=2)
    w = {k: np.zeros_like(v) for k, v in init_block_weights(block, x.shape, np.random.default_rng(0)).items()}
    assert np.allclose(run_block(block, x, w).data, x.data)


def test_mqa_shift_invariance_and_kv_stride_shape():
    x = random_input(TensorShape(8, 8, 32), seed=3)
    blk = MobileMQA(4, 8, kv_stride=2)
    w = init_block_weights(blk, x.shape, np.random.default_rng(1))
    a = run_block_traced(blk, x, w).output.data
    b = run_block_traced(blk, x, w, logit_shift=123.0).output.data
    assert np.allclose(a, b, atol=1e-12)
    plain = MobileMQA(4, 8, kv_stride=1)
    y = run_block(plain, x, init_block_weights(plain, x.shape, np.random.default_rng(1)))
    assert y.shape == x.shape == run_block(blk, x, w).shape


def test_grouped_attention_matches_mhsa_with_repeated_kv():
    rng = np.random.default_rng(0)
    q = rng.standard_normal((10, 4, 8))
    k = rng.standard_normal((6, 1, 8))
    v = rng.standard_normal((6, 1, 8))
    shared = attention(q, k, v)
    full = attention(q, np.repeat(k, 4, axis=1), np.repeat(v, 4, axis=1))
    assert np.allclose(shared, full)


def test_deterministic_per_seed():
    a = run_network(build_mnv4("conv_s"), seed=5, resolution=32).logits
    b = run_network(build_mnv4("conv_s"), seed=5, resolution=32).logits
    c = run_network(build_mnv4("conv_s"), seed=6, resolution=32).logits
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_weights_in_range():
    for w in init_weights(build_mnv4("conv_s").with_resolution(32), 0):
        for k, v in w.items():
            if k.endswith("bn_scale"):
                assert ((v >= 0.9) & (v <= 1.1)).all()
            else:
                assert (np.abs(v) <= 0.05).all()


def test_bad_tensor():
    with pytest.raises(ShapeError):
        Tensor(np.zeros((2, 2)))

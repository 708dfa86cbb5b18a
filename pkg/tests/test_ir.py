import pytest
from hypothesis import given, strategies as st

from uibcost.ir import (
    UIB, ChannelMismatch, Conv2D, Dense, MobileMQA, NetworkSpec, TensorShape,
    ValidationError, check_channels, downsample, insert_blocks, propagate_shapes, stages, uib_variant,
)
from uibcost.zoo import REGISTRY, build_mnv4, lookup, toy_network

DW = st.sampled_from([None, 3, 5])


@pytest.mark.parametrize("start,mid,variant", [
    (3, 3, "ExtraDW"), (None, 3, "IB"), (5, None, "ConvNext"), (None, None, "FFN"), (5, 5, "ExtraDW"),
])
def test_uib_variant_table(start, mid, variant):
    assert uib_variant(start, mid) == variant
    assert UIB(start, mid, 64, 16).variant == variant


@given(DW, DW)
def test_variant_depends_only_on_presence(start, mid):
    expected = {(True, True): "ExtraDW", (False, True): "IB", (True, False): "ConvNext", (False, False): "FFN"}
    assert uib_variant(start, mid) == expected[(start is not None, mid is not None)]


def test_rejects_even_kernels_and_bad_strides():
    with pytest.raises(ValidationError):
        UIB(4, 3, 64, 16)
    with pytest.raises(ValidationError):
        Conv2D(3, 3, 16)
    with pytest.raises(ValidationError):
        MobileMQA(num_heads=3, kv_heads=2)


def test_toy_shapes():
    recs = propagate_shapes(toy_network())
    assert [str(r.output) for r in recs] == ["16x16x16", "16x16x16", "1x1x16", "1x1x10"]
    assert [r.residual for r in recs] == [False, True, False, False]


@given(st.integers(1, 400), st.sampled_from([1, 2]))
def test_downsample_is_ceil(n, s):
    assert downsample(n, s) == -(-n // s)


def test_dense_needs_pooled_input():
    net = NetworkSpec("bad", 32, (Conv2D(3, 2, 8), Dense(10)))
    with pytest.raises(ValidationError):
        propagate_shapes(net)


def test_declared_channel_mismatch():
    net = toy_network()
    check_channels(net, [3, 16, None, 16])
    with pytest.raises(ChannelMismatch) as e:
        check_channels(net, [3, 32, None, None])
    assert e.value.block_index == 1


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_every_builtin_propagates(name):
    net = REGISTRY[name]()
    out = propagate_shapes(net)[-1].output
    assert (out.h, out.w) == (1, 1)


def test_mnv4_resolutions_and_final_stage():
    net = build_mnv4("conv_s")
    recs = propagate_shapes(net)
    assert net.input_res == 224
    assert str(recs[-5].output) == "7x7x128"
    assert build_mnv4("hybrid_l").input_res == 384


def test_lookup_display_names():
    assert lookup("MNv4-Conv-S").name == "MNv4-Conv-S"
    assert lookup("mnv4_hybrid_m").name == "MNv4-Hybrid-M"
    assert lookup("MobileNet-V2-0.5x") is not None
    assert lookup("FastViT-T8") is None


def test_stages_split_on_stride():
    net = build_mnv4("conv_s")
    bounds = [(r.start, r.stop) for r in stages(net)]
    assert bounds[0][0] == 0
    assert all(getattr(net.blocks[a], "stride", 1) == 2 for a, _ in bounds[1:])


def test_insert_blocks_keeps_validity():
    net = insert_blocks(toy_network(), 2, [UIB(3, 3, 32, 16)])
    assert len(propagate_shapes(net)) == 5


def test_tensor_shape_validation():
    with pytest.raises(ValidationError):
        TensorShape(0, 4, 4)
    assert TensorShape(2, 3, 4).numel == 24

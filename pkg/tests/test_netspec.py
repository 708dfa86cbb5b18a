import json

import pytest

from uibcost.ir import ChannelMismatch
from uibcost.netspec import ParseError, emit_netspec, parse_netspec
from uibcost.zoo import REGISTRY

TOY = """{
  "name": "toy", "input_res": 32,
  "blocks": [
    {"kind": "conv2d", "kernel": 3, "stride": 2, "out": 16},
    {"kind": "uib", "start_dw": null, "mid_dw": 3, "expanded": 64, "out": 16},
    {"kind": "avgpool"},
    {"kind": "dense", "out": 10}
  ]
}"""


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_round_trip(name):
    net = REGISTRY[name]()
    assert parse_netspec(emit_netspec(net)) == net


def test_matches_builtin_toy():
    assert parse_netspec(TOY).blocks == REGISTRY["toy"]().blocks


def test_channel_field_checked():
    doc = json.loads(TOY)
    doc["blocks"][1]["in"] = 24
    with pytest.raises(ChannelMismatch) as e:
        parse_netspec(json.dumps(doc))
    assert (e.value.block_index, e.value.expected, e.value.got) == (1, 24, 16)


def test_syntax_error_line():
    with pytest.raises(ParseError) as e:
        parse_netspec(TOY.replace('"avgpool"}', '"avgpool"'))
    # the decoder notices the missing brace where the next object starts
    assert e.value.line == 7


def test_semantic_error_line():
    with pytest.raises(ParseError) as e:
        parse_netspec(TOY.replace('"mid_dw": 3', '"mid_dw": 4'))
    assert e.value.line == 5
    with pytest.raises(ParseError) as e:
        parse_netspec(TOY.replace('"kind": "avgpool"', '"kind": "maxpool"'))
    assert e.value.line == 6
    with pytest.raises(ParseError):
        parse_netspec('{"name": "x", "input_res": 8, "blocks": []}')

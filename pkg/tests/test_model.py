from __future__ import annotations

import base64
import json

import numpy as np
import pytest

from evkws import (
    ModelArch,
    ModelWeights,
    ParseError,
    ValidationError,
    default_arch,
    load_weights,
    random_weights,
    save_weights,
)
from evkws.model import ConvLayer, GruBlock, LinearBlock
from evkws.quant import QuantTensor


def test_default_arch_parameter_budget():
    w = random_weights(0)
    assert w.conv_widths == [72, 72, 72, 72]
    assert w.class_count == 11
    # weights + biases across 4 convs and the 5-block head
    assert w.param_count() == 59_556


def test_random_weights_deterministic():
    assert random_weights(5) == random_weights(5)
    assert random_weights(5) != random_weights(6)


def test_conv_stack_shape_rules():
    w = random_weights(1)
    assert len(w.conv_layers) == 4
    assert w.conv_layers[0].in_width == 3
    for layer in w.conv_layers:
        # +2 columns for the relative (channel, age) position
        assert layer.weight.data.shape == (layer.out_width,
                                           layer.in_width + 2)
    for prev, cur in zip(w.conv_layers, w.conv_layers[1:]):
        assert cur.in_width == prev.out_width


def test_head_chaining_and_final_width():
    w = random_weights(2)
    assert w.head_blocks[0].in_width == w.conv_layers[-1].out_width
    for prev, cur in zip(w.head_blocks, w.head_blocks[1:]):
        assert cur.in_width == prev.out_width
    assert w.head_blocks[-1].out_width == w.class_count + 1


def test_gru_weight_packing():
    w = random_weights(3)
    gru = [b for b in w.head_blocks if isinstance(b, GruBlock)][0]
    assert gru.weight.data.shape == (3 * gru.out_width,
                                     gru.in_width + gru.out_width)
    assert gru.bias.shape == (3 * gru.out_width,)


def test_custom_arch():
    arch = ModelArch(conv_widths=(8, 8, 8, 8),
                     head=(("linear", 16), ("gru", 16), ("linear", 0)),
                     class_count=3)
    w = random_weights(0, arch)
    assert w.conv_widths == [8, 8, 8, 8]
    assert w.head_blocks[-1].out_width == 4
    assert isinstance(w.head_blocks[1], GruBlock)


def test_round_trip(tmp_path):
    w = random_weights(9)
    path = tmp_path / "w.json"
    save_weights(w, str(path))
    back = load_weights(str(path))
    assert back == w
    blob = json.loads(path.read_text())
    assert blob["version"] == 1
    assert blob["class_count"] == 11
    assert blob["conv_widths"] == [72, 72, 72, 72]
    assert [b["kind"] for b in blob["blocks"][:4]] == ["conv"] * 4
    first = blob["blocks"][0]
    raw = base64.b64decode(first["weight"])
    assert len(raw) == 72 * 5  # row-major int8


def test_load_rejects_bad_json(tmp_path):
    path = tmp_path / "w.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_weights(str(path))


def test_load_rejects_bad_base64(tmp_path):
    w = random_weights(0)
    path = tmp_path / "w.json"
    save_weights(w, str(path))
    blob = json.loads(path.read_text())
    blob["blocks"][0]["weight"] = "!!!not-base64!!!"
    path.write_text(json.dumps(blob))
    with pytest.raises(ParseError, match="block 0"):
        load_weights(str(path))


def test_load_rejects_wrong_version(tmp_path):
    w = random_weights(0)
    path = tmp_path / "w.json"
    save_weights(w, str(path))
    blob = json.loads(path.read_text())
    blob["version"] = 2
    path.write_text(json.dumps(blob))
    with pytest.raises(ValidationError, match="version"):
        load_weights(str(path))


def test_load_rejects_shape_mismatch(tmp_path):
    w = random_weights(0)
    path = tmp_path / "w.json"
    save_weights(w, str(path))
    blob = json.loads(path.read_text())
    blob["blocks"][0]["weight"] = base64.b64encode(bytes(10)).decode()
    path.write_text(json.dumps(blob))
    with pytest.raises(ValidationError, match="block 0"):
        load_weights(str(path))


def test_load_rejects_conv_after_head(tmp_path):
    w = random_weights(0)
    path = tmp_path / "w.json"
    save_weights(w, str(path))
    blob = json.loads(path.read_text())
    blob["blocks"] = blob["blocks"][1:] + blob["blocks"][:1]
    path.write_text(json.dumps(blob))
    with pytest.raises(ValidationError):
        load_weights(str(path))


def test_weights_validation_wrong_conv_count():
    w = random_weights(0)
    with pytest.raises(ValidationError):
        ModelWeights(conv_layers=w.conv_layers[:3],
                     head_blocks=w.head_blocks, class_count=11)


def test_weights_validation_broken_chain():
    w = random_weights(0)
    bad = LinearBlock(
        weight=QuantTensor(np.zeros((5, 7), dtype=np.int8), scale=1.0),
        bias=np.zeros(5, dtype=np.int32),
        in_width=7, out_width=5, scale_num=1, scale_shift=8)
    with pytest.raises(ValidationError):
        ModelWeights(conv_layers=w.conv_layers,
                     head_blocks=[bad] + list(w.head_blocks[1:]),
                     class_count=11)


def test_gru_block_rejects_zero_width():
    with pytest.raises(ValidationError):
        GruBlock(
            weight=QuantTensor(np.zeros((0, 4), dtype=np.int8), scale=1.0),
            bias=np.zeros(0, dtype=np.int32),
            in_width=4, out_width=0, scale_num=1, scale_shift=8)

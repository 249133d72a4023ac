from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evkws import (
    Event,
    EventStream,
    GraphParams,
    HeadState,
    InferenceEngine,
    ModelArch,
    OrderingError,
    Prediction,
    SensorConfig,
    ValidationError,
    WindowPool,
    first_layer_inputs,
    gru_step,
    head_forward,
    infer_stream,
    pointnet_conv,
    random_weights,
    summarize_predictions,
)
from evkws.graph import NeighborSet, Neighbor, NodeRecord
from evkws.model import ConvLayer, GruBlock, LinearBlock
from evkws.quant import QuantTensor

from conftest import make_stream
from oracles import (
    ref_first_layer_inputs,
    ref_gru_step,
    ref_head_forward,
    ref_pointnet_conv,
)


def neighbor_set(center_event, pairs):
    """Build a NeighborSet from (dc, dt) pairs for feature-input tests."""
    nbs = [Neighbor(NodeRecord(Event(center_event.t - dt,
                                     center_event.c + dc, 1)), dc, dt)
           for dc, dt in pairs]
    return NeighborSet(center=NodeRecord(center_event), neighbors=nbs)


def rand_conv(rng, in_w, out_w):
    return ConvLayer(
        weight=QuantTensor(
            rng.integers(-64, 64, size=(out_w, in_w + 2)).astype(np.int8),
            scale=1.0),
        bias=rng.integers(-1024, 1024, size=out_w).astype(np.int32),
        in_width=in_w, out_width=out_w,
        scale_num=int(rng.integers(1, 4)),
        scale_shift=int(rng.integers(4, 11)))


def rand_linear(rng, in_w, out_w):
    return LinearBlock(
        weight=QuantTensor(
            rng.integers(-32, 33, size=(out_w, in_w)).astype(np.int8),
            scale=1.0),
        bias=rng.integers(-1024, 1024, size=out_w).astype(np.int32),
        in_width=in_w, out_width=out_w,
        scale_num=int(rng.integers(1, 4)),
        scale_shift=int(rng.integers(5, 12)))


def rand_gru(rng, in_w, out_w):
    return GruBlock(
        weight=QuantTensor(
            rng.integers(-32, 33,
                         size=(3 * out_w, in_w + out_w)).astype(np.int8),
            scale=1.0),
        bias=rng.integers(-512, 512, size=3 * out_w).astype(np.int32),
        in_width=in_w, out_width=out_w,
        scale_num=1, scale_shift=int(rng.integers(6, 12)))


def as_oracle_block(block):
    kind = {ConvLayer: "conv", LinearBlock: "linear",
            GruBlock: "gru"}[type(block)]
    return {"kind": kind,
            "weight": block.weight.data.tolist(),
            "bias": block.bias.tolist(),
            "scale_num": block.scale_num,
            "scale_shift": block.scale_shift,
            "in": block.in_width,
            "out": block.out_width}


# -------------------------------------------------------- stage-one inputs

def test_first_layer_inputs_empty_neighborhood():
    ev = Event(500, 10, -1)
    np.testing.assert_array_equal(
        first_layer_inputs(neighbor_set(ev, []), ev), [0, 0, -1])


def test_first_layer_inputs_means():
    ev = Event(5000, 10, 1)
    ns = neighbor_set(ev, [(-2, 100), (3, 201)])
    # mean dc = 0.5 -> 1 (half away from zero); mean dt = 150.5 -> 151 -> >>6
    np.testing.assert_array_equal(
        first_layer_inputs(ns, ev), [1, 151 >> 6, 1])
    ns = neighbor_set(ev, [(-3, 64), (-2, 64)])
    # mean dc = -2.5 -> -3; mean dt = 64 -> q 1
    np.testing.assert_array_equal(first_layer_inputs(ns, ev), [-3, 1, 1])


@given(st.lists(st.tuples(st.integers(-127, 127), st.integers(0, 20_000)),
                min_size=0, max_size=12),
       st.sampled_from([-1, 1]))
@settings(max_examples=150, deadline=None)
def test_first_layer_inputs_matches_oracle(pairs, p):
    ev = Event(50_000, 0, p)
    got = first_layer_inputs(neighbor_set(ev, pairs), ev)
    assert got.tolist() == ref_first_layer_inputs(pairs, (50_000, 0, p))


# ------------------------------------------------------------- convolution

def test_pointnet_conv_tiny_hand_case():
    # one output row: weight [1, 0, 2, 1], bias 8, scale 1, shift 2
    layer = ConvLayer(
        weight=QuantTensor(np.array([[1, 0, 2, 1]], dtype=np.int8),
                           scale=1.0),
        bias=np.array([8], dtype=np.int32),
        in_width=2, out_width=1, scale_num=1, scale_shift=2)
    center = np.array([4, 0], dtype=np.int8)
    # self vertex: 4 + 8 = 12 -> >>2 = 3
    assert pointnet_conv(layer, center, []).tolist() == [3]
    # neighbor [6, 0] at dc=5, dt=128 (q=2): 6 + 10 + 2 + 8 = 26 -> >>2 -> 7
    out = pointnet_conv(layer, center, [(np.array([6, 0], dtype=np.int8),
                                         5, 128)])
    assert out.tolist() == [7]


def test_pointnet_conv_rejects_bad_widths():
    rng = np.random.default_rng(0)
    layer = rand_conv(rng, 4, 3)
    with pytest.raises(ValidationError):
        pointnet_conv(layer, np.zeros(5, dtype=np.int8), [])
    with pytest.raises(ValidationError):
        pointnet_conv(layer, np.zeros(4, dtype=np.int8),
                      [(np.zeros(3, dtype=np.int8), 0, 0)])


@given(seed=st.integers(0, 2**32 - 1), n_neighbors=st.integers(0, 8))
@settings(max_examples=150, deadline=None)
def test_pointnet_conv_matches_oracle(seed, n_neighbors):
    rng = np.random.default_rng(seed)
    in_w = int(rng.integers(1, 7))
    out_w = int(rng.integers(1, 7))
    layer = rand_conv(rng, in_w, out_w)
    center = rng.integers(-128, 128, size=in_w).astype(np.int8)
    neighbors = [
        (rng.integers(-128, 128, size=in_w).astype(np.int8),
         int(rng.integers(-127, 128)), int(rng.integers(0, 10_000)))
        for _ in range(n_neighbors)
    ]
    got = pointnet_conv(layer, center, neighbors)
    expect = ref_pointnet_conv(layer.weight.data.tolist(),
                               layer.bias.tolist(),
                               layer.scale_num, layer.scale_shift,
                               center.tolist(),
                               [(f.tolist(), dc, dt)
                                for f, dc, dt in neighbors])
    assert got.tolist() == expect


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=80, deadline=None)
def test_pointnet_conv_neighbor_order_invariant(seed):
    rng = np.random.default_rng(seed)
    layer = rand_conv(rng, 4, 5)
    center = rng.integers(-128, 128, size=4).astype(np.int8)
    neighbors = [
        (rng.integers(-128, 128, size=4).astype(np.int8),
         int(rng.integers(-20, 21)), int(rng.integers(0, 5000)))
        for _ in range(5)
    ]
    base = pointnet_conv(layer, center, neighbors)
    perm = rng.permutation(5)
    shuffled = [neighbors[i] for i in perm]
    np.testing.assert_array_equal(base,
                                  pointnet_conv(layer, center, shuffled))


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=80, deadline=None)
def test_pointnet_conv_monotone_in_vertices(seed):
    # more vertices can only raise the element-wise maximum
    rng = np.random.default_rng(seed)
    layer = rand_conv(rng, 3, 4)
    center = rng.integers(-128, 128, size=3).astype(np.int8)
    neighbors = [
        (rng.integers(-128, 128, size=3).astype(np.int8),
         int(rng.integers(-20, 21)), int(rng.integers(0, 5000)))
        for _ in range(6)
    ]
    prev = pointnet_conv(layer, center, [])
    for n in range(1, 7):
        cur = pointnet_conv(layer, center, neighbors[:n])
        assert (cur >= prev).all()
        prev = cur


def test_pointnet_conv_output_rectified(rng):
    layer = rand_conv(rng, 3, 8)
    center = rng.integers(-128, 128, size=3).astype(np.int8)
    out = pointnet_conv(layer, center, [])
    assert (out >= 0).all()


# ------------------------------------------------------------- window pool

def test_window_pool_emits_gaps_as_zeros():
    pool = WindowPool(width=2, window_us=10)
    assert pool.push(np.array([3, 1], dtype=np.int8), 0) == []
    assert pool.push(np.array([1, 5], dtype=np.int8), 9) == []
    out = pool.push(np.array([2, 2], dtype=np.int8), 35)
    assert [(i, v.tolist()) for i, v in out] == [
        (0, [3, 5]), (1, [0, 0]), (2, [0, 0])]
    out = pool.flush()
    assert [(i, v.tolist()) for i, v in out] == [(3, [2, 2])]


def test_window_pool_flush_without_events():
    pool = WindowPool(width=2, window_us=10)
    assert pool.flush() == []


def test_window_pool_boundary_times():
    pool = WindowPool(width=1, window_us=10)
    pool.push(np.array([7], dtype=np.int8), 0)
    out = pool.push(np.array([4], dtype=np.int8), 10)  # exactly next window
    assert [(i, v.tolist()) for i, v in out] == [(0, [7])]


def test_window_pool_rejects_regression():
    pool = WindowPool(width=1, window_us=10)
    pool.push(np.array([1], dtype=np.int8), 25)
    with pytest.raises(OrderingError):
        pool.push(np.array([1], dtype=np.int8), 15)


def test_window_pool_max_is_elementwise():
    pool = WindowPool(width=3, window_us=100)
    pool.push(np.array([5, -3, 0], dtype=np.int8), 1)
    pool.push(np.array([2, 4, -1], dtype=np.int8), 2)
    out = pool.flush()
    assert out[0][1].tolist() == [5, 4, 0]


# -------------------------------------------------------------------- head

@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=150, deadline=None)
def test_gru_step_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    in_w = int(rng.integers(1, 8))
    out_w = int(rng.integers(1, 8))
    block = rand_gru(rng, in_w, out_w)
    x = rng.integers(-128, 128, size=in_w).astype(np.int8)
    h = rng.integers(-128, 128, size=out_w).astype(np.int8)
    got = gru_step(block, x, h)
    expect = ref_gru_step(block.weight.data.tolist(), block.bias.tolist(),
                          block.scale_num, block.scale_shift,
                          in_w, out_w, x.tolist(), h.tolist())
    assert got.tolist() == expect


def small_head_weights(seed):
    rng = np.random.default_rng(seed)
    convs = [rand_conv(rng, 3, 6)] + [rand_conv(rng, 6, 6) for _ in range(3)]
    head = [rand_linear(rng, 6, 8), rand_gru(rng, 8, 5),
            rand_linear(rng, 5, 4)]
    from evkws import ModelWeights
    return ModelWeights(conv_layers=convs, head_blocks=head, class_count=3)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_head_forward_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    weights = small_head_weights(seed)
    state = HeadState.fresh(weights)
    oracle_hidden = [h.tolist() for h in state.hidden]
    oracle_blocks = [as_oracle_block(b) for b in weights.head_blocks]
    for step in range(3):
        pooled = rng.integers(0, 128, size=6).astype(np.int8)
        pred, state = head_forward(weights, pooled, state, window_index=step)
        logits, conf, oracle_hidden = ref_head_forward(
            oracle_blocks, pooled.tolist(), oracle_hidden)
        assert pred.logits.tolist() == logits
        assert pred.conf == conf
        assert pred.window_index == step
        assert [h.tolist() for h in state.hidden] == oracle_hidden


def test_head_forward_does_not_mutate_input_state():
    weights = small_head_weights(0)
    state = HeadState.fresh(weights)
    before = [h.copy() for h in state.hidden]
    pooled = np.full(6, 40, dtype=np.int8)
    head_forward(weights, pooled, state)
    for h, b in zip(state.hidden, before):
        np.testing.assert_array_equal(h, b)


def test_head_forward_final_block_keeps_full_range():
    # saturating logits would corrupt the confidence comparison; values
    # beyond int8 must survive
    big = LinearBlock(
        weight=QuantTensor(np.full((2, 1), 127, dtype=np.int8), scale=1.0),
        bias=np.array([1 << 20, 0], dtype=np.int32),
        in_width=1, out_width=2, scale_num=1, scale_shift=0)
    from evkws import ModelWeights
    rng = np.random.default_rng(0)
    convs = [rand_conv(rng, 3, 1)] + [rand_conv(rng, 1, 1) for _ in range(3)]
    weights = ModelWeights(conv_layers=convs, head_blocks=[big],
                           class_count=1)
    pred, _ = head_forward(weights, np.array([127], dtype=np.int8),
                           HeadState.fresh(weights))
    assert pred.logits[0] > 127


def test_head_forward_checks_pooled_width():
    weights = small_head_weights(1)
    with pytest.raises(ValidationError):
        head_forward(weights, np.zeros(7, dtype=np.int8),
                     HeadState.fresh(weights))


# ------------------------------------------------------------- predictions

def test_prediction_argmax_first_on_ties():
    pred = Prediction(0, np.array([5, 9, 9, 1]), conf=3)
    assert pred.argmax_class == 1
    d = pred.to_json_dict()
    assert d == {"window": 0, "logits": [5, 9, 9, 1], "conf": 3, "class": 1}


def test_summarize_predictions_tie_breaks_to_first_window():
    preds = [Prediction(0, np.array([1, 0]), conf=7),
             Prediction(1, np.array([0, 1]), conf=9),
             Prediction(2, np.array([1, 0]), conf=9)]
    assert summarize_predictions(preds) == (1, 1)
    assert summarize_predictions([]) is None


# ------------------------------------------------------------------ engine

def small_arch():
    return ModelArch(conv_widths=(6, 6, 6, 6),
                     head=(("linear", 8), ("gru", 5), ("linear", 0)),
                     class_count=3)


def test_engine_runs_are_independent(rng):
    weights = random_weights(0, small_arch())
    gp = GraphParams(r_c=4, skip_step=1, r_t_low=0, r_t_high=2000)
    engine = InferenceEngine(weights, gp, window_us=1000)
    a = make_stream(rng, channels=64, n=150, t_max=8000)
    b = make_stream(rng, channels=64, n=150, t_max=8000)
    first_b = engine.run(b)
    engine.run(a)  # interleave another sample
    second_b = engine.run(b)
    assert len(first_b) == len(second_b)
    for x, y in zip(first_b, second_b):
        assert x.window_index == y.window_index
        assert x.conf == y.conf
        np.testing.assert_array_equal(x.logits, y.logits)


def test_engine_prediction_windows_cover_stream(rng):
    weights = random_weights(0, small_arch())
    gp = GraphParams(r_c=4, skip_step=1, r_t_low=0, r_t_high=2000)
    stream = make_stream(rng, channels=64, n=100, t_max=9500)
    preds = infer_stream(stream, weights, gp, window_us=1000)
    last_window = int(stream.t[-1]) // 1000
    assert [p.window_index for p in preds] == list(range(last_window + 1))


def test_engine_empty_stream_emits_nothing(cfg64):
    weights = random_weights(0, small_arch())
    gp = GraphParams(r_c=4, skip_step=1, r_t_low=0, r_t_high=2000)
    preds = infer_stream(EventStream.empty(cfg64), weights, gp)
    assert preds == []


def test_engine_applies_filtration(rng):
    from evkws import FiltrationParams
    weights = random_weights(0, small_arch())
    gp = GraphParams(r_c=4, skip_step=1, r_t_low=0, r_t_high=2000)
    # threshold too high to ever fire: no events survive, no windows emitted
    filt = FiltrationParams(div_factor=0, weight=1,
                            thresholds=np.full(64, 10**9, dtype=np.int64))
    stream = make_stream(rng, channels=64, n=200, t_max=5000)
    assert infer_stream(stream, weights, gp, filtration=filt) == []


def test_engine_single_event_stream(cfg64):
    weights = random_weights(0, small_arch())
    gp = GraphParams(r_c=4, skip_step=1, r_t_low=0, r_t_high=2000)
    stream = EventStream.from_events(cfg64, [(25_000, 3, 1)])
    preds = infer_stream(stream, weights, gp)
    # windows 0 and 1 are empty but still emitted; window 2 holds the event
    assert [p.window_index for p in preds] == [0, 1, 2]

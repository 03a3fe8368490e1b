import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cellseg import (
    MAP_THRESHOLDS,
    BinaryMask,
    ImageRecord,
    LabelMap,
    LossInputs,
    Raster,
    combined_loss,
    iou,
    map_score,
    match_instances,
    pcc,
    precision_at,
    shifted_sigmoid,
    summarize,
)
from cellseg.errors import (
    ConstantImageError,
    DimensionMismatchError,
    EmptyInputError,
    ThresholdTooLowError,
)

from oracles import exhaustive_match, map_naive, random_label_map

finite_pair = arrays(
    np.float32,
    (6, 6),
    elements=st.floats(-50, 50, width=32, allow_nan=False),
)


# --- pcc ----------------------------------------------------------------------


def test_pcc_perfect_correlation():
    x = Raster(np.arange(12, dtype=np.float32).reshape(3, 4))
    assert pcc(x, x) == pytest.approx(1.0, abs=1e-12)


def test_pcc_perfect_anticorrelation():
    x = Raster(np.arange(12, dtype=np.float32).reshape(3, 4))
    y = Raster(-x.samples + 10.0)
    assert pcc(x, y) == pytest.approx(-1.0, abs=1e-12)


def test_pcc_orthogonal_patterns():
    x = Raster(np.array([[1.0, 0.0], [1.0, 0.0]]))
    y = Raster(np.array([[1.0, 1.0], [0.0, 0.0]]))
    assert pcc(x, y) == 0.0


def test_pcc_constant_image_error():
    c = Raster(np.full((3, 3), 7.0))
    v = Raster(np.arange(9, dtype=np.float32).reshape(3, 3))
    with pytest.raises(ConstantImageError):
        pcc(c, v)
    with pytest.raises(ConstantImageError):
        pcc(v, c)


def test_pcc_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        pcc(Raster(np.zeros((2, 2))), Raster(np.zeros((2, 3))))


@settings(max_examples=40, deadline=None)
@given(finite_pair, finite_pair)
def test_pcc_symmetric_and_bounded(a, b):
    ra, rb = Raster(a), Raster(b)
    try:
        v1 = pcc(ra, rb)
    except ConstantImageError:
        return
    v2 = pcc(rb, ra)
    assert v1 == pytest.approx(v2, abs=1e-12)
    assert abs(v1) <= 1 + 1e-12


@settings(max_examples=30, deadline=None)
@given(finite_pair, finite_pair, st.floats(0.25, 4), st.floats(-20, 20))
def test_pcc_affine_invariance(a, b, scale, offset):
    ra, rb = Raster(a), Raster(b)
    try:
        base = pcc(ra, rb)
    except ConstantImageError:
        return
    scaled = Raster((a.astype(np.float64) * scale + offset).astype(np.float32))
    try:
        assert pcc(scaled, rb) == pytest.approx(base, abs=1e-6)
        flipped = Raster((-a.astype(np.float64) * scale + offset).astype(np.float32))
        assert pcc(flipped, rb) == pytest.approx(-base, abs=1e-6)
    except ConstantImageError:
        pass  # float32 squeeze can flatten an almost-constant image


# --- iou ------------------------------------------------------------------


def test_iou_both_empty_is_one():
    e = BinaryMask(np.zeros((4, 4), dtype=bool))
    assert iou(e, e) == 1.0


def test_iou_identical():
    m = BinaryMask(np.eye(5, dtype=bool))
    assert iou(m, m) == 1.0


def test_iou_counts():
    x = np.zeros((3, 4), dtype=bool)
    y = np.zeros((3, 4), dtype=bool)
    x.ravel()[:6] = True  # |x| = 6
    y.ravel()[2:8] = True  # |y| = 6, intersection 4, union 8
    assert iou(BinaryMask(x), BinaryMask(y)) == 0.5


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.bool_, (5, 7), elements=st.booleans()),
    arrays(np.bool_, (5, 7), elements=st.booleans()),
)
def test_iou_symmetric_bounded(a, b):
    ma, mb = BinaryMask(a), BinaryMask(b)
    v = iou(ma, mb)
    assert v == iou(mb, ma)
    assert 0.0 <= v <= 1.0
    assert iou(ma, ma) == 1.0


# --- instance matching ------------------------------------------------------


def _label_map(spec: dict, shape) -> LabelMap:
    arr = np.zeros(shape, dtype=np.int32)
    for label, slc in spec.items():
        arr[slc] = label
    return LabelMap(arr)


def test_match_identity():
    gt = _label_map({1: (slice(0, 2), slice(0, 2)), 2: (slice(4, 6), slice(4, 6))}, (8, 8))
    m = match_instances(gt, gt, 0.5)
    assert (m.tp, m.fp, m.fn) == (2, 0, 0)
    assert m.pairs == ((1, 1, 1.0), (2, 2, 1.0))


def test_match_single_pair_point7():
    gt = np.zeros((8, 16), dtype=np.int32)
    pred = np.zeros((8, 16), dtype=np.int32)
    gt[0, 0:10] = 1  # matched below at IoU 0.7
    pred[0, 0:7] = 1
    gt[4, 0:4] = 2
    pred[4, 8:12] = 2
    pred[6, 0:3] = 3
    m = match_instances(LabelMap(gt), LabelMap(pred), 0.5)
    assert (m.tp, m.fp, m.fn) == (1, 2, 1)
    assert m.pairs == ((1, 1, 0.7),)
    assert precision_at(LabelMap(gt), LabelMap(pred), 0.5) == 0.25


def test_match_split_object_below_threshold():
    # pred covers each half of gt with same-size shifted boxes: IoU 5/15 each
    gt = np.zeros((4, 20), dtype=np.int32)
    pred = np.zeros((4, 20), dtype=np.int32)
    gt[1, 5:15] = 1
    pred[1, 0:10] = 1
    pred[1, 10:20] = 2
    m = match_instances(LabelMap(gt), LabelMap(pred), 0.5)
    assert (m.tp, m.fp, m.fn) == (0, 2, 1)
    tp, fp, fn, pairs = exhaustive_match(gt, pred, 0.5)
    assert (m.tp, m.fp, m.fn) == (tp, fp, fn) and not pairs


def test_match_degenerate_exact_half_tie_stays_one_to_one():
    # both pred halves hit IoU exactly 0.5; the deterministic tie-break
    # keeps the matching one-to-one
    gt = np.zeros((4, 10), dtype=np.int32)
    pred = np.zeros((4, 10), dtype=np.int32)
    gt[1, :] = 1
    pred[1, :5] = 1
    pred[1, 5:] = 2
    m = match_instances(LabelMap(gt), LabelMap(pred), 0.5)
    assert (m.tp, m.fp, m.fn) == (1, 1, 0)
    assert m.pairs == ((1, 1, 0.5),)


def test_match_threshold_too_low():
    gt = _label_map({1: (slice(0, 2), slice(0, 2))}, (4, 4))
    with pytest.raises(ThresholdTooLowError):
        match_instances(gt, gt, 0.45)


def test_match_against_oracle_random_maps():
    rng = np.random.default_rng(97)
    for _ in range(30):
        h, w = rng.integers(4, 65, size=2)
        g = random_label_map(rng, h, w, 12)
        p = random_label_map(rng, h, w, 12)
        for tau in MAP_THRESHOLDS:
            m = match_instances(LabelMap(g), LabelMap(p), tau)
            tp, fp, fn, _ = exhaustive_match(g, p, tau)
            assert (m.tp, m.fp, m.fn) == (tp, fp, fn)
            # one-to-one: no label reused
            assert len({g for g, _, _ in m.pairs}) == len(m.pairs)
            assert len({p for _, p, _ in m.pairs}) == len(m.pairs)


# --- precision / mAP ---------------------------------------------------------


def test_precision_identity_five_instances():
    spec = {k: (slice(2 * k, 2 * k + 1), slice(0, 3)) for k in range(1, 6)}
    gt = _label_map(spec, (12, 8))
    assert precision_at(gt, gt, 0.5) == 1.0


def test_precision_both_empty():
    e = LabelMap(np.zeros((4, 4), dtype=np.int32))
    assert precision_at(e, e, 0.5) == 1.0
    assert map_score(e, e) == 1.0


def test_precision_nonincreasing_in_tau():
    rng = np.random.default_rng(101)
    for _ in range(10):
        g = random_label_map(rng, 32, 32, 8)
        p = random_label_map(rng, 32, 32, 8)
        vals = [precision_at(LabelMap(g), LabelMap(p), tau) for tau in MAP_THRESHOLDS]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_map_threshold_grid_is_exact():
    assert MAP_THRESHOLDS == (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)
    assert len(MAP_THRESHOLDS) == 10


def test_map_identity_and_disjoint():
    gt = _label_map({1: (slice(0, 3), slice(0, 3))}, (8, 8))
    pred = _label_map({1: (slice(5, 8), slice(5, 8))}, (8, 8))
    assert map_score(gt, gt) == 1.0
    assert map_score(gt, pred) == 0.0


def test_map_single_pair_iou_072():
    # inter 18, union 25: IoU 0.72 matches at taus 0.50..0.70 only
    gt = np.zeros((1, 30), dtype=np.int32)
    pred = np.zeros((1, 30), dtype=np.int32)
    gt[0, 0:21] = 1
    pred[0, 3:25] = 1
    assert map_score(LabelMap(gt), LabelMap(pred)) == 0.5


def test_map_bounded_and_matches_naive():
    rng = np.random.default_rng(103)
    for _ in range(15):
        g = random_label_map(rng, 48, 48, 10)
        p = random_label_map(rng, 48, 48, 10)
        v = map_score(LabelMap(g), LabelMap(p))
        assert 0.0 <= v <= 1.0
        assert v == map_naive(g, p)


# --- activations and loss ------------------------------------------------


def test_shifted_sigmoid_center():
    assert shifted_sigmoid(0.5) == 0.5


def test_shifted_sigmoid_asymptote():
    assert shifted_sigmoid(40.0) > 1 - 1e-15


def test_shifted_sigmoid_closed_form():
    assert shifted_sigmoid(-0.5) == pytest.approx(1 / (1 + math.e), rel=1e-12)


def test_shifted_sigmoid_array_and_extremes():
    out = shifted_sigmoid(np.array([0.5, -1000.0, 1000.0]))
    assert out[0] == 0.5 and out[1] == 0.0 and out[2] == 1.0


def _loss_inputs(yd, ys, td, ts, alpha=2000.0):
    return LossInputs(
        y_d=Raster(yd), y_s=Raster(ys), t_d=Raster(td), t_s=BinaryMask(ts), alpha=alpha
    )


def test_combined_loss_zero_logits_background():
    shape = (6, 6)
    inputs = _loss_inputs(
        np.ones(shape, np.float32),
        np.zeros(shape, np.float32),
        np.ones(shape, np.float32),
        np.zeros(shape, bool),
    )
    assert combined_loss(inputs) == pytest.approx(2000 * math.log(2), abs=1e-9)


def test_combined_loss_alpha_zero_reduces_to_mse():
    shape = (4, 4)
    yd = np.arange(16, dtype=np.float32).reshape(shape)
    td = np.zeros(shape, np.float32)
    inputs = _loss_inputs(yd, np.ones(shape, np.float32), td, np.ones(shape, bool), alpha=0.0)
    assert combined_loss(inputs) == pytest.approx(float(np.mean(yd.astype(np.float64) ** 2)))


def test_combined_loss_saturated_logits():
    shape = (5, 5)
    inputs = _loss_inputs(
        np.full(shape, 3.0, np.float32),
        np.full(shape, 40.0, np.float32),
        np.full(shape, 3.0, np.float32),
        np.ones(shape, bool),
    )
    assert combined_loss(inputs) < 1e-12


def test_combined_loss_nonnegative_random():
    rng = np.random.default_rng(5)
    for _ in range(20):
        inputs = _loss_inputs(
            rng.normal(size=(5, 5)).astype(np.float32),
            rng.normal(size=(5, 5)).astype(np.float32),
            rng.normal(size=(5, 5)).astype(np.float32),
            rng.random((5, 5)) < 0.5,
            alpha=float(rng.uniform(0.1, 3000)),
        )
        assert combined_loss(inputs) >= 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(-20, 20), st.booleans())
def test_stable_bce_matches_naive(z, t):
    # the naive formula -[t log s + (1-t) log(1-s)] cancels catastrophically
    # in float64 near saturation, so evaluate it in extended precision
    import mpmath

    shape = (2, 2)
    inputs = _loss_inputs(
        np.zeros(shape, np.float32),
        np.full(shape, z, dtype=np.float32),
        np.zeros(shape, np.float32),
        np.full(shape, t, dtype=bool),
        alpha=1.0,
    )
    with mpmath.workdps(50):
        sig = 1 / (1 + mpmath.exp(-mpmath.mpf(float(np.float32(z)))))
        naive = -(int(t) * mpmath.log(sig) + (1 - int(t)) * mpmath.log(1 - sig))
    assert combined_loss(inputs) == pytest.approx(float(naive), abs=1e-9)


def test_loss_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        _loss_inputs(
            np.zeros((3, 3), np.float32),
            np.zeros((3, 3), np.float32),
            np.zeros((3, 4), np.float32),
            np.zeros((3, 3), bool),
        )


# --- summarize / report -------------------------------------------------------


def test_summarize_single_record():
    rep = summarize([ImageRecord(image_id="a", iou=0.8)])
    assert rep.aggregates["iou"] == {"count": 1, "mean": 0.8, "std": 0.0}


def test_summarize_two_values():
    rep = summarize([ImageRecord(image_id="a", map=0.0), ImageRecord(image_id="b", map=1.0)])
    assert rep.aggregates["map"]["mean"] == 0.5
    assert rep.aggregates["map"]["std"] == 0.5


def test_summarize_skips_missing_metrics():
    rep = summarize(
        [
            ImageRecord(image_id="a", iou=0.5, pcc=0.9),
            ImageRecord(image_id="b", iou=0.7),
        ]
    )
    assert rep.aggregates["iou"]["count"] == 2
    assert rep.aggregates["pcc"]["count"] == 1
    assert "map" not in rep.aggregates


def test_summarize_empty_errors():
    with pytest.raises(EmptyInputError):
        summarize([])


def test_summarize_mean_recomputable():
    rng = np.random.default_rng(9)
    records = [ImageRecord(image_id=str(i), map=float(v)) for i, v in enumerate(rng.random(37))]
    rep = summarize(records)
    recomputed = sum(r.map for r in records) / len(records)
    assert abs(rep.aggregates["map"]["mean"] - recomputed) < 1e-9


def test_report_json_key_order():
    rep = summarize(
        [ImageRecord(image_id="x", pcc=0.5, iou=0.25, map=0.75, precisions={0.5: 1.0, 0.95: 0.0})]
    )
    doc = json.loads(rep.to_json())
    assert list(doc["images"][0].keys()) == ["id", "iou", "map", "pcc", "precisions"]
    assert list(doc["images"][0]["precisions"].keys()) == ["0.50", "0.95"]
    # raw text preserves the ordering too (json.loads would mask it)
    text = rep.to_json()
    assert text.index('"iou"') < text.index('"map"') < text.index('"pcc"')


def test_report_csv_shape():
    rep = summarize(
        [
            ImageRecord(image_id="a", iou=0.5, precisions={t: 1.0 for t in MAP_THRESHOLDS}),
            ImageRecord(image_id="b", iou=0.75),
        ]
    )
    lines = rep.to_csv().strip().split("\n")
    assert lines[0].startswith("id,iou,map,pcc,p@0.50")
    assert len(lines) == 1 + 2 + 3  # header + records + mean/std/count
    assert lines[-3].startswith("mean,")
    assert lines[-1].startswith("count,")

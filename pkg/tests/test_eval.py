import math

import numpy as np
import pytest

from ssnet.data import ActionInstance, AnnotatedStream, frame_label_arrays
from ssnet.evalmetrics import (
    EvalReport,
    evaluate_dataset,
    frame_accuracy,
    observation_ratio_accuracy,
    regression_error_at_ratio,
    sl_score_mean,
)


def stream_with(instances, length=100, class_count=4):
    coords = np.zeros((length, 2, 3), dtype=np.float32)
    return AnnotatedStream(
        coords=coords,
        body_count=np.ones(length, dtype=np.uint8),
        instances=[ActionInstance(*i) for i in instances],
        class_count=class_count,
        joint_count=1,
    )


def perfect_preds(stream):
    cls, dist, _ = frame_label_arrays(stream)
    return cls.copy(), dist.astype(np.float64)


def test_perfect_predictor_scores_one():
    stream = stream_with([(10, 29, 2), (50, 89, 1)])
    cls, dist = perfect_preds(stream)
    acc = observation_ratio_accuracy(cls, stream)
    assert all(v == 1.0 for v in acc.values())
    assert sl_score_mean(cls, dist, stream) == 1.0
    assert frame_accuracy(cls, stream) == 1.0
    err = regression_error_at_ratio(dist, stream)
    assert all(v == 0.0 for v in err.values())


def test_all_blank_predictor_scores_zero():
    stream = stream_with([(10, 29, 2), (50, 89, 1)])
    cls = np.zeros(100, dtype=np.int64)
    acc = observation_ratio_accuracy(cls, stream)
    assert all(v == 0.0 for v in acc.values())
    assert sl_score_mean(cls, np.zeros(100), stream) == 0.0


def test_half_right_instances_average_to_half():
    stream = stream_with([(0, 9, 1), (20, 29, 2)], length=40)
    cls = np.zeros(40, dtype=np.int64)
    cls[0:10] = 1  # first instance fully right, second fully wrong
    acc = observation_ratio_accuracy(cls, stream, ratios=(10,))
    assert acc[10] == 0.5


def test_segment_end_uses_ceiling_with_min_one_frame():
    stream = stream_with([(0, 9, 1)], length=20)  # d = 10
    cls = np.zeros(20, dtype=np.int64)
    cls[0] = 1  # only the first frame correct
    acc = observation_ratio_accuracy(cls, stream, ratios=(5, 10, 20))
    # 5% of 10 frames -> ceil(0.5) = 1 frame; 20% -> 2 frames
    assert acc[5] == 1.0
    assert acc[10] == 1.0
    assert acc[20] == 0.5


def test_sl_score_closed_forms():
    stream = stream_with([(0, 9, 1)], length=10)  # d = 10
    cls = np.ones(10, dtype=np.int64)
    _, dist, _ = frame_label_arrays(stream)
    assert sl_score_mean(cls, dist.astype(float), stream) == pytest.approx(1.0)
    # |s_hat - s| = d everywhere -> e^-1
    assert sl_score_mean(cls, dist + 10.0, stream) == pytest.approx(math.exp(-1))
    # wrong class zeroes the score regardless of regression
    wrong = np.full(10, 2, dtype=np.int64)
    assert sl_score_mean(wrong, dist.astype(float), stream) == 0.0


def test_regression_stuck_at_zero():
    stream = stream_with([(0, 49, 1)], length=50)  # d = 50
    s_hat = np.zeros(50)
    err = regression_error_at_ratio(s_hat, stream, ratios=(10, 50))
    # at p%, the frame is ceil(p*d/100) - 1 into the instance
    assert err[10] == math.ceil(0.1 * 50) - 1
    assert err[50] == math.ceil(0.5 * 50) - 1


def test_frame_accuracy_counts_blank():
    stream = stream_with([(0, 59, 1)], length=100)  # 60% action, 40% blank
    cls = np.zeros(100, dtype=np.int64)
    assert frame_accuracy(cls, stream) == pytest.approx(0.4)


def test_flipping_wrong_frame_never_decreases_accuracy():
    rng = np.random.default_rng(0)
    stream = stream_with([(5, 24, 2), (40, 79, 1)], length=90)
    cls, _ = perfect_preds(stream)
    noisy = cls.copy()
    wrong_at = rng.choice(90, size=30, replace=False)
    noisy[wrong_at] = (noisy[wrong_at] + 1) % 4
    base = observation_ratio_accuracy(noisy, stream)
    fixed = noisy.copy()
    fix_at = wrong_at[0]
    fixed[fix_at] = cls[fix_at]
    improved = observation_ratio_accuracy(fixed, stream)
    for r in base:
        assert improved[r] >= base[r]


def test_dataset_pooling_and_length_check():
    s1 = stream_with([(0, 9, 1)], length=30)
    s2 = stream_with([(0, 19, 2)], length=40)
    cls1, d1 = perfect_preds(s1)
    cls2, d2 = perfect_preds(s2)
    report = evaluate_dataset([(cls1, d1, s1), (cls2, d2, s2)])
    assert report.frame_acc == 1.0
    assert report.sl_score == 1.0
    with pytest.raises(ValueError, match="length mismatch"):
        evaluate_dataset([(cls1[:10], d1[:10], s1)])


def test_stream_order_invariance():
    s1 = stream_with([(0, 9, 1)], length=30)
    s2 = stream_with([(5, 24, 2)], length=50)
    cls1, d1 = perfect_preds(s1)
    cls2, d2 = perfect_preds(s2)
    cls2[7] = 3  # introduce an error
    a = evaluate_dataset([(cls1, d1, s1), (cls2, d2, s2)])
    b = evaluate_dataset([(cls2, d2, s2), (cls1, d1, s1)])
    assert a.to_dict() == b.to_dict()


def test_report_serialization():
    report = EvalReport(
        ratio_accuracy={10: 0.5, 50: 0.75},
        sl_score=0.6,
        regression_error={5: 3.0},
        frame_acc=0.8,
    )
    rows = report.csv_rows()
    assert rows[0] == "metric,ratio,value"
    assert "accuracy,10,0.500000" in rows
    assert "sl_score,,0.600000" in rows
    assert "regression_error,5,3.000000" in rows
    doc = report.to_dict()
    assert doc["frame_accuracy"] == 0.8

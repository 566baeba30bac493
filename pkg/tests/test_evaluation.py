import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arofraud.aro_detector import AroTrainParams, train
from arofraud.benchmark import evaluate_detectors
from arofraud.dataset import Label
from arofraud.detectors import DetectorSet, dump_detectors, load_detectors, save_detectors
from arofraud.evaluation import (
    ConfusionMatrix,
    MetricsReport,
    classify,
    confusion,
    cost,
    metrics,
    roc_auc,
    roc_threshold,
    score,
    score_many,
    timed,
    write_roc_csv,
)
from arofraud.fitness import FeatureBounds
from tests.oracles import naive_auc

counts = st.integers(0, 10_000)
matrices = st.builds(ConfusionMatrix, counts, counts, counts, counts)


def unit_set(*rows, cut=0.3):
    return DetectorSet(np.array(rows, dtype=float), FeatureBounds([1.0] * len(rows[0]), [0.0] * len(rows[0])), cut)


def test_score_examples():
    assert score([0.5], unit_set([0.0], [1.0])) == pytest.approx(0.5)
    assert score([0.2, 0.7], unit_set([0.2, 0.7])) == 0.0
    ds = unit_set([0.1, 0.9], [0.4, 0.3])
    doubled = unit_set([0.1, 0.9], [0.4, 0.3], [0.1, 0.9], [0.4, 0.3])
    assert score([0.5, 0.5], doubled) == pytest.approx(score([0.5, 0.5], ds), abs=1e-15)


def test_score_width_mismatch():
    with pytest.raises(ValueError):
        score([0.1, 0.2], unit_set([0.0]))
    with pytest.raises(ValueError):
        DetectorSet(np.zeros((0, 1)), FeatureBounds([1.0], [0.0]), 0.1)


def test_classify_is_strict_below_threshold():
    ds = unit_set([0.0], [1.0])
    assert classify([0.5], ds, 0.6) is Label.LEGITIMATE
    assert classify([0.5], ds, 0.5) is Label.FRAUDULENT
    assert classify([0.0], unit_set([0.0]), 0.1) is Label.LEGITIMATE


def test_confusion_counts():
    scores = [0.9] * 10 + [0.1, 0.2] + [0.05] * 5 + [0.8]
    labels = [1] * 12 + [0] * 6
    cm = confusion(scores, labels, 0.5)
    assert (cm.tp, cm.fn, cm.tn, cm.fp) == (10, 2, 5, 1)
    assert cm.total == 18
    # boundary score counts as fraud
    assert confusion([0.5], [1], 0.5).tp == 1


def test_metrics_formulas():
    m = metrics(ConfusionMatrix(tp=8, fp=2, tn=88, fn=2))
    assert m.sensitivity == 0.8
    assert m.precision == 0.8
    assert m.specificity == 88 / 90
    assert m.accuracy == 96 / 100
    assert m.cost == 100 * 2 + 10 * 2 + 8


def test_undefined_ratios_are_nan():
    m = metrics(ConfusionMatrix(tp=0, fp=0, tn=5, fn=0))
    assert math.isnan(m.precision) and math.isnan(m.sensitivity)
    assert m.specificity == 1.0
    d = m.to_dict()
    assert d["precision"] is None
    back = MetricsReport.from_dict(json.loads(json.dumps(d)))
    assert math.isnan(back.precision) and back.specificity == 1.0


def test_perfect_matrix():
    m = metrics(ConfusionMatrix(tp=3, fp=0, tn=7, fn=0))
    assert (m.sensitivity, m.precision, m.specificity, m.accuracy) == (1.0, 1.0, 1.0, 1.0)


def test_cost_examples():
    assert cost(ConfusionMatrix(tp=1, fp=1, fn=1)) == 111
    assert cost(ConfusionMatrix()) == 0
    assert cost(ConfusionMatrix(tp=399, fp=39, fn=60)) == 6789
    # true negatives are free
    assert cost(ConfusionMatrix(tn=10_000)) == 0


@settings(max_examples=100)
@given(matrices, matrices)
def test_cost_is_linear(a, b):
    assert cost(a + b) == cost(a) + cost(b)


@settings(max_examples=100)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.data(), st.floats(0, 1))
def test_ratios_in_unit_interval(scores, data, thr):
    labels = data.draw(st.lists(st.integers(0, 1), min_size=len(scores), max_size=len(scores)))
    cm = confusion(scores, labels, thr)
    assert cm.total == len(scores)
    m = metrics(cm)
    for v in (m.sensitivity, m.precision, m.specificity, m.accuracy):
        assert math.isnan(v) or 0.0 <= v <= 1.0


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        ConfusionMatrix(tp=-1)


def test_auc_examples():
    assert roc_auc([0.9, 0.4, 0.5, 0.1], [1, 1, 0, 0])[2] == 0.75
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])[2] == 1.0
    assert roc_auc([0.3] * 5, [1, 0, 1, 0, 0])[2] == 0.5
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.2], [1, 1])


@st.composite
def scored(draw):
    n = draw(st.integers(2, 20))
    labels = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda y: 0 < sum(y) < len(y)))
    scores = draw(st.lists(st.integers(0, 6).map(lambda v: v / 4), min_size=n, max_size=n))
    return np.array(scores), np.array(labels)


@settings(max_examples=200)
@given(scored())
def test_auc_matches_pairs_and_trapezoid(data):
    s, y = data
    fpr, tpr, auc = roc_auc(s, y)
    assert auc == pytest.approx(naive_auc(s, y), abs=1e-12)
    assert np.trapezoid(tpr, fpr) == pytest.approx(auc, abs=1e-12)
    assert fpr[0] == tpr[0] == 0.0 and fpr[-1] == tpr[-1] == 1.0
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)


@settings(max_examples=100)
@given(scored())
def test_auc_invariances(data):
    s, y = data
    auc = roc_auc(s, y)[2]
    assert roc_auc(np.exp(3 * s) - 7, y)[2] == pytest.approx(auc, abs=1e-12)
    assert roc_auc(s, 1 - y)[2] + auc == pytest.approx(1.0, abs=1e-12)


def test_roc_threshold_maximises_youden(rng):
    s = np.r_[rng.normal(0, 1, 200), rng.normal(2, 1, 50)]
    y = np.r_[np.zeros(200, int), np.ones(50, int)]
    t = roc_threshold(s, y)

    def youden(th):
        m = metrics(confusion(s, y, th))
        return m.sensitivity + m.specificity

    best = youden(t)
    assert all(youden(c) <= best + 1e-12 for c in np.r_[s, np.inf])


def test_roc_threshold_separable():
    t = roc_threshold([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
    assert t == 0.8


def test_timed():
    out, sec = timed(lambda a, b: a + b, 2, b=3)
    assert out == 5 and 0 <= sec < 1 and math.isfinite(sec)


def test_roc_csv():
    buf = io.StringIO()
    write_roc_csv([0.0, 0.5, 1.0], [0.0, 1.0, 1.0], buf)
    assert buf.getvalue() == "fpr,tpr\n0,0\n0.5,1\n1,1\n"


def test_metrics_json_field_names():
    rep = metrics(ConfusionMatrix(tp=1, tn=1))
    assert set(json.loads(rep.to_json())) == set(MetricsReport.FIELDS)


def test_detector_file_round_trip_is_exact(tmp_path, small_split):
    ds = train(small_split.train, AroTrainParams(seed=1))
    save_detectors(ds, tmp_path / "d.txt")
    back = load_detectors(tmp_path / "d.txt")
    assert back.same_model(ds)
    assert dump_detectors(back) == dump_detectors(ds)
    np.testing.assert_array_equal(score_many(small_split.test.features, back), score_many(small_split.test.features, ds))


def test_detector_file_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("hello\n")
    with pytest.raises(ValueError, match="not a detector file"):
        load_detectors(p)
    good = dump_detectors(unit_set([0.1, 0.2]))
    p.write_text(good + "0.5\n")
    with pytest.raises(ValueError, match="expected 2"):
        load_detectors(p)


def test_separable_end_to_end(ds1_split):
    ds = train(ds1_split.train, AroTrainParams(seed=0))
    res = evaluate_detectors(ds, ds1_split.test, ds1_split.train, threshold="roc")
    cm = res.confusion
    assert cm["fn"] < 0.05 * ds1_split.test.n_fraud
    assert cm["fp"] < 0.05 * ds1_split.test.n_legit
    assert res.report.auc > 0.98


def test_threshold_modes(small_split):
    ds = train(small_split.train, AroTrainParams(seed=0))
    assert evaluate_detectors(ds, small_split.test, threshold="cut_point").threshold == 0.175
    assert evaluate_detectors(ds, small_split.test, threshold=0.3).threshold == 0.3
    with pytest.raises(ValueError):
        evaluate_detectors(ds, small_split.test, threshold="roc")
    with pytest.raises(ValueError):
        evaluate_detectors(ds, small_split.test, small_split.train, threshold="bogus")
    raw = evaluate_detectors(ds, small_split.test, small_split.train, score_against="raw")
    assert 0.0 <= raw.report.auc <= 1.0

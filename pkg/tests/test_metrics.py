import json

import numpy as np
import pytest

from sentact import metrics
from sentact.corpus import DA_LABELS, SENTIMENT_LABELS, DialogActLabel, SentimentLabel
from sentact.metrics import (
    ConfusionMatrix,
    cohen_kappa,
    da_weighted_f1,
    f1_per_class,
    sentiment_macro_f1,
)


def naive_prf(counts):
    """Independent recount: per-class precision/recall/F1 from raw loops."""
    k = counts.shape[0]
    precision = np.zeros(k)
    recall = np.zeros(k)
    f1 = np.zeros(k)
    for i in range(k):
        tp = counts[i, i]
        pred = sum(counts[g, i] for g in range(k))
        gold = sum(counts[i, p] for p in range(k))
        precision[i] = tp / pred if pred else 0.0
        recall[i] = tp / gold if gold else 0.0
        denom = precision[i] + recall[i]
        f1[i] = 2 * precision[i] * recall[i] / denom if denom else 0.0
    return precision, recall, f1


def naive_kappa(a, b):
    n = len(a)
    classes = sorted(set(a) | set(b), key=str)
    po = sum(x == y for x, y in zip(a, b)) / n
    pe = 0.0
    for c in classes:
        pe += (sum(x == c for x in a) / n) * (sum(y == c for y in b) / n)
    return (po - pe) / (1 - pe), po


def cm(counts, labels=None):
    counts = np.asarray(counts)
    labels = labels if labels is not None else tuple(range(counts.shape[0]))
    return ConfusionMatrix(labels=tuple(labels), counts=counts)


def sent_cm(counts):
    return cm(counts, SENTIMENT_LABELS)


# ---------------------------------------------------------------------------
# per-class F1
# ---------------------------------------------------------------------------

def test_diagonal_cm_is_perfect():
    _, _, f1 = f1_per_class(cm(np.diag([3, 1, 7])))
    np.testing.assert_array_equal(f1, [1.0, 1.0, 1.0])


def test_all_one_column_cm():
    counts = np.zeros((3, 3), dtype=int)
    counts[:, 0] = [5, 3, 2]
    p, r, f1 = f1_per_class(cm(counts))
    assert r[0] == 1.0
    assert p[0] == 0.5  # prevalence of class 0
    assert f1[1] == f1[2] == 0.0


def test_f1_matches_naive_recount_on_random_cms():
    rng = np.random.default_rng(0)
    for _ in range(200):
        counts = rng.integers(0, 20, size=(4, 4))
        p, r, f1 = f1_per_class(cm(counts))
        pn, rn, f1n = naive_prf(counts)
        np.testing.assert_allclose(p, pn, atol=1e-12)
        np.testing.assert_allclose(r, rn, atol=1e-12)
        np.testing.assert_allclose(f1, f1n, atol=1e-12)


def test_cm_from_pairs_and_validation():
    built = ConfusionMatrix.from_pairs(["a", "b", "a"], ["a", "a", "b"], ("a", "b"))
    np.testing.assert_array_equal(built.counts, [[1, 1], [1, 0]])
    with pytest.raises(ValueError):
        ConfusionMatrix.from_pairs(["a"], ["a", "b"], ("a", "b"))
    with pytest.raises(ValueError):
        cm(np.zeros((2, 3)))


# ---------------------------------------------------------------------------
# sentiment macro F1 (positive and negative only)
# ---------------------------------------------------------------------------

def test_sentiment_perfect():
    assert sentiment_macro_f1(sent_cm(np.diag([4, 5, 6]))) == 1.0


def test_sentiment_all_neutral_predictions_score_zero():
    counts = np.zeros((3, 3), dtype=int)
    counts[:, 2] = [26, 31, 43]
    assert sentiment_macro_f1(sent_cm(counts)) == 0.0
    # the 3-class reading stays visible alongside
    assert metrics.macro_f1_all_classes(sent_cm(counts)) > 0.0


def test_sentiment_crafted_half_and_seven_tenths():
    # F1(pos) = 0.5, F1(neg) = 0.7 by construction
    counts = [
        [1, 0, 1],
        [0, 7, 3],
        [1, 3, 5],
    ]
    assert abs(sentiment_macro_f1(sent_cm(counts)) - 0.6) < 1e-12


def test_sentiment_label_permutation_invariance():
    rng = np.random.default_rng(1)
    counts = rng.integers(0, 10, (3, 3))
    base = sentiment_macro_f1(sent_cm(counts))
    perm = [2, 0, 1]
    permuted = counts[np.ix_(perm, perm)]
    labels = tuple(SENTIMENT_LABELS[i] for i in perm)
    assert abs(sentiment_macro_f1(cm(permuted, labels)) - base) < 1e-12


# ---------------------------------------------------------------------------
# prevalence-weighted dialog-act F1
# ---------------------------------------------------------------------------

def test_weighted_perfect():
    counts = np.diag(np.arange(1, 16))
    assert da_weighted_f1(cm(counts, DA_LABELS)) == 1.0


def test_weighted_two_class_hand_case():
    # gold: 8 of class a, 2 of class b; predictions always a
    counts = np.array([[8, 0], [2, 0]])
    # F1(a) = 2*0.8*1/(1.8); weight 0.8; class b contributes 0
    expected = 0.8 * (2 * 0.8 / 1.8)
    assert abs(da_weighted_f1(cm(counts)) - expected) < 1e-12


def test_weighted_always_majority_analytic():
    # prevalence p for the predicted class gives p * 2p/(1+p)
    p = 0.493
    n = 1000
    counts = np.zeros((15, 15), dtype=int)
    majority = 2  # index of the most frequent label
    counts[majority, majority] = int(round(p * n))
    rest = n - counts[majority, majority]
    others = [i for i in range(15) if i != majority]
    for i, k in enumerate(others):
        counts[k, majority] = rest // len(others) + (1 if i < rest % len(others) else 0)
    got = da_weighted_f1(cm(counts, DA_LABELS))
    phat = counts[majority, majority] / n
    assert abs(got - phat * (2 * phat / (1 + phat))) < 1e-12


def test_weighted_f1_in_unit_interval_and_diagonal_iff_one():
    rng = np.random.default_rng(2)
    for _ in range(100):
        counts = rng.integers(0, 12, (5, 5))
        if counts.sum() == 0:
            continue
        score = da_weighted_f1(cm(counts))
        assert 0.0 <= score <= 1.0
        off_diag = counts - np.diag(np.diag(counts))
        if score == 1.0:
            assert off_diag.sum() == 0


def test_weighted_empty_cm_scores_zero():
    assert da_weighted_f1(cm(np.zeros((3, 3), dtype=int))) == 0.0


# ---------------------------------------------------------------------------
# Cohen's kappa
# ---------------------------------------------------------------------------

def test_kappa_identical_sequences():
    res = cohen_kappa(list("aabbcc"), list("aabbcc"))
    assert res.kappa == 1.0
    assert res.observed_agreement == 1.0


def test_kappa_textbook_two_by_two():
    # agreement table [[20, 5], [10, 15]]: po = 0.7, pe = 0.5, kappa = 0.4
    a = ["y"] * 25 + ["n"] * 25
    b = ["y"] * 20 + ["n"] * 5 + ["y"] * 10 + ["n"] * 15
    res = cohen_kappa(a, b)
    assert abs(res.observed_agreement - 0.7) < 1e-12
    assert abs(res.kappa - 0.4) < 1e-12


def test_kappa_independent_labels_near_zero():
    rng = np.random.default_rng(3)
    n = 200_000
    a = rng.integers(0, 2, n).tolist()
    b = rng.integers(0, 2, n).tolist()
    res = cohen_kappa(a, b)
    assert abs(res.kappa) < 0.01
    kn, pon = naive_kappa(a[:5000], b[:5000])
    res_small = cohen_kappa(a[:5000], b[:5000])
    assert abs(res_small.kappa - kn) < 1e-12
    assert abs(res_small.observed_agreement - pon) < 1e-12


def test_kappa_errors():
    with pytest.raises(ValueError):
        cohen_kappa(["a"], ["a", "b"])
    with pytest.raises(ValueError):
        cohen_kappa([], [])
    # constant identical sequences: pe = 1 and po = 1 -> kappa 1
    assert cohen_kappa(["a", "a"], ["a", "a"]).kappa == 1.0


# ---------------------------------------------------------------------------
# reports and prediction files
# ---------------------------------------------------------------------------

def test_report_json_and_table():
    counts = np.diag([2, 3, 4])
    rep = metrics.MetricsReport.for_sentiment(sent_cm(counts))
    data = json.loads(rep.to_json())
    assert data["task"] == "sentiment"
    assert data["score"] == 1.0
    assert data["per_class"]["POSITIVE"]["support"] == 2
    assert "macro_f1_3class" in data
    table = rep.to_table()
    assert "POSITIVE" in table and "score=1.0000" in table


def test_score_predictions_skips_missing_gold():
    gold = [(SentimentLabel.POSITIVE, None), (None, DialogActLabel.STATEMENT)]
    pred = [(SentimentLabel.POSITIVE, DialogActLabel.STATEMENT),
            (SentimentLabel.NEGATIVE, DialogActLabel.STATEMENT)]
    sent_rep, da_rep = metrics.score_predictions(gold, pred)
    assert sent_rep.support.sum() == 1
    assert da_rep.support.sum() == 1
    assert sent_rep.score == 0.5  # F1(pos)=1, F1(neg)=0
    assert da_rep.score == 1.0


def test_prediction_file_roundtrip(tmp_path):
    from sentact import corpus as cp
    from conftest import table1_tsv

    src = tmp_path / "t.tsv"
    src.write_text(table1_tsv(), encoding="utf-8")
    dialogs = cp.linearize_forest(cp.parse_corpus(src))
    preds = [[(p.sentiment, p.dialog_act) for p in d.posts] for d in dialogs]
    out = tmp_path / "pred.tsv"
    cp.write_linearized_tsv(dialogs, out, preds)
    sent_rep, da_rep = metrics.score_prediction_file(out)
    assert sent_rep.score == 1.0
    assert da_rep.score == 1.0


def test_prediction_file_bad_codes(tmp_path):
    out = tmp_path / "bad.tsv"
    out.write_text("b\t0\tt\tp\t-\t+\tI\thello\t%\tI\n", encoding="utf-8")
    with pytest.raises(Exception):
        metrics.score_prediction_file(out)

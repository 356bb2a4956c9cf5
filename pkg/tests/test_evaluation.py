import numpy as np
import pandas as pd
import pytest
from helpers import CREDIT_GRAPH, random_credit_frame

from rpid import evaluation as ev
from rpid.causal_graph import build_warp_plan
from rpid.warp import WarpedTable, fit_warp_models, warp_training


@pytest.fixture(scope="module")
def warped_fixture():
    data = random_credit_frame(np.random.default_rng(21), 150, 300)
    plan = build_warp_plan(CREDIT_GRAPH, "male")
    return data, plan, warp_training(data, plan, fit_warp_models(data, plan))


def find_from(warped: WarpedTable) -> pd.DataFrame:
    return warped.features("label")


# -- W1 ----------------------------------------------------------------------


def test_w1_identical_tables(warped_fixture):
    data, plan, w = warped_fixture
    preds = np.full(len(data), 0.7)
    rep = ev.eval_w1(w, find_from(w), preds)
    for v, res in rep["variables"].items():
        assert res["p_value"] == pytest.approx(1.0) and not res["reject"], v
    assert rep["prediction_gap_test"]["degenerate"] and rep["prediction_gap_test"]["p_value"] == 1.0


def test_w1_shifted_variable_rejected(warped_fixture):
    data, plan, w = warped_fixture
    find = find_from(w).copy()
    find["Amount"] = find["Amount"] + 1e5
    rep = ev.eval_w1(w, find, np.linspace(0, 1, len(data)))
    assert rep["variables"]["Amount"]["reject"]
    assert not rep["variables"]["Savings"]["reject"] and not rep["variables"]["Risk"]["reject"]


def test_w1_length_mismatch(warped_fixture):
    data, plan, w = warped_fixture
    with pytest.raises(ev.SchemaMismatch):
        ev.eval_w1(w, find_from(w).iloc[:-1], np.zeros(len(data)))


# -- W2 ----------------------------------------------------------------------


def test_w2_identical_worlds():
    rng = np.random.default_rng(0)
    real = rng.random(50)
    warped = rng.random(50)
    groups = np.where(rng.random(50) < 0.3, "f", "m")
    t = ev.PredictionTriple(real, warped, groups, warped.copy())
    np.testing.assert_array_equal(t.d1, real - warped)
    rep = ev.eval_w2(t, "m", k=5)
    assert rep["all"]["spearman_d1_d2"] == pytest.approx(1.0)
    assert rep["all"]["paired_t"]["degenerate"] and rep["all"]["paired_t"]["p_value"] == 1.0
    assert rep["all"]["top_k_overlap"] == 1.0


def test_w2_antithetic():
    d = np.linspace(-0.5, 0.5, 21)
    real = np.full(21, 0.5)
    t = ev.PredictionTriple(real, real - d, ["f"] * 21, real + d)
    assert ev.eval_w2(t, "m")["all"]["spearman_d1_d2"] == pytest.approx(-1.0)


def test_w2_requires_find():
    with pytest.raises(ev.MissingFindWorld):
        ev.eval_w2(ev.PredictionTriple([0.1, 0.2], [0.2, 0.3], ["a", "b"]), "a")


def test_triple_lengths():
    with pytest.raises(ev.SchemaMismatch):
        ev.PredictionTriple([0.1, 0.2], [0.1], ["a", "b"])


def test_top_k_overlap():
    assert ev.top_k_overlap([-3, -2, -1, 0], [-3, 0, -1, -2], 2) == 0.5


# -- UC1 ---------------------------------------------------------------------


def test_uc1():
    labels = np.array([1, 0, 1, 0])
    groups = ["f", "f", "m", "m"]
    perfect = ev.eval_uc1([0.9, 0.1, 0.8, 0.2], labels, groups)
    assert perfect["overall"] == 1.0 and perfect["groups"] == {"f": 1.0, "m": 1.0}
    wrong = ev.eval_uc1([0.1, 0.9, 0.2, 0.8], labels, groups)
    assert wrong["overall"] == 0.0 and wrong["groups"] == {"f": 0.0, "m": 0.0}


# -- UC2 ---------------------------------------------------------------------


def uc2_fixture(d1):
    n = len(d1)
    real = np.full(n, 0.5)
    groups = np.array(["female"] * 5 + ["male"] * (n - 5))
    feats = pd.DataFrame({"Age": np.arange(n, dtype=float), "Savings": np.zeros(n)})
    return ev.PredictionTriple(real, real - np.asarray(d1), groups), feats


def test_uc2_single_discriminated_individual():
    d1 = np.zeros(12)
    d1[3] = -0.21
    t, feats = uc2_fixture(d1)
    rep = ev.eval_uc2(t, feats, feats, ["Savings"], k=3, group_name="Gender")
    top = rep["top"].iloc[0]
    assert top["Age"] == 3.0 and top["diff"] == pytest.approx(0.21) and top["Gender"] == "female"
    assert list(rep["top"].columns)[:3] == ["Gender", "Age", "Savings"]
    assert len(rep["bottom"]) == 3


def test_uc2_no_signal():
    t, feats = uc2_fixture(np.zeros(12))
    tests = ev.eval_uc2(t, feats, feats, [], k=3)["subgroup_tests"]
    assert all(r["p_value"] == 1.0 and r["degenerate"] for r in tests.values())


def test_uc2_flags_shifted_group():
    rng = np.random.default_rng(1)
    d1 = rng.normal(0, 0.05, size=200)
    d1[:5] -= 0.5
    t, feats = uc2_fixture(d1)
    tests = ev.eval_uc2(t, feats, feats, [], k=3)["subgroup_tests"]
    assert tests["female"]["p_value"] < 0.01 and tests["female"]["mean_d1"] < 0
    assert tests["male"]["p_value"] > 0.01


# -- UC3 / UC4 -----------------------------------------------------------------


def test_uc3_fixtures():
    real = pd.DataFrame({"a": [0.0, 1.0, 2.0, 3.0], "b": [1.0, 1.0, 0.0, 0.0]})
    np.testing.assert_array_equal(ev.eval_uc3(real, real), 0.0)
    sd = real.a.std(ddof=0)
    w = real.copy()
    w.loc[2, "a"] += sd
    np.testing.assert_allclose(ev.eval_uc3(real, w), [0, 0, 1, 0], atol=1e-12)
    w.loc[0, "b"] = 0.0  # b has std 0.5, so this is two stds
    d = ev.eval_uc3(real, w)
    assert d[0] == pytest.approx(2.0) and d[2] == pytest.approx(1.0)
    assert list(np.argsort(-d)) [:2] == [0, 2]


def test_uc4_fixtures():
    real = pd.DataFrame({"Age": [20.0, 30, 40, 50], "Savings": [0, 1, 0, 1], "c": [5.0] * 4})
    assert all(r["distance"] == 0.0 for r in ev.eval_uc4(real, real))
    w = real.copy()
    w.loc[[0, 1], "Savings"] = 1 - w.loc[[0, 1], "Savings"]  # flip every non-reference row
    rows = ev.eval_uc4(real, w)
    assert rows[0] == {"feature": "Savings", "distance": 0.5, "constant": False}
    assert next(r for r in rows if r["feature"] == "c")["constant"]


def test_uc3_uc4_affine_invariance():
    rng = np.random.default_rng(2)
    real = pd.DataFrame({"a": rng.normal(size=30), "b": rng.gamma(2, size=30)})
    warped = real + rng.normal(0, 0.3, size=(30, 2))
    d3, d4 = ev.eval_uc3(real, warped), ev.eval_uc4(real, warped)
    scaled_r, scaled_w = real.copy(), warped.copy()
    scaled_r["a"] = 7.5 * real.a - 3
    scaled_w["a"] = 7.5 * warped.a - 3
    np.testing.assert_allclose(ev.eval_uc3(scaled_r, scaled_w), d3, rtol=1e-10)
    for x, y in zip(ev.eval_uc4(scaled_r, scaled_w), d4):
        assert x["feature"] == y["feature"] and x["distance"] == pytest.approx(y["distance"], rel=1e-10)


def test_named_metrics():
    real = pd.DataFrame({"a": [0.0, 1.0, 2.0, 3.0], "b": [0.0, 2.0, 0.0, 2.0]})
    w = real + 1.0
    assert ev.eval_uc3(real, w, metric="minmax_euclidean")[0] == pytest.approx(np.hypot(1 / 3, 1 / 2))
    assert ev.eval_uc3(real, w, metric="zscore_manhattan")[0] == pytest.approx(1 / real.a.std(ddof=0) + 1.0)
    assert ev.eval_uc4(real, w, metric="zscore_mean_abs")[0]["feature"] == "b"
    with pytest.raises(ev.EvaluationError):
        ev.eval_uc3(real, w, metric="cosine")
    with pytest.raises(ev.SchemaMismatch):
        ev.eval_uc4(real, w.iloc[:2])


# -- group fairness -------------------------------------------------------------


def confusion_rows(tp, fp, tn, fn):
    preds = [1.0] * (tp + fp) + [0.0] * (tn + fn)
    labels = [1] * tp + [0] * fp + [0] * tn + [1] * fn
    return preds, labels


def test_fairness_identical_groups():
    p, y = confusion_rows(10, 5, 20, 5)
    r = ev.group_fairness_ratios(p + p, y + y, ["f"] * 40 + ["m"] * 40, "m")
    assert (r.acc, r.ppv, r.fpr, r.tpr, r.stp) == (1.0, 1.0, 1.0, 1.0, 1.0)
    assert r.checks_passed == 5


def test_fairness_tpr_fixture():
    # female: tp 5 fn 5 (TPR 0.5), male: tp 10 fn 0; female gets extra true negatives
    # so accuracy, PPV, FPR and positive rate match the male group
    pf, yf = confusion_rows(5, 5, 10, 5)
    pm, ym = confusion_rows(10, 10, 20, 0)
    r = ev.group_fairness_ratios(pf + pm, yf + ym, ["f"] * 25 + ["m"] * 40, "m")
    assert r.tpr == pytest.approx(0.5)
    assert r.ppv == pytest.approx(1.0) and r.fpr == pytest.approx(1.0)
    assert r.stp == pytest.approx((10 / 25) / (20 / 40))
    assert r.acc == pytest.approx((15 / 25) / (30 / 40))


def test_fairness_tpr_only():
    pf, yf = confusion_rows(5, 10, 30, 5)
    pm, ym = confusion_rows(10, 20, 60, 0)
    r = ev.group_fairness_ratios(pf + pm, yf + ym, ["f"] * 50 + ["m"] * 90, "m")
    assert r.tpr == pytest.approx(0.5) and r.checks_passed == 4 - (not 0.95 < r.acc < 1 / 0.95) - (not 0.95 < r.stp < 1 / 0.95)


def test_fairness_swap_gives_reciprocals():
    rng = np.random.default_rng(3)
    preds, labels = rng.random(200), rng.integers(0, 2, 200)
    groups = np.where(rng.random(200) < 0.4, "f", "m")
    a = ev.group_fairness_ratios(preds, labels, groups, "m")
    b = ev.group_fairness_ratios(preds, labels, groups, "f")
    for name in ev.RATIO_NAMES:
        assert getattr(b, name) == pytest.approx(1.0 / getattr(a, name))
    assert a.checks_passed == b.checks_passed


def test_fairness_undefined_ratio():
    # no predicted positives among males: PPV undefined, STP denominator zero
    r = ev.group_fairness_ratios([0.9, 0.1, 0.1, 0.2], [1, 0, 1, 0], ["f", "f", "m", "m"], "m")
    assert "ppv" in r.undefined and "stp" in r.undefined
    assert r.to_dict()["ppv"] is None
    with pytest.raises(ev.EmptyGroup):
        ev.group_fairness_ratios([0.5], [1], ["m"], "m")

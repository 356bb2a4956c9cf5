"""Evaluation criteria for warped data and the models trained on it.

``eval_w1``/``eval_w2`` need a known FiND world and are meant for
simulation studies; the ``eval_uc*`` functions and
``group_fairness_ratios`` work on any real/warped pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from . import stats
from .warp import WarpedTable, threshold_scores

DEFAULT_ALPHA = 0.05
DEFAULT_EPSILON = 0.95
DEFAULT_TAU = 0.5


class EvaluationError(ValueError):
    pass


class SchemaMismatch(EvaluationError):
    pass


class MissingFindWorld(EvaluationError):
    pass


class EmptyGroup(EvaluationError):
    pass


def _groups(group) -> np.ndarray:
    return np.asarray(group).astype(str)


def _safe_test(fn, *args) -> dict:
    """Run a test; degenerate inputs give a flagged result instead of an exception."""
    try:
        res = fn(*args)
    except stats.ZeroVariance:
        # constant data: no evidence against the null iff the effect is exactly zero
        if fn is stats.t_test_paired:
            no_effect = np.all(np.ravel(args[0]) == np.ravel(args[1]))
        elif len(args) > 1:
            no_effect = np.ptp(np.concatenate([np.ravel(a) for a in args])) == 0
        else:
            no_effect = np.all(np.ravel(args[0]) == 0)
        return {"statistic": None, "p_value": 1.0 if no_effect else 0.0, "df": None, "degenerate": True}
    except stats.TooFewObservations:
        return {"statistic": None, "p_value": None, "df": None, "degenerate": True}
    return {"statistic": res.statistic, "p_value": res.p_value, "df": res.df, "degenerate": False}


# --------------------------------------------------------------------------
# W1 / W2


def eval_w1(warped: WarpedTable, find: pd.DataFrame, preds_warped, alpha: float = DEFAULT_ALPHA) -> dict:
    """Compare warped and FiND distributions among non-reference rows.

    Continuous variables get a two-sample KS test on the raw warped scores.
    Binary variables get an exact binomial test of the warped label count
    against the FiND-world proportion. Warped-world predictions are compared
    between the groups with Welch's t-test.
    """
    plan = warped.plan
    wf = warped.features(binary="label")
    if len(wf) != len(find):
        raise SchemaMismatch(f"warped table has {len(wf)} rows, FiND table {len(find)}")
    groups = _groups(wf[plan.protected])
    nonref = groups != plan.reference_group
    variables = {}
    for v in plan.warp_order:
        if v not in find.columns:
            raise SchemaMismatch(f"FiND table lacks warped variable {v!r}")
        if plan.kinds.get(v) == "binary":
            w = wf.loc[nonref, v].to_numpy(dtype=float)
            f = find.loc[nonref, v].to_numpy(dtype=float)
            k, n = int(round(w.sum())), int(w.size)
            res = stats.binom_test(k, n, float(f.mean()) if n else 0.0)
        else:
            w = warped.table.loc[nonref, v + "_score"].to_numpy(dtype=float)
            f = find.loc[nonref, v].to_numpy(dtype=float)
            res = stats.ks_two_sample(w, f)
        variables[v] = {**res.to_dict(), "reject": bool(res.p_value < alpha)}
    preds = np.asarray(preds_warped, dtype=float)
    welch = _safe_test(stats.t_test_welch, preds[groups == plan.reference_group], preds[nonref])
    welch["reject"] = welch["p_value"] is not None and welch["p_value"] < alpha
    return {"alpha": alpha, "variables": variables, "prediction_gap_test": welch}


@dataclass
class PredictionTriple:
    real_pred: np.ndarray
    warped_pred: np.ndarray
    group: np.ndarray
    find_pred: Optional[np.ndarray] = None

    def __post_init__(self):
        self.real_pred = np.asarray(self.real_pred, dtype=float)
        self.warped_pred = np.asarray(self.warped_pred, dtype=float)
        self.group = _groups(self.group)
        if self.find_pred is not None:
            self.find_pred = np.asarray(self.find_pred, dtype=float)
        sizes = {self.real_pred.size, self.warped_pred.size, self.group.size}
        if self.find_pred is not None:
            sizes.add(self.find_pred.size)
        if len(sizes) != 1:
            raise SchemaMismatch(f"prediction vectors differ in length: {sorted(sizes)}")

    @property
    def d1(self) -> np.ndarray:
        return self.real_pred - self.warped_pred

    @property
    def d2(self) -> Optional[np.ndarray]:
        return None if self.find_pred is None else self.real_pred - self.find_pred


def _spearman_or_none(a, b) -> Optional[float]:
    try:
        return stats.spearman(a, b)
    except (stats.ConstantInput, stats.TooFewObservations):
        return None


def top_k_overlap(d1, d2, k: int) -> float:
    """Share of the k most negative d2 entries that are also among the k most negative d1."""
    k = min(k, len(d1))
    if k == 0:
        return float("nan")
    top1 = set(np.argsort(d1, kind="mergesort")[:k])
    top2 = set(np.argsort(d2, kind="mergesort")[:k])
    return len(top1 & top2) / k


def eval_w2(triple: PredictionTriple, reference_group: str, k: int = 10, alpha: float = DEFAULT_ALPHA) -> dict:
    """Does warping recover individual FiND-world prediction shifts?"""
    if triple.find_pred is None:
        raise MissingFindWorld("W2 needs FiND-world predictions")
    d1, d2 = triple.d1, triple.d2
    nonref = triple.group != str(reference_group)
    out = {}
    for name, mask in (("all", np.ones(d1.size, dtype=bool)), ("nonreference", nonref)):
        paired = _safe_test(stats.t_test_paired, d1[mask], d2[mask])
        paired["reject"] = paired["p_value"] is not None and paired["p_value"] < alpha
        diff = d1[mask] - d2[mask]
        out[name] = {
            "paired_t": paired,
            "mean_d1_minus_d2": float(diff.mean()) if diff.size else None,
            "spearman_d1_d2": _spearman_or_none(d1[mask], d2[mask]),
            "top_k_overlap": top_k_overlap(d1[mask], d2[mask], k),
        }
    out["k"] = k
    return out


# --------------------------------------------------------------------------
# applied use-case criteria


def eval_uc1(preds, labels, group, tau: float = DEFAULT_TAU) -> dict:
    preds = np.asarray(preds, dtype=float)
    labels = np.asarray(labels).astype(int)
    groups = _groups(group)
    if preds.size == 0:
        raise EmptyGroup("no predictions")
    correct = threshold_scores(preds, tau) == labels
    per_group = {}
    for level in sorted(set(groups)):
        mask = groups == level
        per_group[level] = float(correct[mask].mean())
    return {"overall": float(correct.mean()), "groups": per_group, "tau": tau}


def eval_uc2(
    triple: PredictionTriple,
    real_features: pd.DataFrame,
    warped_features: pd.DataFrame,
    warped_columns: Sequence[str],
    k: int = 5,
    group_name: str = "group",
) -> dict:
    """Rank individuals by how much warping raises their prediction.

    Rows are sorted by ``-d1`` so individuals whose warped-world prediction
    most exceeds their real-world one come first. Each group also gets a
    one-sample t-test of ``mean(d1) = 0``.
    """
    if len(real_features) != triple.d1.size or len(warped_features) != triple.d1.size:
        raise SchemaMismatch("feature tables and predictions differ in length")
    k = min(k, triple.d1.size)
    table = pd.DataFrame({group_name: triple.group})
    for col in real_features.columns:
        table[col] = real_features[col].to_numpy()
    for col in warped_columns:
        table[col + "_warped"] = warped_features[col].to_numpy()
    table["real_pred"] = triple.real_pred
    table["warped_pred"] = triple.warped_pred
    table["diff"] = triple.warped_pred - triple.real_pred
    order = np.argsort(triple.d1, kind="mergesort")
    ranked = table.iloc[order].reset_index(drop=True)
    tests = {}
    for level in sorted(set(triple.group)):
        d = triple.d1[triple.group == level]
        res = _safe_test(stats.t_test_one_sample, d)
        res["mean_d1"] = float(d.mean())
        res["n"] = int(d.size)
        tests[level] = res
    return {"top": ranked.head(k), "bottom": ranked.tail(k), "ranked": ranked, "subgroup_tests": tests}


def _aligned(real: pd.DataFrame, warped: pd.DataFrame, variables) -> list[str]:
    if len(real) != len(warped):
        raise SchemaMismatch(f"real table has {len(real)} rows, warped table {len(warped)}")
    variables = list(variables) if variables is not None else [c for c in real.columns if c in warped.columns]
    for v in variables:
        if v not in real.columns or v not in warped.columns:
            raise SchemaMismatch(f"column {v!r} missing from one of the tables")
    return variables


def _zscore(x: np.ndarray, w: np.ndarray) -> Optional[np.ndarray]:
    sd = x.std()
    return None if sd == 0.0 else (w - x) / sd


def _minmax(x: np.ndarray, w: np.ndarray) -> Optional[np.ndarray]:
    span = x.max() - x.min() if x.size else 0.0
    return None if span == 0.0 else (w - x) / span


# per-row distances: (scaler, combine) with combine reducing an (n, k) array of scaled changes
UC3_METRICS = {
    "zscore_euclidean": (_zscore, lambda d: np.sqrt(np.sum(d**2, axis=1))),
    "zscore_manhattan": (_zscore, lambda d: np.sum(np.abs(d), axis=1)),
    "minmax_euclidean": (_minmax, lambda d: np.sqrt(np.sum(d**2, axis=1))),
}
# per-feature distances: scaler, then mean absolute change
UC4_METRICS = {"minmax_mean_abs": _minmax, "zscore_mean_abs": _zscore}


def _metric(table: dict, name: str, what: str):
    if name not in table:
        raise EvaluationError(f"unknown {what} metric {name!r}; choose from {sorted(table)}")
    return table[name]


def eval_uc3(real_features: pd.DataFrame, warped_features: pd.DataFrame, variables=None, metric: str = "zscore_euclidean") -> np.ndarray:
    """Per-row distance between real and warped features.

    The default z-scores each change by the real-world std and takes the
    Euclidean norm. Constant real-world columns are skipped.
    """
    scale, combine = _metric(UC3_METRICS, metric, "UC3")
    variables = _aligned(real_features, warped_features, variables)
    cols = []
    for v in variables:
        d = scale(real_features[v].to_numpy(dtype=float), warped_features[v].to_numpy(dtype=float))
        if d is not None:
            cols.append(d)
    if not cols:
        return np.zeros(len(real_features))
    return combine(np.column_stack(cols))


def eval_uc4(real_features: pd.DataFrame, warped_features: pd.DataFrame, variables=None, metric: str = "minmax_mean_abs") -> list[dict]:
    """Mean absolute per-row change of each feature, largest first.

    The default scales changes by the real-world range.
    """
    scale = _metric(UC4_METRICS, metric, "UC4")
    variables = _aligned(real_features, warped_features, variables)
    rows = []
    for v in variables:
        d = scale(real_features[v].to_numpy(dtype=float), warped_features[v].to_numpy(dtype=float))
        if d is None:
            rows.append({"feature": v, "distance": 0.0, "constant": True})
        else:
            rows.append({"feature": v, "distance": float(np.mean(np.abs(d))), "constant": False})
    rows.sort(key=lambda r: -r["distance"])
    return rows


# --------------------------------------------------------------------------
# group fairness ratios

RATIO_NAMES = ("acc", "ppv", "fpr", "tpr", "stp")


@dataclass(frozen=True)
class FairnessRatios:
    acc: float
    ppv: float
    fpr: float
    tpr: float
    stp: float
    checks_passed: int
    epsilon: float
    undefined: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = {name: (None if math.isnan(getattr(self, name)) else getattr(self, name)) for name in RATIO_NAMES}
        d.update(checks_passed=self.checks_passed, epsilon=self.epsilon, undefined=list(self.undefined))
        return d


def _rates(pred: np.ndarray, y: np.ndarray) -> dict[str, float]:
    tp = float(np.sum((pred == 1) & (y == 1)))
    fp = float(np.sum((pred == 1) & (y == 0)))
    tn = float(np.sum((pred == 0) & (y == 0)))
    fn = float(np.sum((pred == 0) & (y == 1)))
    n = tp + fp + tn + fn

    def div(a, b):
        return a / b if b > 0 else float("nan")

    return {
        "acc": div(tp + tn, n),
        "ppv": div(tp, tp + fp),
        "fpr": div(fp, fp + tn),
        "tpr": div(tp, tp + fn),
        "stp": div(tp + fp, n),
    }


def group_fairness_ratios(
    preds,
    labels,
    group,
    reference_group: str,
    tau: float = DEFAULT_TAU,
    epsilon: float = DEFAULT_EPSILON,
) -> FairnessRatios:
    """Non-reference over reference ratios of five confusion-matrix rates.

    A ratio counts as a passed check when it lies strictly inside
    ``(epsilon, 1/epsilon)``. Undefined ratios are NaN and fail their check.
    """
    groups = _groups(group)
    ref = str(reference_group)
    if not (groups == ref).any() or not (groups != ref).any():
        raise EmptyGroup("both protected groups need at least one row")
    pred = threshold_scores(preds, tau)
    y = np.asarray(labels).astype(int)
    r_ref = _rates(pred[groups == ref], y[groups == ref])
    r_non = _rates(pred[groups != ref], y[groups != ref])
    ratios, undefined = {}, []
    for name in RATIO_NAMES:
        num, den = r_non[name], r_ref[name]
        if math.isnan(num) or math.isnan(den) or den == 0.0 or num == 0.0:
            ratios[name] = float("nan")
            undefined.append(name)
        else:
            ratios[name] = num / den
    passed = sum(1 for name in RATIO_NAMES if not math.isnan(ratios[name]) and epsilon < ratios[name] < 1.0 / epsilon)
    return FairnessRatios(**ratios, checks_passed=passed, epsilon=epsilon, undefined=tuple(undefined))

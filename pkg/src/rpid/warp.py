"""Residual-based rank-preserving warping.

For every variable in the warp plan two GLMs are fitted, one per level of
the protected attribute. A non-reference individual's residual is ranked
within the non-reference residual pool, that rank is looked up in the
reference residual pool, and the result is added to the reference model's
prediction:

    warped = ref_mean(covariates) + quantile_ref(rank_nonref(residual))

Covariates that were themselves warped enter ``ref_mean`` with their raw
warped scores. Reference rows are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import pandas as pd

from . import glm
from .causal_graph import WarpPlan

DEFAULT_THRESHOLD = 0.5
SCORE_SUFFIX = "_score"
LABEL_SUFFIX = "_label"


class WarpError(ValueError):
    pass


class EmptyPool(WarpError):
    pass


class GroupTooSmall(WarpError):
    pass


class MissingFeature(WarpError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class GroupLevelError(WarpError):
    pass


@dataclass(frozen=True)
class ResidualPool:
    sorted_residuals: np.ndarray

    def __post_init__(self):
        arr = np.sort(np.asarray(self.sorted_residuals, dtype=float).ravel())
        if arr.size == 0:
            raise EmptyPool("residual pool is empty")
        arr.setflags(write=False)
        object.__setattr__(self, "sorted_residuals", arr)

    @property
    def n(self) -> int:
        return self.sorted_residuals.size


def prob_rank(r, pool: ResidualPool):
    """Fraction of pool entries that are <= ``r`` (scalar or array)."""
    counts = np.searchsorted(pool.sorted_residuals, r, side="right")
    return counts / pool.n


def empirical_quantile(p, pool: ResidualPool):
    """Smallest pool element whose <=-fraction reaches ``p``.

    Fractions are compared as ``count / n``, the same expression
    :func:`prob_rank` produces, so ranking and lookup on one pool are exact
    inverses of each other. ``p <= 0`` returns the pool minimum.
    """
    fractions = np.arange(1, pool.n + 1) / pool.n
    idx = np.searchsorted(fractions, p, side="left")
    idx = np.clip(idx, 0, pool.n - 1)
    return pool.sorted_residuals[idx]


def threshold_scores(scores, tau: float = DEFAULT_THRESHOLD) -> np.ndarray:
    return (np.asarray(scores, dtype=float) >= tau).astype(int)


@dataclass(frozen=True)
class WarpModel:
    variable: str
    kind: str
    covariates: tuple[str, ...]
    ref_fit: glm.GlmFit
    nonref_fit: glm.GlmFit
    ref_pool: ResidualPool
    nonref_pool: ResidualPool
    reference_group: str
    nonreference_group: str

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "kind": self.kind,
            "covariates": list(self.covariates),
            "reference_group": self.reference_group,
            "nonreference_group": self.nonreference_group,
            "ref_fit": self.ref_fit.to_dict(),
            "nonref_fit": self.nonref_fit.to_dict(),
            "ref_pool": [float(r) for r in self.ref_pool.sorted_residuals],
            "nonref_pool": [float(r) for r in self.nonref_pool.sorted_residuals],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WarpModel":
        return cls(
            variable=d["variable"],
            kind=d["kind"],
            covariates=tuple(d["covariates"]),
            ref_fit=glm.GlmFit.from_dict(d["ref_fit"]),
            nonref_fit=glm.GlmFit.from_dict(d["nonref_fit"]),
            ref_pool=ResidualPool(np.array(d["ref_pool"], dtype=float)),
            nonref_pool=ResidualPool(np.array(d["nonref_pool"], dtype=float)),
            reference_group=d["reference_group"],
            nonreference_group=d["nonreference_group"],
        )

    def warp_values(self, values, covariates_real, covariates_warped) -> np.ndarray:
        """Warp non-reference values; covariate arrays are (n, k) in ``self.covariates`` order."""
        x = np.asarray(values, dtype=float)
        mu_nonref = glm.predict_mean(self.nonref_fit, covariates_real)
        mu_ref = glm.predict_mean(self.ref_fit, covariates_warped)
        r = x - mu_nonref
        q = empirical_quantile(prob_rank(r, self.nonref_pool), self.ref_pool)
        # equals mu_ref + q, arranged so identical pools and fits return x bit-for-bit
        return x + (q - r) + (mu_ref - mu_nonref)


def group_levels(groups, reference_group: str) -> tuple[str, str]:
    """Return (reference, non-reference) levels, requiring exactly two."""
    levels = sorted(set(str(g) for g in groups))
    ref = str(reference_group)
    if len(levels) != 2:
        raise GroupLevelError(f"protected attribute must have exactly two levels, found {levels}")
    if ref not in levels:
        raise GroupLevelError(f"reference group {ref!r} is not a level of the protected attribute {levels}")
    return ref, next(l for l in levels if l != ref)


def _matrix(data: pd.DataFrame, cols) -> np.ndarray:
    if not cols:
        return np.empty((len(data), 0))
    return data[list(cols)].to_numpy(dtype=float)


def fit_warp_model(
    data: pd.DataFrame,
    variable: str,
    covariates,
    group_col: str,
    reference_group: str,
    kind: str | None = None,
) -> WarpModel:
    """Fit the per-group models and residual pools for one variable.

    Both fits use real-world covariate values.
    """
    for col in [variable, group_col, *covariates]:
        if col not in data.columns:
            raise MissingFeature(f"column {col!r} not found")
    if kind is None:
        values = data[variable].to_numpy(dtype=float)
        kind = "binary" if np.isin(values, (0.0, 1.0)).all() else "continuous"
    family = glm.family_for_kind(kind)
    groups = data[group_col].astype(str).to_numpy()
    ref, nonref = group_levels(groups, reference_group)
    fits, pools = {}, {}
    for level in (ref, nonref):
        subset = data[groups == level]
        if len(subset) < len(covariates) + 2:
            raise GroupTooSmall(
                f"group {level!r} has {len(subset)} rows; {variable!r} with {len(covariates)} covariates needs {len(covariates) + 2}"
            )
        x = _matrix(subset, covariates)
        y = subset[variable].to_numpy(dtype=float)
        f = glm.fit(family, x, y, feature_names=tuple(covariates))
        fits[level] = f
        pools[level] = ResidualPool(glm.residuals(f, x, y))
    return WarpModel(
        variable=variable,
        kind=kind,
        covariates=tuple(covariates),
        ref_fit=fits[ref],
        nonref_fit=fits[nonref],
        ref_pool=pools[ref],
        nonref_pool=pools[nonref],
        reference_group=ref,
        nonreference_group=nonref,
    )


def fit_warp_models(data: pd.DataFrame, plan: WarpPlan) -> dict[str, WarpModel]:
    return {
        v: fit_warp_model(data, v, plan.covariates[v], plan.protected, plan.reference_group, kind=plan.kinds.get(v))
        for v in plan.warp_order
    }


@dataclass
class WarpedTable:
    """Warped data: untouched columns plus ``<var>_score`` / ``<var>_label`` for warped ones."""

    table: pd.DataFrame
    plan: WarpPlan

    def features(self, binary: str = "label") -> pd.DataFrame:
        """Table with warped values under the original column names.

        ``binary`` picks thresholded labels or raw scores for binary variables.
        """
        return warped_view(self.table, self.plan, binary=binary)


def warped_view(table: pd.DataFrame, plan: WarpPlan, binary: str = "label") -> pd.DataFrame:
    out = {}
    for col in table.columns:
        base = None
        for suffix in (SCORE_SUFFIX, LABEL_SUFFIX):
            if col.endswith(suffix) and col[: -len(suffix)] in plan.warp_order:
                base = col[: -len(suffix)]
        if base is None:
            out[col] = table[col]
            continue
        if base in out:
            continue
        kind = plan.kinds.get(base, "continuous")
        if kind == "binary" and binary == "label" and base + LABEL_SUFFIX in table.columns:
            out[base] = table[base + LABEL_SUFFIX]
        else:
            out[base] = table[base + SCORE_SUFFIX]
    return pd.DataFrame(out)


def _check_models(plan: WarpPlan, models: Mapping[str, WarpModel], variables) -> None:
    for v in variables:
        if v not in models:
            raise WarpError(f"no warp model for {v!r}")
        if tuple(models[v].covariates) != tuple(plan.covariates[v]):
            raise WarpError(f"warp model for {v!r} has covariates {models[v].covariates}, plan says {plan.covariates[v]}")
        if models[v].reference_group != plan.reference_group:
            raise WarpError(f"warp model for {v!r} uses reference {models[v].reference_group!r}")


def _warp(data: pd.DataFrame, plan: WarpPlan, models: Mapping[str, WarpModel], variables, tau: float) -> WarpedTable:
    _check_models(plan, models, variables)
    needed = [plan.protected, *variables, *{c for v in variables for c in plan.covariates[v]}]
    for col in needed:
        if col not in data.columns:
            raise MissingFeature(f"column {col!r} not found")
    groups = data[plan.protected].astype(str).to_numpy()
    ref = plan.reference_group
    nonref = models[variables[0]].nonreference_group if variables else None
    bad = sorted(set(groups) - {ref, nonref})
    if variables and bad:
        raise GroupLevelError(f"unknown level(s) {bad} of {plan.protected!r}; expected {ref!r} or {nonref!r}")
    mask = groups != ref

    scores: dict[str, np.ndarray] = {}
    for v in variables:
        model = models[v]
        values = data[v].to_numpy(dtype=float)
        warped = values.copy()
        if mask.any():
            sub = data[mask]
            cov_real = _matrix(sub, model.covariates)
            cov_warped = cov_real.copy()
            for j, c in enumerate(model.covariates):
                if c in scores:
                    cov_warped[:, j] = scores[c][mask]
            warped[mask] = model.warp_values(sub[v].to_numpy(dtype=float), cov_real, cov_warped)
        scores[v] = warped

    out = {}
    for col in data.columns:
        if col not in scores:
            out[col] = data[col].to_numpy()
            continue
        out[col + SCORE_SUFFIX] = scores[col]
        if plan.kinds.get(col) == "binary":
            labels = data[col].to_numpy().astype(int).copy()
            labels[mask] = threshold_scores(scores[col][mask], tau)
            out[col + LABEL_SUFFIX] = labels
    return WarpedTable(pd.DataFrame(out, index=data.index), plan)


def warp_training(
    data: pd.DataFrame, plan: WarpPlan, models: Mapping[str, WarpModel], tau: float = DEFAULT_THRESHOLD
) -> WarpedTable:
    """Warp every plan variable, target included."""
    return _warp(data, plan, models, list(plan.warp_order), tau)


def warp_features(
    data: pd.DataFrame, plan: WarpPlan, models: Mapping[str, WarpModel], tau: float = DEFAULT_THRESHOLD
) -> WarpedTable:
    """Prediction-time warping of a batch: the target is never warped."""
    return _warp(data, plan, models, list(plan.feature_order), tau)


def warp_observation(
    x: Mapping, plan: WarpPlan, models: Mapping[str, WarpModel], tau: float = DEFAULT_THRESHOLD
) -> dict:
    """Warp a single feature row given as a mapping of column name to value.

    Returns the row with each warped feature replaced by its raw warped
    score, plus ``<var>_label`` entries for binary variables.
    """
    for col in [plan.protected, *plan.feature_order]:
        if col not in x:
            raise MissingFeature(f"observation lacks feature {col!r}")
    frame = pd.DataFrame({k: [v] for k, v in x.items()})
    warped = warp_features(frame, plan, models, tau).table.iloc[0].to_dict()
    out = dict(x)
    for v in plan.feature_order:
        out[v] = warped[v + SCORE_SUFFIX]
        if plan.kinds.get(v) == "binary":
            out[v + LABEL_SUFFIX] = int(warped[v + LABEL_SUFFIX])
    return out

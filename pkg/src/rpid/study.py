"""Monte-Carlo study: simulate, warp, train, score and evaluate, M times.

Iteration ``i`` (1-based) uses seed ``seed_base + i``, so results do not
depend on the order or the process in which iterations run.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from . import evaluation as ev
from . import stats
from .causal_graph import build_warp_plan
from .prediction import fit_prediction_model, predict
from .simulation import SimConfig, check_config, simulate_pair
from .warp import fit_warp_models, warp_training

log = logging.getLogger(__name__)


def feature_columns(config: SimConfig) -> list[str]:
    g = config.graph
    return [v.name for v in g.variables if v.role not in ("protected", "target")]


def _gap(preds: np.ndarray, groups: np.ndarray, levels) -> float:
    # second level minus first level, fixed by the config rather than by the reference
    return float(preds[groups == levels[1]].mean() - preds[groups == levels[0]].mean())


def _warped_world_predictions(config: SimConfig, sim, features: list[str]):
    graph = config.graph
    plan = build_warp_plan(graph, config.reference_group)
    models = fit_warp_models(sim.train.real, plan)
    warped_train = warp_training(sim.train.real, plan, models, config.threshold)
    model = fit_prediction_model(warped_train.features("label"), features, graph.target)
    warped_test = warp_training(sim.test.real, plan, models, config.threshold)
    return plan, warped_test, predict(model, warped_test.features("label"))


def run_iteration(config: SimConfig, seed: int, hooks: Iterable[Callable] = ()) -> dict:
    """All per-iteration metrics for one seed (test-set based)."""
    graph = config.graph
    pa, target = graph.protected, graph.target
    levels = config.levels
    sim = simulate_pair(config, seed)
    features = feature_columns(config)
    real_features = features + [f"{pa}={levels[0]}"]

    real_model = fit_prediction_model(sim.train.real, real_features, target)
    find_model = fit_prediction_model(sim.train.find, features, target)
    plan, warped_test, warped_pred = _warped_world_predictions(config, sim, features)
    real_pred = predict(real_model, sim.test.real)
    find_pred = predict(find_model, sim.test.find)
    groups = sim.test.real[pa].astype(str).to_numpy()

    m: dict = {}
    m["gap_real"] = _gap(real_pred, groups, levels)
    m["gap_warped"] = _gap(warped_pred, groups, levels)
    m["gap_find"] = _gap(find_pred, groups, levels)
    m["mean_pred_real"] = float(real_pred.mean())
    m["mean_pred_warped"] = float(warped_pred.mean())
    m["mean_pred_find"] = float(find_pred.mean())

    w1 = ev.eval_w1(warped_test, sim.test.find, warped_pred, config.alpha)
    for v, res in w1["variables"].items():
        m[f"w1_{v}_stat"] = res["statistic"]
        m[f"w1_{v}_p"] = res["p_value"]
    m["w1_pred_gap_p"] = w1["prediction_gap_test"]["p_value"]

    triple = ev.PredictionTriple(real_pred, warped_pred, groups, find_pred)
    w2 = ev.eval_w2(triple, config.reference_group, config.top_k, config.alpha)
    for scope, suffix in (("all", ""), ("nonreference", "_nonref")):
        r = w2[scope]
        m[f"w2_paired{suffix}_p"] = r["paired_t"]["p_value"]
        m[f"w2_mean_diff{suffix}"] = r["mean_d1_minus_d2"]
        m[f"w2_spearman{suffix}"] = r["spearman_d1_d2"]
        m[f"w2_topk_overlap{suffix}"] = r["top_k_overlap"]

    labels = {
        "real": sim.test.real[target].to_numpy(),
        "warped": warped_test.features("label")[target].to_numpy(),
        "find": sim.test.find[target].to_numpy(),
    }
    preds = {"real": real_pred, "warped": warped_pred, "find": find_pred}
    for world in ("real", "warped", "find"):
        fr = ev.group_fairness_ratios(
            preds[world], labels[world], groups, config.reference_group, config.threshold, config.epsilon
        )
        m[f"checks_{world}"] = fr.checks_passed
        for name in ev.RATIO_NAMES:
            m[f"ratio_{name}_{world}"] = getattr(fr, name)
        acc = ev.eval_uc1(preds[world], labels[world], groups, config.threshold)
        m[f"acc_{world}"] = acc["overall"]
        for level, value in acc["groups"].items():
            m[f"acc_{world}_{level}"] = value

    if config.cross_direction:
        _, _, other_pred = _warped_world_predictions(config.flipped(), sim, features)
        d1_other = real_pred - other_pred
        m["cross_spearman_d1"] = stats.spearman(triple.d1, d1_other)
        m["cross_spearman_pred"] = stats.spearman(warped_pred, other_pred)
        m["level_shift"] = float(warped_pred.mean() - other_pred.mean())
        ref = config.reference_group
        real_ref_minus_nonref = float(real_pred[groups == ref].mean() - real_pred[groups != ref].mean())
        m["level_shift_sign_expected"] = bool(np.sign(m["level_shift"]) == np.sign(real_ref_minus_nonref))

    for hook in hooks:
        m.update(hook(config=config, sim=sim, plan=plan, predictions=preds, groups=groups) or {})
    return m


def _run_one(args) -> dict:
    config, i, seed, hooks = args
    row = {"iteration": i, "seed": seed, "failed": False, "error": ""}
    try:
        row.update(run_iteration(config, seed, hooks))
    except Exception as exc:  # noqa: BLE001 - failures are recorded per iteration
        log.warning("iteration %d (seed %d) failed: %s", i, seed, exc)
        row.update(failed=True, error=f"{type(exc).__name__}: {exc}")
    return row


def _clean(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return None if math.isnan(x) else float(x)
    return x


def _cell(x):
    x = _clean(x)
    if x is None:
        return ""
    return repr(x) if isinstance(x, float) else x


@dataclass
class StudyReport:
    config: SimConfig
    seed_base: int
    rows: list[dict] = field(default_factory=list)

    @property
    def failed(self) -> list[dict]:
        return [{"iteration": r["iteration"], "error": r["error"]} for r in self.rows if r["failed"]]

    @property
    def metric_names(self) -> list[str]:
        names: list[str] = []
        for r in self.rows:
            for k in r:
                if k not in ("iteration", "seed", "failed", "error") and k not in names:
                    names.append(k)
        return names

    def values(self, name: str) -> np.ndarray:
        vals = [r.get(name) for r in self.rows if not r["failed"]]
        return np.array([v for v in vals if v is not None and not (isinstance(v, float) and math.isnan(v))], dtype=float)

    def mean(self, name: str) -> float:
        v = self.values(name)
        return float(v.mean()) if v.size else float("nan")

    def aggregate(self) -> dict:
        alpha = self.config.alpha
        metrics = {}
        for name in self.metric_names:
            v = self.values(name)
            entry = {"n": int(v.size)}
            if v.size:
                entry.update(
                    mean=float(v.mean()),
                    sd=float(v.std(ddof=1)) if v.size > 1 else 0.0,
                    q025=float(np.quantile(v, 0.025)),
                    q975=float(np.quantile(v, 0.975)),
                )
                if name.endswith("_p"):
                    entry["rejection_rate"] = float(np.mean(v < alpha))
            metrics[name] = entry
        return {
            "config": self.config.to_dict(),
            "seed_base": self.seed_base,
            "iterations": len(self.rows),
            "failed_iterations": self.failed,
            "alpha": alpha,
            "metrics": metrics,
        }

    def to_json(self) -> str:
        def walk(x):
            if isinstance(x, dict):
                return {k: walk(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [walk(v) for v in x]
            return _clean(x)

        return json.dumps(walk(self.aggregate()), indent=2, sort_keys=True) + "\n"

    def write_csv(self, path) -> None:
        cols = ["iteration", "seed", "failed", "error", *self.metric_names]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.rows:
                w.writerow([_cell(r.get(c)) for c in cols])


def run_study(
    config: SimConfig,
    seed_base: int = 0,
    jobs: int = 1,
    iterations: Optional[int] = None,
    hooks: Iterable[Callable] = (),
) -> StudyReport:
    """Run iterations ``1..M``; hooks add metrics per iteration and must be picklable when ``jobs > 1``."""
    check_config(config)
    m = iterations if iterations is not None else config.iterations
    hooks = tuple(hooks)
    tasks = [(config, i, seed_base + i, hooks) for i in range(1, m + 1)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_one, tasks, chunksize=max(1, m // (4 * jobs))))
    else:
        rows = [_run_one(t) for t in tasks]
    report = StudyReport(config, seed_base, rows)
    if report.failed:
        log.warning("%d of %d iterations failed", len(report.failed), m)
    return report

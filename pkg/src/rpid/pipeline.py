"""Pipeline commands behind the CLI verbs.

Each ``cmd_*`` function takes plain arguments, writes its outputs and
returns a small summary dict, so the commands are usable from Python too.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from . import __version__
from . import evaluation as ev
from .bundle import ModelBundle
from .causal_graph import WarpPlan, build_warp_plan
from .config import ConfigError, PipelineConfig
from .dataio import SchemaError, check_columns, check_schema, read_csv, split_indices, two_levels, write_csv
from .prediction import fit_prediction_model, predict
from .simulation import simulate_pair
from .study import run_study
from .warp import LABEL_SUFFIX, SCORE_SUFFIX, WarpedTable, fit_warp_models, threshold_scores, warp_features, warp_training


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return None if math.isnan(x) else float(x)
    if isinstance(x, pd.DataFrame):
        return [_jsonable(r) for r in x.to_dict(orient="records")]
    return x


def write_json(obj, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------


def cmd_simulate(config: PipelineConfig, seed: int, out_dir) -> dict:
    sim = config.require_simulation()
    data = simulate_pair(sim, seed)
    out = Path(out_dir)
    files = {
        "real_train.csv": data.train.real,
        "real_test.csv": data.test.real,
        "find_train.csv": data.train.find,
        "find_test.csv": data.test.find,
    }
    for name, df in files.items():
        write_csv(df, out / name)
    return {"files": sorted(str(out / n) for n in files), "n_train": sim.n_train, "n_test": sim.n_test}


def cmd_warp(config: PipelineConfig, data_csv, bundle_out, warped_out, seed: Optional[int] = None) -> dict:
    data = read_csv(data_csv)
    check_schema(data, config.graph, what=str(data_csv))
    levels = two_levels(data, config.protected, str(data_csv))
    if config.reference_group not in levels:
        raise SchemaError(f"{data_csv}: reference group {config.reference_group!r} not among levels {levels}")
    plan = build_warp_plan(config.graph, config.reference_group)
    models = fit_warp_models(data, plan)
    warped = warp_training(data, plan, models, config.threshold)
    write_csv(warped.table, warped_out)
    bundle = ModelBundle(
        plan=plan,
        graph=config.graph,
        warp_models=models,
        threshold=config.threshold,
        features=config.features,
        provenance={
            "config_sha256": config.digest,
            "seed": config.seed if seed is None else seed,
            "training_data_sha256": _sha256(data_csv),
            "package_version": __version__,
        },
    )
    bundle.save(bundle_out)
    return {"bundle": str(bundle_out), "warped": str(warped_out), "warped_variables": list(plan.warp_order)}


def _check_features(features, plan: WarpPlan) -> None:
    for f in features:
        if f.split("=", 1)[0] == plan.protected:
            raise ConfigError(f"prediction features must not contain the protected attribute {plan.protected!r}")
        if f == plan.target:
            raise ConfigError(f"prediction features must not contain the target {plan.target!r}")


def cmd_train(bundle_path, warped_csv, bundle_out, features=None) -> dict:
    bundle = ModelBundle.load(bundle_path)
    feats = tuple(features) if features is not None else bundle.features
    _check_features(feats, bundle.plan)
    table = read_csv(warped_csv)
    wf = WarpedTable(table, bundle.plan).features("label")
    check_columns(wf, [*feats, bundle.plan.target], str(warped_csv))
    fit = fit_prediction_model(wf, feats, bundle.plan.target)
    out = replace(bundle.with_prediction(fit, warped_data_sha256=_sha256(warped_csv)), features=feats)
    out.save(bundle_out)
    return {"bundle": str(bundle_out), "features": list(feats), "coefficients": [float(c) for c in fit.coefficients]}


def predict_frame(bundle: ModelBundle, data: pd.DataFrame) -> pd.DataFrame:
    if bundle.prediction is None:
        raise ConfigError("bundle has no prediction model; run train first")
    plan = bundle.plan
    check_columns(data, [plan.protected, *bundle.features], "prediction data")
    warped = warp_features(data, plan, bundle.warp_models, bundle.threshold)
    feats = warped.features("label")
    out = data.copy()
    for v in plan.feature_order:
        out[v + SCORE_SUFFIX] = warped.table[v + SCORE_SUFFIX].to_numpy()
        if v + LABEL_SUFFIX in warped.table.columns:
            out[v + LABEL_SUFFIX] = warped.table[v + LABEL_SUFFIX].to_numpy()
    out["score"] = predict(bundle.prediction, feats)
    return out


def cmd_predict(bundle_path, data_csv, out_csv) -> dict:
    bundle = ModelBundle.load(bundle_path)
    data = read_csv(data_csv)
    out = predict_frame(bundle, data)
    write_csv(out, out_csv)
    return {"predictions": str(out_csv), "rows": len(out)}


# --------------------------------------------------------------------------
# evaluate


def adapted_as_warped(adapted: pd.DataFrame, plan: WarpPlan, tau: float) -> WarpedTable:
    """Put an externally adapted table (original column names) into warped-table layout."""
    check_columns(adapted, [plan.protected, *plan.warp_order], "adapted data")
    out = {}
    for col in adapted.columns:
        if col not in plan.warp_order:
            out[col] = adapted[col].to_numpy()
            continue
        x = adapted[col].to_numpy(dtype=float)
        out[col + SCORE_SUFFIX] = x
        if plan.kinds.get(col) == "binary":
            is01 = np.isin(x, (0.0, 1.0)).all()
            out[col + LABEL_SUFFIX] = x.astype(int) if is01 else threshold_scores(x, tau)
    return WarpedTable(pd.DataFrame(out), plan)


def _take(df: pd.DataFrame, idx) -> pd.DataFrame:
    return df.iloc[idx].reset_index(drop=True)


def _method_suite(config, plan, real, method: WarpedTable, find, idx_train, idx_eval, real_pred, find_pred) -> tuple[dict, pd.DataFrame]:
    """All criteria for one warping method (RPID or an external adaptation)."""
    es = config.evaluation
    pa, target = plan.protected, plan.target
    feats = list(config.features)
    mf = method.features("label")
    model = fit_prediction_model(_take(mf, idx_train), feats, target)
    ev_table = WarpedTable(_take(method.table, idx_eval), plan)
    ev_feats = ev_table.features("label")
    pred = predict(model, ev_feats)
    real_ev = _take(real, idx_eval)
    groups = real_ev[pa].astype(str).to_numpy()
    out: dict = {"model": {"features": feats, "coefficients": [float(c) for c in model.coefficients]}}
    levels = sorted(set(groups))
    out["mean_prediction"] = {lv: float(pred[groups == lv].mean()) for lv in levels}
    out["mean_prediction_real"] = {lv: float(real_pred[groups == lv].mean()) for lv in levels}
    if find is not None and "w1" in es.metrics:
        out["w1"] = ev.eval_w1(ev_table, _take(find, idx_eval), pred, es.alpha)
    triple = ev.PredictionTriple(real_pred, pred, groups, find_pred)
    if find_pred is not None and "w2" in es.metrics:
        out["w2"] = ev.eval_w2(triple, plan.reference_group, es.top_k, es.alpha)
    if "uc1" in es.metrics:
        out["uc1"] = {
            "real": ev.eval_uc1(real_pred, real_ev[target], groups, config.threshold),
            "method": ev.eval_uc1(pred, ev_feats[target], groups, config.threshold),
        }
    ranked = pd.DataFrame()
    if "uc2" in es.metrics:
        uc2 = ev.eval_uc2(triple, real_ev, ev_feats, list(plan.feature_order), es.uc2_k, group_name=pa)
        ranked = uc2["ranked"]
        out["uc2"] = {"top": uc2["top"], "bottom": uc2["bottom"], "subgroup_tests": uc2["subgroup_tests"]}
    if "uc3" in es.metrics:
        scores = ev_table.features("score")
        dist = ev.eval_uc3(real_ev, scores, list(plan.feature_order), es.uc3_metric)
        out["uc3"] = {
            "mean": {lv: float(dist[groups == lv].mean()) for lv in levels},
            "max": {lv: float(dist[groups == lv].max()) for lv in levels},
        }
        if len(ranked):
            ranked["uc3_distance"] = dist[np.argsort(triple.d1, kind="mergesort")]
    if "uc4" in es.metrics:
        out["uc4"] = ev.eval_uc4(real_ev, ev_feats, feats, es.uc4_metric)
    if "fairness" in es.metrics:
        out["fairness"] = {
            "real": ev.group_fairness_ratios(real_pred, real_ev[target], groups, plan.reference_group, config.threshold, es.epsilon).to_dict(),
            "method": ev.group_fairness_ratios(pred, ev_feats[target], groups, plan.reference_group, config.threshold, es.epsilon).to_dict(),
        }
    return out, ranked


def _comparison(methods: dict[str, dict], reference_group: str) -> list[dict]:
    rows = []

    def add(name, get):
        row = {"metric": name}
        for m, res in methods.items():
            try:
                row[m] = get(res)
            except (KeyError, TypeError):
                row[m] = None
        rows.append(row)

    def gap(res, key):
        mp = res[key]
        non = [v for k, v in mp.items() if k != reference_group]
        return float(mp[reference_group] - non[0])

    add("prediction_gap_ref_minus_nonref", lambda r: gap(r, "mean_prediction"))
    add("checks_passed", lambda r: r["fairness"]["method"]["checks_passed"])
    add("accuracy", lambda r: r["uc1"]["method"]["overall"])
    add("w2_spearman_nonreference", lambda r: r["w2"]["nonreference"]["spearman_d1_d2"])
    add("uc3_max_distance", lambda r: max(r["uc3"]["max"].values()))
    add("uc4_top_feature", lambda r: r["uc4"][0]["feature"])
    return rows


def cmd_evaluate(
    config: PipelineConfig,
    real_csv,
    warped_csv,
    out_dir,
    find_csv=None,
    adapted_csv=None,
    split: Optional[float] = None,
    seed: Optional[int] = None,
) -> dict:
    plan = build_warp_plan(config.graph, config.reference_group)
    pa, target = plan.protected, plan.target
    real = read_csv(real_csv)
    check_schema(real, config.graph, what=str(real_csv))
    two_levels(real, pa, str(real_csv))
    warped = WarpedTable(read_csv(warped_csv), plan)
    wf = warped.features("label")
    check_columns(wf, [pa, target, *config.features], str(warped_csv))
    tables = {"warped": wf}
    find = None
    if find_csv is not None:
        find = read_csv(find_csv)
        check_schema(find, config.graph, what=str(find_csv))
        tables["find"] = find
    adapted = None
    if adapted_csv is not None:
        adapted = adapted_as_warped(read_csv(adapted_csv), plan, config.threshold)
        tables["adapted"] = adapted.features("label")
    for name, t in tables.items():
        if len(t) != len(real):
            raise SchemaError(f"{name} table has {len(t)} rows but the real table has {len(real)}")
        if not (t[pa].astype(str).to_numpy() == real[pa].astype(str).to_numpy()).all():
            raise SchemaError(f"{name} table is not row-aligned with the real table (protected column differs)")

    split = split if split is not None else config.evaluation.split
    seed = config.seed if seed is None else seed
    if split is None:
        idx_train = idx_eval = np.arange(len(real))
    else:
        idx_train, idx_eval = split_indices(len(real), split, seed)

    nonref_level = [lv for lv in sorted(set(real[pa].astype(str))) if lv != plan.reference_group][0]
    real_feats = list(config.features) + [f"{pa}={nonref_level}"]
    real_model = fit_prediction_model(_take(real, idx_train), real_feats, target)
    real_pred = predict(real_model, _take(real, idx_eval))
    find_pred = None
    if find is not None:
        find_model = fit_prediction_model(_take(find, idx_train), list(config.features), target)
        find_pred = predict(find_model, _take(find, idx_eval))

    methods = {}
    ranked = {}
    methods["rpid"], ranked["rpid"] = _method_suite(config, plan, real, warped, find, idx_train, idx_eval, real_pred, find_pred)
    if adapted is not None:
        methods["adapted"], ranked["adapted"] = _method_suite(
            config, plan, real, adapted, find, idx_train, idx_eval, real_pred, find_pred
        )
    report = {
        "reference_group": plan.reference_group,
        "protected": pa,
        "target": target,
        "n_train": int(idx_train.size),
        "n_eval": int(idx_eval.size),
        "split": split,
        "seed": seed,
        "real_model": {"features": real_feats, "coefficients": [float(c) for c in real_model.coefficients]},
        "methods": methods,
        "comparison": _comparison(methods, plan.reference_group),
    }
    if find_pred is not None:
        report["find_mean_prediction"] = {
            lv: float(find_pred[_take(real, idx_eval)[pa].astype(str).to_numpy() == lv].mean())
            for lv in sorted(set(real[pa].astype(str)))
        }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(report, out / "report.json")
    (out / "report.txt").write_text(render_text(report), encoding="utf-8")
    for m, table in ranked.items():
        if len(table):
            write_csv(table, out / f"uc2_ranked_{m}.csv")
            k = min(config.evaluation.uc2_k, len(table))
            write_csv(pd.concat([table.head(k), table.tail(k)]), out / f"uc2_topk_{m}.csv")
    return report


def _fmt(x) -> str:
    if x is None:
        return "NA"
    if isinstance(x, float):
        return "NA" if math.isnan(x) else f"{x:.4f}"
    return str(x)


def render_text(report: dict) -> str:
    lines = [
        f"protected={report['protected']} target={report['target']} reference={report['reference_group']}",
        f"rows: train={report['n_train']} eval={report['n_eval']}",
        "",
    ]
    methods = list(report["methods"])
    lines.append("metric".ljust(34) + "".join(m.rjust(14) for m in methods))
    for row in report["comparison"]:
        lines.append(row["metric"].ljust(34) + "".join(_fmt(row[m]).rjust(14) for m in methods))
    for m, res in report["methods"].items():
        lines.append("")
        lines.append(f"[{m}]")
        if "w1" in res:
            for v, r in res["w1"]["variables"].items():
                lines.append(f"  W1 {v}: {r['method']} p={_fmt(r['p_value'])}{' reject' if r['reject'] else ''}")
        if "w2" in res:
            w2 = res["w2"]["nonreference"]
            lines.append(
                f"  W2 nonreference: spearman={_fmt(w2['spearman_d1_d2'])} mean(d1-d2)={_fmt(w2['mean_d1_minus_d2'])} "
                f"paired p={_fmt(w2['paired_t']['p_value'])}"
            )
        if "uc1" in res:
            for world in ("real", "method"):
                acc = res["uc1"][world]
                groups = " ".join(f"{k}={_fmt(v)}" for k, v in acc["groups"].items())
                lines.append(f"  UC1 {world} accuracy={_fmt(acc['overall'])} {groups}")
        if "uc2" in res:
            for level, t in res["uc2"]["subgroup_tests"].items():
                lines.append(f"  UC2 {level}: mean(d1)={_fmt(t['mean_d1'])} p={_fmt(t['p_value'])} n={t['n']}")
        if "uc4" in res:
            lines.append("  UC4 " + ", ".join(f"{r['feature']}={_fmt(r['distance'])}" for r in res["uc4"]))
        if "fairness" in res:
            for world in ("real", "method"):
                fr = res["fairness"][world]
                ratios = " ".join(f"{k}={_fmt(fr[k])}" for k in ev.RATIO_NAMES)
                lines.append(f"  fairness {world}: {ratios} checks={fr['checks_passed']}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------


def cmd_study(config: PipelineConfig, seed: int, out_dir, jobs: int = 1, iterations: Optional[int] = None) -> dict:
    sim = config.require_simulation()
    report = run_study(sim, seed_base=seed, jobs=jobs, iterations=iterations)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "aggregate.json").write_text(report.to_json(), encoding="utf-8")
    report.write_csv(out / "iterations.csv")
    return {"aggregate": str(out / "aggregate.json"), "iterations": str(out / "iterations.csv"), "failed": len(report.failed)}

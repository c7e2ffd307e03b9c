"""Pipeline verbs: each reads its declared inputs from the work
directory, writes its declared outputs there and returns a one-line
summary.  ``run_all`` chains them in workflow order.

Work-directory layout::

    dataset.csv futures.csv catalog.json      (sim / label)
    folds.json                                 (split)
    feature_sets.json                          (select)
    models/clf_{gnb,rf,mlp}.json               (train-clf)
    models/predictor.json                      (train-pred)
    report/*.csv report/metrics*.json          (eval-clf / eval-pred / report)
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd

from . import classifiers, featsel, metrics, predict, prep, report, sim, storage
from .config import PipelineConfig
from .core import MANEUVERS, Dataset, ExplodedSet, ManeuverClass
from .gmm import fit_gmm
from .predict import Strategy

CLASSIFIER_ALGOS = ("gnb", "rf", "mlp")
PREDICTOR_CLASSIFIERS = ("mlp", "rf")

STRATEGY_LABELS = {
    Strategy.RAW: "Raw", Strategy.WTA: "WTA", Strategy.PW_RAW: "PW-Raw",
    Strategy.IGMM: "I-GMM", Strategy.LABELS: "Labels",
    Strategy.PRIORS: "Priors", Strategy.NOCLF: "NOCLF",
}


def _work(cfg: PipelineConfig, *parts: str) -> str:
    return os.path.join(cfg["paths.work_dir"], *parts)


def _load_dataset(cfg: PipelineConfig) -> Dataset:
    return storage.load_dataset(cfg["paths.work_dir"])


def _load_folds(cfg: PipelineConfig) -> prep.FoldAssignment:
    data = storage.load_json(_work(cfg, "folds.json"))
    return prep.FoldAssignment(
        ma_fold={int(k): int(v) for k, v in data["ma_fold"].items()},
        po_train=[int(v) for v in data["po_train"]],
        po_test=[int(v) for v in data["po_test"]],
        retained={int(k): [tuple(p) for p in v] for k, v in data["retained"].items()},
    )


def _fold_matrix(dataset: Dataset, assignment: prep.FoldAssignment, fold: int):
    """Balanced samples of one fold: features, labels, capped ttlc."""
    by_sid = {s.situation_id: s for s in dataset.situations}
    rows, labels, ttlc = [], [], []
    for sid, idx in assignment.retained[fold]:
        sit = by_sid[sid]
        rows.append(sit.features[idx])
        labels.append(int(sit.labels[idx]))
        ttlc.append(featsel.capped_ttlc(sit.ttlcl[idx:idx + 1], sit.ttlcr[idx:idx + 1])[0])
    if not rows:
        raise RuntimeError(
            f"fold {fold} has no balanced samples; a maneuver class is missing "
            f"(too few situations for the requested fold count)")
    return (np.vstack(rows), np.asarray(labels, dtype=np.int64),
            np.asarray(ttlc, dtype=float))


def run_sim(cfg: PipelineConfig, threads: int = 1) -> str:
    dataset = sim.generate_dataset(cfg.sim_config(), threads=threads)
    storage.save_dataset(dataset, cfg["paths.work_dir"])
    return (f"sim: {len(dataset.situations)} situations, "
            f"{dataset.n_samples} samples -> dataset.csv")


def run_label(cfg: PipelineConfig, threads: int = 1) -> str:
    dataset = _load_dataset(cfg)
    prep.label_dataset(dataset, cfg["prep.horizon_s"])
    storage.save_dataset(dataset, cfg["paths.work_dir"])
    counts = np.bincount(
        np.concatenate([s.labels for s in dataset.situations]) if dataset.situations
        else np.empty(0, dtype=int), minlength=3)
    return (f"label: {dataset.n_samples} samples relabeled "
            f"(LCL {counts[0]}, FLW {counts[1]}, LCR {counts[2]})")


def run_split(cfg: PipelineConfig, threads: int = 1) -> str:
    dataset = _load_dataset(cfg)
    assignment = prep.split_folds(
        dataset, k=cfg["prep.folds"], seed=cfg["seeds.split"],
        po_fraction=cfg["prep.po_fraction"],
        po_test_fraction=cfg["prep.po_test_fraction"],
        horizon_s=cfg["prep.horizon_s"])
    storage.save_json(
        {
            "ma_fold": {str(k): v for k, v in assignment.ma_fold.items()},
            "po_train": assignment.po_train,
            "po_test": assignment.po_test,
            "retained": {str(k): [list(p) for p in v]
                         for k, v in assignment.retained.items()},
        },
        _work(cfg, "folds.json"))
    kept = sum(len(v) for v in assignment.retained.values())
    return (f"split: {len(assignment.ma_fold)} maneuver situations in "
            f"{cfg['prep.folds']} folds ({kept} balanced samples), "
            f"{len(assignment.po_train)}/{len(assignment.po_test)} position train/test")


def run_select(cfg: PipelineConfig, threads: int = 1) -> str:
    dataset = _load_dataset(cfg)
    assignment = _load_folds(cfg)
    ids = dataset.feature_ids
    tv = assignment.tv_folds()
    fold_data = [_fold_matrix(dataset, assignment, f) for f in tv]

    sets = {"A": featsel.variant_a(ids)}
    pooled_x = np.vstack([d[0] for d in fold_data])
    pooled_ttlc = np.concatenate([d[2] for d in fold_data])
    sets["B"] = featsel.select_by_threshold(pooled_x, ids, pooled_ttlc,
                                            cfg["featsel.threshold"])
    sets["C"] = featsel.cfs_backward_select([d[0] for d in fold_data],
                                            [d[2] for d in fold_data], ids)

    wrapper_algo = cfg["featsel.wrapper_algo"]
    if wrapper_algo == "rf":
        raise ValueError("the forest performs implicit feature selection; "
                         "wrapper selection applies to gnb or mlp")
    train_x, train_y, _ = fold_data[0]
    val_x, val_y, _ = fold_data[1]
    if wrapper_algo == "gnb":
        model = classifiers.fit_gnb(ids, train_x, train_y,
                                    {"k_max": cfg["pred.gnb_k_max"]},
                                    seed=cfg["seeds.featsel"])
        logliks = model.feature_logliks(val_x)
        col_of = {fid: i for i, fid in enumerate(ids)}

        def score(subset_ids):
            cols = [col_of[f] for f in subset_ids]
            pred = np.argmax(classifiers.proba_from_feature_logliks(logliks, cols), axis=1)
            return metrics.bacc(metrics.confusion_matrix(val_y, pred))
    else:
        def score(subset_ids):
            cols = [ids.index(f) for f in subset_ids]
            model = classifiers.fit_mlp(list(subset_ids), train_x[:, cols], train_y,
                                        seed=cfg["seeds.featsel"])
            pred = np.argmax(model.predict_proba(val_x[:, cols]), axis=1)
            return metrics.bacc(metrics.confusion_matrix(val_y, pred))

    sets["D"] = featsel.wrapper_backward_select(score, ids)
    sets["D"].provenance["algo"] = wrapper_algo

    storage.save_json(
        {name: {"variant": fs.variant, "ids": fs.ids,
                "provenance": {k: v for k, v in fs.provenance.items()
                               if k != "correlations"}}
         for name, fs in sets.items()},
        _work(cfg, "feature_sets.json"))
    sizes = ", ".join(f"{n}={len(fs.ids)}" for n, fs in sorted(sets.items()))
    return f"select: feature set sizes {sizes}"


def _feature_set_ids(cfg: PipelineConfig, algo: str) -> list[str]:
    chosen = cfg[f"clf.{algo}_feature_set"]
    sets = storage.load_json(_work(cfg, "feature_sets.json"))
    if chosen not in sets:
        raise ValueError(f"unknown feature set {chosen!r} for {algo}")
    return list(sets[chosen]["ids"])


def run_train_clf(cfg: PipelineConfig, threads: int = 1) -> str:
    dataset = _load_dataset(cfg)
    assignment = _load_folds(cfg)
    ids = dataset.feature_ids
    tv = assignment.tv_folds()
    fold_data = [_fold_matrix(dataset, assignment, f) for f in tv]
    all_x = np.vstack([d[0] for d in fold_data])
    all_y = np.concatenate([d[1] for d in fold_data])

    os.makedirs(_work(cfg, "models"), exist_ok=True)
    lines = []
    for algo in CLASSIFIER_ALGOS:
        subset = _feature_set_ids(cfg, algo)
        cols = [ids.index(f) for f in subset]
        if algo == "gnb":
            params = {"k_max": cfg["pred.gnb_k_max"]}
        else:
            grid = cfg.mlp_grid() if algo == "mlp" else cfg.rf_grid()
            folds_xy = [(d[0][:, cols], d[1]) for d in fold_data]
            params = classifiers.grid_search(algo, grid, folds_xy, subset,
                                             seed=cfg["seeds.clf"])
        model = classifiers.fit_classifier(algo, params, subset,
                                           all_x[:, cols], all_y,
                                           seed=cfg["seeds.clf"])
        storage.save_json(model.to_dict(), _work(cfg, "models", f"clf_{algo}.json"))
        lines.append(f"{algo}({len(subset)} features)")
    return f"train-clf: {len(all_y)} balanced rows -> " + ", ".join(lines)


def _load_classifier(cfg: PipelineConfig, algo: str):
    return classifiers.model_from_dict(
        storage.load_json(_work(cfg, "models", f"clf_{algo}.json")))


def run_eval_clf(cfg: PipelineConfig, threads: int = 1) -> str:
    dataset = _load_dataset(cfg)
    assignment = _load_folds(cfg)
    ids = dataset.feature_ids
    test_fold = assignment.test_fold()
    test_x, test_y, _ = _fold_matrix(dataset, assignment, test_fold)
    by_sid = {s.situation_id: s for s in dataset.situations}
    test_sids = sorted(sid for sid, f in assignment.ma_fold.items() if f == test_fold)

    bundle = {"roc": {m.name: [] for m in MANEUVERS}, "tau": []}
    clf_metrics = {}
    for algo in CLASSIFIER_ALGOS:
        model = _load_classifier(cfg, algo)
        probs = classifiers.predict_proba(model, test_x, ids)
        pred = np.argmax(probs, axis=1)
        bal_acc = metrics.bacc(metrics.confusion_matrix(test_y, pred))
        entry = {"bacc": bal_acc, "auc": {}, "working_point": {}, "tau": {}}
        for m in MANEUVERS:
            curve, auc = metrics.roc_auc(probs[:, m.value],
                                         metrics.one_vs_rest_labels(test_y, m))
            entry["auc"][m.name] = auc
            bundle["roc"][m.name].append({
                "classifier": algo, "thresholds": curve.thresholds,
                "fpr": curve.fpr, "tpr": curve.tpr,
            })
            if m != ManeuverClass.FLW:
                entry["working_point"][m.name] = metrics.working_point(
                    curve, cfg["eval.fpr_max"])
        # detection times over the lane-change situations of the test fold
        taus = {m.name: {"tau_f": [], "tau_c": []}
                for m in MANEUVERS if m != ManeuverClass.FLW}
        for sid in test_sids:
            sit = by_sid[sid]
            t_cross = prep.first_crossing_time(sit)
            if not np.isfinite(t_cross):
                continue
            cls = (ManeuverClass.LCL if np.isfinite(sit.ttlcl[0])
                   and sit.ttlcl[0] <= sit.ttlcr[0] else ManeuverClass.LCR)
            sit_probs = classifiers.predict_proba(model, sit.features, ids)
            detected = sit_probs[:, cls.value] >= entry["working_point"][cls.name]
            times = metrics.detection_times(sit.t_rec, detected, t_cross)
            taus[cls.name]["tau_f"].append(times.tau_first)
            taus[cls.name]["tau_c"].append(times.tau_certain)
        for name, vals in taus.items():
            if vals["tau_f"]:
                entry["tau"][name] = {
                    "mean_f": float(np.mean(vals["tau_f"])),
                    "std_f": float(np.std(vals["tau_f"])),
                    "mean_c": float(np.mean(vals["tau_c"])),
                    "std_c": float(np.std(vals["tau_c"])),
                    "count": len(vals["tau_f"]),
                }
                bundle["tau"].append({"classifier": algo, "maneuver": name,
                                      "metric": "tau_f", "values": vals["tau_f"]})
                bundle["tau"].append({"classifier": algo, "maneuver": name,
                                      "metric": "tau_c", "values": vals["tau_c"]})
        clf_metrics[algo] = entry

    bundle["metrics"] = {"classifiers": clf_metrics,
                         "test_fold_samples": int(len(test_y))}
    report.emit_report(bundle, _work(cfg, "report"))
    storage.save_json(bundle["metrics"], _work(cfg, "report", "metrics_clf.json"))
    headline = ", ".join(f"{a}: bacc={clf_metrics[a]['bacc']:.3f}" for a in CLASSIFIER_ALGOS)
    return f"eval-clf: fold {test_fold} ({len(test_y)} rows) {headline}"


def _situations_by_ids(dataset: Dataset, sids: list[int]):
    by_sid = {s.situation_id: s for s in dataset.situations}
    return [by_sid[sid] for sid in sids]


def _start_probs(model, exploded: ExplodedSet, ids: list[str]) -> np.ndarray:
    return classifiers.predict_proba(model, exploded.start_features, ids)


def _lateral_matrix(es: ExplodedSet) -> np.ndarray:
    return np.column_stack([es.feature_column(f) for f in predict.LATERAL_INPUT_IDS])


def _fit_rows_cap(matrix: np.ndarray, cap: int, seed: int, tag: int) -> np.ndarray:
    if cap and len(matrix) > cap:
        rng = np.random.default_rng((seed, 6007, tag))
        keep = np.sort(rng.choice(len(matrix), size=cap, replace=False))
        return matrix[keep]
    return matrix


def run_train_pred(cfg: PipelineConfig, threads: int = 1) -> str:
    dataset = _load_dataset(cfg)
    assignment = _load_folds(cfg)
    ids = dataset.feature_ids
    seed = cfg["seeds.pred"]
    cap = cfg["pred.max_fit_rows"]
    k_max = cfg["pred.k_max"]
    n_init = cfg["pred.n_init"]

    train_sits = _situations_by_ids(dataset, assignment.po_train)
    exploded, skipped = prep.explode_training(train_sits, ids, seed=seed)
    if exploded.n_rows == 0:
        raise RuntimeError("no position training rows; futures missing?")

    def fit(matrix, dims, tag):
        rows = _fit_rows_cap(matrix, cap, seed, tag)
        return fit_gmm(rows, dims, k_max=k_max, seed=(seed * 131 + tag),
                       n_init=n_init, threads=threads)

    # maneuver experts on the lane-following-undersampled split
    balanced = prep.undersample_flw_starts(exploded, seed=seed)
    lat_dims = predict.LATERAL_INPUT_IDS + ["t", "y"]
    experts = {}
    for m in MANEUVERS:
        rows = balanced.select_rows(balanced.row_labels() == m.value)
        matrix = np.column_stack([_lateral_matrix(rows), rows.t, rows.y])
        experts[m.name] = fit(matrix, lat_dims, tag=m.value)

    # classifier-free lateral model: unsplit, non-undersampled rows
    noclf_matrix = np.column_stack([_lateral_matrix(exploded), exploded.t, exploded.y])
    lateral_noclf = fit(noclf_matrix, lat_dims, tag=10)

    # longitudinal deviation models, split by leading-vehicle presence
    v_x = exploded.feature_column("v_x")
    dx_cv = exploded.x - predict.cv_prediction(0.0, v_x, exploded.t)
    present = exploded.feature_column(predict.LEADER_PRESENCE_ID) == 1.0
    obj_cols = np.column_stack(
        [exploded.feature_column(f) for f in predict.X_OBJ_INPUT_IDS])
    obj_matrix = np.column_stack([obj_cols[present], exploded.t[present],
                                  dx_cv[present]])
    noobj_matrix = np.column_stack([obj_cols[~present][:, :2], exploded.t[~present],
                                    dx_cv[~present]])
    x_obj = fit(obj_matrix, predict.X_OBJ_INPUT_IDS + ["t", predict.X_DEVIATION_DIM], tag=11)
    x_noobj = fit(noobj_matrix, predict.X_NOOBJ_INPUT_IDS + ["t", predict.X_DEVIATION_DIM],
                  tag=12)

    # integrated models: probabilities attached, mirrored, never undersampled
    integrated = {}
    igmm_dims = predict.LATERAL_INPUT_IDS + ["p_lcl", "p_lcr", "t", "y"]
    for ci, algo in enumerate(PREDICTOR_CLASSIFIERS):
        model = _load_classifier(cfg, algo)
        with_p = prep.attach_probabilities(exploded, _start_probs(model, exploded, ids))
        if cap and with_p.n_rows > cap // 2:
            rng = np.random.default_rng((seed, 6007, 20 + ci))
            keep = np.zeros(with_p.n_rows, dtype=bool)
            keep[np.sort(rng.choice(with_p.n_rows, size=cap // 2, replace=False))] = True
            with_p = with_p.select_rows(keep)
        mirrored = prep.mirror_probabilities(with_p)
        matrix = np.column_stack([_lateral_matrix(mirrored), mirrored.p_lcl,
                                  mirrored.p_lcr, mirrored.t, mirrored.y])
        integrated[algo] = fit_gmm(matrix, igmm_dims, k_max=k_max,
                                   seed=(seed * 131 + 30 + ci), n_init=n_init,
                                   threads=threads)

    # confidence mixtures over the training inputs (one row per start)
    start_lat = np.column_stack([exploded.start_column(f)
                                 for f in predict.LATERAL_INPUT_IDS])
    conf_y = fit(start_lat, predict.LATERAL_INPUT_IDS, tag=40)
    start_obj = np.column_stack([exploded.start_column(f)
                                 for f in predict.X_OBJ_INPUT_IDS])
    start_present = exploded.start_column(predict.LEADER_PRESENCE_ID) == 1.0
    conf_x_obj = fit(start_obj[start_present], predict.X_OBJ_INPUT_IDS, tag=41)
    conf_x_noobj = fit(start_obj[~start_present][:, :2], predict.X_NOOBJ_INPUT_IDS, tag=42)

    bundle = predict.PredictorBundle(
        lateral_experts=experts, lateral_noclf=lateral_noclf,
        x_obj=x_obj, x_noobj=x_noobj, integrated=integrated,
        conf_y=conf_y, conf_x_obj=conf_x_obj, conf_x_noobj=conf_x_noobj)
    storage.save_json(bundle.to_dict(), _work(cfg, "models", "predictor.json"))
    keff = {name: experts[name].k_eff for name in experts}
    return (f"train-pred: {exploded.n_rows} rows from {exploded.n_starts} starts "
            f"({skipped} skipped), expert components {keff}")


def _load_bundle(cfg: PipelineConfig) -> predict.PredictorBundle:
    return predict.PredictorBundle.from_dict(
        storage.load_json(_work(cfg, "models", "predictor.json")))


def _chunked_eval(predictor, lat, t, probs, labels, y_true, chunk=40000):
    """Mean lateral log-likelihood and point estimates, chunked."""
    total, n = 0.0, len(t)
    means = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        mix = predictor.predict(lat[lo:hi], t[lo:hi],
                                probs=None if probs is None else probs[lo:hi],
                                labels=None if labels is None else labels[lo:hi])
        total += float(mix.logpdf(y_true[lo:hi]).sum())
        means[lo:hi] = mix.mean()
    return total / n, means


def run_eval_pred(cfg: PipelineConfig, threads: int = 1) -> str:
    dataset = _load_dataset(cfg)
    assignment = _load_folds(cfg)
    ids = dataset.feature_ids
    bundle = _load_bundle(cfg)

    test_sits = _situations_by_ids(dataset, assignment.po_test)
    exploded, skipped = prep.explode_test(test_sits, ids)
    if exploded.n_rows == 0:
        raise RuntimeError("no position test rows; futures missing?")
    lat = _lateral_matrix(exploded)
    t = exploded.t
    y_true = exploded.y
    x_true = exploded.x
    labels = exploded.row_labels()

    probs_by_clf = {
        algo: _start_probs(_load_classifier(cfg, algo), exploded, ids)[exploded.row_start]
        for algo in PREDICTOR_CLASSIFIERS
    }

    # longitudinal path (maneuver-agnostic)
    v_x = exploded.feature_column("v_x")
    present = exploded.feature_column(predict.LEADER_PRESENCE_ID) == 1.0
    obj_cols = np.column_stack(
        [exploded.feature_column(f) for f in predict.X_OBJ_INPUT_IDS])
    lon = predict.LongitudinalPredictor(bundle)
    lon_mix = lon.predict(obj_cols, present, t)
    loglik_x = float(lon_mix.logpdf(x_true).mean())
    x_hat = lon_mix.mean()

    rows = []
    loglik_y = {}
    point_estimates = {}
    plan = [(None, Strategy.LABELS), (None, Strategy.PRIORS), (None, Strategy.NOCLF)]
    plan += [(c, s) for c in PREDICTOR_CLASSIFIERS
             for s in (Strategy.RAW, Strategy.WTA, Strategy.PW_RAW, Strategy.IGMM)]
    for clf, strat in plan:
        predictor = predict.LateralPredictor(bundle, strat, clf)
        ll, means = _chunked_eval(predictor, lat, t,
                                  probs_by_clf.get(clf), labels, y_true)
        loglik_y[(clf, strat)] = ll
        point_estimates[(clf, strat)] = means

    ref_y = loglik_y[(None, Strategy.LABELS)]
    for clf, strat in plan:
        rows.append({
            "classifier": clf if clf else "-",
            "strategy": STRATEGY_LABELS[strat],
            "loglik_x": loglik_x,
            "loglik_x_norm_pct": metrics.normalize_loglik(loglik_x, loglik_x),
            "loglik_y": loglik_y[(clf, strat)],
            "loglik_y_norm_pct": metrics.normalize_loglik(loglik_y[(clf, strat)], ref_y),
        })

    # spatial errors of the selected combination plus reference baselines
    sel_clf = cfg["eval.lateral_classifier"]
    sel_strat = Strategy(cfg["eval.lateral_strategy"])
    chosen_y = point_estimates[(sel_clf, sel_strat)]
    labels_y = point_estimates[(None, Strategy.LABELS)]
    err_tables = {
        "selected": metrics.spatial_errors(t, np.abs(x_true - x_hat),
                                           np.abs(y_true - chosen_y), labels),
        "labels": metrics.spatial_errors(t, np.abs(x_true - x_hat),
                                         np.abs(y_true - labels_y), labels),
        "cv_baseline": metrics.spatial_errors(
            t, np.abs(x_true - predict.cv_prediction(0.0, v_x, t)),
            np.abs(y_true), labels),
    }
    errors_by_t = []
    for name, table in err_tables.items():
        for dim in ("x", "y"):
            errors_by_t.append({
                "strategy": name, "dim": dim, "t": table.times,
                "median": getattr(table, f"median_{dim}"),
                "q1": getattr(table, f"q1_{dim}"),
                "q3": getattr(table, f"q3_{dim}"),
            })

    # confidence against the error at the 5 s horizon, one row per start
    conf_y_vals = predict.confidence(
        bundle.conf_y, np.column_stack(
            [exploded.start_column(f) for f in predict.LATERAL_INPUT_IDS]))
    start_obj = np.column_stack(
        [exploded.start_column(f) for f in predict.X_OBJ_INPUT_IDS])
    start_present = exploded.start_column(predict.LEADER_PRESENCE_ID) == 1.0
    conf_x_vals = np.empty(exploded.n_starts)
    if start_present.any():
        conf_x_vals[start_present] = predict.confidence(
            bundle.conf_x_obj, start_obj[start_present])
    if (~start_present).any():
        conf_x_vals[~start_present] = predict.confidence(
            bundle.conf_x_noobj, start_obj[~start_present][:, :2])
    at5 = np.abs(t - 5.0) < 1e-9
    err_y5 = np.abs(y_true - chosen_y)[at5]
    err_x5 = np.abs(x_true - x_hat)[at5]
    starts5 = exploded.row_start[at5]
    conf_rows = [{
        "situation_id": int(exploded.start_situation[s]),
        "t_rec": float(exploded.start_t_rec[s]),
        "label": ManeuverClass(int(exploded.start_labels[s])).name,
        "conf_y": float(conf_y_vals[s]),
        "err_y_t5": float(err_y5[i]),
        "conf_x": float(conf_x_vals[s]),
        "err_x_t5": float(err_x5[i]),
    } for i, s in enumerate(starts5)]

    conf_rho = featsel.spearman(conf_y_vals[starts5], err_y5)
    pred_metrics = {
        "logliks": [{**r} for r in rows],
        "selected": {"classifier": sel_clf, "strategy": sel_strat.value},
        "median_t5": {
            "selected_y": err_tables["selected"].at(5.0)["median_y"],
            "labels_y": err_tables["labels"].at(5.0)["median_y"],
            "zero_lateral_y": err_tables["cv_baseline"].at(5.0)["median_y"],
            "selected_x": err_tables["selected"].at(5.0)["median_x"],
            "cv_x": err_tables["cv_baseline"].at(5.0)["median_x"],
        },
        "by_maneuver_t5": err_tables["selected"].by_maneuver,
        "confidence_spearman_y": conf_rho,
        "test_rows": int(exploded.n_rows),
        "test_starts": int(exploded.n_starts),
        "skipped_starts": int(skipped),
    }

    existing = {}
    clf_metrics_path = _work(cfg, "report", "metrics_clf.json")
    if os.path.exists(clf_metrics_path):
        existing = {"classifiers": storage.load_json(clf_metrics_path).get("classifiers", {})}
    bundle_out = {
        "roc": _reload_roc(cfg),
        "tau": _reload_tau(cfg),
        "errors_by_t": errors_by_t,
        "loglik": rows,
        "confidence": conf_rows,
        "metrics": {**existing, "prediction": pred_metrics},
    }
    report.emit_report(bundle_out, _work(cfg, "report"))
    storage.save_json(pred_metrics, _work(cfg, "report", "metrics_pred.json"))
    sel_med = pred_metrics["median_t5"]["selected_y"]
    return (f"eval-pred: {exploded.n_rows} rows, median lateral error at 5 s "
            f"{sel_med:.3f} m, confidence rho {conf_rho:.3f}")


def _reload_roc(cfg: PipelineConfig) -> dict:
    path = _work(cfg, "report", "roc_LCL.csv")
    out = {m.name: [] for m in MANEUVERS}
    if not os.path.exists(path):
        return out
    for m in MANEUVERS:
        table = pd.read_csv(_work(cfg, "report", f"roc_{m.name}.csv"),
                            float_precision="round_trip")
        for algo, group in table.groupby("classifier", sort=True):
            out[m.name].append({
                "classifier": algo,
                "thresholds": group["threshold"].to_numpy(),
                "fpr": group["fpr"].to_numpy(),
                "tpr": group["tpr"].to_numpy(),
            })
    return out


def _reload_tau(cfg: PipelineConfig) -> list:
    # histograms are regenerated from the stored counts by re-expanding
    # the bin centers; adequate for re-emission
    path = _work(cfg, "report", "tau_hist.csv")
    if not os.path.exists(path):
        return []
    table = pd.read_csv(path, float_precision="round_trip")
    out = []
    for (algo, maneuver, metric), group in table.groupby(
            ["classifier", "maneuver", "metric"], sort=True):
        values = np.repeat((group["bin_lo"].to_numpy() + group["bin_hi"].to_numpy()) / 2.0,
                           group["count"].to_numpy().astype(int))
        out.append({"classifier": algo, "maneuver": maneuver,
                    "metric": metric, "values": values})
    return out


def run_report(cfg: PipelineConfig, threads: int = 1) -> str:
    merged = {}
    for name in ("metrics_clf.json", "metrics_pred.json"):
        path = _work(cfg, "report", name)
        if os.path.exists(path):
            key = "classifiers" if name == "metrics_clf.json" else "prediction"
            data = storage.load_json(path)
            merged[key] = data.get("classifiers", data) if key == "classifiers" else data
    storage.save_json(merged, _work(cfg, "report", "metrics.json"))
    expected = ["roc_LCL.csv", "roc_FLW.csv", "roc_LCR.csv", "errors_by_t.csv",
                "tau_hist.csv", "loglik_table.csv", "confidence_scatter.csv",
                "metrics.json"]
    missing = [f for f in expected if not os.path.exists(_work(cfg, "report", f))]
    if missing:
        raise RuntimeError(f"report incomplete, missing {missing}")
    return f"report: {len(expected)} files in {_work(cfg, 'report')}"


def run_predict(cfg: PipelineConfig, input_csv: str, output_csv: str,
                threads: int = 1, dump_mixtures: str | None = None) -> str:
    bundle = _load_bundle(cfg)
    sel_clf = cfg["eval.lateral_classifier"]
    sel_strat = Strategy(cfg["eval.lateral_strategy"])
    clf_model = _load_classifier(cfg, sel_clf)
    table = pd.read_csv(input_csv, float_precision="round_trip")
    ids = list(table.columns)
    X = table.to_numpy(dtype=float)
    probs = classifiers.predict_proba(clf_model, X, ids)

    times = prep.HorizonConfig().test_times
    n = len(X)
    lat_cols = [ids.index(f) for f in predict.LATERAL_INPUT_IDS]
    obj_cols = [ids.index(f) for f in predict.X_OBJ_INPUT_IDS]
    presence = X[:, ids.index(predict.LEADER_PRESENCE_ID)] == 1.0

    lateral = predict.LateralPredictor(bundle, sel_strat, sel_clf)
    lon = predict.LongitudinalPredictor(bundle)
    row_idx = np.repeat(np.arange(n), len(times))
    t_all = np.tile(times, n)
    lat_mix = lateral.predict(X[row_idx][:, lat_cols], t_all,
                              probs=probs[row_idx])
    lon_mix = lon.predict(X[row_idx][:, obj_cols], presence[row_idx], t_all)
    out = pd.DataFrame({
        "row": row_idx,
        "t": t_all,
        "y_mean": lat_mix.mean(),
        "y_var": lat_mix.variance(),
        "x_mean": lon_mix.mean(),
        "x_var": lon_mix.variance(),
    })
    out.to_csv(output_csv, index=False)
    if dump_mixtures:
        dump = {
            "strategy": sel_strat.value, "classifier": sel_clf,
            "rows": [{
                "row": int(r), "t": float(tv),
                "y_weights": lat_mix.weights[i].tolist(),
                "y_means": lat_mix.means[i].tolist(),
                "y_variances": lat_mix.variances.tolist(),
            } for i, (r, tv) in enumerate(zip(row_idx, t_all))],
        }
        storage.save_json(dump, dump_mixtures)
    return f"predict: {n} input rows x {len(times)} horizons -> {output_csv}"


VERBS = {
    "sim": run_sim,
    "label": run_label,
    "split": run_split,
    "select": run_select,
    "train-clf": run_train_clf,
    "eval-clf": run_eval_clf,
    "train-pred": run_train_pred,
    "eval-pred": run_eval_pred,
    "report": run_report,
}

ALL_ORDER = ["sim", "label", "split", "select", "train-clf", "eval-clf",
             "train-pred", "eval-pred", "report"]


def run_all(cfg: PipelineConfig, threads: int = 1) -> str:
    lines = [VERBS[verb](cfg, threads=threads) for verb in ALL_ORDER]
    return "\n".join(lines)

"""Single-cell experiment execution: split, resample, transform, fit, score.

Stage order: binary remap -> stratified subsample -> [paper-protocol
resample] -> split -> [default-protocol resample, training rows only] ->
z-score -> selection/PCA -> fit -> evaluate. One global seed drives every
stage through fixed offsets (split = seed, resample = seed + 1,
model = seed + 2), so a cell is reproducible from its config alone.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from pathlib import Path

import numpy as np

from . import classifiers as clf
from .config import ExperimentConfig
from .features import (
    FeatureMatrix,
    anova_f_scores,
    apply_selection,
    apply_standardizer,
    fit_standardizer,
    pca_fit,
    pca_transform,
    select_percentile,
    stratified_subsample,
    train_test_split,
)
from .ingest import label_frequencies, remap_binary
from .metrics import evaluate, read_report_record, write_report_record
from .resampling import ResampleConfig, resample

logger = logging.getLogger(__name__)


class StageError(Exception):
    """Wraps a failure with the pipeline stage where it happened."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause


def _fit_model(train: FeatureMatrix, cfg: ExperimentConfig, n_classes: int) -> clf.Model:
    variant = cfg.model.variant
    o = dict(cfg.model.options)
    seed = cfg.model_seed
    if variant == "tree":
        params = clf.DecisionTreeParams(
            criterion=o.get("criterion", "gini"),
            min_samples_split=o.get("min_samples_split", 2),
            max_depth=o.get("max_depth"),
            seed=seed,
        )
        return clf.fit_decision_tree(train, params, n_classes=n_classes)
    if variant == "knn":
        params = clf.KnnParams(
            n_neighbors=o.get("n_neighbors", 5),
            distance_weighted=o.get("distance_weighted", False),
        )
        return clf.fit_knn(train, params, n_classes=n_classes)
    if variant == "forest":
        tree_params = clf.DecisionTreeParams(
            criterion=o.get("criterion", "gini"),
            min_samples_split=o.get("min_samples_split", 2),
            max_depth=o.get("max_depth"),
            seed=seed,
        )
        params = clf.ForestParams(
            n_estimators=o.get("n_estimators", 100),
            tree_params=tree_params,
            bootstrap=o.get("bootstrap", True),
            features_per_split=o.get("features_per_split"),
            seed=seed,
        )
        return clf.fit_random_forest(train, params, n_classes=n_classes)
    if variant == "adaboost":
        base = clf.DecisionTreeParams(
            criterion=o.get("criterion", "gini"),
            min_samples_split=o.get("min_samples_split", 2),
            max_depth=o.get("base_max_depth", 3),
            seed=seed,
        )
        params = clf.AdaboostParams(
            n_estimators=o.get("n_estimators", 50),
            base=base,
            learning_rate=o.get("learning_rate", 1.0),
            seed=seed,
        )
        return clf.fit_adaboost(train, params, n_classes=n_classes)
    raise ValueError(f"unknown model variant {variant!r}")


def _fingerprint(m: FeatureMatrix) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(m.values).tobytes())
    return h.hexdigest()[:16]


def run_experiment(cfg: ExperimentConfig, matrix: FeatureMatrix,
                   out_dir: str | Path, save_model: bool = True) -> dict:
    """Execute one cell and persist report.json, timing.json, model.npz.

    report.json is byte-deterministic for a fixed (config, seed, input);
    wall-clock numbers live in timing.json only.
    """
    out = Path(out_dir) / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}

    def staged(stage: str, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except Exception as exc:
            raise StageError(stage, exc) from exc
        timings[stage] = time.perf_counter() - t0
        return result

    m = matrix
    if not cfg.features.time_block and "time_block" in m.column_names:
        m = staged("features", m.drop_column, "time_block")

    if cfg.binary_threshold is not None:
        freq = label_frequencies(m.labels)
        m = staged("binary_remap", lambda: m.with_labels(
            remap_binary(m.labels, freq, cfg.binary_threshold)))
        n_classes = 2
    else:
        n_classes = int(matrix.labels.max()) + 1

    if cfg.subsample is not None and cfg.subsample < m.n:
        m = staged("subsample", stratified_subsample, m, cfg.subsample, cfg.seed)

    res_cfg = None
    if cfg.resample.method is not None:
        res_cfg = ResampleConfig(method=cfg.resample.method, k=cfg.resample.k,
                                 target=cfg.resample.target, seed=cfg.resample_seed)

    if res_cfg is not None and cfg.resample.paper_protocol:
        logger.warning(
            "paper protocol: resampling before the split leaks resampled "
            "information into the test set; scores are not comparable to the "
            "default protocol")
        m = staged("resample_pre_split", resample, m, res_cfg)

    split = staged("split", train_test_split, m, cfg.test_fraction, cfg.split_seed)
    train, test = split.train, split.test
    test_fingerprint = _fingerprint(test)

    if res_cfg is not None and not cfg.resample.paper_protocol:
        train = staged("resample", resample, train, res_cfg)
        # the test split must never be touched by resampling
        assert _fingerprint(test) == test_fingerprint

    if cfg.features.zscore:
        scaler = staged("zscore_fit", fit_standardizer, train)
        train = apply_standardizer(scaler, train)
        test = apply_standardizer(scaler, test)

    def apply_select():
        nonlocal train, test
        scores = anova_f_scores(train)
        sel = select_percentile(scores, cfg.features.select_percentile)
        train = apply_selection(train, sel)
        test = apply_selection(test, sel)

    def apply_pca():
        nonlocal train, test
        model = pca_fit(train, cfg.features.pca_components)
        train = pca_transform(model, train)
        test = pca_transform(model, test)

    steps = [("select", apply_select, cfg.features.select_percentile),
             ("pca", apply_pca, cfg.features.pca_components)]
    if cfg.features.pipeline_order == "pca_then_select":
        steps.reverse()
    for stage, fn, enabled in steps:
        if enabled is not None:
            staged(stage, fn)

    model = staged("fit", _fit_model, train, cfg, n_classes)
    probs = staged("predict", model.predict_proba, test)
    report = staged("evaluate", evaluate, test.labels, probs, n_classes)

    write_report_record(out / "report.json", cfg.name, _record_params(cfg, split_sizes=(train.n, test.n), test_fingerprint=test_fingerprint), report, cfg.seed)
    (out / "timing.json").write_text(
        json.dumps({k: round(v, 6) for k, v in timings.items()}, sort_keys=True, indent=1) + "\n",
        encoding="utf-8")
    if save_model:
        clf.save_model(model, out / "model.npz")
    return read_report_record(out / "report.json")


def _record_params(cfg: ExperimentConfig, split_sizes: tuple[int, int],
                   test_fingerprint: str) -> dict:
    params = cfg.to_dict()
    params["n_train"] = split_sizes[0]
    params["n_test"] = split_sizes[1]
    params["test_fingerprint"] = test_fingerprint
    return params


def run_if_needed(cfg: ExperimentConfig, matrix: FeatureMatrix,
                  out_dir: str | Path, save_model: bool = True) -> tuple[dict, bool]:
    """Resumable execution: reuse an existing report.json when present."""
    report_path = Path(out_dir) / cfg.name / "report.json"
    if report_path.exists():
        return read_report_record(report_path), False
    return run_experiment(cfg, matrix, out_dir, save_model=save_model), True

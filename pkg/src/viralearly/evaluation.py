"""Metrics, chronological splitting, and stratified cross-validation.

PR-AUC is average precision with step integration (no precision-recall
interpolation) and block handling of tied scores; ROC-AUC is the exact
Mann-Whitney statistic with half credit for ties. Both are invariant under
strictly increasing transforms of the scores.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from datetime import datetime
from typing import Sequence

import numpy as np

from . import models, preprocess
from .errors import MetricError, SplitError
from .features import FeatureMatrix
from .ingest import PostRecord


def _check_binary(y) -> np.ndarray:
    y = np.asarray(y).astype(np.int8).ravel()
    if len(np.unique(y)) < 2:
        raise MetricError("metric undefined: labels contain a single class")
    return y


def pr_auc(y, scores) -> float:
    """Average precision: sum of precision * recall-increment at each threshold.

    Tied scores are processed as one block, so the value matches explicit
    threshold enumeration exactly.
    """
    y = _check_binary(y)
    s = np.asarray(scores, dtype=np.float64).ravel()
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    block_end = np.nonzero(np.diff(s_sorted))[0]
    ends = np.concatenate([block_end, [len(s) - 1]])
    tp = np.cumsum(y_sorted)[ends].astype(np.float64)
    pp = ends + 1.0
    n_pos = float(y.sum())
    precision = tp / pp
    recall = tp / n_pos
    delta_recall = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(precision * delta_recall))


def roc_auc(y, scores) -> float:
    """Exact Mann-Whitney: P(score+ > score-) + 0.5 * P(tie), via midranks."""
    y = _check_binary(y)
    s = np.asarray(scores, dtype=np.float64).ravel()
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # midrank (1-based)
        i = j + 1
    n_pos = float(y.sum())
    n_neg = float(len(y) - n_pos)
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)


def f1_at_threshold(y, probs, threshold: float = 0.5) -> float:
    """F1 of the `prob >= threshold` rule; zero when nothing is predicted positive."""
    y = _check_binary(y)
    pred = (np.asarray(probs, dtype=np.float64).ravel() >= threshold).astype(np.int8)
    tp = float(np.sum((pred == 1) & (y == 1)))
    fp = float(np.sum((pred == 1) & (y == 0)))
    fn = float(np.sum((pred == 0) & (y == 1)))
    if tp == 0.0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class SplitAssignment:
    """Chronological partition: every train post strictly precedes every test post."""

    train_ids: list[str]
    test_ids: list[str]
    boundary: datetime  # earliest test creation time


def chronological_split(records: Sequence[PostRecord], train_frac: float = 0.8) -> SplitAssignment:
    """Sort by creation time (ties by post id) and cut at ceil(train_frac * n).

    Ties straddling the cut all go to train, which keeps the strict
    inequality between train and test timestamps.
    """
    n = len(records)
    if n < 2:
        raise SplitError("need at least two records to split")
    if not 0.0 < train_frac < 1.0:
        raise SplitError("train_frac must be in (0, 1)")
    order = sorted(range(n), key=lambda i: (records[i].created_utc, records[i].post_id))
    stamps = [records[i].created_utc for i in order]
    cut = int(np.ceil(train_frac * n))
    while cut < n and stamps[cut - 1] == stamps[cut]:
        cut += 1
    if cut >= n:
        raise SplitError("no valid chronological boundary: timestamps do not separate")
    return SplitAssignment(
        train_ids=[records[i].post_id for i in order[:cut]],
        test_ids=[records[i].post_id for i in order[cut:]],
        boundary=stamps[cut],
    )


def stratified_kfold(y, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Seeded stratified partition; per-fold class counts differ by at most one."""
    y = np.asarray(y).astype(np.int8).ravel()
    if k < 2:
        raise SplitError("k must be at least 2")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(y):
        idx = np.nonzero(y == cls)[0]
        if len(idx) < k:
            raise SplitError(f"class {int(cls)} has {len(idx)} samples, fewer than k={k}")
        idx = idx[rng.permutation(len(idx))]
        for j in range(k):
            folds[j].extend(idx[j::k].tolist())
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


@dataclass
class MetricReport:
    """PR-AUC / ROC-AUC / F1 with class counts; CV runs carry per-fold values."""

    pr_auc: float
    roc_auc: float
    f1: float
    n_pos: int
    n_neg: int
    per_fold: dict[str, list[float]] = field(default_factory=dict)
    std: dict[str, float] = field(default_factory=dict)

    def as_row(self) -> dict[str, float]:
        return {"pr_auc": self.pr_auc, "roc_auc": self.roc_auc, "f1": self.f1}


def evaluate_predictions(y, probs, threshold: float = 0.5) -> MetricReport:
    y = _check_binary(y)
    return MetricReport(
        pr_auc=pr_auc(y, probs),
        roc_auc=roc_auc(y, probs),
        f1=f1_at_threshold(y, probs, threshold),
        n_pos=int(np.sum(y == 1)),
        n_neg=int(np.sum(y == 0)),
    )


def cross_validate(
    config: models.ModelConfig,
    matrix: FeatureMatrix,
    y,
    k: int = 5,
    seed: int = 0,
) -> MetricReport:
    """Stratified k-fold CV with the preprocessing re-fit inside every fold.

    Each fold fits preprocessing and the model on the other k-1 folds only,
    so held-out rows can never influence any fitted state.
    """
    y = np.asarray(y).astype(np.int8).ravel()
    folds = stratified_kfold(y, k=k, seed=seed)
    all_idx = np.arange(len(y))
    per_fold: dict[str, list[float]] = {"pr_auc": [], "roc_auc": [], "f1": []}
    for held in folds:
        train_idx = np.setdiff1d(all_idx, held)
        prep = preprocess.fit(matrix.take(train_idx))
        X_train = preprocess.transform(prep, matrix.take(train_idx)).X
        X_held = preprocess.transform(prep, matrix.take(held)).X
        model = models.train(config, X_train, y[train_idx])
        probs = model.predict_proba(X_held)
        report = evaluate_predictions(y[held], probs)
        for name, value in report.as_row().items():
            per_fold[name].append(value)

    means = {name: float(np.mean(vals)) for name, vals in per_fold.items()}
    stds = {name: float(np.std(vals)) for name, vals in per_fold.items()}
    return MetricReport(
        pr_auc=means["pr_auc"],
        roc_auc=means["roc_auc"],
        f1=means["f1"],
        n_pos=int(np.sum(y == 1)),
        n_neg=int(np.sum(y == 0)),
        per_fold=per_fold,
        std=stds,
    )


@dataclass
class TimedFit:
    """A trained model with its wall-clock training duration."""

    model: models.TrainedModel
    duration_seconds: float


def train_timed(config: models.ModelConfig, X, y, feature_names=None) -> TimedFit:
    start = time.perf_counter()
    model = models.train(config, X, y, feature_names=feature_names)
    return TimedFit(model=model, duration_seconds=time.perf_counter() - start)

"""The three studies: window sweep, modality ablation, importance over time.

Every run starts from raw records: chronological split, labeling artifacts
fitted on the training side only, labels applied everywhere, and per-window
feature matrices. Reports land as CSV files plus a JSON manifest (seeds,
config hashes, artifact fingerprints) sufficient to re-run bit-identically.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__, evaluation, models, preprocess
from .features import DEFAULT_WINDOW_SWEEP, MODALITIES, FeatureMatrix, WindowSpec, assemble_matrix
from .ingest import PostRecord
from .labeling import DEFAULT_WEIGHT_WINDOWS, LabelingArtifacts

SWEEP_MODELS = ("logreg", "gbt", "mlp")
ABLATION_WINDOW_MINUTES = 120.0
DEFAULT_TOP_K = 30


@dataclass
class PreparedData:
    """Chronologically split records with train-fitted labeling applied."""

    train_records: list[PostRecord]
    test_records: list[PostRecord]
    artifacts: LabelingArtifacts
    y_train: np.ndarray
    y_test: np.ndarray
    boundary_iso: str

    @property
    def n_train(self) -> int:
        return len(self.train_records)

    @property
    def n_test(self) -> int:
        return len(self.test_records)


def prepare(
    records: Sequence[PostRecord],
    train_frac: float = 0.8,
    weight_windows: Sequence[float] = DEFAULT_WEIGHT_WINDOWS,
    top_frac: float = 0.05,
    forest_config: models.ModelConfig | None = None,
    artifacts: LabelingArtifacts | None = None,
) -> PreparedData:
    """Split chronologically and label both sides with train-only artifacts."""
    split = evaluation.chronological_split(records, train_frac=train_frac)
    by_id = {r.post_id: r for r in records}
    train = [by_id[i] for i in split.train_ids]
    test = [by_id[i] for i in split.test_ids]
    if artifacts is None:
        artifacts = LabelingArtifacts.fit(
            train, windows=weight_windows, top_frac=top_frac, forest_config=forest_config
        )
    _, y_train = artifacts.label_records(train)
    _, y_test = artifacts.label_records(test)
    return PreparedData(
        train_records=train,
        test_records=test,
        artifacts=artifacts,
        y_train=y_train,
        y_test=y_test,
        boundary_iso=split.boundary.isoformat(),
    )


@dataclass
class WindowMatrices:
    window: float
    train: FeatureMatrix
    test: FeatureMatrix


def build_window_matrices(
    data: PreparedData, windows: Sequence[float], include_modalities: Iterable[str] | None = None
) -> list[WindowMatrices]:
    out = []
    for minutes in windows:
        w = WindowSpec(float(minutes))
        out.append(
            WindowMatrices(
                window=float(minutes),
                train=assemble_matrix(data.train_records, w, data.artifacts.caps, include_modalities),
                test=assemble_matrix(data.test_records, w, data.artifacts.caps, include_modalities),
            )
        )
    return out


def _evaluate_cell(
    kind: str,
    matrices: WindowMatrices,
    data: PreparedData,
    seed: int,
    k_folds: int,
    with_cv: bool,
) -> dict:
    """One (window, model) cell: test metrics plus optional train-side CV."""
    config = models.default_config(kind, seed=seed)
    prep = preprocess.fit(matrices.train)
    tr = preprocess.transform(prep, matrices.train)
    te = preprocess.transform(prep, matrices.test)
    fit = evaluation.train_timed(config, tr.X, data.y_train, feature_names=tr.names)
    report = evaluation.evaluate_predictions(data.y_test, fit.model.predict_proba(te.X))
    row = {
        "window": matrices.window,
        "model": kind,
        "pr_auc": report.pr_auc,
        "roc_auc": report.roc_auc,
        "f1": report.f1,
        "duration_seconds": round(fit.duration_seconds, 3),
    }
    if with_cv:
        cv = evaluation.cross_validate(config, matrices.train, data.y_train, k=k_folds, seed=seed)
        row.update(
            {
                "cv_pr_auc": cv.pr_auc,
                "cv_pr_auc_std": cv.std["pr_auc"],
                "cv_roc_auc": cv.roc_auc,
                "cv_roc_auc_std": cv.std["roc_auc"],
                "cv_f1": cv.f1,
                "cv_f1_std": cv.std["f1"],
            }
        )
    return row


def run_window_sweep(
    records: Sequence[PostRecord],
    windows: Sequence[float] = DEFAULT_WINDOW_SWEEP,
    model_kinds: Sequence[str] = SWEEP_MODELS,
    seed: int = 42,
    k_folds: int = 5,
    with_cv: bool = True,
    jobs: int = 1,
    out_dir: str | Path | None = None,
    data: PreparedData | None = None,
) -> list[dict]:
    """Per (window, model): train on train, score the held-out test split, and
    (optionally) run stratified CV inside the training split. Deterministic
    under fixed seeds regardless of ``jobs``."""
    if data is None:
        data = prepare(records)
    matrices = build_window_matrices(data, windows)
    cells = [(wm, kind) for wm in matrices for kind in model_kinds]

    def run(cell):
        wm, kind = cell
        return _evaluate_cell(kind, wm, data, seed, k_folds, with_cv)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, cells))
    else:
        rows = [run(c) for c in cells]
    rows.sort(key=lambda r: (r["window"], model_kinds.index(r["model"])))

    if out_dir is not None:
        out_dir = Path(out_dir)
        write_csv(out_dir / "window_sweep.csv", rows)
        write_manifest(
            out_dir,
            "window_sweep",
            data,
            seed=seed,
            extra={
                "windows": list(windows),
                "models": list(model_kinds),
                "k_folds": k_folds,
                "with_cv": with_cv,
                "model_configs": {k: _config_hash(models.default_config(k, seed=seed)) for k in model_kinds},
            },
        )
    return rows


def run_ablation(
    records: Sequence[PostRecord],
    window: float = ABLATION_WINDOW_MINUTES,
    modalities: Sequence[str] = MODALITIES,
    seed: int = 42,
    out_dir: str | Path | None = None,
    data: PreparedData | None = None,
) -> list[dict]:
    """Baseline (all features) plus one gbt row per excluded modality."""
    if data is None:
        data = prepare(records)
    rows = []
    scenarios = [("baseline", None)] + [(f"exclude_{m}", m) for m in modalities]
    for name, excluded in scenarios:
        include = None if excluded is None else [m for m in MODALITIES if m != excluded]
        matrices = build_window_matrices(data, [window], include_modalities=include)[0]
        cell = _evaluate_cell("gbt", matrices, data, seed, k_folds=0, with_cv=False)
        rows.append(
            {
                "scenario": name,
                "window": window,
                "pr_auc": cell["pr_auc"],
                "roc_auc": cell["roc_auc"],
            }
        )
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_csv(out_dir / f"ablation_{int(window)}.csv", rows)
        write_manifest(
            out_dir,
            "ablation",
            data,
            seed=seed,
            extra={"window": window, "modalities": list(modalities)},
        )
    return rows


def modality_of_parent(matrix: FeatureMatrix, parent: str) -> str:
    return matrix.spec(parent).modality


def importance_over_time(
    records: Sequence[PostRecord],
    windows: Sequence[float] = DEFAULT_WINDOW_SWEEP,
    top_k: int = DEFAULT_TOP_K,
    seed: int = 42,
    out_dir: str | Path | None = None,
    data: PreparedData | None = None,
) -> tuple[list[dict], list[dict]]:
    """Per window: gbt gain importances, one-hot columns summed into their
    source feature, top-k membership counted per modality.

    Returns (modality count rows, per-feature detail rows); both are written
    as plot-ready long-format CSVs when ``out_dir`` is given.
    """
    if data is None:
        data = prepare(records)
    count_rows: list[dict] = []
    detail_rows: list[dict] = []
    modality_order = {m: i for i, m in enumerate(MODALITIES)}
    for wm in build_window_matrices(data, windows):
        prep = preprocess.fit(wm.train)
        tr = preprocess.transform(prep, wm.train)
        model = models.train(models.default_config("gbt", seed=seed), tr.X, data.y_train, feature_names=tr.names)
        importances = model.importances
        by_parent: dict[str, float] = {}
        for value, parent in zip(importances, tr.parents):
            by_parent[parent] = by_parent.get(parent, 0.0) + float(value)
        ranked = sorted(
            by_parent.items(),
            key=lambda kv: (-kv[1], modality_order[modality_of_parent(wm.train, kv[0])], kv[0]),
        )
        k = min(top_k, len(ranked))
        counts = {m: 0 for m in MODALITIES}
        for rank, (parent, value) in enumerate(ranked, start=1):
            modality = modality_of_parent(wm.train, parent)
            if rank <= k:
                counts[modality] += 1
            detail_rows.append(
                {
                    "window": wm.window,
                    "feature": parent,
                    "modality": modality,
                    "importance": value,
                    "rank": rank,
                    "in_top_k": int(rank <= k),
                }
            )
        for m in MODALITIES:
            count_rows.append({"window": wm.window, "modality": m, "count": counts[m]})

    if out_dir is not None:
        out_dir = Path(out_dir)
        write_csv(out_dir / "modality_importance.csv", count_rows)
        write_csv(out_dir / "importance_features.csv", detail_rows)
        write_manifest(
            out_dir,
            "importance_over_time",
            data,
            seed=seed,
            extra={"windows": list(windows), "top_k": top_k},
        )
    return count_rows, detail_rows


def write_csv(path: str | Path, rows: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("", encoding="utf-8")
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def read_csv(path: str | Path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _config_hash(config: models.ModelConfig) -> str:
    payload = json.dumps(
        {"kind": config.kind, "seed": config.seed, "params": models._jsonable(config.resolved_params())},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def dataset_fingerprint(records: Sequence[PostRecord]) -> str:
    ids = ",".join(sorted(r.post_id for r in records))
    return f"{len(records)}:{hashlib.sha256(ids.encode()).hexdigest()[:12]}"


def write_manifest(
    out_dir: str | Path, study: str, data: PreparedData, seed: int, extra: dict | None = None
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts_json = data.artifacts.to_json()
    doc = {
        "study": study,
        "package_version": __version__,
        "seed": seed,
        "n_train": data.n_train,
        "n_test": data.n_test,
        "split_boundary": data.boundary_iso,
        "dataset_fingerprint": dataset_fingerprint(data.train_records + data.test_records),
        "labeling_artifacts_sha256": hashlib.sha256(artifacts_json.encode()).hexdigest(),
        "threshold_fitted_on": data.artifacts.threshold.fitted_on,
    }
    if extra:
        doc.update(extra)
    path = out_dir / f"{study}_manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
    return path

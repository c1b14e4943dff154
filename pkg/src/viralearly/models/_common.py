"""Shared helpers for the model implementations."""

from __future__ import annotations

import numpy as np

from ..errors import FitError


def check_training_data(X, y) -> tuple[np.ndarray, np.ndarray]:
    """Coerce to float64 matrix / int8 labels; reject single-class targets."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise FitError(f"X must be 2-D, got shape {X.shape}")
    y = np.asarray(y).astype(np.int8).ravel()
    if len(y) != X.shape[0]:
        raise FitError(f"X has {X.shape[0]} rows but y has {len(y)}")
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0, 1))):
        raise FitError("y must be binary 0/1")
    if len(classes) < 2:
        raise FitError("training labels contain a single class")
    return X, y


def balanced_sample_weights(y: np.ndarray) -> np.ndarray:
    """Per-sample weights n / (2 * n_class); both classes carry equal mass."""
    n = len(y)
    n_pos = int(np.sum(y == 1))
    n_neg = n - n_pos
    w = np.where(y == 1, n / (2.0 * n_pos), n / (2.0 * n_neg))
    return w.astype(np.float64)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logloss_terms(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-sample binary cross-entropy from logits, overflow-safe."""
    return np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))

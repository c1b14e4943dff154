"""Slow, independent reference implementations used only for checking.

These deliberately share no code with the package: average precision by
explicit threshold enumeration, ROC-AUC by the O(n+ * n-) pairwise
Mann-Whitney count, and percentiles via direct order-statistic interpolation.
"""

import numpy as np


def brute_force_average_precision(y, scores):
    y = np.asarray(y)
    scores = np.asarray(scores, dtype=float)
    n_pos = y.sum()
    thresholds = sorted(set(scores), reverse=True)
    ap = 0.0
    prev_recall = 0.0
    for t in thresholds:
        pred = scores >= t
        tp = np.sum(pred & (y == 1))
        fp = np.sum(pred & (y == 0))
        precision = tp / (tp + fp)
        recall = tp / n_pos
        ap += precision * (recall - prev_recall)
        prev_recall = recall
    return float(ap)


def pairwise_roc_auc(y, scores):
    y = np.asarray(y)
    scores = np.asarray(scores, dtype=float)
    pos = scores[y == 1]
    neg = scores[y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return float(total / (len(pos) * len(neg)))


def interpolated_percentile(values, q):
    """Linear interpolation between order statistics at rank (n-1) * q / 100."""
    xs = sorted(values)
    pos = (len(xs) - 1) * q / 100.0
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    frac = pos - lo
    return xs[lo] * (1.0 - frac) + xs[hi] * frac


def trapezoid_auc(times, values, a, b, grid_step=1e-3):
    """Numeric quadrature of the constant-extended piecewise-linear curve."""
    xs = np.arange(a, b + grid_step, grid_step)
    ys = np.interp(xs, times, values)
    return float(np.trapezoid(ys, xs))

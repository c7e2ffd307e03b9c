"""Classification and position-prediction metrics.

Covers balanced accuracy, one-vs-rest ROC sweeps with rank-statistic
AUC, low-false-positive working points, detection-time statistics
relative to the marking crossing, average log-likelihood normalization
and the spatial error tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .core import MANEUVERS, ManeuverClass

DETECTION_CAP_S = 5.0


class MetricError(Exception):
    pass


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int = 3) -> np.ndarray:
    out = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(out, (np.asarray(y_true, dtype=int), np.asarray(y_pred, dtype=int)), 1)
    return out


def bacc(confusion: np.ndarray) -> float:
    """Mean per-class recall; rows are true classes."""
    confusion = np.asarray(confusion, dtype=float)
    positives = confusion.sum(axis=1)
    if np.any(positives == 0):
        empty = int(np.argmax(positives == 0))
        raise MetricError(f"class {empty} has no positive samples")
    recalls = np.diag(confusion) / positives
    return float(recalls.mean())


@dataclass
class RocCurve:
    """Threshold sweep of a score >= threshold decision rule.

    ``thresholds`` descend; ``fpr`` and ``tpr`` are non-decreasing along
    the curve with endpoints (0, 0) and (1, 1).
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> tuple[RocCurve, float]:
    """ROC curve over all distinct scores and the rank-statistic AUC.

    Tied score pairs count one half; single-class label vectors are an
    error.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("ROC undefined with a single-class label vector")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = labels[order].astype(np.int64)
    boundary = np.nonzero(np.diff(sorted_scores))[0]
    last = np.append(boundary, len(scores) - 1)
    cum_pos = np.cumsum(sorted_pos)[last]
    cum_all = last + 1
    tpr = np.concatenate([[0.0], cum_pos / n_pos])
    fpr = np.concatenate([[0.0], (cum_all - cum_pos) / n_neg])
    thresholds = np.concatenate([[np.inf], sorted_scores[last]])

    ranks = rankdata(scores)
    u_stat = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    auc = float(u_stat / (n_pos * n_neg))
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr), auc


def working_point(roc: RocCurve, fpr_max: float = 0.01) -> float:
    """Smallest decision threshold keeping FPR <= fpr_max.

    Because FPR grows as the threshold falls, this maximizes TPR under
    the false-positive constraint.
    """
    admissible = roc.fpr <= fpr_max
    if not admissible.any():
        raise MetricError(f"no threshold reaches FPR <= {fpr_max}")
    idx = np.nonzero(admissible)[0][-1]
    return float(roc.thresholds[idx])


@dataclass
class DetectionTimes:
    tau_first: float
    tau_certain: float


def detection_times(times: np.ndarray, detected: np.ndarray, t_cross: float,
                    cap: float = DETECTION_CAP_S) -> DetectionTimes:
    """Seconds before the crossing at first detection and at the onset of
    the final never-revoked detection, both capped at ``cap``.

    ``detected`` is the per-sample binary assignment of the correct
    class at the evaluation working point.  Both values are 0 when the
    class is never detected inside the window.
    """
    times = np.asarray(times, dtype=float)
    detected = np.asarray(detected, dtype=bool)
    eps = 1e-9
    if times[0] > t_cross - cap + eps or times[-1] < t_cross - eps:
        raise MetricError("trace must cover the full window before the crossing")
    window = (times >= t_cross - cap - eps) & (times <= t_cross + eps)
    t_win = times[window]
    d_win = detected[window]
    if not d_win.any():
        return DetectionTimes(0.0, 0.0)
    tau_f = min(float(t_cross - t_win[np.argmax(d_win)]), cap)
    if not d_win[-1]:
        tau_c = 0.0
    else:
        off = np.nonzero(~d_win)[0]
        onset = 0 if len(off) == 0 else off[-1] + 1
        tau_c = min(float(t_cross - t_win[onset]), cap)
    return DetectionTimes(tau_f, tau_c)


def normalize_loglik(loglik: float, loglik_ref: float) -> float:
    """Reference-relative percentage, 100 * ref / value, rounded to 0.1.

    Grows past 100 when ``loglik`` beats the (negative) reference.
    """
    return round(100.0 * loglik_ref / loglik, 1)


@dataclass
class ErrorTable:
    """Absolute position errors aggregated per prediction time."""

    times: np.ndarray
    median_x: np.ndarray
    median_y: np.ndarray
    q1_x: np.ndarray
    q3_x: np.ndarray
    q1_y: np.ndarray
    q3_y: np.ndarray
    by_maneuver: dict = field(default_factory=dict)

    def at(self, t: float) -> dict:
        idx = int(np.argmin(np.abs(self.times - t)))
        return {
            "t": float(self.times[idx]),
            "median_x": float(self.median_x[idx]),
            "median_y": float(self.median_y[idx]),
        }


def spatial_errors(t: np.ndarray, err_x: np.ndarray, err_y: np.ndarray,
                   labels: np.ndarray | None = None,
                   maneuver_cap: int = 20000,
                   maneuver_at: float = 5.0) -> ErrorTable:
    """Per-time medians and quartiles of |x - xhat|, |y - yhat|.

    With labels given, per-maneuver medians at ``maneuver_at`` use up to
    ``maneuver_cap`` rows per class (all available when fewer).
    """
    if np.any(err_x < 0) or np.any(err_y < 0):
        raise MetricError("errors must be absolute values")
    times = np.unique(t)
    med_x, med_y, q1x, q3x, q1y, q3y = (np.empty(len(times)) for _ in range(6))
    for i, tv in enumerate(times):
        m = t == tv
        med_x[i], q1x[i], q3x[i] = (np.percentile(err_x[m], p) for p in (50, 25, 75))
        med_y[i], q1y[i], q3y[i] = (np.percentile(err_y[m], p) for p in (50, 25, 75))
    table = ErrorTable(times=times, median_x=med_x, median_y=med_y,
                       q1_x=q1x, q3_x=q3x, q1_y=q1y, q3_y=q3y)
    if labels is not None:
        sel = np.abs(t - maneuver_at) < 1e-9
        for m in MANEUVERS:
            mask = sel & (labels == m.value)
            ex, ey = err_x[mask], err_y[mask]
            if len(ex) > maneuver_cap:
                ex, ey = ex[:maneuver_cap], ey[:maneuver_cap]
            if len(ex):
                table.by_maneuver[m.name] = {
                    "median_x": float(np.median(ex)),
                    "median_y": float(np.median(ey)),
                    "count": int(len(ex)),
                }
    return table


def one_vs_rest_labels(y: np.ndarray, maneuver: ManeuverClass) -> np.ndarray:
    return np.asarray(y) == maneuver.value

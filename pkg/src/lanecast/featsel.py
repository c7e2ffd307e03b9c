"""Feature-set construction: superset, correlation threshold, merit-based
backward elimination and classifier-wrapped backward elimination.

All correlation measures are Spearman rank correlations taken in
absolute value; the regression target is the time until the next lane
change (minimum over both directions) capped at ``TTLC_CAP_S`` so that
samples without an upcoming change stay comparable.  Ties between
removal candidates are always broken toward the lower catalog index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

TTLC_CAP_S = 10.0


class SelectionError(Exception):
    pass


@dataclass
class FeatureSet:
    variant: str
    ids: list[str]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("feature set contains duplicate ids")


def capped_ttlc(ttlcl: np.ndarray, ttlcr: np.ndarray, cap: float = TTLC_CAP_S) -> np.ndarray:
    """min(ttlcl, ttlcr) with infinities mapped onto the cap."""
    return np.minimum(np.minimum(ttlcl, ttlcr), cap)


def spearman(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be equal-length vectors")
    if len(x) < 2:
        raise ValueError("need at least two observations")
    rx = rankdata(x)
    ry = rankdata(y)
    sx, sy = rx.std(), ry.std()
    if sx == 0.0 or sy == 0.0:
        raise SelectionError("correlation undefined for constant input")
    return float(np.mean((rx - rx.mean()) * (ry - ry.mean())) / (sx * sy))


def _rank_matrix(features: np.ndarray) -> np.ndarray:
    return np.column_stack([rankdata(features[:, j]) for j in range(features.shape[1])])


def variant_a(feature_ids: list[str]) -> FeatureSet:
    """The full superset baseline."""
    return FeatureSet("A", list(feature_ids))


def select_by_threshold(features: np.ndarray, feature_ids: list[str],
                        ttlc: np.ndarray, threshold: float = 0.15) -> FeatureSet:
    """Variant B: keep features whose |rank correlation| with the capped
    time to lane change reaches the threshold.  Constant features carry
    no rank information and are always dropped."""
    kept = []
    correlations = {}
    for j, fid in enumerate(feature_ids):
        col = features[:, j]
        if np.all(col == col[0]):
            continue
        rho = spearman(col, ttlc)
        correlations[fid] = rho
        if abs(rho) >= threshold:
            kept.append(fid)
    if not kept:
        raise SelectionError(
            f"no feature reaches |rho| >= {threshold}; lower the threshold")
    return FeatureSet("B", kept, provenance={"threshold": threshold,
                                             "correlations": correlations})


def cfs_merit(subset: list[int], rho_cf: np.ndarray, rho_ff: np.ndarray) -> float:
    """Merit n*mean|rho_cf| / sqrt(n + n(n-1)*mean|rho_ff|) of a subset."""
    n = len(subset)
    if n < 1:
        raise ValueError("merit undefined for an empty subset")
    idx = np.asarray(subset)
    mean_cf = float(np.abs(rho_cf[idx]).mean())
    if n == 1:
        mean_ff = 0.0
    else:
        block = np.abs(rho_ff[np.ix_(idx, idx)])
        mean_ff = float((block.sum() - np.trace(block)) / (n * (n - 1)))
    radicand = n + n * (n - 1) * mean_ff
    if radicand <= 0.0:
        raise SelectionError("merit radicand not positive")
    return n * mean_cf / np.sqrt(radicand)


def _fold_correlations(fold_features: list[np.ndarray], fold_ttlc: list[np.ndarray]):
    """Per-fold |rho| matrices; features constant in any fold are excluded."""
    n_feat = fold_features[0].shape[1]
    usable = np.ones(n_feat, dtype=bool)
    for feats in fold_features:
        usable &= ~np.all(feats == feats[0:1, :], axis=0)
    cf, ff = [], []
    for feats, ttlc in zip(fold_features, fold_ttlc):
        ranks = _rank_matrix(feats[:, usable])
        target = rankdata(ttlc)
        full = np.corrcoef(np.column_stack([ranks, target]).T)
        ff.append(np.abs(full[:-1, :-1]))
        cf.append(np.abs(full[:-1, -1]))
    return usable, cf, ff


def cfs_backward_select(fold_features: list[np.ndarray], fold_ttlc: list[np.ndarray],
                        feature_ids: list[str]) -> FeatureSet:
    """Variant C: greedy backward elimination maximizing the mean
    cross-validated merit; stops when no single removal improves it."""
    if fold_features[0].shape[1] < 2:
        raise ValueError("backward selection needs at least two features")
    usable, cf_folds, ff_folds = _fold_correlations(fold_features, fold_ttlc)
    usable_idx = np.nonzero(usable)[0]
    k_folds = len(cf_folds)

    active = list(range(len(usable_idx)))
    cf = np.stack(cf_folds)                  # (folds, m)
    ff = np.stack(ff_folds)                  # (folds, m, m)

    def mean_merit(subset: list[int]) -> float:
        return float(np.mean([cfs_merit(subset, cf[i], ff[i]) for i in range(k_folds)]))

    current = mean_merit(active)
    while len(active) > 1:
        idx = np.asarray(active)
        n = len(idx)
        sum_cf = cf[:, idx].sum(axis=1)                       # (folds,)
        block = ff[:, idx[:, None], idx[None, :]]             # (folds, n, n)
        rowsum = block.sum(axis=2) - 1.0                      # |rho_ff(f,f)| = 1
        sum_ff = (block.sum(axis=(1, 2)) - n) / 2.0
        m = n - 1
        mean_cf = (sum_cf[:, None] - cf[:, idx]) / m
        if m == 1:
            mean_ff = np.zeros_like(mean_cf)
        else:
            mean_ff = (sum_ff[:, None] - rowsum) / (m * (m - 1) / 2.0)
        radicand = m + m * (m - 1) * mean_ff
        merits = (m * mean_cf / np.sqrt(radicand)).mean(axis=0)  # (n,)
        best_pos = int(np.argmax(merits))
        if merits[best_pos] > current:
            current = float(merits[best_pos])
            active.pop(best_pos)
        else:
            break

    kept = [feature_ids[usable_idx[i]] for i in active]
    return FeatureSet("C", kept, provenance={"mean_merit": current,
                                             "folds": k_folds})


def wrapper_backward_select(score_fn, feature_ids: list[str],
                            candidate_ids: list[str] | None = None,
                            variant: str = "D") -> FeatureSet:
    """Variant D: backward elimination driven by a black-box validation
    score (balanced accuracy of the wrapped classifier).

    ``score_fn(ids)`` returns the validation score of training on the
    given feature subset.  A removal is kept as long as the score does
    not degrade (features whose removal is exactly neutral, the chaff,
    are eliminated too); the search stops once every removal strictly
    hurts.  The selection never drops below one feature.
    """
    active = list(candidate_ids if candidate_ids is not None else feature_ids)
    order = {fid: i for i, fid in enumerate(feature_ids)}
    active.sort(key=order.__getitem__)
    current = score_fn(active)
    rounds = 0
    while len(active) > 1:
        best_score, best_fid = -np.inf, None
        for fid in active:                      # catalog order: first max wins ties
            candidate = [f for f in active if f != fid]
            s = score_fn(candidate)
            if s > best_score:
                best_score, best_fid = s, fid
        if best_score >= current:
            active.remove(best_fid)
            current = best_score
            rounds += 1
        else:
            break
    return FeatureSet(variant, active, provenance={"score": current,
                                                   "rounds": rounds})

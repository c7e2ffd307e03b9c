"""Labeling, fold construction, balancing, data explosion and mirroring.

The maneuver label of a sample follows from the times until the vehicle
center first crosses the left or right lane marking (``ttlcl`` /
``ttlcr``); crossings are found by scanning the recorded remainder of
the situation, with the crossing instant defined as the first sample at
which the center is past the marking.

Position training data is "exploded": each prediction start sample is
multiplied into one row per prediction time.  Training uses times in
[-1 s, 6 s] (71 rows per start, Gaussian-subsampled inside the boundary
bands), evaluation uses the fixed grid {0.0, 0.1, ..., 5.0}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, ExplodedSet, ManeuverClass, Situation

DEFAULT_HORIZON_S = 5.0
TRAIN_TIME_MIN_S = -1.0
TRAIN_TIME_MAX_S = 6.0
TEST_TIME_MAX_S = 5.0

#: sigma of the boundary-band time subsampling; the band spans three
#: standard deviations between the median at 0 s and the -3 sigma
#: percentile at -1 s
TIME_SUBSAMPLE_SIGMA = (0.0 - TRAIN_TIME_MIN_S) / 3.0


@dataclass(frozen=True)
class HorizonConfig:
    """Labeling horizon and the prediction-time grids."""

    horizon_s: float = DEFAULT_HORIZON_S

    @property
    def train_times(self) -> np.ndarray:
        return (np.arange(71) - 10) / 10.0

    @property
    def test_times(self) -> np.ndarray:
        return np.arange(51) / 10.0


@dataclass
class FoldAssignment:
    """Situation-level split into maneuver folds and position train/test.

    ``retained`` lists the (situation_id, sample_index) pairs that
    survive the per-fold class balancing.
    """

    ma_fold: dict[int, int]
    po_train: list[int]
    po_test: list[int]
    retained: dict[int, list[tuple[int, int]]] = field(default_factory=dict)

    def tv_folds(self) -> list[int]:
        """The five training/validation folds (all but the last)."""
        k = max(self.ma_fold.values())
        return list(range(1, k))

    def test_fold(self) -> int:
        return max(self.ma_fold.values())


def compute_ttlc(situation: Situation, feature_ids: list[str]) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample times until the center crosses the current markings.

    The absolute lateral position is recovered from the stored marking
    positions and the marking-distance feature; for each sample the
    remainder of the recording is scanned for the first instant at which
    the center is beyond the marking assigned at that sample.
    """
    if len(situation.marking_left) != situation.n_samples:
        raise ValueError("situation lacks per-sample marking positions")
    col = feature_ids.index("d_y_ml")
    y = situation.marking_left - situation.features[:, col]
    n = situation.n_samples
    idx = np.arange(n)

    def first_beyond(threshold_per_sample, above: bool):
        out = np.full(n, np.inf)
        for b in np.unique(threshold_per_sample):
            crossed = y > b if above else y < b
            nxt = np.where(crossed, idx, n)
            nxt = np.minimum.accumulate(nxt[::-1])[::-1]
            nxt = np.append(nxt[1:], n)  # strictly after the sample itself
            sel = threshold_per_sample == b
            hit = nxt[sel]
            vals = np.where(hit < n, (hit - idx[sel]) / 10.0, np.inf)
            out[sel] = vals
        return out

    ttlcl = first_beyond(situation.marking_left, above=True)
    ttlcr = first_beyond(situation.marking_right, above=False)
    return ttlcl, ttlcr


def label_dataset(dataset: Dataset, horizon_s: float = DEFAULT_HORIZON_S) -> None:
    """Recompute ttlc values and labels of every situation in place."""
    ids = dataset.feature_ids
    for sit in dataset.situations:
        sit.ttlcl, sit.ttlcr = compute_ttlc(sit, ids)
        sit.labels = assign_labels(sit.ttlcl, sit.ttlcr, horizon_s)


def assign_label(ttlcl: float, ttlcr: float, horizon_s: float = DEFAULT_HORIZON_S) -> ManeuverClass:
    """Maneuver label of one sample; exactly one branch applies."""
    if ttlcl < 0 or ttlcr < 0:
        raise ValueError("times to lane crossing must be non-negative")
    if ttlcl <= horizon_s and ttlcl < ttlcr:
        return ManeuverClass.LCL
    if ttlcr <= horizon_s and ttlcr < ttlcl:
        return ManeuverClass.LCR
    return ManeuverClass.FLW


def assign_labels(ttlcl: np.ndarray, ttlcr: np.ndarray,
                  horizon_s: float = DEFAULT_HORIZON_S) -> np.ndarray:
    lcl = (ttlcl <= horizon_s) & (ttlcl < ttlcr)
    lcr = (ttlcr <= horizon_s) & (ttlcr < ttlcl)
    out = np.full(len(ttlcl), ManeuverClass.FLW.value, dtype=np.int8)
    out[lcl] = ManeuverClass.LCL.value
    out[lcr] = ManeuverClass.LCR.value
    return out


def first_crossing_time(situation: Situation) -> float:
    """Recording time of the first marking crossing, inf if none."""
    if situation.n_samples == 0:
        return np.inf
    return float(min(situation.ttlcl[0], situation.ttlcr[0]))


def split_folds(dataset: Dataset, k: int = 6, seed: int = 0,
                po_fraction: float = 0.5, po_test_fraction: float = 0.3,
                horizon_s: float = DEFAULT_HORIZON_S) -> FoldAssignment:
    """Assign situations to maneuver folds and the position split.

    Only situations recorded continuously for at least the horizon
    before their first crossing are kept.  Within each maneuver fold the
    per-class sample counts are equalized by random undersampling.
    """
    eligible = []
    for sit in dataset.situations:
        duration = sit.t_rec[-1] - sit.t_rec[0] if sit.n_samples else 0.0
        if duration < horizon_s:
            continue
        crossing = first_crossing_time(sit)
        if np.isfinite(crossing) and crossing < horizon_s:
            continue
        eligible.append(sit.situation_id)

    rng = np.random.default_rng((seed, 2003))
    order = [eligible[i] for i in rng.permutation(len(eligible))]
    n_po = int(round(len(order) * po_fraction))
    po_ids, ma_ids = order[:n_po], order[n_po:]
    if len(ma_ids) < k:
        raise ValueError(f"{len(ma_ids)} maneuver situations cannot fill {k} folds")
    n_po_test = int(round(len(po_ids) * po_test_fraction))
    po_test, po_train = sorted(po_ids[:n_po_test]), sorted(po_ids[n_po_test:])

    ma_fold = {sid: (i % k) + 1 for i, sid in enumerate(ma_ids)}

    by_sid = {s.situation_id: s for s in dataset.situations}
    retained: dict[int, list[tuple[int, int]]] = {}
    for fold in range(1, k + 1):
        sids = sorted(sid for sid, f in ma_fold.items() if f == fold)
        per_class: dict[int, list[tuple[int, int]]] = {m.value: [] for m in ManeuverClass}
        for sid in sids:
            labels = by_sid[sid].labels
            for i in range(len(labels)):
                per_class[int(labels[i])].append((sid, i))
        m = min(len(v) for v in per_class.values())
        kept: list[tuple[int, int]] = []
        for cls in sorted(per_class):
            entries = per_class[cls]
            take = rng.choice(len(entries), size=m, replace=False)
            kept.extend(entries[j] for j in sorted(take))
        retained[fold] = sorted(kept)

    return FoldAssignment(ma_fold=ma_fold, po_train=po_train, po_test=po_test,
                          retained=retained)


def _gather_starts(situations: list[Situation], feature_ids: list[str],
                   t_min: float, t_max: float):
    """Start samples whose stored futures cover [t_min, t_max]."""
    feats, sids, t_recs, labels, futures = [], [], [], [], []
    skipped = 0
    for sit in situations:
        for i in sorted(sit.futures):
            fut = sit.futures[i]
            if (len(fut) < 2 or fut[0, 0] > t_min + 1e-9 or fut[-1, 0] < t_max - 1e-9):
                skipped += 1
                continue
            feats.append(sit.features[i])
            sids.append(sit.situation_id)
            t_recs.append(sit.t_rec[i])
            labels.append(sit.labels[i])
            futures.append(fut)
    if feats:
        features = np.vstack(feats)
    else:
        features = np.empty((0, len(feature_ids)))
    return (features, np.asarray(sids, dtype=np.int64), np.asarray(t_recs, dtype=float),
            np.asarray(labels, dtype=np.int8), futures, skipped)


def _interp_future(fut: np.ndarray, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear time interpolation of the (x, y) targets at ``times``."""
    pos = (times - fut[0, 0]) * 10.0
    lo = np.clip(np.floor(pos).astype(int), 0, len(fut) - 2)
    frac = pos - lo
    x = fut[lo, 1] * (1.0 - frac) + fut[lo + 1, 1] * frac
    y = fut[lo, 2] * (1.0 - frac) + fut[lo + 1, 2] * frac
    return x, y


def explode_training(situations: list[Situation], feature_ids: list[str],
                     horizon: HorizonConfig = HorizonConfig(),
                     seed: int = 0) -> tuple[ExplodedSet, int]:
    """71 rows per start: inner grid plus Gaussian-drawn boundary bands.

    Returns the exploded set and the number of start samples skipped
    because their future does not span [-1 s, 6 s].
    """
    features, sids, t_recs, labels, futures, skipped = _gather_starts(
        situations, feature_ids, TRAIN_TIME_MIN_S, TRAIN_TIME_MAX_S)
    rng = np.random.default_rng((seed, 3001))
    inner = horizon.train_times[10:61]          # 0.0 .. 5.0 on the grid
    rows_start, rows_t, rows_x, rows_y = [], [], [], []
    for s, fut in enumerate(futures):
        left = -np.abs(_truncated_normal(rng, 10, TIME_SUBSAMPLE_SIGMA, 1.0))
        right = TEST_TIME_MAX_S + np.abs(_truncated_normal(rng, 10, TIME_SUBSAMPLE_SIGMA, 1.0))
        times = np.concatenate([left, inner, right])
        x, y = _interp_future(fut, times)
        rows_start.append(np.full(len(times), s, dtype=np.int64))
        rows_t.append(times)
        rows_x.append(x)
        rows_y.append(y)
    empty = np.empty(0)
    exploded = ExplodedSet(
        feature_ids=list(feature_ids),
        start_features=features,
        start_situation=sids,
        start_t_rec=t_recs,
        start_labels=labels,
        row_start=np.concatenate(rows_start) if rows_start else np.empty(0, dtype=np.int64),
        t=np.concatenate(rows_t) if rows_t else empty,
        x=np.concatenate(rows_x) if rows_x else empty,
        y=np.concatenate(rows_y) if rows_y else empty,
    )
    return exploded, skipped


def _truncated_normal(rng, size: int, sigma: float, bound: float) -> np.ndarray:
    """|N(0, sigma)| draws rejected beyond ``bound``."""
    out = np.abs(rng.normal(0.0, sigma, size=size))
    while True:
        bad = out > bound
        if not bad.any():
            return out
        out[bad] = np.abs(rng.normal(0.0, sigma, size=int(bad.sum())))


def explode_test(situations: list[Situation], feature_ids: list[str],
                 horizon: HorizonConfig = HorizonConfig()) -> tuple[ExplodedSet, int]:
    """Exactly 51 rows per start on the fixed grid {0.0, ..., 5.0}."""
    features, sids, t_recs, labels, futures, skipped = _gather_starts(
        situations, feature_ids, 0.0, TEST_TIME_MAX_S)
    times = horizon.test_times
    rows_start, rows_x, rows_y = [], [], []
    for s, fut in enumerate(futures):
        offset = int(round((times[0] - fut[0, 0]) * 10.0))
        idx = offset + np.arange(len(times))
        rows_start.append(np.full(len(times), s, dtype=np.int64))
        rows_x.append(fut[idx, 1])
        rows_y.append(fut[idx, 2])
    empty = np.empty(0)
    n = len(futures)
    exploded = ExplodedSet(
        feature_ids=list(feature_ids),
        start_features=features,
        start_situation=sids,
        start_t_rec=t_recs,
        start_labels=labels,
        row_start=np.concatenate(rows_start) if rows_start else np.empty(0, dtype=np.int64),
        t=np.tile(times, n),
        x=np.concatenate(rows_x) if rows_x else empty,
        y=np.concatenate(rows_y) if rows_y else empty,
    )
    return exploded, skipped


def attach_probabilities(exploded: ExplodedSet, start_probs: np.ndarray) -> ExplodedSet:
    """Broadcast per-start classifier probabilities onto the rows."""
    if start_probs.shape != (exploded.n_starts, 3):
        raise ValueError("need one probability triple per start sample")
    out = exploded.select_rows(np.ones(exploded.n_rows, dtype=bool))
    out.p_lcl = start_probs[exploded.row_start, ManeuverClass.LCL.value]
    out.p_lcr = start_probs[exploded.row_start, ManeuverClass.LCR.value]
    return out


def mirror_probabilities(exploded: ExplodedSet) -> ExplodedSet:
    """Append one duplicate per row with probabilities reflected.

    Values below 0.5 are mirrored at 0 (p -> -p), the rest at 1
    (p -> 2 - p), which removes the density jumps at the probability
    boundaries before mixture fitting.  All other fields are copied.
    """
    if exploded.p_lcl is None or exploded.p_lcr is None:
        raise ValueError("mirroring requires probability columns")
    for p in (exploded.p_lcl, exploded.p_lcr):
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("probabilities must lie in [0, 1] before mirroring")

    def reflect(p: np.ndarray) -> np.ndarray:
        return np.where(p < 0.5, -p, 2.0 - p)

    return ExplodedSet(
        feature_ids=exploded.feature_ids,
        start_features=exploded.start_features,
        start_situation=exploded.start_situation,
        start_t_rec=exploded.start_t_rec,
        start_labels=exploded.start_labels,
        row_start=np.concatenate([exploded.row_start, exploded.row_start]),
        t=np.concatenate([exploded.t, exploded.t]),
        x=np.concatenate([exploded.x, exploded.x]),
        y=np.concatenate([exploded.y, exploded.y]),
        p_lcl=np.concatenate([exploded.p_lcl, reflect(exploded.p_lcl)]),
        p_lcr=np.concatenate([exploded.p_lcr, reflect(exploded.p_lcr)]),
    )


def undersample_flw_starts(exploded: ExplodedSet, seed: int = 0) -> ExplodedSet:
    """Reduce lane-following starts to the mean of the lane-change counts."""
    labels = exploded.start_labels
    n_lcl = int(np.sum(labels == ManeuverClass.LCL.value))
    n_lcr = int(np.sum(labels == ManeuverClass.LCR.value))
    flw_idx = np.nonzero(labels == ManeuverClass.FLW.value)[0]
    target = int(round((n_lcl + n_lcr) / 2.0))
    if len(flw_idx) <= target:
        return exploded
    rng = np.random.default_rng((seed, 3307))
    keep = set(flw_idx[np.sort(rng.choice(len(flw_idx), size=target, replace=False))])
    keep_start = np.array([
        (labels[s] != ManeuverClass.FLW.value) or (s in keep)
        for s in range(exploded.n_starts)
    ])
    return exploded.select_rows(keep_start[exploded.row_start])

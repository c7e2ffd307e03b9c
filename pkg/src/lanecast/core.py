"""Domain types shared by every stage of the pipeline.

Situations are stored columnwise (one numpy array per field) because a
run touches hundreds of thousands of samples; the row-wise ``Sample``
view exists for inspection and tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

#: recording rate of every situation, fixed at 10 Hz
SAMPLE_PERIOD_S = 0.1

#: lower bound kept between the labeling horizon and situation length
MIN_DURATION_MARGIN_S = 7.0


class ManeuverClass(IntEnum):
    """The three maneuver classes, ordered LCL < FLW < LCR.

    The ordering is fixed so that serialized confusion matrices,
    probability triples and gating weights always line up.
    """

    LCL = 0
    FLW = 1
    LCR = 2


MANEUVERS = (ManeuverClass.LCL, ManeuverClass.FLW, ManeuverClass.LCR)
MANEUVER_NAMES = tuple(m.name for m in MANEUVERS)


@dataclass(frozen=True)
class FeatureDescriptor:
    """One entry of the feature catalog.

    ``kind`` is either ``"continuous"`` (with a physical unit) or
    ``"nominal"`` (values restricted to an integer code enumeration).
    """

    id: str
    kind: str
    unit: str = ""
    nominal_values: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("continuous", "nominal"):
            raise ValueError(f"unknown feature kind {self.kind!r} for {self.id!r}")
        if self.kind == "nominal" and not self.nominal_values:
            raise ValueError(f"nominal feature {self.id!r} requires an enumeration")


@dataclass
class Sample:
    """Row view of one timestamped feature frame of an observed vehicle.

    ``future`` holds ground-truth positions relative to this sample's
    own pose as an ``(m, 3)`` array of ``(t, x, y)`` with strictly
    increasing times; it is empty for samples that are not prediction
    start points.
    """

    situation_id: int
    t_rec: float
    features: dict[str, float]
    ttlcl: float
    ttlcr: float
    label: ManeuverClass
    future: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))


@dataclass
class Situation:
    """A contiguous recording of one vehicle at a constant 0.1 s period.

    ``marking_left`` / ``marking_right`` hold the absolute lateral
    positions of the markings bounding the assigned lane per sample;
    together with the ``d_y_ml`` feature they recover the absolute
    lateral position of the vehicle, which the labeling scan relies on.
    ``futures`` maps a sample index to its ``(m, 3)`` relative
    trajectory ``(t, x, y)``.
    """

    situation_id: int
    lane_width: float
    t_rec: np.ndarray
    features: np.ndarray          # (n_samples, n_features) in catalog order
    ttlcl: np.ndarray
    ttlcr: np.ndarray
    labels: np.ndarray            # int values of ManeuverClass
    marking_left: np.ndarray
    marking_right: np.ndarray
    futures: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.t_rec)

    def sample(self, i: int, feature_ids: list[str]) -> Sample:
        """Materialize the row view of sample ``i``."""
        return Sample(
            situation_id=self.situation_id,
            t_rec=float(self.t_rec[i]),
            features={fid: float(v) for fid, v in zip(feature_ids, self.features[i])},
            ttlcl=float(self.ttlcl[i]),
            ttlcr=float(self.ttlcr[i]),
            label=ManeuverClass(int(self.labels[i])),
            future=self.futures.get(i, np.empty((0, 3))),
        )

    def validate(self) -> None:
        n = self.n_samples
        for name in ("features", "ttlcl", "ttlcr", "labels", "marking_left", "marking_right"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"situation {self.situation_id}: field {name} length mismatch")
        if n > 1:
            steps = np.diff(self.t_rec)
            if not np.allclose(steps, SAMPLE_PERIOD_S, atol=1e-9):
                raise ValueError(f"situation {self.situation_id}: sampling period not constant")
        if np.any(self.ttlcl < 0) or np.any(self.ttlcr < 0):
            raise ValueError(f"situation {self.situation_id}: negative time to lane crossing")
        for i, fut in self.futures.items():
            if fut.ndim != 2 or fut.shape[1] != 3:
                raise ValueError(f"situation {self.situation_id}: future of sample {i} malformed")
            if len(fut) > 1 and np.any(np.diff(fut[:, 0]) <= 0):
                raise ValueError(
                    f"situation {self.situation_id}: future times of sample {i} not increasing"
                )


@dataclass
class Dataset:
    """Feature catalog plus the situations recorded under it."""

    catalog: list[FeatureDescriptor]
    situations: list[Situation]

    def __post_init__(self):
        ids = [d.id for d in self.catalog]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate feature ids in catalog")
        self._index = {fid: i for i, fid in enumerate(ids)}

    @property
    def feature_ids(self) -> list[str]:
        return [d.id for d in self.catalog]

    def column_index(self, feature_id: str) -> int:
        try:
            return self._index[feature_id]
        except KeyError:
            raise KeyError(f"unknown feature id {feature_id!r}") from None

    def situation_by_id(self, situation_id: int) -> Situation:
        for s in self.situations:
            if s.situation_id == situation_id:
                return s
        raise KeyError(f"unknown situation id {situation_id}")

    @property
    def n_samples(self) -> int:
        return sum(s.n_samples for s in self.situations)


def dataset_equal(a: Dataset, b: Dataset) -> bool:
    """Bit-exact equality of two datasets, the round-trip oracle."""
    if [d.id for d in a.catalog] != [d.id for d in b.catalog]:
        return False
    if len(a.situations) != len(b.situations):
        return False
    for sa, sb in zip(a.situations, b.situations):
        if sa.situation_id != sb.situation_id or sa.lane_width != sb.lane_width:
            return False
        for name in ("t_rec", "features", "ttlcl", "ttlcr", "labels",
                     "marking_left", "marking_right"):
            va, vb = getattr(sa, name), getattr(sb, name)
            if va.shape != vb.shape or not np.array_equal(va, vb):
                return False
        if set(sa.futures) != set(sb.futures):
            return False
        for i in sa.futures:
            if not np.array_equal(sa.futures[i], sb.futures[i]):
                return False
    return True


@dataclass
class ExplodedSet:
    """Flattened (start sample, prediction time, target) records.

    Start-sample feature frames are stored once and referenced through
    ``row_start`` so that exploding never copies (and can never alter)
    a feature vector.  ``p_lcl`` / ``p_lcr`` are attached once a
    classifier has scored the start samples; after mirroring they range
    over [-0.5, 1.5].
    """

    feature_ids: list[str]
    start_features: np.ndarray    # (n_starts, n_features)
    start_situation: np.ndarray   # (n_starts,)
    start_t_rec: np.ndarray       # (n_starts,)
    start_labels: np.ndarray      # (n_starts,)
    row_start: np.ndarray         # (n_rows,) index into the start arrays
    t: np.ndarray                 # (n_rows,) prediction time
    x: np.ndarray                 # (n_rows,) longitudinal target
    y: np.ndarray                 # (n_rows,) lateral target
    p_lcl: np.ndarray | None = None
    p_lcr: np.ndarray | None = None

    @property
    def n_rows(self) -> int:
        return len(self.row_start)

    @property
    def n_starts(self) -> int:
        return len(self.start_t_rec)

    def feature_column(self, feature_id: str) -> np.ndarray:
        """Per-row values of one input feature (gathered, bit-exact)."""
        col = self.feature_ids.index(feature_id)
        return self.start_features[self.row_start, col]

    def start_column(self, feature_id: str) -> np.ndarray:
        """Per-start values of one input feature."""
        col = self.feature_ids.index(feature_id)
        return self.start_features[:, col]

    def row_labels(self) -> np.ndarray:
        return self.start_labels[self.row_start]

    def select_rows(self, mask: np.ndarray) -> "ExplodedSet":
        """Row subset sharing the start-frame storage."""
        return ExplodedSet(
            feature_ids=self.feature_ids,
            start_features=self.start_features,
            start_situation=self.start_situation,
            start_t_rec=self.start_t_rec,
            start_labels=self.start_labels,
            row_start=self.row_start[mask],
            t=self.t[mask],
            x=self.x[mask],
            y=self.y[mask],
            p_lcl=None if self.p_lcl is None else self.p_lcl[mask],
            p_lcr=None if self.p_lcr is None else self.p_lcr[mask],
        )

    def validate(self) -> None:
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise ValueError("non-finite position targets")
        for p in (self.p_lcl, self.p_lcr):
            if p is not None and (np.any(p < -0.5) or np.any(p > 1.5)):
                raise ValueError("probability column outside [-0.5, 1.5]")

import numpy as np
import pytest

from lanecast.core import Dataset, FeatureDescriptor, Situation
from lanecast import prep


def make_situation(sid=0, n=121, lane_width=3.5, lane=0, y=None, feature_ids=None):
    """Straight-driving situation with hand-controllable lateral track."""
    if feature_ids is None:
        feature_ids = ["d_y_ml", "d_y_mr", "d_y_cl", "v_y", "v_x"]
    t = np.arange(n) / 10.0
    if y is None:
        y = np.full(n, (lane + 0.5) * lane_width)
    lane_idx = np.clip(np.floor(y / lane_width).astype(int), 0, 10)
    ml = (lane_idx + 1) * lane_width
    mr = lane_idx * lane_width
    cols = {
        "d_y_ml": ml - y,
        "d_y_mr": y - mr,
        "d_y_cl": y - (lane_idx + 0.5) * lane_width,
        "v_y": np.zeros(n),
        "v_x": np.full(n, 30.0),
    }
    features = np.column_stack([cols.get(f, np.zeros(n)) for f in feature_ids])
    sit = Situation(
        situation_id=sid, lane_width=lane_width, t_rec=t, features=features,
        ttlcl=np.zeros(n), ttlcr=np.zeros(n),
        labels=np.zeros(n, dtype=np.int8),
        marking_left=ml.astype(float), marking_right=mr.astype(float),
    )
    sit.ttlcl, sit.ttlcr = prep.compute_ttlc(sit, feature_ids)
    sit.labels = prep.assign_labels(sit.ttlcl, sit.ttlcr)
    return sit


def make_dataset(situations, feature_ids=None):
    if feature_ids is None:
        feature_ids = ["d_y_ml", "d_y_mr", "d_y_cl", "v_y", "v_x"]
    catalog = [FeatureDescriptor(f, "continuous", "m") for f in feature_ids]
    return Dataset(catalog=catalog, situations=situations)


@pytest.fixture
def simple_dataset():
    return make_dataset([make_situation(sid=i) for i in range(3)])

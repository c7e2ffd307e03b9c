import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lanecast import prep
from lanecast.core import ManeuverClass

from conftest import make_dataset, make_situation

FIDS = ["d_y_ml", "d_y_mr", "d_y_cl", "v_y", "v_x"]


def lane_change_track(n=121, cross_idx=80, lane_width=3.5):
    """Lateral track whose first sample past the left marking is cross_idx."""
    ramp_len = 40
    start = cross_idx - ramp_len // 2
    i = np.arange(n)
    ramp = (i - start + 0.5) * (lane_width / ramp_len)
    y = 0.5 * lane_width + np.clip(ramp, 0.0, lane_width)
    return y


class TestComputeTtlc:
    def test_no_crossing_infinite(self):
        sit = make_situation(n=50)
        ttlcl, ttlcr = prep.compute_ttlc(sit, FIDS)
        assert np.isinf(ttlcl).all() and np.isinf(ttlcr).all()

    def test_crossing_time_subtraction(self):
        # crossing at t_rec = 8.0 s; the sample at 5.0 s sees 3.0 s
        sit = make_situation(n=121, y=lane_change_track(cross_idx=80))
        ttlcl, _ = prep.compute_ttlc(sit, FIDS)
        assert ttlcl[50] == pytest.approx(3.0, abs=1e-12)
        assert prep.first_crossing_time(sit) == pytest.approx(8.0, abs=1e-12)

    def test_after_crossing_infinite(self):
        sit = make_situation(n=121, y=lane_change_track(cross_idx=80))
        ttlcl, ttlcr = prep.compute_ttlc(sit, FIDS)
        assert np.isinf(ttlcl[85:]).all()
        assert np.isinf(ttlcr[85:]).all()


class TestAssignLabel:
    def test_paper_branches(self):
        assert prep.assign_label(3.0, np.inf, 5.0) == ManeuverClass.LCL
        assert prep.assign_label(np.inf, np.inf, 5.0) == ManeuverClass.FLW
        assert prep.assign_label(5.1, 6.0, 5.0) == ManeuverClass.FLW

    def test_right_branch_and_tie(self):
        assert prep.assign_label(np.inf, 2.0, 5.0) == ManeuverClass.LCR
        # tie inside the horizon falls through to lane following
        assert prep.assign_label(4.0, 4.0, 5.0) == ManeuverClass.FLW

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            prep.assign_label(-1.0, 2.0, 5.0)

    @given(st.floats(min_value=0, max_value=20, allow_nan=False),
           st.floats(min_value=0, max_value=20, allow_nan=False))
    @settings(max_examples=100, deadline=None)
    def test_total_and_single_branch(self, a, b):
        label = prep.assign_label(a, b, 5.0)
        branches = [
            a <= 5.0 and a < b,
            b <= 5.0 and b < a,
        ]
        if label == ManeuverClass.LCL:
            assert branches[0]
        elif label == ManeuverClass.LCR:
            assert branches[1]
        else:
            assert not branches[0] and not branches[1]


class TestSplitFolds:
    def test_six_situations_one_per_fold(self):
        ds = make_dataset([make_situation(sid=i, n=60) for i in range(6)])
        assignment = prep.split_folds(ds, k=6, seed=0, po_fraction=0.0)
        assert sorted(assignment.ma_fold.values()) == [1, 2, 3, 4, 5, 6]

    def test_partition_property(self):
        ds = make_dataset([make_situation(sid=i, n=60) for i in range(20)])
        assignment = prep.split_folds(ds, k=6, seed=1, po_fraction=0.3)
        ma = set(assignment.ma_fold)
        po = set(assignment.po_train) | set(assignment.po_test)
        assert not (ma & po)
        assert len(assignment.po_train) + len(assignment.po_test) == len(po)

    def test_undersampling_balances_to_min_count(self):
        # one situation whose samples split 100 lane-following, 20 left,
        # 30 right by construction
        sit = make_situation(sid=0, n=150)
        sit.labels = np.concatenate([
            np.full(100, ManeuverClass.FLW.value),
            np.full(20, ManeuverClass.LCL.value),
            np.full(30, ManeuverClass.LCR.value)]).astype(np.int8)
        ds = make_dataset([sit] + [make_situation(sid=i, n=60) for i in range(1, 3)])
        assignment = prep.split_folds(ds, k=1, seed=3, po_fraction=0.0)
        labels = []
        for sid, idx in assignment.retained[1]:
            labels.append(int(ds.situation_by_id(sid).labels[idx]))
        counts = np.bincount(labels, minlength=3)
        assert counts[0] == counts[1] == counts[2] == 20

    def test_fewer_situations_than_folds(self):
        ds = make_dataset([make_situation(sid=i, n=60) for i in range(3)])
        with pytest.raises(ValueError):
            prep.split_folds(ds, k=6, seed=0, po_fraction=0.0)

    def test_short_situations_excluded(self):
        short = make_situation(sid=99, n=20)  # 1.9 s << horizon
        ds = make_dataset([short] + [make_situation(sid=i, n=60) for i in range(6)])
        assignment = prep.split_folds(ds, k=6, seed=0, po_fraction=0.0)
        assert 99 not in assignment.ma_fold


def linear_future_situation(v=3.0, n=121, stride=10):
    sit = make_situation(n=n)
    back, ahead = 10, 60
    for i in range(back, n - ahead):
        if i % stride:
            continue
        k = np.arange(71)
        sit.futures[i] = np.column_stack([(k - 10) / 10.0, (k - 10) / 10.0 * v,
                                          np.zeros(71)])
    return sit


class TestExplode:
    def test_grid_sizes(self):
        h = prep.HorizonConfig()
        assert len(h.train_times) == 71
        assert len(h.test_times) == 51

    def test_sigma_from_percentiles(self):
        assert prep.TIME_SUBSAMPLE_SIGMA == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_factor_71_rows(self):
        sit = linear_future_situation(stride=5)
        n_starts = len(sit.futures)
        exploded, skipped = prep.explode_training([sit], FIDS, seed=0)
        assert skipped == 0
        assert exploded.n_rows == 71 * n_starts
        if n_starts >= 10:
            ten = exploded.n_rows // n_starts * 10
            assert ten == 710

    def test_linear_future_interpolates_exactly(self):
        v = 3.7
        sit = linear_future_situation(v=v)
        exploded, _ = prep.explode_training([sit], FIDS, seed=4)
        assert np.allclose(exploded.x, v * exploded.t, atol=1e-12)
        assert np.all(exploded.t >= -1.0 - 1e-12)
        assert np.all(exploded.t <= 6.0 + 1e-12)

    def test_feature_frames_preserved_bit_exactly(self):
        sit = linear_future_situation()
        exploded, _ = prep.explode_training([sit], FIDS, seed=0)
        for s in range(exploded.n_starts):
            i = int(round(exploded.start_t_rec[s] * 10))
            assert np.array_equal(exploded.start_features[s], sit.features[i])

    def test_test_grid_51_rows_and_zero_horizon(self):
        sit = linear_future_situation()
        exploded, _ = prep.explode_test([sit], FIDS)
        per_start = np.bincount(exploded.row_start)
        assert (per_start == 51).all()
        at0 = np.abs(exploded.t) < 1e-12
        assert np.allclose(exploded.x[at0], 0.0, atol=1e-12)
        assert np.allclose(exploded.y[at0], 0.0, atol=1e-12)

    def test_short_future_skipped_with_counter(self):
        sit = make_situation(n=121)
        sit.futures[30] = np.column_stack([np.arange(-10, 30) / 10.0,
                                           np.zeros(40), np.zeros(40)])
        exploded, skipped = prep.explode_training([sit], FIDS, seed=0)
        assert skipped == 1
        assert exploded.n_rows == 0


class TestMirroring:
    def make_exploded(self, p_lcl, p_lcr):
        n = len(p_lcl)
        from lanecast.core import ExplodedSet
        return ExplodedSet(
            feature_ids=["v_y"], start_features=np.zeros((1, 1)),
            start_situation=np.zeros(1, dtype=int), start_t_rec=np.zeros(1),
            start_labels=np.zeros(1, dtype=np.int8),
            row_start=np.zeros(n, dtype=int), t=np.zeros(n),
            x=np.zeros(n), y=np.zeros(n),
            p_lcl=np.asarray(p_lcl, dtype=float), p_lcr=np.asarray(p_lcr, dtype=float))

    def test_reflection_branches(self):
        es = self.make_exploded([0.2, 0.8, 0.5], [0.0, 1.0, 0.3])
        out = prep.mirror_probabilities(es)
        assert out.n_rows == 6
        assert np.allclose(out.p_lcl[3:], [-0.2, 1.2, 1.5])
        assert np.allclose(out.p_lcr[3:], [0.0, 1.0, -0.3])

    def test_rejects_out_of_range(self):
        es = self.make_exploded([1.2], [0.0])
        with pytest.raises(ValueError):
            prep.mirror_probabilities(es)

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=40))
    @settings(max_examples=50, deadline=None)
    def test_marginal_symmetry(self, ps):
        es = self.make_exploded(ps, ps)
        out = prep.mirror_probabilities(es)
        assert out.n_rows == 2 * len(ps)
        values = np.sort(out.p_lcl)
        # every below-half original has its negation, every above-half
        # original its reflection at one
        for p in ps:
            twin = -p if p < 0.5 else 2.0 - p
            assert np.any(np.isclose(values, twin))

    def test_row_count_doubles_and_fields_copied(self):
        es = self.make_exploded([0.1, 0.9], [0.4, 0.6])
        es.t = np.array([1.5, 2.5])
        es.y = np.array([0.3, -0.3])
        out = prep.mirror_probabilities(es)
        assert np.array_equal(out.t, [1.5, 2.5, 1.5, 2.5])
        assert np.array_equal(out.y, [0.3, -0.3, 0.3, -0.3])


class TestUndersampleStarts:
    def test_flw_reduced_to_mean_of_changes(self):
        from lanecast.core import ExplodedSet
        labels = np.array([1] * 50 + [0] * 10 + [2] * 20, dtype=np.int8)
        n = len(labels)
        es = ExplodedSet(
            feature_ids=["v_y"], start_features=np.zeros((n, 1)),
            start_situation=np.arange(n), start_t_rec=np.zeros(n),
            start_labels=labels, row_start=np.arange(n),
            t=np.zeros(n), x=np.zeros(n), y=np.zeros(n))
        out = prep.undersample_flw_starts(es, seed=1)
        kept = np.bincount(out.row_labels(), minlength=3)
        assert kept[0] == 10 and kept[2] == 20
        assert kept[1] == 15  # mean of 10 and 20

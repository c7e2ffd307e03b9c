import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lanecast import metrics
from lanecast.predict import ConditionalMixture


class TestBacc:
    def test_perfect_diagonal(self):
        assert metrics.bacc(np.diag([5, 9, 3])) == pytest.approx(1.0)

    def test_mean_of_recalls(self):
        confusion = np.array([[5, 5, 0], [0, 8, 0], [1, 0, 3]])
        assert metrics.bacc(confusion) == pytest.approx((0.5 + 1.0 + 0.75) / 3.0)

    def test_single_predicted_class(self):
        confusion = np.array([[10, 0, 0], [20, 0, 0], [30, 0, 0]])
        assert metrics.bacc(confusion) == pytest.approx(1.0 / 3.0)

    def test_empty_class_errors(self):
        with pytest.raises(metrics.MetricError):
            metrics.bacc(np.array([[1, 0, 0], [0, 0, 0], [0, 0, 1]]))

    def test_random_classifier_near_one_third(self):
        rng = np.random.default_rng(0)
        n = 30000
        y = rng.integers(3, size=n)
        pred = rng.integers(3, size=n)
        val = metrics.bacc(metrics.confusion_matrix(y, pred))
        sigma = math.sqrt((1 / 3) * (2 / 3) / (n / 3))
        assert abs(val - 1.0 / 3.0) < 3 * sigma


class TestRocAuc:
    def test_perfect_separation(self):
        scores = np.array([0.9, 0.8, 0.2, 0.1])
        labels = np.array([True, True, False, False])
        curve, auc = metrics.roc_auc(scores, labels)
        assert auc == pytest.approx(1.0)
        assert curve.fpr[0] == 0.0 and curve.tpr[0] == 0.0
        assert curve.fpr[-1] == 1.0 and curve.tpr[-1] == 1.0

    def test_all_ties_give_half(self):
        scores = np.full(10, 0.5)
        labels = np.array([True] * 5 + [False] * 5)
        _, auc = metrics.roc_auc(scores, labels)
        assert auc == pytest.approx(0.5)

    def test_three_of_four_pairs(self):
        scores = np.array([0.9, 0.4, 0.6, 0.2])
        labels = np.array([True, True, False, False])
        _, auc = metrics.roc_auc(scores, labels)
        assert auc == pytest.approx(0.75)

    def test_single_class_errors(self):
        with pytest.raises(metrics.MetricError):
            metrics.roc_auc(np.array([0.1, 0.2]), np.array([True, True]))

    def test_curve_monotone(self):
        rng = np.random.default_rng(1)
        scores = rng.normal(size=200)
        labels = rng.random(200) > 0.6
        curve, _ = metrics.roc_auc(scores, labels)
        assert np.all(np.diff(curve.fpr) >= 0)
        assert np.all(np.diff(curve.tpr) >= 0)

    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_complement_property(self, seed):
        rng = np.random.default_rng(seed)
        scores = rng.normal(size=60)
        labels = rng.random(60) > 0.5
        if labels.all() or not labels.any():
            return
        _, auc = metrics.roc_auc(scores, labels)
        _, auc_neg = metrics.roc_auc(-scores, labels)
        assert auc == pytest.approx(1.0 - auc_neg, abs=1e-12)


class TestWorkingPoint:
    def test_separable_zero_fpr_max_tpr(self):
        scores = np.array([0.9, 0.8, 0.2, 0.1])
        labels = np.array([True, True, False, False])
        curve, _ = metrics.roc_auc(scores, labels)
        thr = metrics.working_point(curve, 0.01)
        assert 0.2 < thr <= 0.8
        assert (scores >= thr).sum() == 2  # both positives, no negatives

    def test_unconstrained_returns_max_tpr(self):
        scores = np.array([0.9, 0.5, 0.4, 0.1])
        labels = np.array([True, False, True, False])
        curve, _ = metrics.roc_auc(scores, labels)
        thr = metrics.working_point(curve, 1.0)
        assert (np.asarray(scores) >= thr).all()

    def test_one_false_positive_in_hundred(self):
        rng = np.random.default_rng(2)
        neg = np.sort(rng.uniform(0, 1, 100))
        pos = np.array([2.0, 1.5, 0.99999])
        scores = np.concatenate([pos, neg])
        labels = np.array([True] * 3 + [False] * 100)
        curve, _ = metrics.roc_auc(scores, labels)
        thr = metrics.working_point(curve, 0.01)
        fp = (neg >= thr).sum()
        assert fp == 1
        # threshold just above the second-highest negative score
        assert neg[-2] < thr <= neg[-1]


class TestDetectionTimes:
    def trace(self, flags, t_cross=8.0):
        times = np.arange(0, 121) / 10.0
        detected = np.zeros(121, dtype=bool)
        for lo, hi in flags:
            detected[int(lo * 10):int(hi * 10) + 1] = True
        return times, detected, t_cross

    def test_flicker_case(self):
        # detected from t_cross-3.5 s on, off for 0.4 s at -3.0 s,
        # stable again from -2.6 s
        times, detected, t_cross = self.trace([(4.5, 4.9), (5.4, 12.0)])
        out = metrics.detection_times(times, detected, t_cross)
        assert out.tau_first == pytest.approx(3.5)
        assert out.tau_certain == pytest.approx(2.6)

    def test_never_detected(self):
        times, detected, t_cross = self.trace([])
        out = metrics.detection_times(times, detected, t_cross)
        assert out.tau_first == 0.0 and out.tau_certain == 0.0

    def test_cap_at_window(self):
        times, detected, t_cross = self.trace([(0.0, 12.0)])
        out = metrics.detection_times(times, detected, t_cross)
        assert out.tau_first == 5.0 and out.tau_certain == 5.0

    def test_short_trace_errors(self):
        times = np.arange(30) / 10.0
        with pytest.raises(metrics.MetricError):
            metrics.detection_times(times, np.ones(30, dtype=bool), t_cross=8.0)

    @given(st.lists(st.booleans(), min_size=51, max_size=51))
    @settings(max_examples=60, deadline=None)
    def test_certain_never_precedes_first(self, flags):
        times = np.arange(51) / 10.0
        out = metrics.detection_times(times, np.array(flags), t_cross=5.0)
        assert out.tau_certain <= out.tau_first + 1e-12


class TestLoglikShape:
    def test_unit_gaussian_at_target(self):
        n = 50
        mix = ConditionalMixture(weights=np.ones((n, 1)),
                                 means=np.zeros((n, 1)),
                                 variances=np.array([1.0]))
        vals = mix.logpdf(np.zeros(n))
        assert np.allclose(vals, -0.5 * math.log(2 * math.pi), atol=1e-12)

    def test_widening_drops_by_log_factor(self):
        n = 20
        tight = ConditionalMixture(np.ones((n, 1)), np.zeros((n, 1)), np.array([1.0]))
        wide = ConditionalMixture(np.ones((n, 1)), np.zeros((n, 1)), np.array([100.0]))
        drop = tight.logpdf(np.zeros(n)).mean() - wide.logpdf(np.zeros(n)).mean()
        assert drop == pytest.approx(math.log(10.0), abs=1e-12)

    def test_logsumexp_matches_direct_sum(self):
        mix = ConditionalMixture(weights=np.array([[0.3, 0.7]]),
                                 means=np.array([[-1.0, 2.0]]),
                                 variances=np.array([0.5, 2.0]))
        val = mix.logpdf(np.array([0.4]))[0]
        direct = 0.0
        for w, m, v in ((0.3, -1.0, 0.5), (0.7, 2.0, 2.0)):
            direct += w * math.exp(-0.5 * (0.4 - m) ** 2 / v) / math.sqrt(2 * math.pi * v)
        assert val == pytest.approx(math.log(direct), abs=1e-12)


class TestNormalizeLoglik:
    def test_reference_is_hundred(self):
        assert metrics.normalize_loglik(-7.547, -7.547) == 100.0

    def test_lateral_row(self):
        assert metrics.normalize_loglik(-7.608, -7.547) == 99.2

    def test_longitudinal_row(self):
        assert metrics.normalize_loglik(-13.273, -14.066) == 106.0

    def test_antitone_for_negative_reference(self):
        ref = -10.0
        values = [-14.0, -12.0, -10.0, -9.0]
        normalized = [metrics.normalize_loglik(v, ref) for v in values]
        assert normalized == sorted(normalized)


class TestSpatialErrors:
    def test_perfect_prediction_all_zero(self):
        t = np.tile([0.0, 5.0], 10)
        zeros = np.zeros(20)
        table = metrics.spatial_errors(t, zeros, zeros)
        assert np.all(table.median_x == 0.0)
        assert np.all(table.median_y == 0.0)

    def test_constant_offset(self):
        t = np.tile([1.0, 5.0], 50)
        err = np.full(100, 0.3)
        table = metrics.spatial_errors(t, err, err)
        assert np.allclose(table.median_y, 0.3)

    def test_median_of_two(self):
        t = np.array([5.0, 5.0])
        table = metrics.spatial_errors(t, np.array([0.0, 0.0]), np.array([0.1, 0.5]))
        assert table.at(5.0)["median_y"] == pytest.approx(0.3)

    def test_per_maneuver_slices(self):
        t = np.array([5.0] * 6)
        ey = np.array([0.1, 0.2, 0.3, 1.0, 2.0, 0.05])
        labels = np.array([0, 0, 0, 1, 1, 2])
        table = metrics.spatial_errors(t, np.zeros(6), ey, labels)
        assert table.by_maneuver["LCL"]["median_y"] == pytest.approx(0.2)
        assert table.by_maneuver["FLW"]["median_y"] == pytest.approx(1.5)
        assert table.by_maneuver["LCR"]["count"] == 1

    def test_negative_errors_rejected(self):
        with pytest.raises(metrics.MetricError):
            metrics.spatial_errors(np.array([1.0]), np.array([-0.1]), np.array([0.0]))


class TestEmitReport:
    def test_empty_bundle_writes_headers(self, tmp_path):
        from lanecast import report
        written = report.emit_report({}, str(tmp_path))
        assert len(written) == 8  # three ROC files plus five other outputs
        for path in written:
            assert (tmp_path / path.split("/")[-1]).exists()
        text = (tmp_path / "errors_by_t.csv").read_text()
        assert text.strip() == "strategy,dim,t,median,q1,q3"

    def test_roc_rows_monotone_and_auc_round_trip(self, tmp_path):
        from lanecast import report, storage
        rng = np.random.default_rng(3)
        scores = rng.normal(size=300)
        labels = rng.random(300) > 0.7
        curve, auc = metrics.roc_auc(scores, labels)
        bundle = {
            "roc": {"LCL": [{"classifier": "rf", "thresholds": curve.thresholds,
                             "fpr": curve.fpr, "tpr": curve.tpr}]},
            "metrics": {"auc": auc},
        }
        report.emit_report(bundle, str(tmp_path))
        import pandas as pd
        table = pd.read_csv(tmp_path / "roc_LCL.csv", float_precision="round_trip")
        assert np.all(np.diff(table["fpr"].to_numpy()) >= 0)
        reloaded = storage.load_json(str(tmp_path / "metrics.json"))
        assert reloaded["auc"] == auc

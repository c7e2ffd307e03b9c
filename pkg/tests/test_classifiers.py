import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lanecast import classifiers as clf
from lanecast import metrics
from lanecast.gmm import GmmModel


def gaussian_1d(fid, mean, var):
    return GmmModel(dims=[fid], weights=np.array([1.0]),
                    means=np.array([[mean]]), covariances=np.array([[[var]]]))


class TestScaler:
    def test_constant_feature_passes_through(self):
        X = np.column_stack([np.full(10, 3.0), np.arange(10.0)])
        with pytest.warns(UserWarning):
            scaler = clf.fit_scaler(X)
        out = clf.apply_scaler(scaler, X)
        assert np.array_equal(out[:, 0], X[:, 0])

    def test_scaled_column_standardized(self):
        rng = np.random.default_rng(0)
        X = rng.normal(5.0, 3.0, size=(500, 2))
        scaler = clf.fit_scaler(X)
        out = clf.apply_scaler(scaler, X)
        assert np.allclose(out.mean(axis=0), 0.0, atol=1e-9)
        assert np.allclose(out.std(axis=0), 1.0, atol=1e-9)

    def test_statistics_idempotent(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(200, 3))
        scaler = clf.fit_scaler(X)
        once = clf.apply_scaler(scaler, X)
        scaler2 = clf.fit_scaler(once)
        assert np.allclose(scaler2.mean, 0.0, atol=1e-9)
        assert np.allclose(scaler2.std, 1.0, atol=1e-9)


class TestGnb:
    def test_symmetric_closed_form(self):
        # class A ~ N(0,1), class B ~ N(2,1); the third class sits far
        # outside so its floored likelihood cannot disturb the split
        model = clf.GnbModel(
            feature_ids=["f"],
            class_feature_models=[[gaussian_1d("f", 0.0, 1.0)],
                                  [gaussian_1d("f", 2.0, 1.0)],
                                  [gaussian_1d("f", 1e8, 1.0)]])
        p = model.predict_proba(np.array([[1.0]]))[0]
        assert p[0] == pytest.approx(p[1], abs=1e-12)
        assert p[0] == pytest.approx(0.5, abs=1e-9)

    def test_fitted_recovers_symmetric_split(self):
        rng = np.random.default_rng(2)
        X = np.concatenate([rng.normal(0, 1, size=(4000, 1)),
                            rng.normal(2, 1, size=(4000, 1)),
                            rng.normal(10, 1, size=(4000, 1))])
        y = np.repeat([0, 1, 2], 4000)
        model = clf.fit_gnb(["f"], X, y, seed=0)
        p = model.predict_proba(np.array([[1.0]]))[0]
        assert p[0] == pytest.approx(p[1], abs=0.06)

    def test_simplex_output(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(300, 2))
        y = rng.integers(3, size=300)
        model = clf.fit_gnb(["a", "b"], X, y, seed=1)
        p = model.predict_proba(rng.normal(size=(50, 2)))
        assert np.all(p >= 0)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)

    def test_serialization_round_trip(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(120, 2))
        y = rng.integers(3, size=120)
        model = clf.fit_gnb(["a", "b"], X, y, seed=1)
        back = clf.model_from_dict(model.to_dict())
        probe = rng.normal(size=(10, 2))
        assert np.array_equal(back.predict_proba(probe), model.predict_proba(probe))


class TestRandomForest:
    def test_single_split_separates_threshold_classes(self):
        rng = np.random.default_rng(5)
        X = np.concatenate([rng.normal(-2, 0.3, size=(300, 1)),
                            rng.normal(2, 0.3, size=(300, 1))])
        y = np.concatenate([np.zeros(300, int), np.full(300, 2, int)])
        model = clf.fit_rf(["f"], X, y,
                           {"n_trees": 16, "max_splits": 1, "min_samples_split": 2},
                           seed=1)
        pred = np.argmax(model.predict_proba(X), axis=1)
        assert (pred == y).all()
        for tree in model.trees:
            assert (tree.feature >= 0).sum() == 1  # exactly one split

    def test_unanimous_vote_gives_probability_one(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([0, 0, 0])
        model = clf.fit_rf(["f"], X, y, {"n_trees": 8, "max_splits": 2,
                                         "min_samples_split": 2}, seed=0)
        p = model.predict_proba(np.array([[0.5]]))
        assert p[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_min_samples_split_respected(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(40, 2))
        y = rng.integers(3, size=40)
        model = clf.fit_rf(["a", "b"], X, y,
                           {"n_trees": 4, "max_splits": 50, "min_samples_split": 100},
                           seed=0)
        for tree in model.trees:
            assert (tree.feature >= 0).sum() == 0  # root stays a leaf

    def test_monotone_feature_transform_invariance(self):
        # thresholds sit on observed values, so strictly monotone
        # per-feature transforms relabel the split points and leave every
        # probability estimate unchanged
        rng = np.random.default_rng(7)
        X = rng.normal(size=(400, 3))
        y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int) * 2
        params = {"n_trees": 12, "max_splits": 8, "min_samples_split": 5}
        base = clf.fit_rf(["a", "b", "c"], X, y, params, seed=3)
        Xt = np.column_stack([np.exp(X[:, 0]), X[:, 1] ** 3, np.arctan(X[:, 2])])
        transformed = clf.fit_rf(["a", "b", "c"], Xt, y, params, seed=3)
        probe = rng.normal(size=(200, 3))
        probe_t = np.column_stack([np.exp(probe[:, 0]), probe[:, 1] ** 3,
                                   np.arctan(probe[:, 2])])
        assert np.allclose(base.predict_proba(X), transformed.predict_proba(Xt))
        assert np.allclose(base.predict_proba(probe), transformed.predict_proba(probe_t))

    def test_default_operating_point(self):
        assert clf.DEFAULT_RF_PARAMS == {"n_trees": 128, "max_splits": 16,
                                         "min_samples_split": 100}


class TestMlp:
    def test_default_operating_point(self):
        assert clf.DEFAULT_MLP_PARAMS == {"alpha": 0.02, "n_hidden": 27, "n_iter": 800}

    def test_gradient_check_against_central_differences(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(30, 4))
        onehot = np.zeros((30, 3))
        onehot[np.arange(30), rng.integers(3, size=30)] = 1.0
        params = [rng.normal(scale=0.3, size=(4, 5)), rng.normal(scale=0.1, size=5),
                  rng.normal(scale=0.3, size=(5, 3)), rng.normal(scale=0.1, size=3)]
        _, grads = clf.mlp_loss_and_grads(*params, X, onehot)
        h = 1e-5
        for pi, tensor in enumerate(params):
            flat = tensor.reshape(-1)
            for idx in range(0, flat.size, max(1, flat.size // 6)):
                flat[idx] += h
                lp, _ = clf.mlp_loss_and_grads(*params, X, onehot)
                flat[idx] -= 2 * h
                lm, _ = clf.mlp_loss_and_grads(*params, X, onehot)
                flat[idx] += h
                numeric = (lp - lm) / (2 * h)
                analytic = grads[pi].reshape(-1)[idx]
                rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-8)
                assert rel < 1e-4

    def test_learns_linear_separation(self):
        rng = np.random.default_rng(9)
        X = np.vstack([rng.normal(-1.5, 1, size=(400, 4)),
                       rng.normal(1.5, 1, size=(400, 4))])
        y = np.concatenate([np.zeros(400, int), np.full(400, 2, int)])
        y[::9] = 1
        model = clf.fit_mlp([f"f{i}" for i in range(4)], X, y,
                            {"n_iter": 400, "alpha": 0.1}, seed=1)
        pred = np.argmax(model.predict_proba(X), axis=1)
        assert (pred[y == 0] == 0).mean() > 0.9
        assert (pred[y == 2] == 2).mean() > 0.9

    def test_serialization_round_trip(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(60, 3))
        y = rng.integers(3, size=60)
        model = clf.fit_mlp(["a", "b", "c"], X, y, {"n_iter": 20}, seed=2)
        back = clf.model_from_dict(model.to_dict())
        probe = rng.normal(size=(9, 3))
        assert np.array_equal(back.predict_proba(probe), model.predict_proba(probe))


class TestPredictProba:
    def make_model(self):
        return clf.GnbModel(
            feature_ids=["a", "b"],
            class_feature_models=[
                [gaussian_1d("a", 0.0, 1.0), gaussian_1d("b", 0.0, 1.0)],
                [gaussian_1d("a", 1.0, 1.0), gaussian_1d("b", 1.0, 1.0)],
                [gaussian_1d("a", 2.0, 1.0), gaussian_1d("b", 2.0, 1.0)],
            ])

    def test_missing_feature_id(self):
        with pytest.raises(KeyError, match="missing feature"):
            clf.predict_proba(self.make_model(), {"a": 1.0})

    def test_dict_and_matrix_agree(self):
        model = self.make_model()
        via_dict = clf.predict_proba(model, {"a": 0.5, "b": 1.5})
        via_matrix = clf.predict_proba(model, np.array([[1.5, 0.5]]), ["b", "a"])
        assert np.allclose(via_dict, via_matrix[0])

    @given(st.floats(min_value=0.1, max_value=10.0))
    @settings(max_examples=25, deadline=None)
    def test_argmax_invariant_under_positive_rescaling(self, factor):
        scores = np.array([[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]])
        assert np.array_equal(np.argmax(scores, axis=1),
                              np.argmax(scores * factor, axis=1))


class TestGridSearch:
    def fold_data(self, seed=0):
        rng = np.random.default_rng(seed)
        folds = []
        for _ in range(3):
            X = np.vstack([rng.normal(-1, 1, size=(60, 2)),
                           rng.normal(1, 1, size=(60, 2))])
            y = np.concatenate([np.zeros(60, int), np.full(60, 2, int)])
            y[::5] = 1
            folds.append((X, y))
        return folds

    def test_singleton_grid_returned_directly(self):
        cell = clf.grid_search("rf", {"n_trees": [4], "max_splits": [2],
                                      "min_samples_split": [2]},
                               self.fold_data(), ["a", "b"])
        assert cell == {"n_trees": 4, "max_splits": 2, "min_samples_split": 2}

    def test_capable_cell_beats_underfit(self):
        rng = np.random.default_rng(3)
        # XOR-like cluster arrangement: separable only with enough
        # hidden units
        folds = []
        for _ in range(3):
            X = np.vstack([rng.normal([2, 2], 0.6, (60, 2)),
                           rng.normal([-2, -2], 0.6, (60, 2)),
                           rng.normal([2, -2], 0.6, (60, 2)),
                           rng.normal([-2, 2], 0.6, (60, 2))])
            y = np.concatenate([np.zeros(120, int), np.full(120, 2, int)])
            y[::13] = 1
            folds.append((X, y))
        grid = {"alpha": [1.0], "n_hidden": [1, 16], "n_iter": [3000]}
        best = clf.grid_search("mlp", grid, folds, ["a", "b"], seed=1)
        assert best["n_hidden"] == 16

    def test_tie_prefers_smaller_model(self):
        # constant features: every cell scores identically
        folds = [(np.ones((30, 2)), np.tile([0, 1, 2], 10)) for _ in range(2)]
        grid = {"n_trees": [2, 8], "max_splits": [2], "min_samples_split": [2]}
        best = clf.grid_search("rf", grid, folds, ["a", "b"], seed=0)
        assert best["n_trees"] == 2

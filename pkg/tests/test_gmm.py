import math

import numpy as np
import pytest

from lanecast.gmm import GmmFitError, GmmModel, fit_gmm


class TestFitAutoComponents:
    def test_unimodal_collapses_to_one_component(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(10000, 1))
        model = fit_gmm(X, ["z"], k_max=5, seed=1)
        assert model.k_eff == 1
        # sample-moment oracle
        assert abs(model.means[0, 0]) < 0.05
        assert abs(model.covariances[0, 0, 0] - 1.0) < 0.05
        assert abs(model.means[0, 0] - X.mean()) < 0.01
        assert abs(model.covariances[0, 0, 0] - X.var()) < 0.01

    def test_two_separated_clusters(self):
        rng = np.random.default_rng(3)
        X = np.concatenate([rng.normal(-10, 1, size=(2000, 1)),
                            rng.normal(10, 1, size=(2000, 1))])
        model = fit_gmm(X, ["z"], k_max=5, seed=1)
        assert model.k_eff == 2
        means = np.sort(model.means[:, 0])
        assert abs(means[0] + 10) < 0.2 and abs(means[1] - 10) < 0.2
        # responsibilities essentially one-hot by nearest mean
        comp = model.component_logpdfs(X) + np.log(model.weights)
        resp = np.exp(comp - comp.max(axis=1, keepdims=True))
        resp /= resp.sum(axis=1, keepdims=True)
        nearest = np.argmin(np.abs(X - model.means[:, 0][None]), axis=1)
        agree = (np.argmax(resp, axis=1) == nearest).mean()
        assert agree > 0.999
        assert np.max(np.minimum(resp[:, 0], resp[:, 1])) < 1e-6

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(9)
        for seed in range(3):
            X = rng.normal(size=(300, 2))
            model = fit_gmm(X, ["a", "b"], k_max=4, seed=seed, n_init=1)
            assert abs(model.weights.sum() - 1.0) <= 1e-12
            model.validate()


class TestLogpdf:
    def test_standard_normal_at_zero(self):
        g = GmmModel(dims=["z"], weights=np.array([1.0]),
                     means=np.array([[0.0]]), covariances=np.array([[[1.0]]]))
        assert g.logpdf(np.array([0.0])) == pytest.approx(-0.5 * math.log(2 * math.pi),
                                                          abs=1e-12)

    def test_symmetric_mixture_equal_responsibilities(self):
        g = GmmModel(dims=["z"], weights=np.array([0.5, 0.5]),
                     means=np.array([[-1.0], [1.0]]),
                     covariances=np.array([[[1.0]], [[1.0]]]))
        comp = g.component_logpdfs(np.array([[0.0]]))[0]
        assert comp[0] == pytest.approx(comp[1], abs=1e-12)

    def test_bounded_by_mode_density(self):
        g = GmmModel(dims=["z"], weights=np.array([0.3, 0.7]),
                     means=np.array([[-0.5], [1.5]]),
                     covariances=np.array([[[0.8]], [[1.3]]]))
        grid = np.linspace(-6, 8, 4001)[:, None]
        vals = g.logpdf(grid)
        mode = vals.max()
        probe = g.logpdf(np.array([[0.123], [2.5], [-3.0]]))
        assert np.all(probe <= mode + 1e-12)
        assert np.isfinite(vals).all()

    def test_dimension_mismatch(self):
        g = GmmModel(dims=["a", "b"], weights=np.array([1.0]),
                     means=np.array([[0.0, 0.0]]),
                     covariances=np.array([[[1.0, 0.0], [0.0, 1.0]]]))
        with pytest.raises(ValueError):
            g.logpdf(np.array([0.0]))


class TestFitContracts:
    def test_empty_input(self):
        with pytest.raises(GmmFitError):
            fit_gmm(np.empty((0, 1)), ["z"])

    def test_non_finite_input(self):
        with pytest.raises(GmmFitError):
            fit_gmm(np.array([[1.0], [np.nan]]), ["z"])

    def test_objective_monotone_within_stages(self):
        for trial in range(12):
            rng = np.random.default_rng(trial)
            X = np.concatenate([rng.normal(0, 1, size=(150, 2)),
                                rng.normal(3, 0.5, size=(100, 2))])
            for mode in ("variational", "em"):
                model = fit_gmm(X, ["a", "b"], k_max=4, seed=trial, mode=mode, n_init=1)
                for stage in model.fit_info["objective_stages"]:
                    diffs = np.diff(stage)
                    if len(diffs):
                        assert diffs.min() >= -1e-9

    def test_em_mode_keeps_component_count(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(500, 1))
        model = fit_gmm(X, ["z"], k_max=3, seed=0, mode="em", n_init=1)
        assert model.k_eff >= 1
        assert model.fit_info["mode"] == "em"

    def test_restart_selection_by_loglik(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(400, 1))
        model = fit_gmm(X, ["z"], k_max=2, seed=5, n_init=3)
        logliks = model.fit_info["restart_logliks"]
        best = float(np.mean(model.logpdf(X)))
        assert best == pytest.approx(max(logliks), abs=1e-9)

    def test_serialization_round_trip(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(300, 2))
        model = fit_gmm(X, ["a", "b"], k_max=3, seed=1, n_init=1)
        back = GmmModel.from_dict(model.to_dict())
        assert back.dims == model.dims
        assert np.array_equal(back.weights, model.weights)
        assert np.array_equal(back.means, model.means)
        assert np.array_equal(back.covariances, model.covariances)

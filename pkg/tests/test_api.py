import numpy as np
import pytest
from sklearn.base import clone

import matchboot as mb


class TestEstimatorConventions:
    def test_matching_ate_params_round_trip(self):
        est = mb.MatchingATE(n_matches=3, method="rank", regressor_params={"k": 4})
        params = est.get_params()
        assert params["n_matches"] == 3
        assert params["method"] == "rank"
        rebuilt = mb.MatchingATE(**params)
        assert rebuilt.get_params() == params

    def test_matching_ate_clone_unfitted(self, toy):
        est = mb.MatchingATE(n_matches=1).fit(toy.x, toy.d, toy.y)
        fresh = clone(est)
        assert fresh.get_params() == est.get_params()
        assert not hasattr(fresh, "tau_")

    def test_set_params_chains(self):
        est = mb.MatchingATE().set_params(n_matches=5, engine="brute")
        assert est.n_matches == 5
        assert est.engine == "brute"

    def test_fitted_attributes(self, toy):
        est = mb.MatchingATE(n_matches=1).fit(toy.x, toy.d, toy.y)
        for name in (
            "tau_",
            "tau_bc_",
            "tau_reg_",
            "n_features_in_",
            "report_",
            "dataset_",
            "match_",
            "regressors_",
        ):
            assert hasattr(est, name)
        assert est.n_features_in_ == 1

    def test_knn_regressor_sklearn_surface(self):
        reg = mb.KNNRegressor(k=3)
        assert reg.get_params() == {"k": 3}
        assert clone(reg).get_params() == {"k": 3}
        rng = np.random.default_rng(0)
        x, y = rng.random((20, 2)), rng.random(20)
        reg.fit(x, y)
        assert reg.n_features_in_ == 2
        assert reg.predict(x[:5]).shape == (5,)

    def test_polynomial_regressor_sklearn_surface(self):
        reg = mb.PolynomialRegressor(degree=2)
        assert reg.get_params()["degree"] == 2
        assert "ridge" in reg.get_params()
        rng = np.random.default_rng(1)
        x, y = rng.random((30, 2)), rng.random(30)
        assert clone(reg).fit(x, y).predict(x).shape == (30,)

    def test_oracle_regressor_sklearn_surface(self):
        fn = lambda x: x[:, 0] * 2.0
        reg = mb.OracleRegressor(fn=fn)
        assert reg.get_params() == {"fn": fn}
        got = clone(reg).fit().predict(np.array([[1.0], [2.0]]))
        assert got.tolist() == [2.0, 4.0]


class TestErrors:
    def test_input_error_is_value_error(self):
        assert issubclass(mb.InputError, ValueError)

    def test_predict_before_fit(self):
        with pytest.raises(Exception):
            mb.KNNRegressor(k=2).predict(np.zeros((3, 1)))

import math

import numpy as np
import pytest

import matchboot as mb
from matchboot.regress import KNNRegressor, OracleRegressor, PolynomialRegressor


class TestDefaultK:
    def test_formula(self):
        assert mb.default_knn_k(100, 1) == math.ceil(100 ** (4 / 5))
        assert mb.default_knn_k(100, 2) == math.ceil(100 ** (4 / 6))
        assert mb.default_knn_k(7, 3) == math.ceil(7 ** (4 / 7))


class TestKNNRegressor:
    def test_k_equal_n_predicts_mean(self):
        rng = np.random.default_rng(0)
        x = rng.random((15, 2))
        y = rng.standard_normal(15)
        model = KNNRegressor(k=15).fit(x, y)
        pred = model.predict(rng.random((6, 2)))
        assert pred == pytest.approx(np.full(6, y.mean()), abs=1e-12)

    def test_k_one_interpolates_training_points(self):
        rng = np.random.default_rng(1)
        x = rng.random((10, 1))
        y = rng.standard_normal(10)
        model = KNNRegressor(k=1).fit(x, y)
        assert model.predict(x) == pytest.approx(y, abs=0)

    def test_default_k_resolved_on_fit(self):
        x = np.linspace(0, 1, 30).reshape(-1, 1)
        model = KNNRegressor().fit(x, np.zeros(30))
        assert model.k_ == mb.default_knn_k(30, 1)

    def test_too_few_units(self):
        with pytest.raises(mb.InputError, match="at least"):
            KNNRegressor(k=5).fit(np.zeros((3, 1)), np.zeros(3))


class TestPolynomialRegressor:
    def test_degree_one_exact_on_linear(self):
        rng = np.random.default_rng(2)
        x = rng.random((40, 2))
        y = 1.5 + 2.0 * x[:, 0] - 0.5 * x[:, 1]
        model = PolynomialRegressor(degree=1).fit(x, y)
        grid = rng.random((25, 2))
        truth = 1.5 + 2.0 * grid[:, 0] - 0.5 * grid[:, 1]
        assert model.predict(grid) == pytest.approx(truth, abs=1e-9)

    def test_degree_two_exact_on_quadratic(self):
        rng = np.random.default_rng(3)
        x = rng.random((60, 2))
        y = x[:, 0] ** 2 + x[:, 0] * x[:, 1] - x[:, 1]
        model = PolynomialRegressor(degree=2).fit(x, y)
        grid = rng.random((20, 2))
        truth = grid[:, 0] ** 2 + grid[:, 0] * grid[:, 1] - grid[:, 1]
        assert model.predict(grid) == pytest.approx(truth, abs=1e-8)

    def test_insufficient_rows(self):
        with pytest.raises(mb.InputError, match="basis"):
            PolynomialRegressor(degree=2).fit(np.zeros((3, 2)), np.zeros(3))


class TestOracleRegressor:
    def test_wraps_surface(self):
        model = OracleRegressor(fn=lambda x: x[:, 0] ** 2).fit()
        got = model.predict(np.array([[2.0], [3.0]]))
        assert got.tolist() == [4.0, 9.0]

    def test_missing_surface(self):
        with pytest.raises(mb.InputError):
            OracleRegressor().fit()


class TestPair:
    def test_arms_fit_on_own_rows(self):
        rng = np.random.default_rng(4)
        n = 30
        x = rng.random((n, 1))
        d = np.array([0, 1] * 15)
        y = np.where(d == 1, 10.0, -10.0) + rng.standard_normal(n) * 0.01
        rp = mb.fit_pair_coords(x, x, d, y, kind="knn", hyperparams={"k": 15})
        # k equals each arm size, so predictions are arm means
        assert rp.predict(1, x) == pytest.approx(np.full(n, y[d == 1].mean()), abs=1e-12)
        assert rp.predict(0, x) == pytest.approx(np.full(n, y[d == 0].mean()), abs=1e-12)

    def test_arm_label_validated(self):
        rng = np.random.default_rng(5)
        x = rng.random((10, 1))
        rp = mb.fit_pair_coords(x, x, np.array([0, 1] * 5), rng.standard_normal(10))
        with pytest.raises(mb.InputError):
            rp.predict(2, x)

    def test_empty_arm_rejected(self):
        x = np.random.default_rng(6).random((8, 1))
        with pytest.raises(mb.InputError, match="arm 1"):
            mb.fit_pair_coords(x, x, np.zeros(8, dtype=int), np.zeros(8))

    def test_unknown_kind(self):
        x = np.zeros((4, 1))
        with pytest.raises(mb.InputError, match="unknown regressor"):
            mb.fit_pair_coords(x, x, np.array([0, 1, 0, 1]), np.zeros(4), kind="forest")

    def test_oracle_kind_needs_surfaces(self):
        x = np.zeros((4, 1))
        with pytest.raises(mb.InputError, match="oracle"):
            mb.fit_pair_coords(x, x, np.array([0, 1, 0, 1]), np.zeros(4), kind="oracle")

    def test_extrapolation_fraction(self):
        x = np.linspace(0.0, 1.0, 20).reshape(-1, 1)
        d = np.array([0, 1] * 10)
        rp = mb.fit_pair_coords(x, x, d, np.zeros(20), kind="knn", hyperparams={"k": 2})
        probe = np.array([[0.5], [2.0], [-1.0], [0.9]])
        assert rp.extrapolation_fraction(probe) == pytest.approx(0.5)
        # each arm's extreme training point sits outside the other arm's box
        assert rp.extrapolation_fraction(x) == pytest.approx(2 / 20)

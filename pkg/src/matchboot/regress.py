"""Per-arm outcome regression: knn means, polynomial ridge, and oracles.

The two arms are always fit in isolation; a RegressorPair bundles the
fitted surfaces. All regressors accept coordinates in whatever space
the caller matches in (raw covariates, rank transforms, or a general
coordinate map).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .data import Dataset, InputError
from .matching import knn_among

RIDGE_DAMPING = 1e-10


def default_knn_k(n_arm: int, m: int) -> int:
    """Default neighbor count ceil(n^(4/(4+m))) for an arm of size n."""
    return int(math.ceil(n_arm ** (4.0 / (4.0 + m))))


def _as_points(x, m: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if m is not None and m > 1 and x.shape[0] == m:
            x = x.reshape(1, m)
        else:
            x = x.reshape(-1, 1)
    if m is not None and x.shape[1] != m:
        raise InputError(f"expected {m} coordinate columns, got {x.shape[1]}")
    return x


class KNNRegressor(BaseEstimator, RegressorMixin):
    """Nearest-neighbor mean regression with deterministic tie handling.

    k=None resolves to ceil(n^(4/(4+m))) at fit time.
    """

    def __init__(self, k: int | None = None):
        self.k = k

    def fit(self, X, y):
        X = _as_points(X)
        y = np.asarray(y, dtype=np.float64)
        n, m = X.shape
        k = default_knn_k(n, m) if self.k is None else int(self.k)
        if n < max(2, k):
            raise InputError(
                f"knn regression needs at least max(2, k)={max(2, k)} units per arm, got {n}"
            )
        self.k_ = k
        self.x_train_ = X
        self.y_train_ = y
        self.n_features_in_ = m
        self.box_low_ = X.min(axis=0)
        self.box_high_ = X.max(axis=0)
        return self

    def predict(self, X):
        X = _as_points(X, self.x_train_.shape[1])
        idx, _ = knn_among(self.x_train_, X, self.k_)
        return self.y_train_[idx].mean(axis=1)


class PolynomialRegressor(BaseEstimator, RegressorMixin):
    """Total-degree polynomial least squares with fixed ridge damping."""

    def __init__(self, degree: int = 1, ridge: float = RIDGE_DAMPING):
        self.degree = degree
        self.ridge = ridge

    def _basis(self, X: np.ndarray) -> np.ndarray:
        n, m = X.shape
        cols = [np.ones(n)]
        for deg in range(1, self.degree + 1):
            for combo in combinations_with_replacement(range(m), deg):
                col = np.ones(n)
                for j in combo:
                    col = col * X[:, j]
                cols.append(col)
        return np.column_stack(cols)

    def fit(self, X, y):
        X = _as_points(X)
        y = np.asarray(y, dtype=np.float64)
        if self.degree < 0:
            raise InputError("polynomial degree must be >= 0")
        basis = self._basis(X)
        n, n_terms = basis.shape
        if n < n_terms:
            raise InputError(
                f"insufficient units for degree: {n} rows < {n_terms} basis terms"
            )
        gram = basis.T @ basis + self.ridge * np.eye(n_terms)
        self.coef_ = np.linalg.solve(gram, basis.T @ y)
        self.n_features_in_ = X.shape[1]
        self.box_low_ = X.min(axis=0)
        self.box_high_ = X.max(axis=0)
        return self

    def predict(self, X):
        X = _as_points(X, self.n_features_in_)
        return self._basis(X) @ self.coef_


class OracleRegressor(BaseEstimator, RegressorMixin):
    """Wraps a known outcome surface; fit is a no-op.

    The callable must map an (n, m) array to an (n,) array.
    """

    def __init__(self, fn=None):
        self.fn = fn

    def fit(self, X=None, y=None):
        if self.fn is None:
            raise InputError("oracle regressor needs a surface callable")
        return self

    def predict(self, X):
        X = _as_points(X)
        out = np.asarray(self.fn(X), dtype=np.float64)
        return out.reshape(X.shape[0])


_KINDS = ("knn", "polynomial", "oracle")


@dataclass
class RegressorPair:
    """Fitted outcome surfaces for both arms."""

    mu0: BaseEstimator
    mu1: BaseEstimator
    kind: str
    hyperparams: dict = field(default_factory=dict)

    def predict(self, omega: int, x) -> np.ndarray:
        if omega not in (0, 1):
            raise InputError(f"arm label must be 0 or 1, got {omega!r}")
        model = self.mu1 if omega == 1 else self.mu0
        return model.predict(x)

    def extrapolation_fraction(self, x) -> float:
        """Fraction of rows outside either arm's training bounding box."""
        x = _as_points(x)
        outside = np.zeros(x.shape[0], dtype=bool)
        for model in (self.mu0, self.mu1):
            low = getattr(model, "box_low_", None)
            if low is None:
                continue
            high = model.box_high_
            outside |= ((x < low) | (x > high)).any(axis=1)
        return float(outside.mean()) if x.shape[0] else 0.0


def _make_single(kind: str, hyperparams: dict, omega: int) -> BaseEstimator:
    if kind == "knn":
        return KNNRegressor(k=hyperparams.get("k"))
    if kind == "polynomial":
        return PolynomialRegressor(
            degree=hyperparams.get("degree", 1),
            ridge=hyperparams.get("ridge", RIDGE_DAMPING),
        )
    if kind == "oracle":
        fn = hyperparams.get("mu1_fn") if omega == 1 else hyperparams.get("mu0_fn")
        if fn is None:
            raise InputError("oracle kind needs mu0_fn and mu1_fn hyperparams")
        return OracleRegressor(fn=fn)
    raise InputError(f"unknown regressor kind {kind!r}; expected one of {_KINDS}")


def fit_pair_coords(z0, z1, d, y, kind: str = "knn", hyperparams: dict | None = None) -> RegressorPair:
    """Fit arm surfaces on per-arm coordinates.

    Arm w trains on rows of z_w with d == w; z0 and z1 coincide except
    under arm-specific coordinate maps.
    """
    hyperparams = dict(hyperparams or {})
    d = np.asarray(d)
    y = np.asarray(y, dtype=np.float64)
    models = []
    for omega, z in ((0, _as_points(z0)), (1, _as_points(z1))):
        mask = d == omega
        model = _make_single(kind, hyperparams, omega)
        if kind == "oracle":
            model.fit()
        else:
            if not mask.any():
                raise InputError(f"arm {omega} is empty; cannot fit a regressor")
            model.fit(z[mask], y[mask])
        models.append(model)
    return RegressorPair(mu0=models[0], mu1=models[1], kind=kind, hyperparams=hyperparams)


def fit_pair(ds: Dataset, kind: str = "knn", hyperparams: dict | None = None) -> RegressorPair:
    """Fit arm surfaces on raw covariates."""
    return fit_pair_coords(ds.x, ds.x, ds.d, ds.y, kind=kind, hyperparams=hyperparams)

"""Cross-group M-nearest-neighbor matching with deterministic tie handling.

Both search paths (k-d tree for dimension <= 8, exhaustive otherwise)
produce identical results: distances are recomputed with one shared
float kernel and ties are always broken toward the smaller unit index.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .data import Dataset, InputError

KDTREE_MAX_DIM = 8
# relative slack treated as a potential distance tie; wide enough to absorb
# any float discrepancy between the tree's metric kernel and the shared one
_TIE_RTOL = 1e-9


def worker_count() -> int:
    """Thread cap for neighbor queries; ATE_MATCH_THREADS overrides."""
    env = os.environ.get("ATE_MATCH_THREADS")
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise InputError(f"ATE_MATCH_THREADS must be an integer, got {env!r}") from None
        if workers < 1:
            raise InputError("ATE_MATCH_THREADS must be >= 1")
        return workers
    return -1


@dataclass(frozen=True)
class MatchResult:
    """Matching structure for one dataset and one match count M.

    Attributes:
        M: matches per unit.
        nn_idx: (n, M) global indices of each unit's matches in the
            opposite arm, ordered by distance then index.
        nn_dist: (n, M) matching-space distances to those matches.
        k_count: (n,) matched-times counts: how many opposite-arm units
            include unit i among their M matches.
        radius: (n,) distance to the M-th match (= nn_dist[:, M-1]).
    """

    M: int
    nn_idx: np.ndarray
    nn_dist: np.ndarray
    k_count: np.ndarray
    radius: np.ndarray


def _pair_dist(queries: np.ndarray, cand: np.ndarray) -> np.ndarray:
    # the one Euclidean kernel every code path shares
    diff = queries[:, None, :] - cand[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _gather_dist(queries: np.ndarray, cand: np.ndarray, idx: np.ndarray) -> np.ndarray:
    nq, k = idx.shape
    diff = queries[:, None, :] - cand[idx.ravel()].reshape(nq, k, -1)
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _knn_brute(cand: np.ndarray, queries: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    dist = _pair_dist(queries, cand)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(dist, order, axis=1)


def _resort_rows(idx: np.ndarray, dist: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # re-sort each row by (distance, index) in one lexsort call
    nq, k = idx.shape
    rows = np.repeat(np.arange(nq), k)
    order = np.lexsort((idx.ravel(), dist.ravel(), rows)).reshape(nq, k)
    order -= np.arange(nq)[:, None] * k
    return np.take_along_axis(idx, order, 1), np.take_along_axis(dist, order, 1)


def _knn_kdtree(cand: np.ndarray, queries: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    nc = cand.shape[0]
    nq = queries.shape[0]
    tree = cKDTree(cand)
    kk = min(k + 1, nc)
    tree_dist, tree_idx = tree.query(queries, k=kk, workers=worker_count())
    tree_dist = np.asarray(tree_dist, dtype=np.float64).reshape(nq, kk)
    tree_idx = np.asarray(tree_idx).reshape(nq, kk)

    # a row needs exact handling when any adjacent distances nearly tie
    gaps = tree_dist[:, 1:] - tree_dist[:, :-1]
    tied = (gaps <= _TIE_RTOL * tree_dist[:, 1:]).any(axis=1)

    idx = tree_idx[:, :k].astype(np.int64, copy=True)
    dist = _gather_dist(queries, cand, idx)
    for i in np.flatnonzero(tied):
        ball = tree.query_ball_point(queries[i], tree_dist[i, k - 1] * (1.0 + 2.0 * _TIE_RTOL))
        ball = np.asarray(sorted(ball), dtype=np.int64)
        bd = _pair_dist(queries[i : i + 1], cand[ball])[0]
        take = np.lexsort((ball, bd))[:k]
        idx[i] = ball[take]
        dist[i] = bd[take]
    return _resort_rows(idx, dist)


def knn_among(
    cand: np.ndarray,
    queries: np.ndarray,
    k: int,
    engine: str = "auto",
) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest candidates for each query row.

    Returns (idx, dist): (nq, k) candidate-local indices ordered by
    distance with ties broken toward the smaller index, and matching
    distances. ``engine`` is one of "auto", "kdtree", "brute".
    """
    cand = np.ascontiguousarray(cand, dtype=np.float64)
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    if cand.ndim != 2 or queries.ndim != 2 or cand.shape[1] != queries.shape[1]:
        raise InputError("candidate and query coordinates must be 2-D with equal width")
    nc = cand.shape[0]
    if not 1 <= k <= nc:
        raise InputError(f"k={k} outside [1, {nc}] candidates")
    if engine == "auto":
        engine = "kdtree" if cand.shape[1] <= KDTREE_MAX_DIM else "brute"
    if engine == "brute":
        return _knn_brute(cand, queries, k)
    if engine == "kdtree":
        return _knn_kdtree(cand, queries, k)
    raise InputError(f"unknown engine {engine!r}")


def match_mnn_coords(
    z0: np.ndarray,
    z1: np.ndarray,
    d: np.ndarray,
    M: int,
    engine: str = "auto",
) -> MatchResult:
    """Match every unit to M nearest opposite-arm units.

    ``z_w`` holds the coordinates used when the candidate arm is ``w``
    (identical arrays for plain covariate or rank matching). Treated
    units are matched among controls using z0; controls among treated
    using z1.
    """
    d = np.asarray(d)
    z0 = np.ascontiguousarray(z0, dtype=np.float64)
    z1 = np.ascontiguousarray(z1, dtype=np.float64)
    n = d.shape[0]
    if z0.shape[0] != n or z1.shape[0] != n:
        raise InputError("coordinate arrays must have one row per unit")
    if not (isinstance(M, (int, np.integer)) and M >= 1):
        raise InputError(f"M must be a positive integer, got {M!r}")
    M = int(M)
    treated = np.flatnonzero(d == 1)
    control = np.flatnonzero(d == 0)
    smallest = min(len(treated), len(control))
    if M > smallest:
        raise InputError(
            f"insufficient opposite-group units: M={M} exceeds the smaller arm size {smallest}"
        )
    nn_idx = np.empty((n, M), dtype=np.int64)
    nn_dist = np.empty((n, M), dtype=np.float64)
    for target, z in ((0, z0), (1, z1)):
        cand_units = control if target == 0 else treated
        query_units = treated if target == 0 else control
        local_idx, dist = knn_among(z[cand_units], z[query_units], M, engine=engine)
        nn_idx[query_units] = cand_units[local_idx]
        nn_dist[query_units] = dist
    k_count = np.bincount(nn_idx.ravel(), minlength=n).astype(np.int64)
    radius = nn_dist[:, M - 1].copy()
    for arr in (nn_idx, nn_dist, k_count, radius):
        arr.setflags(write=False)
    return MatchResult(M=M, nn_idx=nn_idx, nn_dist=nn_dist, k_count=k_count, radius=radius)


def match_mnn(ds: Dataset, M: int, engine: str = "auto") -> MatchResult:
    """Match on raw covariates (Euclidean metric)."""
    return match_mnn_coords(ds.x, ds.x, ds.d, M, engine=engine)


def stabilization_radius(ds: Dataset, mr: MatchResult) -> np.ndarray:
    """Per-unit locality scale: distance to the M-th opposite-arm match."""
    if mr.radius.shape[0] != ds.n:
        raise InputError("match result does not belong to this dataset")
    return mr.radius


def empirical_radius_tail(ds: Dataset, M: int, r_grid) -> np.ndarray:
    """Empirical survival P(radius >= r) over the grid."""
    r_grid = np.asarray(r_grid, dtype=np.float64)
    radius = match_mnn(ds, M).radius
    return (radius[None, :] >= r_grid[:, None]).mean(axis=1)


def unit_ball_volume(m: int) -> float:
    """Lebesgue volume of the unit ball in R^m."""
    if m < 1:
        raise InputError("dimension must be >= 1")
    return math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)


def radius_tail_bound(n, M, r, m, g_min, eta) -> np.ndarray:
    """Exponential envelope for the matching-radius tail.

    e^2 * exp(-V_m * g_min * eta * n * r^m / max(2M, 8)); valid for
    n >= 9 and any positive radius.
    """
    r = np.asarray(r, dtype=np.float64)
    divisor = max(2 * M, 8)
    expo = -unit_ball_volume(m) * g_min * eta * n * np.power(r, m) / divisor
    return np.exp(2.0) * np.exp(expo)

"""Closed-form non-asymptotic bound formulas for matching estimators.

Every unnamed universal constant is set to 1, so outputs are rate
values, not literal probability bounds. Side conditions are evaluated
and surfaced as flags rather than errors. Covers the Gaussian
approximation bounds for covariate matching (full and simplified),
transformed-coordinate matching (general and CDF specialization), the
bootstrap approximation bound with its conditional-variance floor, and
the dimension-one match-count optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, InputError


@dataclass(frozen=True)
class BoundInputs:
    """Quantities the bound formulas consume.

    gamma lists the regularity exponents used by the middle bound term,
    outer entries first (l = 1, 2, ...); None means 0.5 for each needed
    entry. phi_err1 and phi_err2 are the two transform-error
    expectations of the transformed-coordinate bounds; M_l, M_u_p, E1,
    E2 feed the bootstrap variance floor.
    """

    n: int
    M: int
    eta: float
    p: float = 1.0
    m: int = 1
    m_prime: int | None = None
    r0: float = 1.0
    gamma: tuple[float, ...] | None = None
    phi_err1: float = 0.0
    phi_err2: float = 0.0
    M_l: float = 1.0
    M_u_p: float = 1.0
    E1: float = 0.0
    E2: float = 0.0

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise InputError(f"n must be an integer >= 2, got {self.n!r}")
        if not isinstance(self.M, (int, np.integer)) or self.M < 1:
            raise InputError(f"M must be a positive integer, got {self.M!r}")
        if not 0.0 < self.eta <= 0.5:
            raise InputError(f"eta must lie in (0, 1/2], got {self.eta!r}")
        if not 0.0 < self.p <= 1.0:
            raise InputError(f"p must lie in (0, 1], got {self.p!r}")
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise InputError(f"m must be a positive integer, got {self.m!r}")
        if self.m_prime is not None and (
            not isinstance(self.m_prime, (int, np.integer)) or self.m_prime < 1
        ):
            raise InputError(f"m_prime must be a positive integer, got {self.m_prime!r}")
        if not self.r0 > 0.0 or not math.isfinite(self.r0):
            raise InputError(f"r0 must be positive and finite, got {self.r0!r}")
        if self.gamma is not None:
            gam = tuple(float(g) for g in self.gamma)
            if any(not g > 0.0 or not math.isfinite(g) for g in gam):
                raise InputError("gamma entries must be positive and finite")
            object.__setattr__(self, "gamma", gam)
        for name in ("phi_err1", "phi_err2", "M_l", "M_u_p", "E1", "E2"):
            v = getattr(self, name)
            if not v >= 0.0 or not math.isfinite(v):
                raise InputError(f"{name} must be non-negative and finite, got {v!r}")

    @property
    def mp(self) -> int:
        """Transformed dimension; defaults to m."""
        return self.m if self.m_prime is None else self.m_prime

    @property
    def alpha(self) -> float:
        return self.p / (16.0 + 2.0 * self.p)

    @property
    def zeta(self) -> float:
        return self.p / (40.0 + 10.0 * self.p)


@dataclass(frozen=True)
class BoundReport:
    """Evaluated bound terms; total is always the sum of b_terms."""

    delta_h1: float
    delta_h2: float
    delta_h3: float
    b_terms: tuple[float, ...]
    total: float
    regime_flags: dict


LN2 = math.log(2.0)


def _exp_sum(bi: BoundInputs) -> float:
    # second exponent is maximized (at 0) when r0*n*eta equals M, so no overflow
    x = bi.r0 * bi.n * bi.eta
    first = math.exp(-(1.0 - LN2) * bi.M)
    second = math.exp(bi.M - x - bi.M * math.log(bi.M) + bi.M * math.log(x))
    return first + second


def eval_delta_terms(bi: BoundInputs, dim: int | None = None) -> tuple[float, float, float]:
    """The three matching-quality tail quantities.

    dim is the dimension of the matching coordinates (m by default; the
    transformed-coordinate bounds evaluate them at m').
    """
    d = bi.m if dim is None else dim
    n, M, eta = bi.n, bi.M, bi.eta
    es = _exp_sum(bi)
    delta_h1 = 1.0 / (n**2 * eta**4) + (n / (M * eta)) ** 2 * es**2
    delta_h2 = (M / (n * eta)) ** (1.0 / d) + 1.0 / (n * eta) + (n / M) * es
    delta_h3 = (n / (M * eta)) ** 2 * math.exp(-(1.0 - LN2) * M)
    return delta_h1, delta_h2, delta_h3


def _regime_flags(bi: BoundInputs) -> dict:
    return {
        "M_le_n_eta": bool(bi.M <= bi.n * bi.eta),
        "n_eta2_ge_1": bool(bi.n * bi.eta**2 >= 1.0),
    }


def _resolve_gamma(bi: BoundInputs, k: int) -> list[float]:
    need = k - 1
    if bi.gamma is None:
        return [0.5] * need
    if len(bi.gamma) < need:
        raise InputError(
            f"gamma needs at least k-1 = {need} entries for this dimension, got {len(bi.gamma)}"
        )
    return list(bi.gamma[:need])


def _b1_term(bi: BoundInputs) -> tuple[float, dict]:
    n, M, eta = bi.n, bi.M, bi.eta
    p = bi.p
    a1 = (M / (bi.zeta * eta)) ** (20.0 / (8.0 + p))
    a2 = (M / eta) ** ((16.0 + 3.0 * p) / (16.0 + 2.0 * p))
    b1 = (M / (bi.zeta * eta)) ** (40.0 / (8.0 + p))
    branches = {
        "b1_zeta_pow20_variable": bool(a1 > 1.0),
        "b1_eta_pow_variable": bool(a2 > 1.0),
        "b1_zeta_pow40_variable": bool(b1 > 1.0),
    }
    value = (max(a1, 1.0) * max(a2, 1.0) / bi.alpha + max(b1, 1.0)) / math.sqrt(n)
    return value, branches


def _b2_inner(n, M, k, dim, gammas) -> tuple[float, int | None]:
    lead = M ** (k / (2.0 * dim)) * n ** (-k / (2.0 * dim) + 0.25)
    if k == 1:
        return lead, None
    vals = [
        n ** (-gammas[l - 1] / 2.0 - l / (2.0 * dim) + 0.25) * M ** (l / (2.0 * dim))
        for l in range(1, k)
    ]
    argmax = int(np.argmax(vals)) + 1
    return lead + max(vals), argmax


def _b2_term(bi: BoundInputs, delta_h1: float) -> tuple[float, int | None]:
    k = bi.m // 2 + 1
    gammas = _resolve_gamma(bi, k)
    inner, argmax = _b2_inner(bi.n, bi.M, k, bi.m, gammas)
    pref = bi.eta ** (-k / (2.0 * bi.m)) + math.sqrt(delta_h1)
    return pref * inner, argmax


def _b3_core(bi: BoundInputs, dim: int, deltas) -> float:
    n, M, eta = bi.n, bi.M, bi.eta
    d1, d2, d3 = deltas
    return (
        (1.0 / eta) * (M / (n * eta)) ** (1.0 / (2.0 * dim))
        + math.sqrt(d1)
        + (math.sqrt(d2) + 1.0) / (eta * math.sqrt(M))
        + math.sqrt(d3)
        + 1.0 / (eta**3 * n ** (1.0 / 3.0))
    )


def eval_covariate_bound(bi: BoundInputs) -> BoundReport:
    """Gaussian approximation bound for bias-corrected covariate matching."""
    deltas = eval_delta_terms(bi)
    b1, branches = _b1_term(bi)
    b2, argmax = _b2_term(bi, deltas[0])
    b3 = _b3_core(bi, bi.m, deltas)
    flags = _regime_flags(bi)
    flags.update(branches)
    flags["b2_argmax_l"] = argmax
    terms = (b1, b2, b3)
    return BoundReport(*deltas, b_terms=terms, total=float(sum(terms)), regime_flags=flags)


def eval_covariate_bound_simplified(bi: BoundInputs) -> BoundReport:
    """Simplified covariate bound for overlap bounded away from zero."""
    n, M = bi.n, bi.M
    deltas = eval_delta_terms(bi)
    b1p = M ** (40.0 / (8.0 + bi.p)) / math.sqrt(n)
    k = bi.m // 2 + 1
    gammas = _resolve_gamma(bi, k)
    b2p, argmax = _b2_inner(n, M, k, bi.m, gammas)
    b3p = (M / n) ** (1.0 / (2.0 * bi.m)) + M**-0.5 + n ** (-1.0 / 3.0)
    flags = _regime_flags(bi)
    flags["small_eta"] = bool(bi.eta < 0.05)
    flags["b2_argmax_l"] = argmax
    terms = (b1p, b2p, b3p)
    return BoundReport(*deltas, b_terms=terms, total=float(sum(terms)), regime_flags=flags)


def eval_rank_bound(bi: BoundInputs) -> BoundReport:
    """Gaussian approximation bound for matching in transformed coordinates.

    Tail quantities are evaluated at the transformed dimension m'. With
    zero transform error and m = m' the first term equals the covariate
    bound's first term exactly.
    """
    n, M, eta = bi.n, bi.M, bi.eta
    mp = bi.mp
    deltas = eval_delta_terms(bi, dim=mp)
    d1 = deltas[0]
    b4, branches = _b1_term(bi)
    k = max(mp // 2, 1) + 1
    gammas = _resolve_gamma(bi, k)
    inner, argmax = _b2_inner(n, M, k, mp, gammas)
    inner += n ** (-k / 4.0 + 0.25) + n**0.25 * math.sqrt(bi.phi_err1)
    b5 = (eta ** (-k / (2.0 * mp)) + math.sqrt(d1)) * inner
    b6 = _b3_core(bi, mp, deltas) + (n / M) ** (bi.m / mp) * (
        (n**2 / M**2) * bi.phi_err2
    ) ** 0.25
    flags = _regime_flags(bi)
    flags.update(branches)
    flags["b2_argmax_l"] = argmax
    terms = (b4, b5, b6)
    return BoundReport(*deltas, b_terms=terms, total=float(sum(terms)), regime_flags=flags)


def eval_cdf_rank_bound(bi: BoundInputs) -> BoundReport:
    """Transformed-coordinate bound specialized to component-wise CDF maps.

    The last term of the third bound is piecewise in the dimension; the
    m >= 3 branch coincides with substituting the CDF transform-error
    rates into the general bound.
    """
    n, M, m = bi.n, bi.M, bi.m
    deltas = eval_delta_terms(bi)
    b4p = M ** (40.0 / (8.0 + bi.p)) / math.sqrt(n)
    k = max(m // 2, 1) + 1
    gammas = _resolve_gamma(bi, k)
    lead = M ** (k / (2.0 * m)) * n ** (-k / (2.0 * m) + 0.25)
    vals = [
        n ** (-gammas[l - 1] / 2.0 + 0.25) * ((M / n) ** (l / (2.0 * m)) + n ** (-l / 4.0))
        for l in range(1, k)
    ]
    b5p = lead + max(vals) + n**-0.25
    if m == 1:
        tail = M**-0.25
    elif m == 2:
        tail = (1.0 / (M * n)) ** (1.0 / 6.0)
    else:
        tail = M**-1.5 * n ** ((3.0 - m) / 2.0)
    b6p = (M / n) ** (1.0 / (2.0 * m)) + M**-0.5 + tail
    flags = _regime_flags(bi)
    flags["b2_argmax_l"] = int(np.argmax(vals)) + 1
    flags["b6_branch"] = "m1" if m == 1 else ("m2" if m == 2 else "m3plus")
    terms = (b4p, b5p, b6p)
    return BoundReport(*deltas, b_terms=terms, total=float(sum(terms)), regime_flags=flags)


def variance_floor_L(bi: BoundInputs, which: str = "covariate") -> float:
    """Lower bound on the conditional bootstrap variance, clamped at zero."""
    e = bi.E1 if which == "covariate" else bi.E2
    n = bi.n
    inner = (
        bi.M_l
        - math.sqrt(bi.M_u_p) * n ** (-1.0 / 3.0)
        - 2.0 * e * (bi.M_u_p + (2.0 * bi.M_u_p) ** 0.25 * n ** (-5.0 / 12.0))
    )
    return max(inner, 0.0)


def eval_bootstrap_bound(bi: BoundInputs, which: str = "covariate") -> BoundReport:
    """Bootstrap approximation bound with its conditional-variance floor.

    which selects the underlying Gaussian bound: "covariate" pairs the
    covariate terms with E1, "rank" the transformed-coordinate terms
    with E2. A zero floor makes the bound vacuous (flagged, total inf).
    """
    if which == "covariate":
        base = eval_covariate_bound(bi)
        e = bi.E1
    elif which == "rank":
        base = eval_rank_bound(bi)
        e = bi.E2
    else:
        raise InputError(f"unknown bound family {which!r}; expected covariate or rank")
    b_first, b_second, b_third = base.b_terms
    big_l = variance_floor_L(bi, which)
    flags = dict(base.regime_flags)
    flags["vacuous"] = big_l == 0.0
    flags["prob_floor"] = 1.0 - min(16.0 * b_third, 1.0)
    if big_l == 0.0:
        terms = (b_first, b_second, math.inf, math.inf)
    else:
        terms = (
            b_first,
            b_second,
            (1.0 + e**2) * b_third / big_l,
            (e / bi.eta + bi.n**-0.25 / bi.eta**2) / big_l,
        )
    return BoundReport(
        base.delta_h1,
        base.delta_h2,
        base.delta_h3,
        b_terms=terms,
        total=float(sum(terms)),
        regime_flags=flags,
    )


def optimal_M_dim1(n: int, p: float = 1.0) -> int:
    """Match count balancing the two terms of the dimension-one bound.

    Exact search over 1..n for the integer minimizing the larger of
    M^(40/(8+p)) n^(-1/2) and M^(-1/2); the continuous solution is the
    balance point M* = n^((8+p)/(88+p)). Ties prefer the smaller M.
    """
    if not isinstance(n, (int, np.integer)) or n < 9:
        raise InputError(f"n must be an integer >= 9, got {n!r}")
    if not 0.0 < p <= 1.0:
        raise InputError(f"p must lie in (0, 1], got {p!r}")
    grid = np.arange(1, n + 1, dtype=np.float64)
    worst = np.maximum(grid ** (40.0 / (8.0 + p)) / math.sqrt(n), grid**-0.5)
    return int(np.argmin(worst)) + 1


def estimate_overlap_eta(ds: Dataset, k: int | None = None) -> float:
    """Plug-in overlap level from a nearest-neighbor propensity fit.

    Clipped to [0.01, 0.5]; pass k to override the smoothing level.
    """
    from .matching import knn_among
    from .regress import default_knn_k

    if k is None:
        k = min(default_knn_k(ds.n, ds.m), ds.n)
    if not 1 <= k <= ds.n:
        raise InputError(f"k must lie in 1..{ds.n}, got {k!r}")
    idx, _ = knn_among(ds.x, ds.x, k)
    e_hat = ds.d[idx].mean(axis=1)
    worst = float(np.minimum(e_hat, 1.0 - e_hat).min())
    return float(np.clip(worst, 0.01, 0.5))

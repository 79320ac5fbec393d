import numpy as np
import pytest

import matchboot as mb
from conftest import make_instance
from matchboot.inference import _eval_arrays, sigma2_components
from matchboot.simlab import generate, get_dgp, oracle_pair


def _toy_pieces(toy):
    mr = mb.match_mnn(toy, 1)
    zero = mb.OracleRegressor(fn=lambda x: np.zeros(x.shape[0]))
    rp = mb.RegressorPair(mu0=zero, mu1=zero, kind="oracle", hyperparams={})
    return mr, rp


class TestVariance:
    def test_toy_components_by_hand(self, toy):
        # mu-hat identically zero: delta_mu = 0, residuals = y,
        # weights w = 1 + K with M = 1
        mr, rp = _toy_pieces(toy)
        vr = mb.estimate_sigma2(toy, mr, rp)
        assert vr.k1 == 0.0
        # treated arm: y = [1, 2], K = [1, 1] -> sum((2*1)^2 + (2*2)^2)/4
        assert vr.k2 == pytest.approx((4.0 + 16.0) / 4.0)
        # control arm: y = [0, 1], K = [2, 0] -> sum((3*0)^2 + (1*1)^2)/4
        assert vr.k3 == pytest.approx(1.0 / 4.0)
        assert vr.sigma2_hat == pytest.approx(vr.k1 + vr.k2 + vr.k3)

    def test_components_match_direct_formula(self):
        rng = np.random.default_rng(0)
        ds, M = make_instance(rng, n_lo=30, n_hi=60)
        mr = mb.match_mnn(ds, M)
        rp = mb.fit_pair(ds, kind="knn")
        vr = mb.estimate_sigma2(ds, mr, rp)
        delta_mu, resid = _eval_arrays(ds, mr, rp)
        w = 1.0 + mr.k_count / M
        k1 = np.mean((delta_mu - delta_mu.mean()) ** 2)
        k2 = np.sum((w[ds.d == 1] * resid[ds.d == 1]) ** 2) / ds.n
        k3 = np.sum((w[ds.d == 0] * resid[ds.d == 0]) ** 2) / ds.n
        assert vr.k1 == pytest.approx(k1, rel=1e-14)
        assert vr.k2 == pytest.approx(k2, rel=1e-14)
        assert vr.k3 == pytest.approx(k3, rel=1e-14)
        assert vr.sigma2_hat == pytest.approx(k1 + k2 + k3, rel=1e-14)


class TestBootstrap:
    def test_forced_degenerate_draw_recovers_estimate(self, toy):
        # V = 0, W = 1 collapses every replicate onto tau_hat_bc
        mr, rp = _toy_pieces(toy)
        rep = mb.estimate_tau_bc(toy, mr, rp)
        draw = lambda b, n: (np.zeros(n), np.ones(n))
        bd = mb.multiplier_bootstrap(toy, mr, rp, B=25, seed=0, draw=draw)
        assert (bd.replicates == rep.tau_hat_bc).all()

    def test_seed_determinism(self):
        rng = np.random.default_rng(1)
        ds, M = make_instance(rng, n_lo=25, n_hi=40)
        mr = mb.match_mnn(ds, M)
        rp = mb.fit_pair(ds, kind="knn")
        one = mb.multiplier_bootstrap(ds, mr, rp, B=64, seed=7)
        two = mb.multiplier_bootstrap(ds, mr, rp, B=64, seed=7)
        other = mb.multiplier_bootstrap(ds, mr, rp, B=64, seed=8)
        assert (one.replicates == two.replicates).all()
        assert not (one.replicates == other.replicates).all()

    def test_replicate_mean_near_estimate(self):
        dgp = get_dgp("linear-1d")
        ds = generate(dgp, 200, 2)
        mr = mb.match_mnn(ds, 3)
        rp = mb.fit_pair(ds, kind="knn")
        rep = mb.estimate_tau_bc(ds, mr, rp)
        bd = mb.multiplier_bootstrap(ds, mr, rp, B=4000, seed=5)
        tol = 4.0 * bd.conditional_sd / np.sqrt(bd.B)
        assert abs(bd.replicates.mean() - rep.tau_hat_bc) <= tol

    def test_conditional_sd_matches_variance_report(self):
        rng = np.random.default_rng(2)
        ds, M = make_instance(rng, n_lo=30, n_hi=50)
        mr = mb.match_mnn(ds, M)
        rp = mb.fit_pair(ds, kind="knn")
        vr = mb.estimate_sigma2(ds, mr, rp)
        bd = mb.multiplier_bootstrap(ds, mr, rp, B=32, seed=0)
        assert bd.conditional_sd == pytest.approx(
            np.sqrt(vr.sigma2_hat / ds.n), rel=1e-14
        )

    def test_conditional_gaussianity(self):
        # standardized replicates should be close to N(0, 1) given the data
        dgp = get_dgp("linear-1d")
        ds = generate(dgp, 300, 4)
        mr = mb.match_mnn(ds, 3)
        rp = mb.fit_pair(ds, kind="knn")
        rep = mb.estimate_tau_bc(ds, mr, rp)
        B = 10_000
        bd = mb.multiplier_bootstrap(ds, mr, rp, B=B, seed=11)
        z = (bd.replicates - rep.tau_hat_bc) / bd.conditional_sd
        dk = mb.kolmogorov_distance(z)
        assert dk <= 1.36 / np.sqrt(B) + 0.005

    def test_replicate_count_validated(self, toy):
        mr, rp = _toy_pieces(toy)
        with pytest.raises(mb.InputError):
            mb.multiplier_bootstrap(toy, mr, rp, B=0, seed=0)


class TestConfidenceInterval:
    def test_alpha_validated(self, toy):
        mr, rp = _toy_pieces(toy)
        bd = mb.multiplier_bootstrap(toy, mr, rp, B=500, seed=0)
        for bad in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(mb.InputError, match="alpha"):
                mb.bootstrap_ci(bd, 1.25, alpha=bad)

    def test_replicates_must_resolve_tail(self, toy):
        mr, rp = _toy_pieces(toy)
        bd = mb.multiplier_bootstrap(toy, mr, rp, B=100, seed=0)
        with pytest.raises(mb.InputError, match="replicates"):
            mb.bootstrap_ci(bd, 1.25, alpha=0.01)

    def test_interval_shape(self):
        rng = np.random.default_rng(3)
        ds, M = make_instance(rng, n_lo=40, n_hi=60)
        mr = mb.match_mnn(ds, M)
        rp = mb.fit_pair(ds, kind="knn")
        rep = mb.estimate_tau_bc(ds, mr, rp)
        bd = mb.multiplier_bootstrap(ds, mr, rp, B=2000, seed=9)
        ci = mb.bootstrap_ci(bd, rep.tau_hat_bc, alpha=0.05)
        assert ci.lower < rep.tau_hat_bc < ci.upper
        assert ci.kind == "analytic"
        assert ci.analytic == (ci.lower, ci.upper)
        lo_p, hi_p = ci.percentile
        assert lo_p < hi_p
        # both constructions are centered on the same estimate
        assert ci.lower + ci.upper == pytest.approx(2 * rep.tau_hat_bc, rel=1e-12)

    def test_zero_noise_oracle_gives_point_interval(self):
        # constant treatment effect, no noise, true surfaces known:
        # every replicate equals tau and the interval collapses onto it
        dgp = get_dgp("homogeneous")
        flat = mb.DGP(
            name="flat",
            m=dgp.m,
            mu0=dgp.mu0,
            mu1=dgp.mu1,
            propensity=dgp.propensity,
            noise_sd=0.0,
            eta_star=dgp.eta_star,
        )
        ds = generate(flat, 60, 0)
        mr = mb.match_mnn(ds, 2)
        rp = oracle_pair(flat)
        rep = mb.estimate_tau_bc(ds, mr, rp)
        assert rep.tau_hat_bc == pytest.approx(1.0, abs=1e-12)
        bd = mb.multiplier_bootstrap(ds, mr, rp, B=500, seed=0)
        assert bd.conditional_sd == 0.0
        ci = mb.bootstrap_ci(bd, rep.tau_hat_bc, alpha=0.05)
        assert ci.lower == ci.upper == pytest.approx(1.0, abs=1e-12)


class TestDensityRatio:
    def test_toy_value(self, toy):
        mr = mb.match_mnn(toy, 1)
        assert mb.density_ratio(toy, mr, 1) == 2.0

    def test_treated_uses_mirrored_count(self, toy):
        mr = mb.match_mnn(toy, 1)
        # treated unit 0 is matched once by control queries; n1/n0 = 1
        assert mb.density_ratio(toy, mr, 0) == 1.0

    def test_index_validated(self, toy):
        mr = mb.match_mnn(toy, 1)
        with pytest.raises(mb.InputError):
            mb.density_ratio(toy, mr, 4)
        with pytest.raises(mb.InputError):
            mb.density_ratio(toy, mr, -1)

    def test_mean_over_controls_is_one(self):
        # conservation of matched counts makes this an exact identity
        rng = np.random.default_rng(4)
        for _ in range(10):
            ds, M = make_instance(rng)
            mr = mb.match_mnn(ds, M)
            controls = np.flatnonzero(ds.d == 0)
            vals = [mb.density_ratio(ds, mr, int(i)) for i in controls]
            assert np.mean(vals) == pytest.approx(1.0, abs=1e-12)


class TestKolmogorovDistance:
    def test_half_for_point_mass_at_zero(self):
        assert mb.kolmogorov_distance(np.zeros(7)) == 0.5

    def test_near_zero_for_gaussian_quantile_grid(self):
        from scipy.special import ndtri

        n = 100
        sample = ndtri((np.arange(1, n + 1) - 0.5) / n)
        assert mb.kolmogorov_distance(sample) == pytest.approx(0.005, abs=1e-12)

    def test_near_one_for_distant_sample(self):
        assert mb.kolmogorov_distance(np.full(50, 40.0)) >= 0.999

    def test_validations(self):
        with pytest.raises(mb.InputError):
            mb.kolmogorov_distance(np.array([]))
        with pytest.raises(mb.InputError):
            mb.kolmogorov_distance(np.array([1.0, np.nan]))
        with pytest.raises(mb.InputError):
            mb.kolmogorov_distance(np.array([1.0]), sd=0.0)

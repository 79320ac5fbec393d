"""Nearest-neighbor matching estimators for average treatment effects.

Covariate-, rank-, and general transformed-coordinate matching with
regression bias correction; multiplier-bootstrap inference; closed-form
evaluation of the non-asymptotic approximation bounds; and a Monte
Carlo lab with built-in data-generating processes.
"""

from .bounds import (
    BoundInputs,
    BoundReport,
    estimate_overlap_eta,
    eval_bootstrap_bound,
    eval_cdf_rank_bound,
    eval_covariate_bound,
    eval_covariate_bound_simplified,
    eval_delta_terms,
    eval_rank_bound,
    optimal_M_dim1,
    variance_floor_L,
)
from .data import Dataset, InputError, TreatmentSplit, as_dataset, load_csv, split, write_csv
from .estimators import (
    EstimateReport,
    MatchingATE,
    decompose_en,
    estimate_tau_bc,
    estimate_tau_phi,
    estimate_tau_rank,
    estimate_tau_raw,
    fit_phi_pair,
    fit_rank_pair,
    impute_outcomes,
    phi_matched_counts,
    rank_transform,
    tau_raw_imputed,
)
from .inference import (
    BootstrapDistribution,
    CIReport,
    VarianceReport,
    bootstrap_ci,
    density_ratio,
    estimate_sigma2,
    kolmogorov_distance,
    multiplier_bootstrap,
)
from .matching import (
    MatchResult,
    empirical_radius_tail,
    knn_among,
    match_mnn,
    match_mnn_coords,
    radius_tail_bound,
    stabilization_radius,
    unit_ball_volume,
)
from .regress import (
    KNNRegressor,
    OracleRegressor,
    PolynomialRegressor,
    RegressorPair,
    default_knn_k,
    fit_pair,
    fit_pair_coords,
)
from .simlab import (
    DGP,
    DGPS,
    MCReport,
    generate,
    get_dgp,
    mc_coverage,
    mc_kolmogorov,
    mc_radius_tail,
    mc_variance,
    oracle_pair,
)

__version__ = "0.1.0"

__all__ = [
    "BoundInputs",
    "BoundReport",
    "BootstrapDistribution",
    "CIReport",
    "DGP",
    "DGPS",
    "Dataset",
    "EstimateReport",
    "InputError",
    "KNNRegressor",
    "MCReport",
    "MatchResult",
    "MatchingATE",
    "OracleRegressor",
    "PolynomialRegressor",
    "RegressorPair",
    "TreatmentSplit",
    "VarianceReport",
    "as_dataset",
    "bootstrap_ci",
    "decompose_en",
    "default_knn_k",
    "density_ratio",
    "empirical_radius_tail",
    "estimate_overlap_eta",
    "estimate_sigma2",
    "estimate_tau_bc",
    "estimate_tau_phi",
    "estimate_tau_rank",
    "estimate_tau_raw",
    "eval_bootstrap_bound",
    "eval_cdf_rank_bound",
    "eval_covariate_bound",
    "eval_covariate_bound_simplified",
    "eval_delta_terms",
    "eval_rank_bound",
    "fit_pair",
    "fit_pair_coords",
    "fit_phi_pair",
    "fit_rank_pair",
    "generate",
    "get_dgp",
    "impute_outcomes",
    "knn_among",
    "kolmogorov_distance",
    "load_csv",
    "match_mnn",
    "match_mnn_coords",
    "mc_coverage",
    "mc_kolmogorov",
    "mc_radius_tail",
    "mc_variance",
    "multiplier_bootstrap",
    "optimal_M_dim1",
    "oracle_pair",
    "phi_matched_counts",
    "radius_tail_bound",
    "rank_transform",
    "split",
    "stabilization_radius",
    "tau_raw_imputed",
    "unit_ball_volume",
    "variance_floor_L",
    "write_csv",
]

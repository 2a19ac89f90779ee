"""Copula-based sensitivity analysis for long-term treatment effects.

The package combines an experimental sample (treatment and surrogates) with
an observational sample (surrogates and long-term outcome) and quantifies
how the estimated long-term average treatment effect moves as the assumed
dependence between treatment and outcome, conditional on surrogates, varies
over copula families; the limiting cases give worst-case bounds.
"""

from .copulas import (
    DEFAULT_TAU_GRID,
    CopulaFamily,
    CopulaSpec,
    FRECHET_LOWER,
    FRECHET_UPPER,
    INDEPENDENCE,
    concordance_leq,
    cond_cdf,
    cond_pdf,
    d_du_cond_cdf,
    is_stochastically_increasing,
    joint_cdf,
    spec_from_tau,
    tau_to_theta,
    theta_to_tau,
)
from .data import CombinedDataset, DataError, load_dataset, save_dataset, split_complete
from .dml import (
    EstimateReport,
    SensitivityCurve,
    estimate_bounds,
    estimate_general,
    interval_identified_ci,
    moment_covariance,
    moment_general,
    moment_worst_case,
    sensitivity_analysis,
    solve_tau,
    wald_ci,
)
from .nuisance import (
    FoldAssignment,
    NuisanceBundle,
    NuisanceConfig,
    assemble_bundle,
    estimate_phi,
    fit_cond_mean,
    fit_cond_quantile,
    fit_probability,
    fit_wsi_regression,
    oracle_bundle,
    partition_folds,
)
from .oracle_dgp import (
    DgpConfig,
    OracleCurvePoint,
    joint_density,
    oracle_ate,
    oracle_curve,
    sign_change_threshold,
    simulate,
    true_quantile,
    true_surrogacy_score,
)
from .quadrature import QuadratureConfig
from .wsi import (
    avar,
    binary_worst_case_contrast,
    density_weighted_mean,
    dual_transform,
    dual_transform_general,
    sigma_weight,
    worst_case_wsi,
    wsi,
)

__version__ = "0.1.0"

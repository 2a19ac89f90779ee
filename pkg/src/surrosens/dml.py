"""Orthogonal moments, cross-fitted estimation, and confidence intervals.

The moment function for each dependence key is affine in the target effect:
``m(Z, tau) = m_b(Z) - slope(Z) tau`` with slope equal to the experimental
indicator over the experimental share, so the estimating equation has an
exact closed-form root.  Residual terms correct, in order: arm-specific
index deviations from their covariate means, the centred contrast itself,
the observational dual-transform residual reweighted onto the experimental
population, and two treatment-residual terms that absorb the estimation of
the surrogacy score inside the index cutoffs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .copulas import CopulaSpec, is_smooth
from .data import CombinedDataset
from .nuisance import (
    WORST_CASE_KEYS,
    NuisanceBundle,
    NuisanceConfig,
    assemble_bundle,
    base_fits,
    dual_table,
)
from .wsi import dual_transform

__all__ = [
    "MomentEvaluation",
    "EstimateReport",
    "SensitivityCurve",
    "moment_worst_case",
    "moment_general",
    "solve_tau",
    "moment_covariance",
    "wald_ci",
    "interval_identified_ci",
    "estimate_bounds",
    "estimate_general",
    "sensitivity_analysis",
]


@dataclass
class MomentEvaluation:
    """Moment values, the affine slope in tau, and named term contributions."""

    value: np.ndarray
    affine_slope: np.ndarray
    terms: dict


def _moment_terms(dataset: CombinedDataset, bundle: NuisanceBundle, key, tau: float):
    fl = bundle.require(key)
    ind_e = dataset.is_exp.astype(float)
    ind_o = 1.0 - ind_e
    w = np.where(dataset.is_exp, dataset.w, 0.0)
    y = np.where(dataset.is_exp, 0.0, dataset.y)
    phi = bundle.phi
    rho_x = bundle.rho_x
    rho_sx = bundle.rho_sx
    phi_sx = bundle.phi_sx
    inv_phi_e = ind_e / phi
    inv_phi_o = ind_o / phi

    arm1 = inv_phi_e * w / rho_x * (fl.mu1 - fl.mu_bar1)
    arm0 = -inv_phi_e * (1.0 - w) / (1.0 - rho_x) * (fl.mu0 - fl.mu_bar0)
    level = inv_phi_e * (fl.mu_bar1 - fl.mu_bar0 - tau)

    if key in WORST_CASE_KEYS:
        kind1, _, mass1 = dual_table(key, 1)
        kind0, _, mass0 = dual_table(key, 0)
        h1 = dual_transform(kind1, y, fl.q_cut, mass1(rho_sx))
        h0 = dual_transform(kind0, y, fl.q_cut, mass0(rho_sx))
        corr1_core = fl.q_cut - fl.mu1
        corr0_core = fl.q_cut - fl.mu0
    else:
        h1 = np.where(dataset.is_exp, 0.0, np.nan_to_num(fl.h1))
        h0 = np.where(dataset.is_exp, 0.0, np.nan_to_num(fl.h0))
        corr1_core = fl.d - fl.mu1
        corr0_core = fl.d - fl.mu0

    odds = phi_sx / (1.0 - phi_sx)
    dual = inv_phi_o * odds * (
        rho_sx / rho_x * (h1 - fl.mu1)
        - (1.0 - rho_sx) / (1.0 - rho_x) * (h0 - fl.mu0)
    )
    resid = w - rho_sx
    corr1 = inv_phi_e / rho_x * corr1_core * resid
    corr0 = inv_phi_e / (1.0 - rho_x) * corr0_core * resid
    terms = {
        "arm1_residual": arm1,
        "arm0_residual": arm0,
        "x_level": level,
        "observational_dual": dual,
        "score_correction_arm1": corr1,
        "score_correction_arm0": corr0,
    }
    value = arm1 + arm0 + level + dual + corr1 + corr0
    return MomentEvaluation(value, inv_phi_e, terms)


def moment_worst_case(dataset: CombinedDataset, tau: float, bundle: NuisanceBundle,
                      bound: str, rows=None) -> MomentEvaluation:
    """Worst-case moment evaluation, vectorised over rows.

    ``rows`` restricts the evaluation (and the returned arrays) to a subset.
    """
    if bound not in WORST_CASE_KEYS:
        raise ValueError(f"bound must be 'upper' or 'lower', got {bound!r}")
    ev = _moment_terms(dataset, bundle, bound, tau)
    return _take(ev, rows)


def moment_general(dataset: CombinedDataset, tau: float, bundle: NuisanceBundle,
                   copula: CopulaSpec, rows=None) -> MomentEvaluation:
    """Smooth-copula moment evaluation, vectorised over rows."""
    if not isinstance(copula, CopulaSpec) or not is_smooth(copula):
        raise ValueError("moment_general requires a smooth copula key")
    ev = _moment_terms(dataset, bundle, copula, tau)
    return _take(ev, rows)


def _take(ev: MomentEvaluation, rows) -> MomentEvaluation:
    if rows is None:
        return ev
    rows = np.asarray(rows)
    return MomentEvaluation(
        ev.value[rows], ev.affine_slope[rows],
        {k: v[rows] for k, v in ev.terms.items()},
    )


def _evaluate(dataset, bundle, key, tau):
    if key in WORST_CASE_KEYS:
        return moment_worst_case(dataset, tau, bundle, key)
    return moment_general(dataset, tau, bundle, key)


def solve_tau(dataset: CombinedDataset, bundle: NuisanceBundle, key) -> float:
    """Exact root of the sample moment in tau (the moment is affine)."""
    ev = _evaluate(dataset, bundle, key, 0.0)
    slope_total = ev.affine_slope.sum()
    if slope_total <= 0.0:
        raise ValueError("no experimental rows; the effect is not identified")
    return float(ev.value.sum() / slope_total)


def moment_covariance(dataset: CombinedDataset, bundle: NuisanceBundle,
                      taus: dict) -> np.ndarray:
    """Fold-averaged second-moment matrix of the stacked moments at the roots."""
    keys = list(taus.keys())
    stacked = np.vstack([
        _evaluate(dataset, bundle, k, taus[k]).value for k in keys
    ])
    folds = bundle.folds
    V = np.zeros((len(keys), len(keys)))
    for k in range(folds.K):
        rows = folds.rows_in(k)
        if rows.size < 2:
            raise ValueError(f"fold {k} has fewer than 2 rows")
        G = stacked[:, rows]
        V += G @ G.T / rows.size
    return V / folds.K


def wald_ci(tau_hat: float, se: float, level: float = 0.95) -> tuple:
    """Symmetric normal interval around the point estimate."""
    if se < 0:
        raise ValueError("se must be nonnegative")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be interior to (0, 1)")
    z = ndtri(0.5 * (1.0 + level))
    return (tau_hat - z * se, tau_hat + z * se)


def interval_identified_ci(tau_l: float, tau_u: float, se_l: float, se_u: float,
                           level: float = 0.95) -> tuple:
    """Interval covering each point of an interval-identified parameter.

    The critical value c solves Phi(c + gap / max(se)) - Phi(-c) = level with
    the gap clamped at zero, so the construction interpolates between the
    two-sided point-identified interval and one-sided limits as the interval
    widens.  Crossing estimates are clamped, never returned as empty.
    """
    if se_l < 0 or se_u < 0:
        raise ValueError("standard errors must be nonnegative")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be interior to (0, 1)")
    se_max = max(se_l, se_u)
    if se_max == 0.0:
        lo, hi = min(tau_l, tau_u), max(tau_l, tau_u)
        return (lo, hi)
    gap = max(tau_u - tau_l, 0.0)
    ratio = gap / se_max

    def eq(c):
        return ndtr(c + ratio) - ndtr(-c) - level

    z_two = ndtri(0.5 * (1.0 + level))
    c = brentq(eq, ndtri(level) - 1e-9, z_two + 1e-9, xtol=1e-12)
    return (tau_l - c * se_l, tau_u + c * se_u)


@dataclass
class EstimateReport:
    """Point estimates, uncertainty, and run identification."""

    kind: str
    tau: dict
    se: dict
    covariance: list | None
    wald: dict
    interval_ci: tuple | None
    level: float
    n: int
    K: int
    seed: int
    copula: dict | None = None
    warnings: list = field(default_factory=list)
    fold_sizes: list = field(default_factory=list)
    config_digest: str = ""

    def to_json_dict(self) -> dict:
        return {
            "schema": "surrosens.estimate_report.v1",
            "kind": self.kind,
            "tau": self.tau,
            "se": self.se,
            "covariance": self.covariance,
            "wald_ci": {k: list(v) for k, v in self.wald.items()},
            "interval_ci": list(self.interval_ci) if self.interval_ci else None,
            "level": self.level,
            "n": self.n,
            "K": self.K,
            "seed": self.seed,
            "copula": self.copula,
            "warnings": self.warnings,
            "fold_sizes": self.fold_sizes,
            "config_digest": self.config_digest,
        }

    def csv_rows(self):
        """Tabular view: one row per estimated quantity."""
        header = ["target", "tau_hat", "se", "ci_lo", "ci_hi"]
        rows = [
            [name, self.tau[name], self.se[name], self.wald[name][0], self.wald[name][1]]
            for name in self.tau
        ]
        if self.interval_ci is not None:
            rows.append(["interval", "", "", self.interval_ci[0], self.interval_ci[1]])
        return header, rows


def _se_from_cov(V: np.ndarray, n: int) -> np.ndarray:
    return np.sqrt(np.diag(V) / max(n - 1, 1))


def estimate_bounds(dataset: CombinedDataset, K: int,
                    config: NuisanceConfig = NuisanceConfig(),
                    level: float = 0.95,
                    bundle: NuisanceBundle | None = None) -> EstimateReport:
    """Cross-fitted worst-case bound estimates with joint uncertainty.

    Returns per-bound Wald intervals and the interval-identified interval
    for the treatment effect itself.
    """
    if bundle is None:
        bundle = assemble_bundle(dataset, K, WORST_CASE_KEYS, config)
    tau_u = solve_tau(dataset, bundle, "upper")
    tau_l = solve_tau(dataset, bundle, "lower")
    V = moment_covariance(dataset, bundle, {"upper": tau_u, "lower": tau_l})
    se_u, se_l = _se_from_cov(V, dataset.n_rows)
    warnings = []
    if tau_l > tau_u:
        warnings.append("bound estimates cross; reported as computed")
    report = EstimateReport(
        kind="bounds",
        tau={"lower": tau_l, "upper": tau_u},
        se={"lower": se_l, "upper": se_u},
        covariance=V.tolist(),
        wald={
            "lower": wald_ci(tau_l, se_l, level),
            "upper": wald_ci(tau_u, se_u, level),
        },
        interval_ci=interval_identified_ci(tau_l, tau_u, se_l, se_u, level),
        level=level,
        n=dataset.n_rows,
        K=bundle.folds.K,
        seed=config.seed,
        warnings=warnings,
        fold_sizes=[int(bundle.folds.rows_in(k).size) for k in range(bundle.folds.K)],
    )
    return report


def estimate_general(dataset: CombinedDataset, copula: CopulaSpec, K: int,
                     config: NuisanceConfig = NuisanceConfig(),
                     level: float = 0.95,
                     bundle: NuisanceBundle | None = None,
                     tau_k: float | None = None) -> EstimateReport:
    """Cross-fitted effect estimate for one known smooth copula."""
    if not is_smooth(copula):
        raise ValueError("estimate_general requires a smooth copula; use estimate_bounds")
    if bundle is None:
        bundle = assemble_bundle(dataset, K, [copula], config)
    tau_hat = solve_tau(dataset, bundle, copula)
    V = moment_covariance(dataset, bundle, {copula: tau_hat})
    se = float(_se_from_cov(V, dataset.n_rows)[0])
    return EstimateReport(
        kind="general",
        tau={"tau": tau_hat},
        se={"tau": se},
        covariance=V.tolist(),
        wald={"tau": wald_ci(tau_hat, se, level)},
        interval_ci=None,
        level=level,
        n=dataset.n_rows,
        K=bundle.folds.K,
        seed=config.seed,
        copula={
            "family": copula.family.value,
            "theta": copula.theta,
            "tau_k": tau_k,
        },
        fold_sizes=[int(bundle.folds.rows_in(k).size) for k in range(bundle.folds.K)],
    )


@dataclass
class SensitivityCurve:
    """Effect estimates along a dependence grid plus the worst case."""

    points: list
    breakpoint: float | None
    worst_case: EstimateReport | None
    level: float
    fine_points: list = field(default_factory=list)
    significant_at_zero: bool = False

    def to_json_dict(self) -> dict:
        return {
            "schema": "surrosens.sensitivity_curve.v1",
            "points": self.points,
            "breakpoint": self.breakpoint,
            "significant_at_zero": self.significant_at_zero,
            "fine_points": self.fine_points,
            "level": self.level,
            "worst_case": self.worst_case.to_json_dict() if self.worst_case else None,
        }

    def csv_rows(self):
        header = ["tau_k", "tau_hat", "se", "ci_lo", "ci_hi"]
        rows = [
            [p["tau_k"], p["tau_hat"], p["se"], p["ci_lo"], p["ci_hi"]]
            for p in self.points
        ]
        return header, rows


def _point_from_report(tau_k: float, rep: EstimateReport) -> dict:
    lo, hi = rep.wald["tau"]
    return {
        "tau_k": float(tau_k),
        "tau_hat": rep.tau["tau"],
        "se": rep.se["tau"],
        "ci_lo": lo,
        "ci_hi": hi,
    }


def sensitivity_analysis(dataset: CombinedDataset, family, tau_grid, K: int,
                         config: NuisanceConfig = NuisanceConfig(),
                         level: float = 0.95,
                         include_worst_case: bool = True,
                         breakpoint_tol: float = 0.002) -> SensitivityCurve:
    """Re-estimate the effect along a Kendall's-tau grid for one family.

    Score and quantile learners are fit once and shared across the whole
    grid; only the copula-dependent index regressions vary per point.  The
    breakpoint is the smallest positive dependence at which the interval
    excludes zero, refined by bisection on the shared fits.
    """
    from .copulas import CopulaFamily, spec_from_tau

    family = CopulaFamily(family)
    tau_grid = sorted(float(t) for t in tau_grid)
    base = base_fits(dataset, K, config)

    def estimate_at(tau_k: float) -> EstimateReport:
        spec = spec_from_tau(family, tau_k)
        bundle = assemble_bundle(dataset, K, [spec], config, base=base)
        return estimate_general(dataset, spec, K, config, level, bundle=bundle,
                                tau_k=tau_k)

    points = [_point_from_report(t, estimate_at(t)) for t in tau_grid]

    worst = None
    if include_worst_case:
        wc_bundle = assemble_bundle(dataset, K, WORST_CASE_KEYS, config, base=base)
        worst = estimate_bounds(dataset, K, config, level, bundle=wc_bundle)

    def excludes_zero(p: dict) -> bool:
        return p["ci_lo"] > 0.0 or p["ci_hi"] < 0.0

    significant_at_zero = False
    breakpoint = None
    fine_points: list = []
    zero_pts = [p for p in points if p["tau_k"] == 0.0]
    if zero_pts and excludes_zero(zero_pts[0]):
        significant_at_zero = True
    else:
        pos = [p for p in points if p["tau_k"] > 0.0]
        first_sig = next((p for p in pos if excludes_zero(p)), None)
        if first_sig is not None:
            hi = first_sig["tau_k"]
            below = [p["tau_k"] for p in points if 0.0 <= p["tau_k"] < hi]
            lo = max(below) if below else 0.0
            while hi - lo > breakpoint_tol:
                mid = 0.5 * (lo + hi)
                rep = estimate_at(mid)
                pt = _point_from_report(mid, rep)
                fine_points.append(pt)
                if excludes_zero(pt):
                    hi = mid
                else:
                    lo = mid
            breakpoint = hi
    fine_points.sort(key=lambda p: p["tau_k"])
    return SensitivityCurve(
        points=points,
        breakpoint=breakpoint,
        worst_case=worst,
        level=level,
        fine_points=fine_points,
        significant_at_zero=significant_at_zero,
    )

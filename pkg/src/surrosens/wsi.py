"""Weighted surrogate indices and their dual representations.

A weighted surrogate index reweights the conditional outcome quantile
function by ``sigma(u) = (w - C(alpha | u)) / (w - alpha)``, where C is a
copula's conditional CDF, ``w`` is the treatment arm, and ``alpha`` is one
minus the surrogacy score.  Under the independence copula the weight is one
and the index collapses to the plain conditional mean.  Under the Frechet
bounds the index is a conditional tail mean (AVaR), and the module also
provides the dual transforms whose conditional expectations recover the
indices from outcome draws, which is what the debiased moments consume.

Quantile functions are passed as callables ``q(u)`` evaluated lazily on
quadrature nodes; evaluations at 0 and 1 are nudged inward by 1e-9 since
conditional outcome distributions are assumed to have bounded support.
"""

from __future__ import annotations

import numpy as np

from .copulas import (
    CopulaFamily,
    CopulaSpec,
    DensityUndefinedError,
    cond_cdf,
    cond_cdf_limit,
    conditional_inverse,
    has_density,
    inverse_cond_cdf_in_u,
    is_smooth,
)
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig, interval_rule, unit_rule

__all__ = [
    "DegeneratePropensityError",
    "sigma_weight",
    "wsi",
    "avar",
    "worst_case_wsi",
    "dual_transform",
    "dual_transform_general",
    "dual_transform_general_batch",
    "density_weighted_mean",
    "density_weighted_mean_batch",
    "binary_worst_case_contrast",
]

_Q_EDGE = 1e-9


class DegeneratePropensityError(ValueError):
    """Raised when alpha in {0, 1} leaves a treatment arm without mass."""


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DegeneratePropensityError(f"alpha must be interior to (0, 1), got {alpha}")
    return alpha


def _eval_q(q, u):
    return np.asarray(q(np.clip(u, _Q_EDGE, 1.0 - _Q_EDGE)), dtype=float)


def sigma_weight(copula: CopulaSpec, w: int, u, alpha: float):
    """Quantile weight (w - C(alpha | u)) / (w - alpha) for arm w in {0, 1}."""
    alpha = _check_alpha(alpha)
    if w not in (0, 1):
        raise ValueError("treatment arm must be 0 or 1")
    c = cond_cdf(copula, alpha, u)
    return (w - c) / (w - alpha)


def _weight_breakpoint(copula: CopulaSpec, alpha: float):
    """Interior point where the weight is only piecewise smooth, if any.

    Clayton parameters below zero put no mass on small second coordinates
    until u reaches the support boundary, so the conditional CDF has a kink
    there.
    """
    if copula.family is CopulaFamily.CLAYTON and copula.theta < 0.0:
        base = 1.0 - alpha ** (-copula.theta)
        if base > 0.0:
            u0 = base ** (-1.0 / copula.theta)
            if 0.0 < u0 < 1.0:
                return u0
    return None


def wsi(q, copula: CopulaSpec, w: int, alpha: float,
        quad: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Weighted surrogate index: integral of q(u) sigma(u) du over (0, 1).

    Indicator weights (Frechet bounds) are integrated by splitting the domain
    exactly at the jump; smooth weights use the full-interval rule, split at
    any interior kink of the conditional CDF.
    """
    alpha = _check_alpha(alpha)
    family = copula.family
    if family is CopulaFamily.FRECHET_UPPER:
        return worst_case_wsi(q, "upper", w, 1.0 - alpha, quad)
    if family is CopulaFamily.FRECHET_LOWER:
        return worst_case_wsi(q, "lower", w, 1.0 - alpha, quad)
    u0 = _weight_breakpoint(copula, alpha)
    if u0 is None:
        pieces = [(0.0, 1.0)]
    else:
        pieces = [(0.0, u0), (u0, 1.0)]
    total = 0.0
    for a, b in pieces:
        u, wt = interval_rule(a, b, quad.nodes)
        total += float(np.sum(wt * _eval_q(q, u) * sigma_weight(copula, w, u, alpha)))
    return total


def avar(q, alpha: float, quad: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Average value-at-risk: mean of q(u) on (alpha, 1), scaled by 1/(1-alpha).

    ``avar(q, 0)`` is the plain mean of the distribution with quantile
    function q.
    """
    alpha = float(alpha)
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"avar level must lie in [0, 1), got {alpha}")
    u, wt = interval_rule(alpha, 1.0, quad.nodes)
    return float(np.sum(wt * _eval_q(q, u)) / (1.0 - alpha))


def worst_case_wsi(q, bound: str, w: int, rho_sx: float,
                   quad: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Tail-mean form of the index under a Frechet bound.

    With p = rho_sx the four cases are the mean of q over (1-p, 1), (0, 1-p),
    (0, p), and (p, 1) for (upper, 1), (upper, 0), (lower, 1), (lower, 0)
    respectively, each normalised by the interval length.
    """
    rho_sx = float(rho_sx)
    if not 0.0 < rho_sx < 1.0:
        raise DegeneratePropensityError(f"rho_sx must be interior to (0, 1), got {rho_sx}")
    if w not in (0, 1):
        raise ValueError("treatment arm must be 0 or 1")
    if bound == "upper":
        a, b = ((1.0 - rho_sx, 1.0) if w == 1 else (0.0, 1.0 - rho_sx))
    elif bound == "lower":
        a, b = ((0.0, rho_sx) if w == 1 else (rho_sx, 1.0))
    else:
        raise ValueError(f"bound must be 'upper' or 'lower', got {bound!r}")
    u, wt = interval_rule(a, b, quad.nodes)
    return float(np.sum(wt * _eval_q(q, u)) / (b - a))


def dual_transform(kind: str, y, cutoff, alpha):
    """Tail dual of AVaR: cutoff plus (or minus) the scaled positive
    (negative) part of y - cutoff.

    ``kind='upper'`` gives cutoff + (y - cutoff)_+ / alpha and ``kind='lower'``
    gives cutoff - (y - cutoff)_- / alpha, where alpha is the tail mass.
    Conditional expectations of these transforms at the matching quantile
    cutoff reproduce the worst-case indices.
    """
    y = np.asarray(y, dtype=float)
    cutoff = np.asarray(cutoff, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any((alpha <= 0.0) | (alpha >= 1.0)):
        raise DegeneratePropensityError("dual tail mass must be interior to (0, 1)")
    diff = y - cutoff
    if kind in ("upper", "U"):
        out = cutoff + np.maximum(diff, 0.0) / alpha
    elif kind in ("lower", "L"):
        out = cutoff - np.maximum(-diff, 0.0) / alpha
    else:
        raise ValueError(f"kind must be 'upper' or 'lower', got {kind!r}")
    if out.ndim == 0:
        return float(out)
    return out


def _dual_measure_u_nodes(copula: CopulaSpec, alphas: np.ndarray, nodes: int):
    """Nodes for integrating against the weight differential d sigma.

    Substituting v = C(alpha | u) turns the Stieltjes integral into a plain
    integral over v between the two boundary limits, which the conditioning
    coordinate is recovered from by inversion.  The substitution places the
    quadrature nodes exactly where the differential carries mass; a fixed
    u-grid misses most of that mass when alpha is extreme, because the
    conditional CDF then moves inside a boundary layer of width far below
    any fixed resolution.

    Returns (u_nodes (n, m), t_weights (m,), v0 (n,), v1 (n,)) where the
    oriented integral of g against dC(alpha|u) is (v1 - v0) sum_t wt g(u(t))
    with v0 = C(alpha | 0) and v1 = C(alpha | 1).
    """
    alphas = np.asarray(alphas, dtype=float)
    v0 = np.asarray(cond_cdf_limit(copula, alphas, 0), dtype=float)
    v1 = np.asarray(cond_cdf_limit(copula, alphas, 1), dtype=float)
    t, tw = unit_rule(nodes)
    v = v0[:, None] + (v1 - v0)[:, None] * t[None, :]
    u = inverse_cond_cdf_in_u(copula, v, alphas[:, None])
    return np.asarray(u, dtype=float), tw, v0, v1


def dual_transform_general(copula: CopulaSpec, w: int, y, q, alpha: float,
                           quad: QuadratureConfig = DEFAULT_QUADRATURE):
    """General-copula dual transform whose conditional mean is the index.

    For arm 1 this is ``sigma(0) y + int ((1-u) q(u) + (y - q(u))_+) dsigma``
    and for arm 0 it is ``sigma(1) y - int (u q(u) - (y - q(u))_-) dsigma``,
    with the Stieltjes differential integrated in its own scale via
    ``v = C(alpha | u)``.  Requires a copula that is smooth in u.
    """
    if not is_smooth(copula):
        raise DensityUndefinedError(
            "general dual requires a smooth copula; use dual_transform at the bounds"
        )
    alpha = _check_alpha(alpha)
    if w not in (0, 1):
        raise ValueError("treatment arm must be 0 or 1")
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    yv = np.atleast_1d(y)[:, None]
    if copula.family is CopulaFamily.INDEPENDENCE or (
        copula.family is CopulaFamily.GAUSSIAN and copula.theta == 0.0
    ):
        out = np.atleast_1d(y).astype(float)
        return float(out[0]) if scalar else out
    u, tw, v0, v1 = _dual_measure_u_nodes(copula, np.array([alpha]), quad.nodes)
    qv = _eval_q(q, u[0])[None, :]
    if w == 1:
        # int g dsigma_1 = -(1/(1-alpha)) int g dC = (v0 - v1)/(1-alpha) E_t[g]
        sig0 = (1.0 - v0[0]) / (1.0 - alpha)
        integrand = (1.0 - u[0])[None, :] * qv + np.maximum(yv - qv, 0.0)
        mass = (v0[0] - v1[0]) / (1.0 - alpha)
        out = sig0 * yv[:, 0] + mass * np.sum(integrand * tw[None, :], axis=1)
    else:
        sig1 = v1[0] / alpha
        integrand = u[0][None, :] * qv - np.maximum(qv - yv, 0.0)
        mass = (v1[0] - v0[0]) / alpha
        out = sig1 * yv[:, 0] - mass * np.sum(integrand * tw[None, :], axis=1)
    return float(out[0]) if scalar else out


def _interp_rows(u_query: np.ndarray, u_grid: np.ndarray, curves: np.ndarray) -> np.ndarray:
    """Row-wise linear interpolation of per-row curves defined on one grid."""
    out = np.empty_like(u_query)
    for i in range(u_query.shape[0]):
        out[i] = np.interp(u_query[i], u_grid, curves[i])
    return out


def dual_transform_general_batch(copula: CopulaSpec, w: int, y: np.ndarray,
                                 q_curves: np.ndarray, alphas: np.ndarray,
                                 quad: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """Row-wise general dual: one (y_i, quantile curve, alpha_i) per row.

    ``q_curves`` holds each row's conditional quantile function evaluated on
    the ``unit_rule(quad.nodes)`` grid; values at the measure's own nodes
    are interpolated from it.
    """
    if not is_smooth(copula):
        raise DensityUndefinedError("general dual requires a smooth copula")
    y = np.asarray(y, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    q_curves = np.asarray(q_curves, dtype=float)
    u_grid, _ = unit_rule(quad.nodes)
    if q_curves.shape != (y.size, u_grid.size):
        raise ValueError("q_curves must be evaluated on the quadrature grid")
    if copula.family is CopulaFamily.INDEPENDENCE or (
        copula.family is CopulaFamily.GAUSSIAN and copula.theta == 0.0
    ):
        return y.copy()
    u, tw, v0, v1 = _dual_measure_u_nodes(copula, alphas, quad.nodes)
    qv = _interp_rows(u, u_grid, q_curves)
    yv = y[:, None]
    if w == 1:
        sig0 = (1.0 - v0) / (1.0 - alphas)
        integrand = (1.0 - u) * qv + np.maximum(yv - qv, 0.0)
        mass = (v0 - v1) / (1.0 - alphas)
        return sig0 * y + mass * np.sum(integrand * tw[None, :], axis=1)
    sig1 = v1 / alphas
    integrand = u * qv - np.maximum(qv - yv, 0.0)
    mass = (v1 - v0) / alphas
    return sig1 * y - mass * np.sum(integrand * tw[None, :], axis=1)


def _density_measure_u_nodes(copula: CopulaSpec, alphas: np.ndarray, nodes: int):
    """Nodes turning the density-weighted integral into a uniform one.

    All the smooth families here are exchangeable, so c(alpha | u) du is the
    conditional law of the first coordinate given the second equals alpha,
    and its quantile map is the conditional inverse with the roles swapped.
    """
    t, tw = unit_rule(nodes)
    u = conditional_inverse(copula, t[None, :], np.asarray(alphas, dtype=float)[:, None])
    return np.asarray(u, dtype=float), tw


def density_weighted_mean_batch(copula: CopulaSpec, q_curves: np.ndarray,
                                alphas: np.ndarray,
                                quad: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """Row-wise density-weighted means from quantile curves on the grid."""
    if not has_density(copula):
        raise DensityUndefinedError(f"{copula.family.value} has no density")
    q_curves = np.asarray(q_curves, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    u_grid, _ = unit_rule(quad.nodes)
    u, tw = _density_measure_u_nodes(copula, alphas, quad.nodes)
    qv = _interp_rows(u, u_grid, q_curves)
    return np.sum(qv * tw[None, :], axis=1)


def density_weighted_mean(copula: CopulaSpec, q, alpha: float,
                          quad: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Integral of q(u) against the conditional copula density c(alpha | u).

    This is the correction integrand paired with the treatment residual in
    the general-copula moment.  Computed as a uniform integral over the
    conditional quantile map of u given the second coordinate at alpha.
    Undefined for the Frechet bounds.
    """
    if not has_density(copula):
        raise DensityUndefinedError(f"{copula.family.value} has no density")
    alpha = _check_alpha(alpha)
    u, tw = _density_measure_u_nodes(copula, np.array([alpha]), quad.nodes)
    return float(np.sum(tw * _eval_q(q, u[0])))


def binary_worst_case_contrast(mu, rho_sx):
    """Closed-form upper-bound contrast for binary outcomes.

    Equals min(mu / rho, (1 - mu) / (1 - rho)) where mu is the conditional
    outcome mean and rho the surrogacy score.
    """
    mu = np.asarray(mu, dtype=float)
    rho_sx = np.asarray(rho_sx, dtype=float)
    if np.any((mu <= 0.0) | (mu >= 1.0)) or np.any((rho_sx <= 0.0) | (rho_sx >= 1.0)):
        raise ValueError("mu and rho_sx must be interior to (0, 1)")
    out = np.minimum(mu / rho_sx, (1.0 - mu) / (1.0 - rho_sx))
    if out.ndim == 0:
        return float(out)
    return out

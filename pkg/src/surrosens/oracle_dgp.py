"""Benchmark data-generating process with analytic ground truth.

The design: X is uniform on [0, 1], the surrogate is S = X + W + noise with
standard normal noise and W Bernoulli(rho), and the long-term outcome is
Y = S + 0.5 X + noise.  Treatment is represented through a latent uniform
threshold, W = 1{eps > 1 - p(S, X)} with p the logistic surrogacy score, and
the chosen copula couples eps with the outcome noise.  Everything needed by
the estimators (scores, joint density, conditional quantiles, weighted
indices, and the long-term ATE itself) is available in closed form or by
quadrature, so simulated runs can be checked against exact targets.

Under the independence copula the ATE equals 1 for every rho.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .copulas import (
    CopulaFamily,
    CopulaSpec,
    conditional_inverse,
    spec_from_tau,
)
from .data import CombinedDataset
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig
from .wsi import wsi

__all__ = [
    "DgpConfig",
    "OracleCurvePoint",
    "true_surrogacy_score",
    "joint_density",
    "true_quantile",
    "conditional_mean",
    "oracle_ate",
    "oracle_curve",
    "sign_change_threshold",
    "simulate",
]

_NORM_PDF_C = 1.0 / np.sqrt(2.0 * np.pi)


def _phi(z):
    return _NORM_PDF_C * np.exp(-0.5 * np.asarray(z, dtype=float) ** 2)


@dataclass(frozen=True)
class DgpConfig:
    """Simulation settings.

    ``rho`` is the marginal treatment probability, ``copula`` couples the
    treatment latent with the outcome noise, and ``s_range`` is the surrogate
    truncation window used by the quadrature oracles.  ``one_draw`` switches
    to the variant where the treatment recorded is the same marginal draw
    that enters the surrogate equation.
    """

    rho: float
    copula: CopulaSpec
    n: int
    seed: int
    s_range: tuple = (-4.0, 6.0)
    p_experimental: float = 0.5
    one_draw: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be interior to (0, 1), got {self.rho}")
        if not 0.0 < self.p_experimental < 1.0:
            raise ValueError("p_experimental must be interior to (0, 1)")
        if self.n < 1:
            raise ValueError("n must be positive")


@dataclass(frozen=True)
class OracleCurvePoint:
    tau_k: float
    ate: float


def true_surrogacy_score(s, x, rho: float):
    """P(W = 1 | S = s, X = x): logistic in s - x with prior odds rho/(1-rho)."""
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must be interior to (0, 1)")
    odds = (1.0 - rho) / rho
    out = 1.0 / (1.0 + odds * np.exp(-(s - x - 0.5)))
    if out.ndim == 0:
        return float(out)
    return out


def joint_density(s, x, rho: float):
    """Density of (S, X): a two-component normal location mixture on x in [0, 1]."""
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    inside = (x >= 0.0) & (x <= 1.0)
    out = (1.0 - rho) * _phi(s - x) + rho * _phi(s - x - 1.0)
    out = np.where(inside, out, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def true_quantile(u, s, x):
    """Conditional outcome quantile: s + 0.5 x + standard normal quantile."""
    u = np.asarray(u, dtype=float)
    return np.asarray(s, dtype=float) + 0.5 * np.asarray(x, dtype=float) + ndtri(u)


def conditional_mean(s, x):
    """Conditional outcome mean s + 0.5 x."""
    return np.asarray(s, dtype=float) + 0.5 * np.asarray(x, dtype=float)


def _index_adjustment(copula: CopulaSpec, alpha: float, w: int, nodes: int,
                      noise_quantile=ndtri) -> float:
    """Weighted mean of the outcome-noise quantile under sigma_w(.; alpha).

    This is the arm-w index minus the conditional mean; zero under
    independence and for a degenerate (point-mass) outcome noise.
    """
    family = copula.family
    if family is CopulaFamily.INDEPENDENCE:
        return 0.0
    return wsi(noise_quantile, copula, w, alpha, QuadratureConfig(nodes))


def index_adjustment_table(copula: CopulaSpec, w: int = 1, nodes: int = 256,
                           grid_n: int = 513, noise_quantile=ndtri):
    """Interpolant of the arm-w index adjustment as a function of alpha.

    The adjustment is smooth in alpha, so a monotone cubic through a
    cosine-spaced grid reproduces it to well below the outer quadrature
    tolerance while making the two-dimensional integrand cheap.
    """
    from scipy.interpolate import PchipInterpolator

    if copula.family is CopulaFamily.INDEPENDENCE:
        return lambda a: np.zeros_like(np.asarray(a, dtype=float))
    t = np.linspace(0.0, 1.0, grid_n)
    grid = 0.5 * (1.0 - np.cos(np.pi * t))
    grid = np.clip(grid, 1e-7, 1.0 - 1e-7)
    vals = np.array(
        [_index_adjustment(copula, a, w, nodes, noise_quantile) for a in grid]
    )
    if np.all(vals == 0.0):
        return lambda a: np.zeros_like(np.asarray(a, dtype=float))
    return PchipInterpolator(grid, vals, extrapolate=True)


def oracle_ate(copula: CopulaSpec, rho: float,
               quad_cfg: QuadratureConfig = DEFAULT_QUADRATURE,
               epsabs: float = 1e-6,
               s_range: tuple = (-4.0, 6.0),
               noise_quantile=ndtri) -> float:
    """Long-term ATE under the benchmark design for a given coupling copula.

    Computed from the surrogacy-score form of the identification display by
    nested adaptive quadrature: the outer expectation integrates over the
    truncated (s, x) density, the inner integral is the arm-1 weighted index
    at each (s, x), tabulated over the score level and interpolated.

    ``noise_quantile`` is the quantile function of the conditional outcome
    noise; passing a constant makes the conditional law degenerate and the
    result copula-free.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must be interior to (0, 1)")
    s_lo, s_hi = s_range
    denom = rho * (1.0 - rho)
    adj = index_adjustment_table(copula, 1, quad_cfg.nodes, noise_quantile=noise_quantile)

    def integrand(s: float, x: float) -> float:
        p_sx = true_surrogacy_score(s, x, rho)
        mu1 = conditional_mean(s, x) + float(adj(1.0 - p_sx))
        val = p_sx / denom * mu1 - conditional_mean(s, x) / (1.0 - rho)
        return val * joint_density(s, x, rho)

    def inner(x: float) -> float:
        val, _ = quad(integrand, s_lo, s_hi, args=(x,), epsabs=epsabs, epsrel=1e-6,
                      limit=200)
        return val

    val, _ = quad(inner, 0.0, 1.0, epsabs=epsabs, epsrel=1e-6, limit=200)
    return float(val)


def oracle_curve(family: CopulaFamily, tau_grid, rho: float,
                 quad_cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> list[OracleCurvePoint]:
    """One exact ATE per Kendall's-tau grid point; tau = 0 uses independence."""
    out = []
    for tau in tau_grid:
        spec = spec_from_tau(family, float(tau))
        out.append(OracleCurvePoint(float(tau), oracle_ate(spec, rho, quad_cfg)))
    return out


def sign_change_threshold(family: CopulaFamily, rho: float,
                          bracket: tuple = (-0.9, -0.1),
                          quad_cfg: QuadratureConfig = DEFAULT_QUADRATURE,
                          xtol: float = 1e-3) -> float:
    """Kendall's tau at which the oracle ATE crosses zero."""

    def f(tau: float) -> float:
        return oracle_ate(spec_from_tau(family, tau), rho, quad_cfg)

    return float(brentq(f, bracket[0], bracket[1], xtol=xtol))


def simulate(config: DgpConfig, return_latent: bool = False):
    """Draw a combined two-sample dataset from the benchmark design.

    The surrogate equation uses an independent marginal treatment draw; the
    recorded treatment is regenerated from the latent uniform through the
    surrogacy-score threshold so that the copula couples treatment with the
    outcome noise.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n
    x = rng.uniform(size=n)
    w_marginal = (rng.uniform(size=n) < config.rho).astype(float)
    eta_s = rng.standard_normal(n)
    eps = rng.uniform(size=n)
    z = rng.uniform(size=n)
    is_exp = rng.uniform(size=n) < config.p_experimental

    v = np.asarray(conditional_inverse(config.copula, z, eps), dtype=float)
    eta_y = ndtri(np.clip(v, 1e-12, 1.0 - 1.0e-12))

    if config.one_draw:
        w_marginal = (eps > 1.0 - config.rho).astype(float)
        s = x + w_marginal + eta_s
        w_struct = w_marginal
    else:
        s = x + w_marginal + eta_s
        p_sx = true_surrogacy_score(s, x, config.rho)
        w_struct = (eps > 1.0 - p_sx).astype(float)

    y = s + 0.5 * x + eta_y
    ds = CombinedDataset(
        is_exp=is_exp,
        w=np.where(is_exp, w_struct, np.nan),
        y=np.where(is_exp, np.nan, y),
        s=s.reshape(-1, 1),
        x=x.reshape(-1, 1),
    )
    if return_latent:
        return ds, {"eps": eps, "v": v, "eta_y": eta_y, "w_struct": w_struct, "y": y}
    return ds


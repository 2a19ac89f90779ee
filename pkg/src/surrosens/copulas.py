"""Bivariate copula families and their conditional distributions.

Eight families are supported: independence, Gaussian, Clayton, Gumbel,
Frank, Plackett, and the two Frechet-Hoeffding bounds.  Each family exposes
the joint CDF ``C(u, v)``, the conditional CDF ``C(alpha | u)`` of the second
coordinate given the first, the conditional density ``c(alpha | u)``, and the
derivative of the conditional CDF with respect to the conditioning
coordinate.  Dependence strength is parameterised either by the family
parameter ``theta`` or by Kendall's tau, with conversions in both directions.

All evaluation functions are pure, accept scalars or numpy arrays, and are
safe for concurrent use.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri, owens_t

__all__ = [
    "CopulaFamily",
    "CopulaSpec",
    "ParameterError",
    "TauRangeError",
    "TauIsZeroError",
    "DensityUndefinedError",
    "DEFAULT_TAU_GRID",
    "joint_cdf",
    "cond_cdf",
    "cond_cdf_limit",
    "cond_pdf",
    "d_du_cond_cdf",
    "tau_to_theta",
    "theta_to_tau",
    "spec_from_tau",
    "attainable_tau_range",
    "concordance_leq",
    "is_stochastically_increasing",
    "conditional_inverse",
    "inverse_cond_cdf_in_u",
    "debye1",
    "is_smooth",
    "has_density",
]

# Kendall's-tau grid used by the sensitivity workflows.
DEFAULT_TAU_GRID = (-0.9, -0.75, -0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.5, 0.75, 0.9)

# |theta| beyond this overflows the Frank closed forms in double precision.
_FRANK_THETA_MAX = 300.0
# |tau| below this is treated as exact independence.
_TAU_INDEPENDENCE_EPS = 1e-6
# Conditioning coordinate is clipped into [eps, 1-eps] before evaluating
# closed forms; boundary values are understood as one-sided limits.
_U_EPS = 1e-12


class ParameterError(ValueError):
    """Dependence parameter outside the family's valid range."""


class TauRangeError(ValueError):
    """Kendall's tau outside the range attainable by the family."""


class TauIsZeroError(ValueError):
    """Tau of zero has no finite parameter; caller should use independence."""


class DensityUndefinedError(ValueError):
    """The family has no copula density (Frechet bounds)."""


class CopulaFamily(str, enum.Enum):
    INDEPENDENCE = "independence"
    GAUSSIAN = "gaussian"
    CLAYTON = "clayton"
    GUMBEL = "gumbel"
    FRANK = "frank"
    PLACKETT = "plackett"
    FRECHET_LOWER = "frechet_lower"
    FRECHET_UPPER = "frechet_upper"


_PARAMETRIC = {
    CopulaFamily.GAUSSIAN,
    CopulaFamily.CLAYTON,
    CopulaFamily.GUMBEL,
    CopulaFamily.FRANK,
    CopulaFamily.PLACKETT,
}


@dataclass(frozen=True)
class CopulaSpec:
    """A copula family together with its dependence parameter.

    ``theta`` must be omitted (``None``) for the independence copula and the
    Frechet bounds, and must lie in the family's valid range otherwise:
    Gaussian in (-1, 1), Clayton in [-1, inf) without 0, Gumbel in [1, inf),
    Frank any nonzero real (clamped to +-300 for numerical safety), Plackett
    positive and different from 1.
    """

    family: CopulaFamily
    theta: float | None = None

    def __post_init__(self) -> None:
        family = CopulaFamily(self.family)
        object.__setattr__(self, "family", family)
        if family not in _PARAMETRIC:
            if self.theta is not None:
                raise ParameterError(f"{family.value} takes no parameter")
            return
        if self.theta is None:
            raise ParameterError(f"{family.value} requires a parameter")
        theta = float(self.theta)
        if not math.isfinite(theta):
            raise ParameterError("parameter must be finite")
        if family is CopulaFamily.GAUSSIAN and not -1.0 < theta < 1.0:
            raise ParameterError(f"gaussian parameter {theta} outside (-1, 1)")
        if family is CopulaFamily.CLAYTON and (theta < -1.0 or theta == 0.0):
            raise ParameterError(f"clayton parameter {theta} outside [-1, inf) \\ {{0}}")
        if family is CopulaFamily.GUMBEL and theta < 1.0:
            raise ParameterError(f"gumbel parameter {theta} outside [1, inf)")
        if family is CopulaFamily.FRANK:
            if theta == 0.0:
                raise ParameterError("frank parameter must be nonzero")
            theta = float(np.clip(theta, -_FRANK_THETA_MAX, _FRANK_THETA_MAX))
        if family is CopulaFamily.PLACKETT and (theta <= 0.0 or theta == 1.0):
            raise ParameterError(f"plackett parameter {theta} outside (0, inf) \\ {{1}}")
        object.__setattr__(self, "theta", theta)


INDEPENDENCE = CopulaSpec(CopulaFamily.INDEPENDENCE)
FRECHET_LOWER = CopulaSpec(CopulaFamily.FRECHET_LOWER)
FRECHET_UPPER = CopulaSpec(CopulaFamily.FRECHET_UPPER)


def is_smooth(spec: CopulaSpec) -> bool:
    """True when the conditional CDF is differentiable in both arguments."""
    return spec.family not in (CopulaFamily.FRECHET_LOWER, CopulaFamily.FRECHET_UPPER)


def has_density(spec: CopulaSpec) -> bool:
    """True when the family is absolutely continuous."""
    return is_smooth(spec)


def _prepare(*values):
    arrays = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in values])
    scalar = all(np.ndim(v) == 0 for v in values)
    return arrays, scalar


def _finish(out: np.ndarray, scalar: bool):
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# Gaussian helpers
# ---------------------------------------------------------------------------


def _bvn_cdf(x: np.ndarray, y: np.ndarray, rho: float) -> np.ndarray:
    """Standard bivariate normal CDF via Owen's T function.

    Arguments at exactly zero are nudged by 1e-13, which perturbs the result
    by at most ~4e-14 and avoids the 0/0 in the T-function arguments.
    """
    if abs(rho) >= 1.0 - 1e-12:
        px, py = ndtr(x), ndtr(y)
        if rho > 0:
            return np.minimum(px, py)
        return np.maximum(px + py - 1.0, 0.0)
    x = np.where(x == 0.0, 1e-13, x)
    y = np.where(y == 0.0, 1e-13, y)
    denom = math.sqrt(1.0 - rho * rho)
    ax = (y - rho * x) / (x * denom)
    ay = (x - rho * y) / (y * denom)
    beta = np.where(x * y > 0.0, 0.0, np.where(x + y >= 0.0, 0.0, 0.5))
    # opposite signs always incur the 1/2 correction
    beta = np.where(x * y < 0.0, 0.5, beta)
    out = 0.5 * (ndtr(x) + ndtr(y)) - owens_t(x, ax) - owens_t(y, ay) - beta
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Joint CDF
# ---------------------------------------------------------------------------


def joint_cdf(spec: CopulaSpec, u, v):
    """Evaluate the copula CDF C(u, v) on the unit square."""
    (u, v), scalar = _prepare(u, v)
    if np.any((u < 0) | (u > 1) | (v < 0) | (v > 1)):
        raise ParameterError("joint_cdf arguments must lie in [0, 1]")
    family, theta = spec.family, spec.theta
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if family is CopulaFamily.INDEPENDENCE:
            out = u * v
        elif family is CopulaFamily.FRECHET_UPPER:
            out = np.minimum(u, v)
        elif family is CopulaFamily.FRECHET_LOWER:
            out = np.maximum(u + v - 1.0, 0.0)
        elif family is CopulaFamily.GAUSSIAN:
            if theta == 0.0:
                out = u * v
            else:
                ui = np.clip(u, _U_EPS, 1.0 - _U_EPS)
                vi = np.clip(v, _U_EPS, 1.0 - _U_EPS)
                out = _bvn_cdf(ndtri(ui), ndtri(vi), theta)
        elif family is CopulaFamily.CLAYTON:
            ui = np.clip(u, _U_EPS, 1.0)
            vi = np.clip(v, _U_EPS, 1.0)
            t = ui ** (-theta) + vi ** (-theta) - 1.0
            out = np.where(t > 0.0, np.maximum(t, _U_EPS) ** (-1.0 / theta), 0.0)
        elif family is CopulaFamily.GUMBEL:
            ui = np.clip(u, _U_EPS, 1.0 - _U_EPS)
            vi = np.clip(v, _U_EPS, 1.0 - _U_EPS)
            a = (-np.log(ui)) ** theta + (-np.log(vi)) ** theta
            out = np.exp(-(a ** (1.0 / theta)))
        elif family is CopulaFamily.FRANK:
            num = np.expm1(-theta * u) * np.expm1(-theta * v)
            out = -np.log1p(num / np.expm1(-theta)) / theta
        elif family is CopulaFamily.PLACKETT:
            b = 1.0 + (theta - 1.0) * (u + v)
            s = np.sqrt(b * b - 4.0 * theta * (theta - 1.0) * u * v)
            out = (b - s) / (2.0 * (theta - 1.0))
        else:  # pragma: no cover
            raise ParameterError(f"unknown family {family}")
    # Enforce the uniform-margin boundary identities exactly.
    out = np.where(v == 0.0, 0.0, out)
    out = np.where(u == 0.0, 0.0, out)
    out = np.where(v == 1.0, u, out)
    out = np.where(u == 1.0, v, out)
    out = np.clip(out, 0.0, 1.0)
    return _finish(out, scalar)


# ---------------------------------------------------------------------------
# Conditional CDF  C(alpha | u) = d/du C(u, alpha)
# ---------------------------------------------------------------------------


def cond_cdf(spec: CopulaSpec, alpha, u):
    """Conditional CDF of the second coordinate at ``alpha`` given U = u.

    Closed forms are used for every family.  The Frechet bounds return the
    almost-everywhere indicator versions, with the discontinuity point taking
    its left limit in u.
    """
    (alpha, u), scalar = _prepare(alpha, u)
    family, theta = spec.family, spec.theta
    uc = np.clip(u, _U_EPS, 1.0 - _U_EPS)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if family is CopulaFamily.INDEPENDENCE:
            out = alpha * np.ones_like(uc)
        elif family is CopulaFamily.FRECHET_UPPER:
            out = (u <= alpha).astype(float)
        elif family is CopulaFamily.FRECHET_LOWER:
            out = (u > 1.0 - alpha).astype(float)
        elif family is CopulaFamily.GAUSSIAN:
            if theta == 0.0:
                out = alpha * np.ones_like(uc)
            else:
                z = (ndtri(alpha) - theta * ndtri(uc)) / math.sqrt(1.0 - theta * theta)
                out = ndtr(z)
        elif family is CopulaFamily.CLAYTON:
            t = uc ** (-theta) + alpha ** (-theta) - 1.0
            good = t > 0.0
            ts = np.where(good, t, 1.0)
            out = np.where(good, uc ** (-theta - 1.0) * ts ** (-1.0 / theta - 1.0), 0.0)
        elif family is CopulaFamily.GUMBEL:
            lu = -np.log(uc)
            la = -np.log(np.clip(alpha, _U_EPS, 1.0 - _U_EPS))
            a = lu ** theta + la ** theta
            c = np.exp(-(a ** (1.0 / theta)))
            out = c * a ** (1.0 / theta - 1.0) * lu ** (theta - 1.0) / uc
        elif family is CopulaFamily.FRANK:
            ea = np.expm1(-theta * alpha)
            eu = np.exp(-theta * uc)
            denom = np.expm1(-theta) + np.expm1(-theta * uc) * ea
            out = eu * ea / denom
        elif family is CopulaFamily.PLACKETT:
            b = 1.0 + (theta - 1.0) * (uc + alpha)
            s = np.sqrt(b * b - 4.0 * theta * (theta - 1.0) * uc * alpha)
            out = 0.5 * (1.0 - (b - 2.0 * theta * alpha) / s)
        else:  # pragma: no cover
            raise ParameterError(f"unknown family {family}")
    out = np.clip(out, 0.0, 1.0)
    return _finish(out, scalar)


# ---------------------------------------------------------------------------
# Conditional density  c(alpha | u) = d^2/du dalpha C(u, alpha)
# ---------------------------------------------------------------------------


def cond_pdf(spec: CopulaSpec, alpha, u):
    """Copula density evaluated at (u, alpha).

    Undefined for the Frechet bounds, which carry no absolutely continuous
    component.
    """
    if not has_density(spec):
        raise DensityUndefinedError(f"{spec.family.value} has no density")
    (alpha, u), scalar = _prepare(alpha, u)
    family, theta = spec.family, spec.theta
    uc = np.clip(u, _U_EPS, 1.0 - _U_EPS)
    ac = np.clip(alpha, _U_EPS, 1.0 - _U_EPS)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if family is CopulaFamily.INDEPENDENCE or (
            family is CopulaFamily.GAUSSIAN and theta == 0.0
        ):
            out = np.ones_like(uc)
        elif family is CopulaFamily.GAUSSIAN:
            xx = ndtri(uc)
            yy = ndtri(ac)
            r2 = 1.0 - theta * theta
            expo = (2.0 * theta * xx * yy - theta * theta * (xx * xx + yy * yy)) / (2.0 * r2)
            out = np.exp(expo) / math.sqrt(r2)
        elif family is CopulaFamily.CLAYTON:
            t = uc ** (-theta) + ac ** (-theta) - 1.0
            good = t > 0.0
            ts = np.where(good, t, 1.0)
            out = np.where(
                good,
                (1.0 + theta) * (uc * ac) ** (-theta - 1.0) * ts ** (-1.0 / theta - 2.0),
                0.0,
            )
        elif family is CopulaFamily.GUMBEL:
            lu = -np.log(uc)
            la = -np.log(ac)
            a = lu ** theta + la ** theta
            c = np.exp(-(a ** (1.0 / theta)))
            out = (
                c
                / (uc * ac)
                * (lu * la) ** (theta - 1.0)
                * a ** (2.0 / theta - 2.0)
                * (1.0 + (theta - 1.0) * a ** (-1.0 / theta))
            )
        elif family is CopulaFamily.FRANK:
            em1 = -np.expm1(-theta)
            denom = em1 - (-np.expm1(-theta * uc)) * (-np.expm1(-theta * ac))
            out = theta * em1 * np.exp(-theta * (uc + ac)) / (denom * denom)
        elif family is CopulaFamily.PLACKETT:
            b = 1.0 + (theta - 1.0) * (uc + ac)
            s2 = b * b - 4.0 * theta * (theta - 1.0) * uc * ac
            out = theta * (1.0 + (theta - 1.0) * (uc + ac - 2.0 * uc * ac)) / s2 ** 1.5
        else:  # pragma: no cover
            raise ParameterError(f"unknown family {family}")
    out = np.maximum(out, 0.0)
    return _finish(out, scalar)


# ---------------------------------------------------------------------------
# d/du of the conditional CDF
# ---------------------------------------------------------------------------

_FD_STEP = 1e-5


def d_du_cond_cdf(spec: CopulaSpec, alpha, u):
    """Derivative of C(alpha | u) with respect to u.

    Negative everywhere for stochastically increasing families.  Closed forms
    cover independence, Gaussian, Clayton, Frank, and Plackett; Gumbel falls
    back to a central finite difference with step 1e-5 clipped to [0, 1].
    """
    if not is_smooth(spec):
        raise DensityUndefinedError(f"{spec.family.value} is not differentiable in u")
    (alpha, u), scalar = _prepare(alpha, u)
    family, theta = spec.family, spec.theta
    uc = np.clip(u, _U_EPS, 1.0 - _U_EPS)
    ac = np.clip(alpha, _U_EPS, 1.0 - _U_EPS)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if family is CopulaFamily.INDEPENDENCE or (
            family is CopulaFamily.GAUSSIAN and theta == 0.0
        ):
            out = np.zeros_like(uc)
        elif family is CopulaFamily.GAUSSIAN:
            r = math.sqrt(1.0 - theta * theta)
            xx = ndtri(uc)
            z = (ndtri(ac) - theta * xx) / r
            # phi(z) / phi(x) computed in log space to avoid 0/0 in the tails
            log_ratio = 0.5 * (xx * xx - z * z)
            out = -(theta / r) * np.exp(log_ratio)
        elif family is CopulaFamily.CLAYTON:
            t = uc ** (-theta) + ac ** (-theta) - 1.0
            good = t > 0.0
            ts = np.where(good, t, 1.0)
            out = np.where(
                good,
                (theta + 1.0)
                * uc ** (-theta - 2.0)
                * ts ** (-1.0 / theta - 2.0)
                * (1.0 - ac ** (-theta)),
                0.0,
            )
        elif family is CopulaFamily.FRANK:
            ea = np.expm1(-theta * ac)
            eu = np.exp(-theta * uc)
            denom = np.expm1(-theta) + np.expm1(-theta * uc) * ea
            out = -theta * eu * ea * (np.exp(-theta) - np.exp(-theta * ac)) / (denom * denom)
        elif family is CopulaFamily.PLACKETT:
            b = 1.0 + (theta - 1.0) * (uc + ac)
            s2 = b * b - 4.0 * theta * (theta - 1.0) * uc * ac
            out = -2.0 * theta * (theta - 1.0) * ac * (1.0 - ac) / s2 ** 1.5
        else:
            h = _FD_STEP
            lo = np.clip(uc - h, 0.0, 1.0)
            hi = np.clip(uc + h, 0.0, 1.0)
            out = (cond_cdf(spec, ac, hi) - cond_cdf(spec, ac, lo)) / (hi - lo)
            out = np.asarray(out, dtype=float)
    return _finish(np.asarray(out, dtype=float), scalar)


def cond_cdf_limit(spec: CopulaSpec, alpha, at: int):
    """Exact limit of C(alpha | u) as u -> 0 (``at=0``) or u -> 1 (``at=1``)."""
    (alpha,), scalar = _prepare(alpha)
    family, theta = spec.family, spec.theta
    if family is CopulaFamily.INDEPENDENCE or (
        family is CopulaFamily.GAUSSIAN and theta == 0.0
    ):
        out = alpha * np.ones_like(alpha)
    elif family is CopulaFamily.FRECHET_UPPER:
        out = np.ones_like(alpha) if at == 0 else np.zeros_like(alpha)
    elif family is CopulaFamily.FRECHET_LOWER:
        out = np.zeros_like(alpha) if at == 0 else np.ones_like(alpha)
    elif family is CopulaFamily.GAUSSIAN:
        if (theta > 0) == (at == 0):
            out = np.ones_like(alpha)
        else:
            out = np.zeros_like(alpha)
    elif family is CopulaFamily.FRANK:
        out = np.asarray(cond_cdf(spec, alpha, float(at)), dtype=float)
    elif family is CopulaFamily.GUMBEL:
        if theta == 1.0:
            out = alpha * np.ones_like(alpha)
        else:
            out = np.ones_like(alpha) if at == 0 else np.zeros_like(alpha)
    elif family is CopulaFamily.CLAYTON:
        if at == 0:
            out = np.ones_like(alpha) if theta > 0 else np.zeros_like(alpha)
        else:
            out = np.asarray(alpha, dtype=float) ** (1.0 + theta)
    else:
        out = np.asarray(cond_cdf(spec, alpha, float(at)), dtype=float)
    return _finish(out, scalar)


# ---------------------------------------------------------------------------
# Kendall's tau <-> theta
# ---------------------------------------------------------------------------


def debye1(theta: float) -> float:
    """First Debye function D1 computed by adaptive quadrature (abs tol 1e-12).

    The integrand t / (e^t - 1) takes its limit value 1 at t = 0.
    """
    theta = float(theta)
    if theta == 0.0:
        return 1.0

    def integrand(t):
        if t == 0.0:
            return 1.0
        if t > 700.0:
            return 0.0
        return t / math.expm1(t)

    val, _ = quad(integrand, 0.0, theta, epsabs=1e-12, limit=200)
    return val / theta


def _frank_tau(theta: float) -> float:
    return 1.0 - 4.0 / theta * (1.0 - debye1(theta))


@lru_cache(maxsize=None)
def _plackett_nodes(n: int = 400):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _plackett_tau(theta: float) -> float:
    """Kendall's tau for the Plackett family: 4 * E[C(U, V)] - 1 by tensor quadrature."""
    u, w = _plackett_nodes()
    spec = CopulaSpec(CopulaFamily.PLACKETT, theta)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    cv = joint_cdf(spec, uu, vv) * cond_pdf(spec, vv, uu)
    return float(4.0 * (w[:, None] * w[None, :] * cv).sum() - 1.0)


def attainable_tau_range(family: CopulaFamily) -> tuple[float, float]:
    """Open interval of Kendall's tau values the family can represent."""
    family = CopulaFamily(family)
    if family is CopulaFamily.GUMBEL:
        return (0.0, 1.0)
    if family is CopulaFamily.FRANK:
        hi = _frank_tau(_FRANK_THETA_MAX)
        return (-hi, hi)
    if family in (CopulaFamily.GAUSSIAN, CopulaFamily.CLAYTON, CopulaFamily.PLACKETT):
        return (-1.0, 1.0)
    if family is CopulaFamily.INDEPENDENCE:
        return (0.0, 0.0)
    if family is CopulaFamily.FRECHET_UPPER:
        return (1.0, 1.0)
    return (-1.0, -1.0)


def tau_to_theta(family: CopulaFamily, tau: float) -> float:
    """Family parameter matching a target Kendall's tau.

    Raises ``TauIsZeroError`` at tau = 0 so the caller can substitute the
    independence copula, and ``TauRangeError`` outside the attainable range.
    """
    family = CopulaFamily(family)
    tau = float(tau)
    if not -1.0 < tau < 1.0:
        raise TauRangeError(f"tau {tau} outside (-1, 1)")
    if tau == 0.0:
        raise TauIsZeroError("tau of zero corresponds to the independence copula")
    if family is CopulaFamily.GAUSSIAN:
        return math.sin(0.5 * math.pi * tau)
    if family is CopulaFamily.CLAYTON:
        return 2.0 * tau / (1.0 - tau)
    if family is CopulaFamily.GUMBEL:
        if tau < 0.0:
            raise TauRangeError("gumbel supports positive dependence only")
        return 1.0 / (1.0 - tau)
    if family is CopulaFamily.FRANK:
        lo, hi = attainable_tau_range(family)
        if not lo <= tau <= hi:
            raise TauRangeError(f"frank tau limited to [{lo:.4f}, {hi:.4f}]")
        a = abs(tau)
        theta = brentq(lambda t: _frank_tau(t) - a, 1e-10, _FRANK_THETA_MAX, xtol=1e-13)
        return math.copysign(theta, tau)
    if family is CopulaFamily.PLACKETT:
        log_theta = brentq(
            lambda lt: _plackett_tau(round(math.exp(lt), 12)) - tau,
            math.log(1e-6),
            math.log(1e6),
            xtol=1e-12,
        )
        return math.exp(log_theta)
    raise TauRangeError(f"{family.value} has no tau parameterisation")


def theta_to_tau(family: CopulaFamily, theta: float) -> float:
    """Kendall's tau implied by a family parameter."""
    family = CopulaFamily(family)
    if family in _PARAMETRIC:
        CopulaSpec(family, float(theta))  # range validation
    if family is CopulaFamily.GAUSSIAN:
        return 2.0 / math.pi * math.asin(float(theta))
    if family is CopulaFamily.CLAYTON:
        return float(theta) / (float(theta) + 2.0)
    if family is CopulaFamily.GUMBEL:
        return 1.0 - 1.0 / float(theta)
    if family is CopulaFamily.FRANK:
        return _frank_tau(float(theta))
    if family is CopulaFamily.PLACKETT:
        return _plackett_tau(round(float(theta), 12))
    if family is CopulaFamily.INDEPENDENCE:
        return 0.0
    if family is CopulaFamily.FRECHET_UPPER:
        return 1.0
    return -1.0


def spec_from_tau(family: CopulaFamily, tau: float) -> CopulaSpec:
    """Build a spec from Kendall's tau, dispatching |tau| < 1e-6 to independence."""
    family = CopulaFamily(family)
    if abs(float(tau)) < _TAU_INDEPENDENCE_EPS:
        return INDEPENDENCE
    if family is CopulaFamily.INDEPENDENCE:
        raise TauRangeError("independence copula only supports tau = 0")
    if family in (CopulaFamily.FRECHET_LOWER, CopulaFamily.FRECHET_UPPER):
        raise TauRangeError("frechet bounds have fixed tau of -1 and 1")
    return CopulaSpec(family, tau_to_theta(family, tau))


# ---------------------------------------------------------------------------
# Order relations
# ---------------------------------------------------------------------------


def concordance_leq(a: CopulaSpec, b: CopulaSpec, grid_n: int = 50) -> bool:
    """True when C_a <= C_b pointwise (+1e-12) on the interior lattice."""
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    g = np.arange(1, grid_n + 1) / (grid_n + 1.0)
    uu, vv = np.meshgrid(g, g, indexing="ij")
    return bool(np.all(joint_cdf(a, uu, vv) <= joint_cdf(b, uu, vv) + 1e-12))


def is_stochastically_increasing(spec: CopulaSpec, grid_n: int = 21) -> bool:
    """True when C(alpha | u) is non-increasing in u for every grid alpha."""
    if grid_n < 3:
        raise ValueError("grid_n must be at least 3")
    alphas = np.arange(1, grid_n + 1) / (grid_n + 1.0)
    us = np.arange(1, grid_n + 1) / (grid_n + 1.0)
    vals = cond_cdf(spec, alphas[:, None], us[None, :])
    return bool(np.all(np.diff(vals, axis=1) <= 1e-10))


# ---------------------------------------------------------------------------
# Conditional inversion (sampling support)
# ---------------------------------------------------------------------------


def conditional_inverse(spec: CopulaSpec, z, u):
    """Solve C(v | u) = z for v, elementwise.

    The Frechet bounds are the deterministic maps v = u and v = 1 - u;
    Gaussian and Frank invert in closed form, the remaining families by
    bisection on the conditional CDF, which is monotone in its first
    argument.
    """
    (z, u), scalar = _prepare(z, u)
    family = spec.family
    theta = spec.theta
    if family is CopulaFamily.INDEPENDENCE:
        return _finish(np.asarray(z, dtype=float).copy(), scalar)
    if family is CopulaFamily.FRECHET_UPPER:
        return _finish(np.asarray(u, dtype=float).copy(), scalar)
    if family is CopulaFamily.FRECHET_LOWER:
        return _finish(1.0 - np.asarray(u, dtype=float), scalar)
    if family is CopulaFamily.GAUSSIAN:
        if theta == 0.0:
            return _finish(np.asarray(z, dtype=float).copy(), scalar)
        r = math.sqrt(1.0 - theta * theta)
        zc = np.clip(z, _U_EPS, 1.0 - _U_EPS)
        uc = np.clip(u, _U_EPS, 1.0 - _U_EPS)
        out = ndtr(theta * ndtri(uc) + r * ndtri(zc))
        return _finish(out, scalar)
    if family is CopulaFamily.FRANK:
        zc = np.clip(z, _U_EPS, 1.0 - _U_EPS)
        uc = np.clip(u, _U_EPS, 1.0 - _U_EPS)
        with np.errstate(over="ignore"):
            gu = np.expm1(-theta * uc)
            gv = zc * np.expm1(-theta) / (np.exp(-theta * uc) - zc * gu)
            out = -np.log1p(gv) / theta
        return _finish(np.clip(out, 0.0, 1.0), scalar)
    lo = np.full_like(np.asarray(z, dtype=float), 0.0)
    hi = np.full_like(lo, 1.0)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        below = cond_cdf(spec, mid, u) < z
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return _finish(0.5 * (lo + hi), scalar)


def inverse_cond_cdf_in_u(spec: CopulaSpec, v, alpha):
    """Solve C(alpha | u) = v for the conditioning coordinate u.

    C(alpha | u) is monotone in u for every family here (decreasing under
    positive dependence, increasing under negative).  Gaussian and Frank
    invert in closed form; the others use bisection.
    """
    if not is_smooth(spec):
        raise DensityUndefinedError("inversion in u needs a smooth copula")
    (v, alpha), scalar = _prepare(v, alpha)
    family, theta = spec.family, spec.theta
    if family is CopulaFamily.INDEPENDENCE or (
        family is CopulaFamily.GAUSSIAN and theta == 0.0
    ):
        raise ParameterError("conditional CDF is constant in u under independence")
    if family is CopulaFamily.GAUSSIAN:
        r = math.sqrt(1.0 - theta * theta)
        vc = np.clip(v, _U_EPS, 1.0 - _U_EPS)
        ac = np.clip(alpha, _U_EPS, 1.0 - _U_EPS)
        out = ndtr((ndtri(ac) - r * ndtri(vc)) / theta)
        return _finish(np.clip(out, 0.0, 1.0), scalar)
    if family is CopulaFamily.FRANK:
        vc = np.clip(v, _U_EPS, 1.0 - _U_EPS)
        ac = np.clip(alpha, _U_EPS, 1.0 - _U_EPS)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            ga = np.expm1(-theta * ac)
            # C(alpha|u) = e^{-theta u} ga / (g1 + g(u) ga) = v solved for u
            expo = vc * (np.expm1(-theta) - ga) / (ga * (1.0 - vc))
            out = -np.log(expo) / theta
        return _finish(np.clip(out, 0.0, 1.0), scalar)
    lo = np.full(np.broadcast(v, alpha).shape, _U_EPS)
    hi = np.full_like(lo, 1.0 - _U_EPS)
    increasing = np.asarray(
        cond_cdf(spec, alpha, hi) >= cond_cdf(spec, alpha, lo)
    )
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        val = cond_cdf(spec, alpha, mid)
        go_right = np.where(increasing, val < v, val > v)
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    return _finish(0.5 * (lo + hi), scalar)

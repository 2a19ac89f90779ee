"""Copula family evaluations, tau calibration, and order relations.

Expected values marked as frozen were computed from independent oracles:
hand evaluation of the Archimedean generator forms, the standard-normal
CDF/quantile, Debye-function quadrature plus Brent inversion, and
scipy's bivariate normal CDF.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal, norm

from surrosens.copulas import (
    DEFAULT_TAU_GRID,
    CopulaFamily,
    CopulaSpec,
    DensityUndefinedError,
    ParameterError,
    TauIsZeroError,
    TauRangeError,
    attainable_tau_range,
    concordance_leq,
    cond_cdf,
    cond_cdf_limit,
    cond_pdf,
    conditional_inverse,
    d_du_cond_cdf,
    debye1,
    is_stochastically_increasing,
    joint_cdf,
    spec_from_tau,
    tau_to_theta,
    theta_to_tau,
)

GAUSS05 = CopulaSpec(CopulaFamily.GAUSSIAN, 0.5)
INDEP = CopulaSpec(CopulaFamily.INDEPENDENCE)
UPPER = CopulaSpec(CopulaFamily.FRECHET_UPPER)
LOWER = CopulaSpec(CopulaFamily.FRECHET_LOWER)

SMOOTH_SPECS = [
    CopulaSpec(CopulaFamily.GAUSSIAN, 0.5),
    CopulaSpec(CopulaFamily.GAUSSIAN, -0.6),
    CopulaSpec(CopulaFamily.CLAYTON, 2.0),
    CopulaSpec(CopulaFamily.CLAYTON, -0.4),
    CopulaSpec(CopulaFamily.GUMBEL, 2.0),
    CopulaSpec(CopulaFamily.FRANK, 5.736282707019972),
    CopulaSpec(CopulaFamily.FRANK, -4.0),
    CopulaSpec(CopulaFamily.PLACKETT, 6.0),
    CopulaSpec(CopulaFamily.PLACKETT, 0.2),
]

ALL_SPECS = SMOOTH_SPECS + [INDEP, UPPER, LOWER]


# ---------------------------------------------------------------------------
# joint CDF
# ---------------------------------------------------------------------------


def test_joint_cdf_frechet_and_independence_values():
    assert joint_cdf(UPPER, 0.3, 0.7) == pytest.approx(0.3, abs=1e-15)
    assert joint_cdf(LOWER, 0.3, 0.6) == pytest.approx(0.0, abs=1e-15)
    assert joint_cdf(CopulaSpec(CopulaFamily.GAUSSIAN, 0.0), 0.4, 0.5) == pytest.approx(
        0.20, abs=1e-12
    )


def test_joint_cdf_clayton_generator_form():
    # frozen: (0.5^-2 + 0.5^-2 - 1)^(-1/2) = 1/sqrt(7)
    assert joint_cdf(CopulaSpec(CopulaFamily.CLAYTON, 2.0), 0.5, 0.5) == pytest.approx(
        0.37796447300922725, abs=1e-12
    )


@pytest.mark.parametrize(
    "u,v,rho,expected",
    [
        (0.5, 0.5, 0.6, 0.3524163823495667),
        (0.3, 0.7, 0.5, 0.26690384886736307),
        (0.2, 0.9, -0.7, 0.13100091894908322),
        (0.5, 0.25, 0.5, 0.18986244633905713),
    ],
)
def test_joint_cdf_gaussian_against_mvn_oracle(u, v, rho, expected):
    # frozen from scipy.stats.multivariate_normal.cdf
    spec = CopulaSpec(CopulaFamily.GAUSSIAN, rho)
    assert joint_cdf(spec, u, v) == pytest.approx(expected, abs=5e-9)


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_joint_cdf_uniform_margins(spec):
    g = np.linspace(0.0, 1.0, 21)
    assert np.allclose(joint_cdf(spec, g, np.zeros_like(g)), 0.0, atol=1e-10)
    assert np.allclose(joint_cdf(spec, np.zeros_like(g), g), 0.0, atol=1e-10)
    assert np.allclose(joint_cdf(spec, g, np.ones_like(g)), g, atol=1e-10)
    assert np.allclose(joint_cdf(spec, np.ones_like(g), g), g, atol=1e-10)


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_joint_cdf_two_increasing(spec):
    g = np.linspace(0.05, 0.95, 10)
    uu, vv = np.meshgrid(g, g, indexing="ij")
    c = joint_cdf(spec, uu, vv)
    rect = c[1:, 1:] - c[:-1, 1:] - c[1:, :-1] + c[:-1, :-1]
    assert np.all(rect >= -1e-12)


def test_joint_cdf_rejects_out_of_square():
    with pytest.raises(ParameterError):
        joint_cdf(GAUSS05, 1.2, 0.5)


# ---------------------------------------------------------------------------
# conditional CDF
# ---------------------------------------------------------------------------


def test_cond_cdf_independence_and_frechet():
    assert cond_cdf(INDEP, 0.37, 0.91) == pytest.approx(0.37, abs=1e-15)
    # d/du min(u, alpha) = 1{u < alpha}
    assert cond_cdf(UPPER, 0.7, 0.3) == pytest.approx(1.0)
    assert cond_cdf(UPPER, 0.3, 0.7) == pytest.approx(0.0)
    assert cond_cdf(LOWER, 0.7, 0.5) == pytest.approx(1.0)
    assert cond_cdf(LOWER, 0.3, 0.5) == pytest.approx(0.0)


def test_cond_cdf_gaussian_closed_form():
    # frozen: Phi((Phi^-1(0.5) - 0.5 Phi^-1(0.25)) / sqrt(0.75))
    assert cond_cdf(GAUSS05, 0.5, 0.25) == pytest.approx(0.651516091203203, abs=1e-12)


@pytest.mark.parametrize("spec", SMOOTH_SPECS)
def test_cond_cdf_is_du_derivative_of_joint_cdf(spec):
    h = 1e-6
    rng = np.random.default_rng(7)
    u = rng.uniform(0.05, 0.95, size=40)
    a = rng.uniform(0.05, 0.95, size=40)
    fd = (joint_cdf(spec, u + h, a) - joint_cdf(spec, u - h, a)) / (2 * h)
    assert np.allclose(cond_cdf(spec, a, u), fd, atol=5e-6)


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_cond_cdf_uniform_marginal_identity(spec):
    # int_0^1 C(alpha|u) du = alpha
    u = (np.arange(10_000) + 0.5) / 10_000
    for alpha in np.arange(0.1, 0.95, 0.1):
        assert abs(np.mean(cond_cdf(spec, alpha, u)) - alpha) < 1e-3


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_cond_cdf_monotone_in_alpha(spec):
    u = np.linspace(0.05, 0.95, 19)
    alphas = np.linspace(0.02, 0.98, 25)
    vals = cond_cdf(spec, alphas[:, None], u[None, :])
    assert np.all(np.diff(vals, axis=0) >= -1e-12)


@pytest.mark.parametrize("spec", SMOOTH_SPECS)
def test_cond_cdf_limits_are_approached_monotonically(spec):
    # convergence can be logarithmically slow, so check approach, not equality
    for alpha in (0.2, 0.5, 0.8):
        lim0 = cond_cdf_limit(spec, alpha, 0)
        lim1 = cond_cdf_limit(spec, alpha, 1)
        near = abs(cond_cdf(spec, alpha, 1e-11) - lim0)
        far = abs(cond_cdf(spec, alpha, 1e-5) - lim0)
        assert near <= far + 1e-12 and near < 0.07
        near = abs(cond_cdf(spec, alpha, 1 - 1e-11) - lim1)
        far = abs(cond_cdf(spec, alpha, 1 - 1e-5) - lim1)
        assert near <= far + 1e-12 and near < 0.07


# ---------------------------------------------------------------------------
# conditional density
# ---------------------------------------------------------------------------


def test_cond_pdf_independence_and_gaussian_zero():
    assert cond_pdf(INDEP, 0.3, 0.8) == pytest.approx(1.0)
    assert cond_pdf(CopulaSpec(CopulaFamily.GAUSSIAN, 0.0), 0.3, 0.8) == pytest.approx(1.0)


def test_cond_pdf_frank_matches_finite_difference_of_joint_cdf():
    spec = CopulaSpec(CopulaFamily.FRANK, 5.736282707019972)
    h = 1e-4
    u, a = 0.5, 0.5
    mixed = (
        joint_cdf(spec, u + h, a + h)
        - joint_cdf(spec, u + h, a - h)
        - joint_cdf(spec, u - h, a + h)
        + joint_cdf(spec, u - h, a - h)
    ) / (4 * h * h)
    assert cond_pdf(spec, a, u) == pytest.approx(mixed, abs=1e-6)


@pytest.mark.parametrize("spec", SMOOTH_SPECS)
def test_cond_pdf_matches_mixed_second_difference(spec):
    h = 1e-4
    rng = np.random.default_rng(3)
    u = rng.uniform(0.1, 0.9, size=25)
    a = rng.uniform(0.1, 0.9, size=25)
    mixed = (
        joint_cdf(spec, u + h, a + h)
        - joint_cdf(spec, u + h, a - h)
        - joint_cdf(spec, u - h, a + h)
        + joint_cdf(spec, u - h, a - h)
    ) / (4 * h * h)
    assert np.allclose(cond_pdf(spec, a, u), mixed, atol=1e-3)


def test_cond_pdf_undefined_for_frechet():
    with pytest.raises(DensityUndefinedError):
        cond_pdf(UPPER, 0.5, 0.5)
    with pytest.raises(DensityUndefinedError):
        cond_pdf(LOWER, 0.5, 0.5)


# ---------------------------------------------------------------------------
# derivative of the conditional CDF in u
# ---------------------------------------------------------------------------


def test_d_du_zero_under_independence():
    assert d_du_cond_cdf(INDEP, 0.4, 0.6) == 0.0
    assert d_du_cond_cdf(CopulaSpec(CopulaFamily.GAUSSIAN, 0.0), 0.4, 0.6) == 0.0


def test_d_du_gaussian_matches_central_difference():
    h = 1e-5
    fd = (cond_cdf(GAUSS05, 0.5, 0.25 + h) - cond_cdf(GAUSS05, 0.5, 0.25 - h)) / (2 * h)
    assert d_du_cond_cdf(GAUSS05, 0.5, 0.25) == pytest.approx(fd, abs=1e-4)


@pytest.mark.parametrize("spec", SMOOTH_SPECS)
def test_d_du_matches_central_difference_everywhere(spec):
    h = 1e-5
    rng = np.random.default_rng(11)
    u = rng.uniform(0.1, 0.9, size=30)
    a = rng.uniform(0.1, 0.9, size=30)
    fd = (cond_cdf(spec, a, u + h) - cond_cdf(spec, a, u - h)) / (2 * h)
    assert np.allclose(d_du_cond_cdf(spec, a, u), fd, atol=2e-4)


def test_d_du_nonpositive_for_stochastically_increasing_families():
    u = np.linspace(0.05, 0.95, 19)
    a = np.linspace(0.05, 0.95, 19)
    for spec in (GAUSS05, CopulaSpec(CopulaFamily.CLAYTON, 2.0),
                 CopulaSpec(CopulaFamily.FRANK, 3.0), CopulaSpec(CopulaFamily.PLACKETT, 5.0)):
        vals = d_du_cond_cdf(spec, a[:, None], u[None, :])
        assert np.all(vals <= 1e-12)


def test_d_du_undefined_for_frechet():
    with pytest.raises(DensityUndefinedError):
        d_du_cond_cdf(UPPER, 0.5, 0.5)


# ---------------------------------------------------------------------------
# tau <-> theta
# ---------------------------------------------------------------------------


def test_tau_to_theta_closed_forms():
    assert tau_to_theta(CopulaFamily.GAUSSIAN, 0.5) == pytest.approx(
        math.sin(math.pi / 4), abs=1e-14
    )
    assert tau_to_theta(CopulaFamily.CLAYTON, 0.5) == pytest.approx(2.0, abs=1e-14)
    assert tau_to_theta(CopulaFamily.GUMBEL, 0.5) == pytest.approx(2.0, abs=1e-14)


def test_tau_to_theta_frank_debye_inversion():
    # frozen: Brent root of 1 - 4/theta (1 - D1(theta)) = 0.5
    assert tau_to_theta(CopulaFamily.FRANK, 0.5) == pytest.approx(
        5.736282707019972, abs=1e-6
    )


def test_tau_to_theta_plackett_numeric():
    theta = tau_to_theta(CopulaFamily.PLACKETT, 0.5)
    assert theta > 1.0
    assert theta_to_tau(CopulaFamily.PLACKETT, theta) == pytest.approx(0.5, abs=1e-8)


def test_theta_to_tau_values():
    assert theta_to_tau(CopulaFamily.CLAYTON, 2.0) == pytest.approx(0.5, abs=1e-14)
    assert theta_to_tau(CopulaFamily.GAUSSIAN, 1 - 1e-9) == pytest.approx(1.0, abs=1e-4)
    assert theta_to_tau(CopulaFamily.FRANK, 5.736282707019972) == pytest.approx(
        0.5, abs=1e-6
    )


def test_debye_properties():
    assert debye1(1e-12) == pytest.approx(1.0, abs=1e-6)
    # D1 is decreasing on the positive axis
    assert debye1(1.0) > debye1(2.0) > debye1(10.0)


@pytest.mark.parametrize(
    "family",
    [
        CopulaFamily.GAUSSIAN,
        CopulaFamily.CLAYTON,
        CopulaFamily.GUMBEL,
        CopulaFamily.FRANK,
        CopulaFamily.PLACKETT,
    ],
)
def test_tau_round_trip_on_default_grid(family):
    lo, hi = attainable_tau_range(family)
    for tau in DEFAULT_TAU_GRID:
        if tau == 0.0 or not lo < tau < hi:
            continue
        theta = tau_to_theta(family, tau)
        assert theta_to_tau(family, theta) == pytest.approx(tau, abs=1e-6)


def test_tau_to_theta_error_signals():
    with pytest.raises(TauIsZeroError):
        tau_to_theta(CopulaFamily.FRANK, 0.0)
    with pytest.raises(TauRangeError):
        tau_to_theta(CopulaFamily.GUMBEL, -0.3)
    with pytest.raises(TauRangeError):
        tau_to_theta(CopulaFamily.GAUSSIAN, 1.5)


def test_spec_from_tau_dispatches_near_zero_to_independence():
    for family in (CopulaFamily.FRANK, CopulaFamily.CLAYTON, CopulaFamily.PLACKETT):
        assert spec_from_tau(family, 1e-9).family is CopulaFamily.INDEPENDENCE
    spec = spec_from_tau(CopulaFamily.GAUSSIAN, 0.5)
    assert spec.theta == pytest.approx(math.sin(math.pi / 4))


def test_parameter_validation():
    with pytest.raises(ParameterError):
        CopulaSpec(CopulaFamily.GAUSSIAN, 1.0)
    with pytest.raises(ParameterError):
        CopulaSpec(CopulaFamily.CLAYTON, 0.0)
    with pytest.raises(ParameterError):
        CopulaSpec(CopulaFamily.GUMBEL, 0.5)
    with pytest.raises(ParameterError):
        CopulaSpec(CopulaFamily.PLACKETT, -1.0)
    with pytest.raises(ParameterError):
        CopulaSpec(CopulaFamily.INDEPENDENCE, 0.3)
    # Frank parameters beyond the overflow guard are clamped
    assert CopulaSpec(CopulaFamily.FRANK, 1e5).theta == 300.0


# ---------------------------------------------------------------------------
# order relations
# ---------------------------------------------------------------------------


def test_concordance_frechet_inequality():
    assert concordance_leq(LOWER, UPPER, 50)


def test_concordance_independence_below_positive_gaussian():
    assert concordance_leq(INDEP, GAUSS05, 50)


def test_concordance_gaussian_signs():
    # evaluated at (0.5, 0.5): C_{0.5}(0.5,0.5) > C_{-0.5}(0.5,0.5)
    assert not concordance_leq(GAUSS05, CopulaSpec(CopulaFamily.GAUSSIAN, -0.5), 50)


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_frechet_bounds_bracket_every_family(spec):
    assert concordance_leq(LOWER, spec, 30)
    assert concordance_leq(spec, UPPER, 30)


def test_stochastic_monotonicity():
    assert is_stochastically_increasing(CopulaSpec(CopulaFamily.GUMBEL, 2.0), 21)
    assert not is_stochastically_increasing(CopulaSpec(CopulaFamily.GAUSSIAN, -0.5), 21)
    assert is_stochastically_increasing(INDEP, 21)


# ---------------------------------------------------------------------------
# conditional inversion
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("spec", SMOOTH_SPECS)
def test_conditional_inverse_round_trip(spec):
    rng = np.random.default_rng(5)
    u = rng.uniform(0.05, 0.95, size=50)
    z = rng.uniform(0.05, 0.95, size=50)
    v = conditional_inverse(spec, z, u)
    assert np.allclose(cond_cdf(spec, v, u), z, atol=1e-9)


def test_conditional_inverse_deterministic_for_frechet():
    u = np.array([0.2, 0.6, 0.9])
    z = np.array([0.5, 0.5, 0.5])
    assert np.allclose(conditional_inverse(UPPER, z, u), u)
    assert np.allclose(conditional_inverse(LOWER, z, u), 1 - u)


@settings(max_examples=30, deadline=None)
@given(
    theta=st.floats(-0.95, 0.95).filter(lambda t: abs(t) > 1e-3),
    u=st.floats(0.02, 0.98),
)
def test_cond_cdf_bounded_and_monotone_in_alpha_property(theta, u):
    spec = CopulaSpec(CopulaFamily.GAUSSIAN, theta)
    alphas = np.linspace(0.02, 0.98, 25)
    vals = cond_cdf(spec, alphas, u)
    assert np.all((vals >= 0.0) & (vals <= 1.0))
    assert np.all(np.diff(vals) >= -1e-12)


@settings(max_examples=20, deadline=None)
@given(tau=st.floats(-0.92, 0.92).filter(lambda t: abs(t) > 1e-3))
def test_frank_round_trip_property(tau):
    theta = tau_to_theta(CopulaFamily.FRANK, tau)
    assert theta_to_tau(CopulaFamily.FRANK, theta) == pytest.approx(tau, abs=1e-6)

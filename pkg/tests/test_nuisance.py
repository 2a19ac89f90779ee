"""Cross-fitting machinery: folds, scores, two-stage index regressions."""

import numpy as np
import pytest
from scipy.special import ndtri
from scipy.stats import norm

from surrosens.copulas import CopulaFamily, CopulaSpec, INDEPENDENCE
from surrosens.nuisance import (
    NuisanceConfig,
    assemble_bundle,
    dual_table,
    estimate_phi,
    fit_cond_mean,
    fit_cond_quantile,
    fit_probability,
    fit_wsi_regression,
    oracle_bundle,
    partition_folds,
)
from surrosens.oracle_dgp import DgpConfig, simulate, true_surrogacy_score

GAUSS = CopulaSpec(CopulaFamily.GAUSSIAN, 0.5)
FAST = NuisanceConfig(seed=7)


def small_dataset(n=900, seed=3, copula=INDEPENDENCE, rho=0.5):
    return simulate(DgpConfig(rho=rho, copula=copula, n=n, seed=seed))


# ---------------------------------------------------------------------------
# folds and the experimental share
# ---------------------------------------------------------------------------


def test_partition_folds_balanced():
    f = partition_folds(6, 3, seed=0)
    sizes = np.bincount(f.fold_of_row, minlength=3)
    assert sorted(sizes) == [2, 2, 2]
    f = partition_folds(7, 3, seed=0)
    sizes = sorted(np.bincount(f.fold_of_row, minlength=3))
    assert sizes == [2, 2, 3]


def test_partition_folds_deterministic():
    a = partition_folds(100, 5, seed=11)
    b = partition_folds(100, 5, seed=11)
    assert np.array_equal(a.fold_of_row, b.fold_of_row)
    c = partition_folds(100, 5, seed=12)
    assert not np.array_equal(a.fold_of_row, c.fold_of_row)


def test_partition_folds_range_errors():
    with pytest.raises(ValueError):
        partition_folds(5, 1, seed=0)
    with pytest.raises(ValueError):
        partition_folds(5, 6, seed=0)


def test_estimate_phi_values():
    f = partition_folds(4, 2, seed=0)
    assert estimate_phi(f, np.ones(4, dtype=bool), 0) == pytest.approx(1.0)
    # n=9, K=3, complement of fold 0 with 4 experimental rows -> 3*4/(9*2)
    fold = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])
    from surrosens.nuisance import FoldAssignment

    f = FoldAssignment(fold, 3)
    is_exp = np.array([1, 0, 1, 1, 0, 0, 1, 1, 1], dtype=bool)
    out = f.rows_out(0)
    assert is_exp[out].sum() == 4
    assert estimate_phi(f, is_exp, 0) == pytest.approx(2.0 / 3.0)


def test_estimate_phi_balanced_half():
    fold = np.array([0, 0, 1, 1])
    from surrosens.nuisance import FoldAssignment

    f = FoldAssignment(fold, 2)
    is_exp = np.array([True, False, True, False])
    assert estimate_phi(f, is_exp, 0) == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# probability models
# ---------------------------------------------------------------------------


def test_fit_probability_balanced_constant():
    F = np.ones((60, 1))
    y = np.r_[np.ones(30), np.zeros(30)]
    m = fit_probability(F, y, "propensity_x", FAST)
    assert m.predict(F)[0] == pytest.approx(0.5, abs=1e-6)


def test_fit_probability_recovers_surrogacy_score():
    ds = small_dataset(n=10_000, seed=1)
    exp = ds.is_exp
    F = np.column_stack([ds.s[exp, 0], ds.x[exp, 0], ds.s[exp, 0] - ds.x[exp, 0]])
    m = fit_probability(F, ds.w[exp], "surrogacy_sx", FAST)
    truth = true_surrogacy_score(ds.s[exp, 0], ds.x[exp, 0], 0.5)
    assert np.abs(m.predict(F) - truth).mean() <= 0.05


def test_fit_probability_clipping():
    rng = np.random.default_rng(0)
    F = rng.standard_normal((200, 1)) * 5
    y = (F[:, 0] > 0).astype(float)  # separable: raw model saturates
    m = fit_probability(F, y, "selection_sx", FAST)
    p = m.predict(F)
    assert p.min() >= 0.01 and p.max() <= 0.99


def test_fit_probability_single_class_raises():
    with pytest.raises(ValueError):
        fit_probability(np.ones((10, 1)), np.ones(10), "propensity_x", FAST)


# ---------------------------------------------------------------------------
# conditional quantiles
# ---------------------------------------------------------------------------


def test_fit_cond_quantile_constant_outcome():
    rng = np.random.default_rng(2)
    F = rng.standard_normal((120, 2))
    m = fit_cond_quantile(F, np.full(120, 1.5), FAST)
    Q = m.predict(np.linspace(0.1, 0.9, 9), F[:8])
    assert np.allclose(Q, 1.5)


def test_fit_cond_quantile_monotone():
    ds = small_dataset(n=2_000, seed=5)
    obs = ~ds.is_exp
    m = fit_cond_quantile(ds.features_sx[obs], ds.y[obs], FAST)
    Q = m.predict(np.linspace(0.05, 0.95, 19), ds.features_sx[obs][:40])
    assert np.all(np.diff(Q, axis=1) >= 0)


# ---------------------------------------------------------------------------
# two-stage index regression
# ---------------------------------------------------------------------------


def test_wsi_regression_under_independence_targets_conditional_mean():
    # under the independence copula the pseudo-outcome collapses to y itself
    ds = small_dataset(n=4_000, seed=9)
    obs = ~ds.is_exp
    F = ds.features_sx[obs]
    y = ds.y[obs]
    p = true_surrogacy_score(ds.s[obs, 0], ds.x[obs, 0], 0.5)
    qm = fit_cond_quantile(F, y, FAST)
    models = fit_wsi_regression(F, y, INDEPENDENCE, p, qm, FAST)
    truth = ds.s[obs, 0] + 0.5 * ds.x[obs, 0]
    for w in (0, 1):
        pred = models[w].predict(F)
        assert np.sqrt(np.mean((pred - truth) ** 2)) < 0.3


def test_wsi_regression_upper_bound_matches_analytic_avar():
    ds = small_dataset(n=10_000, seed=13)
    obs = ~ds.is_exp
    F = ds.features_sx[obs]
    y = ds.y[obs]
    p = np.clip(true_surrogacy_score(ds.s[obs, 0], ds.x[obs, 0], 0.5), 0.01, 0.99)
    qm = fit_cond_quantile(F, y, FAST)
    models = fit_wsi_regression(F, y, "upper", p, qm, FAST)
    m = ds.s[obs, 0] + 0.5 * ds.x[obs, 0]
    truth = m + norm.pdf(norm.ppf(1 - p)) / p
    pred = models[1].predict(F)
    assert np.sqrt(np.mean((pred - truth) ** 2)) <= 0.3


def test_wsi_regression_pseudo_outcome_locally_robust():
    # perturbing the stage-one cutoff by delta moves the mean pseudo-outcome
    # by O(delta^2): quadratic fit through the profile has a tiny linear part
    from surrosens.wsi import dual_transform

    ds = small_dataset(n=20_000, seed=17)
    obs = ~ds.is_exp
    y = ds.y[obs]
    p = np.clip(true_surrogacy_score(ds.s[obs, 0], ds.x[obs, 0], 0.5), 0.01, 0.99)
    m = ds.s[obs, 0] + 0.5 * ds.x[obs, 0]
    q0 = m + ndtri(1 - p)  # true upper cutoff
    deltas = np.array([-0.1, -0.05, 0.0, 0.05, 0.1])
    means = np.array(
        [np.mean(dual_transform("upper", y, q0 + d, p)) for d in deltas]
    )
    coeffs = np.polyfit(deltas, means, 2)
    assert abs(coeffs[1]) < 10 * abs(coeffs[0] * 0.05)  # linear term negligible
    assert abs(means[0] - means[2]) / 0.01 < 5 * abs(coeffs[0])


def test_fit_cond_mean_constant_and_slope():
    x = np.linspace(0, 1, 400).reshape(-1, 1)
    const = fit_cond_mean(x, np.full(400, 2.0), np.ones(400, dtype=bool), FAST)
    assert np.allclose(const.predict(x), 2.0)
    vals = 1.0 + 2.5 * x[:, 0] + 0.05 * np.random.default_rng(0).standard_normal(400)
    m = fit_cond_mean(x, vals, np.ones(400, dtype=bool), FAST)
    pred = m.predict(x)
    slope = np.polyfit(x[:, 0], pred, 1)[0]
    assert abs(slope - 2.5) < 0.3
    assert np.all(np.isfinite(pred))


def test_fit_cond_mean_empty_arm_raises():
    with pytest.raises(ValueError):
        fit_cond_mean(np.ones((5, 1)), np.ones(5), np.zeros(5, dtype=bool), FAST)


def test_cond_mean_recovery_independence():
    # E[index | W=1, X=x] = x + 1 + 0.5 x for the benchmark design
    ds = small_dataset(n=12_000, seed=23)
    bundle = assemble_bundle(ds, 3, [INDEPENDENCE], NuisanceConfig(seed=5))
    fl = bundle.fields[INDEPENDENCE]
    x = ds.x[:, 0]
    slope = np.polyfit(x, fl.mu_bar1, 1)[0]
    assert abs(slope - 1.5) < 0.2
    level = fl.mu_bar1.mean() - 1.5 * x.mean()
    assert abs(level - 1.0) < 0.2


# ---------------------------------------------------------------------------
# bundle assembly
# ---------------------------------------------------------------------------


def test_bundle_cross_fitting_contract():
    ds = small_dataset(n=800, seed=29)
    bundle = assemble_bundle(ds, 3, ["upper"], NuisanceConfig(seed=1))
    for prov in bundle.provenance:
        train = set(prov["train_rows"].tolist())
        scored = set(prov["scored_rows"].tolist())
        assert not train & scored
    covered = np.concatenate([p["scored_rows"] for p in bundle.provenance])
    assert sorted(covered.tolist()) == list(range(ds.n_rows))


def test_bundle_probabilities_clipped():
    ds = small_dataset(n=800, seed=31)
    bundle = assemble_bundle(ds, 2, ["upper"], NuisanceConfig(seed=2))
    for arr in (bundle.rho_x, bundle.rho_sx, bundle.phi_sx):
        assert arr.min() >= 0.01 and arr.max() <= 0.99


def test_bundle_deterministic():
    ds = small_dataset(n=800, seed=37)
    cfg = NuisanceConfig(seed=3)
    b1 = assemble_bundle(ds, 2, ["upper"], cfg)
    b2 = assemble_bundle(ds, 2, ["upper"], cfg)
    assert np.array_equal(b1.rho_sx, b2.rho_sx)
    assert np.array_equal(b1.fields["upper"].mu1, b2.fields["upper"].mu1)


def test_oracle_bundle_matches_closed_forms():
    cfg = DgpConfig(rho=0.5, copula=GAUSS, n=500, seed=41)
    ds = simulate(cfg)
    bundle = oracle_bundle(ds, ["upper", GAUSS], cfg)
    p = np.clip(true_surrogacy_score(ds.s[:, 0], ds.x[:, 0], 0.5), 0.01, 0.99)
    m = ds.s[:, 0] + 0.5 * ds.x[:, 0]
    fl = bundle.fields["upper"]
    assert np.allclose(fl.mu1, m + norm.pdf(norm.ppf(1 - p)) / p, atol=1e-10)
    assert np.allclose(fl.q_cut, m + norm.ppf(1 - p), atol=1e-10)
    assert np.allclose(bundle.rho_sx, p)
    # mixture identity for the smooth fields
    fg = bundle.fields[GAUSS]
    mix = p * fg.mu1 + (1 - p) * fg.mu0
    assert np.allclose(mix, m, atol=1e-6)


def test_bundle_mixture_identity_on_learned_fields():
    ds = small_dataset(n=4_000, seed=43)
    bundle = assemble_bundle(ds, 2, [INDEPENDENCE], NuisanceConfig(seed=4))
    fl = bundle.fields[INDEPENDENCE]
    mix = bundle.rho_sx * fl.mu1 + (1 - bundle.rho_sx) * fl.mu0
    si = ds.s[:, 0] + 0.5 * ds.x[:, 0]
    assert np.corrcoef(mix, si)[0, 1] >= 0.9


def test_dual_table_levels():
    p = np.array([0.3])
    kind, level, mass = dual_table("upper", 1)
    assert kind == "upper" and level(p)[0] == pytest.approx(0.7)
    assert mass(p)[0] == pytest.approx(0.3)
    kind, level, mass = dual_table("lower", 0)
    assert kind == "upper" and level(p)[0] == pytest.approx(0.3)
    assert mass(p)[0] == pytest.approx(0.7)


def test_binary_outcome_bundle_closed_forms():
    rng = np.random.default_rng(47)
    n = 3_000
    x = rng.uniform(size=(n, 1))
    s = x + rng.standard_normal((n, 1))
    latent = s[:, 0] + 0.5 * x[:, 0] + rng.standard_normal(n)
    y = (latent > 0.5).astype(float)
    w = (rng.uniform(size=n) < 0.5).astype(float)
    is_exp = rng.uniform(size=n) < 0.5
    from surrosens.data import CombinedDataset

    ds = CombinedDataset(is_exp, np.where(is_exp, w, np.nan),
                         np.where(is_exp, np.nan, y), s, x)
    assert ds.y_is_binary
    bundle = assemble_bundle(ds, 2, ["upper", "lower"], NuisanceConfig(seed=6))
    for key in ("upper", "lower"):
        fl = bundle.fields[key]
        assert np.all(fl.mu1 >= -1e-9) and np.all(fl.mu1 <= 1 + 1e-9)
        assert np.all(np.isin(fl.q_cut, [0.0, 1.0]))
    with pytest.raises(ValueError):
        assemble_bundle(ds, 2, [GAUSS], NuisanceConfig(seed=6))

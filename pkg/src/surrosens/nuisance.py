"""Cross-fitted nuisance estimation.

For each fold, every model is trained on the complementary folds and then
evaluated on the held-out rows, so no row is ever scored by a model that saw
it.  The bundle carries, per row: the propensity, surrogacy, and selection
scores, the per-fold experimental share, and for each requested dependence
key (a Frechet bound or a smooth copula) the fitted weighted indices, their
covariate-conditional means, quantile cutoffs or dual values, and the
density-weighted correction term.

Index regressions follow a two-stage scheme: a conditional quantile model
supplies cutoffs (out of bag at its own training rows), dual transforms of
the observed outcomes form pseudo-outcomes whose derivative in the cutoff
vanishes at the truth, and a polynomial sieve smooths them over (s, x).

Binary outcomes skip the quantile model entirely: the worst-case indices
and cutoffs then have closed forms in the conditional outcome mean and the
surrogacy score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .copulas import CopulaSpec, is_smooth
from .data import CombinedDataset
from .learners import (
    LassoConfig,
    LogisticConfig,
    SieveConfig,
    fit_l1_logistic,
    fit_lasso,
    fit_sieve,
)
from .oracle_dgp import DgpConfig, index_adjustment_table, true_surrogacy_score
from .qrf import ForestConfig, KnnConfig, KnnQuantiles, QuantileForest
from .quadrature import QuadratureConfig, unit_rule
from .wsi import (
    density_weighted_mean_batch,
    dual_transform,
    dual_transform_general_batch,
)

__all__ = [
    "FoldAssignment",
    "NuisanceConfig",
    "ProbabilityModel",
    "ConditionalQuantileModel",
    "WsiFields",
    "NuisanceBundle",
    "partition_folds",
    "estimate_phi",
    "fit_probability",
    "fit_cond_quantile",
    "fit_wsi_regression",
    "fit_cond_mean",
    "assemble_bundle",
    "oracle_bundle",
    "dual_table",
    "WORST_CASE_KEYS",
]

WORST_CASE_KEYS = ("upper", "lower")

# (bound, arm) -> (dual kind, cutoff level as a function of the surrogacy
#                  score p, tail mass as a function of p)
_DUAL_TABLE = {
    ("upper", 1): ("upper", lambda p: 1.0 - p, lambda p: p),
    ("upper", 0): ("lower", lambda p: 1.0 - p, lambda p: 1.0 - p),
    ("lower", 1): ("lower", lambda p: p, lambda p: p),
    ("lower", 0): ("upper", lambda p: p, lambda p: 1.0 - p),
}


def dual_table(bound: str, w: int):
    """Dual kind, cutoff level, and tail mass for a worst-case bound and arm."""
    return _DUAL_TABLE[(bound, w)]


@dataclass(frozen=True)
class FoldAssignment:
    fold_of_row: np.ndarray
    K: int

    def rows_in(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_row == k)

    def rows_out(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_row != k)


def partition_folds(n: int, K: int, seed: int) -> FoldAssignment:
    """Balanced random partition: fold sizes differ by at most one."""
    if not 2 <= K <= n:
        raise ValueError(f"K must lie in [2, {n}], got {K}")
    rng = np.random.default_rng(seed)
    fold = np.tile(np.arange(K), n // K + 1)[:n]
    return FoldAssignment(fold[rng.permutation(n)], K)


def estimate_phi(folds: FoldAssignment, is_exp: np.ndarray, k: int) -> float:
    """Experimental share over the complement of fold k, rescaled to size n."""
    out_rows = folds.rows_out(k)
    if out_rows.size == 0:
        raise ValueError(f"fold {k} has an empty complement")
    n = is_exp.shape[0]
    return float(folds.K * is_exp[out_rows].sum() / (n * (folds.K - 1)))


@dataclass(frozen=True)
class NuisanceConfig:
    clip: float = 0.01
    quad_nodes: int = 256
    logistic: LogisticConfig = LogisticConfig()
    lasso: LassoConfig = LassoConfig()
    forest: ForestConfig = ForestConfig()
    knn: KnnConfig = KnnConfig()
    sieve: SieveConfig = SieveConfig()
    quantile_learner: str = "forest"  # or "knn"
    # quantile curves are location-centred on a cross-predicted penalised
    # linear mean; the raw forest's quantile error is otherwise too large
    # for the moment's second-order protection at realistic sample sizes
    center_quantiles: bool = True
    cond_mean_all_arms: bool = False  # fit the index mean on both arms jointly
    seed: int = 0


@dataclass
class ProbabilityModel:
    """Clipped probability predictor for one of the three score targets."""

    target: str
    model: object
    clip: float

    def predict(self, F: np.ndarray) -> np.ndarray:
        p = np.asarray(self.model.predict(F), dtype=float)
        return np.clip(p, self.clip, 1.0 - self.clip)


def fit_probability(features, labels, target: str, config: NuisanceConfig = NuisanceConfig(),
                    seed: int = 0) -> ProbabilityModel:
    """L1-logistic probability fit for propensity, surrogacy, or selection."""
    if target not in ("propensity_x", "surrogacy_sx", "selection_sx", "outcome_mean_sx"):
        raise ValueError(f"unknown probability target {target!r}")
    model = fit_l1_logistic(features, np.asarray(labels, dtype=float),
                            config.logistic, seed=seed)
    return ProbabilityModel(target, model, config.clip)


@dataclass
class ConditionalQuantileModel:
    """Monotone conditional quantile curves, optionally location-centred.

    With centring, held-out predictions add the full-sample mean fit to the
    residual quantile curves, while out-of-bag predictions at the training
    rows use cross-predicted means so no row's own fit enters its curves.
    """

    model: object
    mean_model: object | None = None
    mean_oob: np.ndarray | None = None

    def _shift(self, F) -> np.ndarray:
        if self.mean_model is None:
            return np.zeros(np.atleast_2d(F).shape[0])
        return np.asarray(self.mean_model.predict(F), dtype=float)

    def predict(self, u_grid, F) -> np.ndarray:
        out = self.model.predict_quantiles(F, u_grid)
        return out + self._shift(F)[:, None]

    def predict_oob(self, u_grid) -> np.ndarray:
        out = self.model.predict_quantiles_oob(u_grid)
        if self.mean_oob is not None:
            out = out + self.mean_oob[:, None]
        return out

    def predict_at(self, F, levels, oob: bool = False) -> np.ndarray:
        out = self.model.predict_quantile_at(F, levels, oob=oob)
        if oob and self.mean_oob is not None:
            return out + self.mean_oob
        return out + self._shift(F)


def _cross_predicted_mean(features, y, config: NuisanceConfig, seed: int, folds: int = 5):
    """Full-sample mean fit plus per-row cross-predicted values."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(y, dtype=float)
    n = y.size
    full = fit_lasso(features, y, config.lasso, seed=seed)
    k = min(folds, n)
    assign = np.random.default_rng(seed).integers(0, k, size=n)
    oob = np.empty(n)
    for f in range(k):
        tr = assign != f
        te = ~tr
        if te.sum() == 0:
            continue
        if tr.sum() < 2 or np.ptp(y[tr]) < 1e-12:
            oob[te] = y[tr].mean() if tr.sum() else y.mean()
            continue
        m = fit_lasso(features[tr], y[tr], config.lasso, seed=seed + 1 + f)
        oob[te] = m.predict(features[te])
    return full, oob


def fit_cond_quantile(features, y, config: NuisanceConfig = NuisanceConfig(),
                      seed: int = 0) -> ConditionalQuantileModel:
    """Fit the conditional outcome quantile learner on observational rows."""
    y = np.asarray(y, dtype=float)
    mean_model = None
    mean_oob = None
    target = y
    if config.center_quantiles and config.quantile_learner == "forest":
        mean_model, mean_oob = _cross_predicted_mean(features, y, config, seed)
        target = y - mean_oob
    if config.quantile_learner == "forest":
        model = QuantileForest(config.forest, seed).fit(features, target)
    elif config.quantile_learner == "knn":
        model = KnnQuantiles(config.knn).fit(features, target)
    else:
        raise ValueError(f"unknown quantile learner {config.quantile_learner!r}")
    return ConditionalQuantileModel(model, mean_model, mean_oob)


def _pseudo_outcomes_worst_case(bound: str, w: int, y: np.ndarray, cutoffs: np.ndarray,
                                p_sx: np.ndarray) -> np.ndarray:
    kind, _, mass = dual_table(bound, w)
    return dual_transform(kind, y, cutoffs, mass(p_sx))


def fit_wsi_regression(obs_features, y_obs, key, p_sx_obs, quantile_model,
                       config: NuisanceConfig = NuisanceConfig(),
                       q_curves_obs: np.ndarray | None = None):
    """Two-stage index regression for one dependence key and both arms.

    Stage one evaluates out-of-bag quantile cutoffs (worst case) or whole
    out-of-bag quantile curves (smooth copula) at the observational rows;
    stage two regresses the dual pseudo-outcomes on a polynomial sieve in
    (s, x).  Returns ``{1: model, 0: model}``.
    """
    y_obs = np.asarray(y_obs, dtype=float)
    p_sx_obs = np.asarray(p_sx_obs, dtype=float)
    out = {}
    if key in WORST_CASE_KEYS:
        level = dual_table(key, 1)[1](p_sx_obs)
        cutoffs = quantile_model.predict_at(obs_features, level, oob=True)
        for w in (1, 0):
            pseudo = _pseudo_outcomes_worst_case(key, w, y_obs, cutoffs, p_sx_obs)
            out[w] = fit_sieve(obs_features, pseudo, config.sieve)
        return out
    if not is_smooth(key):
        raise ValueError("smooth-copula stage requires a smooth copula key")
    if q_curves_obs is None:
        u, _ = unit_rule(config.quad_nodes)
        q_curves_obs = quantile_model.predict_oob(u)
    quad = QuadratureConfig(config.quad_nodes)
    alphas = 1.0 - p_sx_obs
    for w in (1, 0):
        pseudo = dual_transform_general_batch(key, w, y_obs, q_curves_obs, alphas, quad)
        out[w] = fit_sieve(obs_features, pseudo, config.sieve)
    return out


def fit_cond_mean(x_features, index_values, arm_mask, config: NuisanceConfig = NuisanceConfig(),
                  seed: int = 0):
    """Regression of fitted index values on covariates over one treatment arm."""
    arm_mask = np.asarray(arm_mask, dtype=bool)
    if arm_mask.sum() == 0:
        raise ValueError("empty treatment arm")
    F = np.atleast_2d(np.asarray(x_features, dtype=float))[arm_mask]
    v = np.asarray(index_values, dtype=float)[arm_mask]
    if np.ptp(v) < 1e-12:
        # constant pseudo-outcome: no need for a penalised fit
        c = float(v.mean())

        class _Const:
            def predict(self, F):
                return np.full(np.atleast_2d(F).shape[0], c)

        return _Const()
    return fit_lasso(F, v, config.lasso, seed=seed)


@dataclass
class WsiFields:
    """Per-row evaluations for one dependence key."""

    mu1: np.ndarray
    mu0: np.ndarray
    mu_bar1: np.ndarray
    mu_bar0: np.ndarray
    q_cut: np.ndarray | None = None  # worst-case cutoff at the row's level
    d: np.ndarray | None = None  # smooth-copula density-weighted term
    h1: np.ndarray | None = None  # smooth-copula dual values (observational rows)
    h0: np.ndarray | None = None


@dataclass
class NuisanceBundle:
    folds: FoldAssignment
    rho_x: np.ndarray
    rho_sx: np.ndarray
    phi_sx: np.ndarray
    phi_x: np.ndarray
    phi: np.ndarray  # per-row copy of the fold-complement experimental share
    fields: dict
    config: NuisanceConfig
    provenance: list = field(default_factory=list)
    binary_outcome: bool = False

    def require(self, key):
        if key not in self.fields:
            raise KeyError(f"bundle has no fields for dependence key {key!r}")
        return self.fields[key]


def _binary_worst_case_fields(bound: str, mu: np.ndarray, p: np.ndarray):
    """Closed-form indices and cutoffs for binary outcomes."""
    if bound == "upper":
        mu1 = np.minimum(mu / p, 1.0)
        mu0 = np.maximum((mu - p) / (1.0 - p), 0.0)
        q = (mu >= p).astype(float)
    else:
        mu1 = np.maximum((p + mu - 1.0) / p, 0.0)
        mu0 = np.minimum(mu / (1.0 - p), 1.0)
        q = (mu > 1.0 - p).astype(float)
    return mu1, mu0, q


class _BaseFits:
    """Per-fold models that do not depend on the dependence key."""

    def __init__(self, dataset: CombinedDataset, folds: FoldAssignment,
                 config: NuisanceConfig):
        self.dataset = dataset
        self.folds = folds
        self.config = config
        n = dataset.n_rows
        self.rho_x = np.empty(n)
        self.rho_sx = np.empty(n)
        self.phi_sx = np.empty(n)
        self.phi_x = np.empty(n)
        self.phi = np.empty(n)
        self.rho_sx_models = []
        self.quantile_models = []
        self.mu_obs_models = []  # binary outcomes only
        self.provenance = []
        self.binary = dataset.y_is_binary
        # copula-independent quantile curves, cached across dependence keys
        self._oob_curves: dict = {}
        self._scored_curves: dict = {}
        sx = dataset.features_sx
        x = dataset.x
        seeds = np.random.SeedSequence(config.seed).spawn(folds.K)
        for k in range(folds.K):
            child = np.random.default_rng(seeds[k])
            fit_seed = int(child.integers(2**31 - 1))
            train = folds.rows_out(k)
            score = folds.rows_in(k)
            tr_exp = train[dataset.is_exp[train]]
            tr_obs = train[~dataset.is_exp[train]]
            if tr_exp.size == 0 or tr_obs.size == 0:
                raise ValueError(f"fold {k}: training complement misses a sample")
            rho_sx_m = fit_probability(sx[tr_exp], dataset.w[tr_exp], "surrogacy_sx",
                                       config, seed=fit_seed)
            rho_x_m = fit_probability(x[tr_exp], dataset.w[tr_exp], "propensity_x",
                                      config, seed=fit_seed + 1)
            phi_sx_m = fit_probability(sx[train], dataset.is_exp[train].astype(float),
                                       "selection_sx", config, seed=fit_seed + 2)
            phi_x_m = fit_probability(x[train], dataset.is_exp[train].astype(float),
                                      "selection_sx", config, seed=fit_seed + 3)
            self.rho_x[score] = rho_x_m.predict(x[score])
            self.rho_sx[score] = rho_sx_m.predict(sx[score])
            self.phi_sx[score] = phi_sx_m.predict(sx[score])
            self.phi_x[score] = phi_x_m.predict(x[score])
            self.phi[score] = estimate_phi(folds, dataset.is_exp, k)
            self.rho_sx_models.append(rho_sx_m)
            if self.binary:
                mu_m = fit_probability(sx[tr_obs], dataset.y[tr_obs], "outcome_mean_sx",
                                       config, seed=fit_seed + 4)
                self.mu_obs_models.append(mu_m)
                self.quantile_models.append(None)
            else:
                qm = fit_cond_quantile(sx[tr_obs], dataset.y[tr_obs], config,
                                       seed=fit_seed + 5)
                self.quantile_models.append(qm)
                self.mu_obs_models.append(None)
            self.provenance.append(
                {"fold": k, "train_rows": train, "scored_rows": score,
                 "train_exp": tr_exp, "train_obs": tr_obs}
            )

    def extend(self, key) -> WsiFields:
        """Fit and evaluate the key-specific fields, fold by fold."""
        ds, folds, config = self.dataset, self.folds, self.config
        n = ds.n_rows
        quad = QuadratureConfig(config.quad_nodes)
        u_grid, _ = unit_rule(config.quad_nodes)
        mu1 = np.empty(n)
        mu0 = np.empty(n)
        mu_bar1 = np.empty(n)
        mu_bar0 = np.empty(n)
        is_wc = key in WORST_CASE_KEYS
        q_cut = np.empty(n) if is_wc else None
        d = None if is_wc else np.empty(n)
        h1 = None if is_wc else np.full(n, np.nan)
        h0 = None if is_wc else np.full(n, np.nan)
        if not is_wc and self.binary:
            raise ValueError("smooth-copula estimation requires a continuous outcome")
        sx = ds.features_sx
        for k in range(folds.K):
            prov = self.provenance[k]
            train, score = prov["train_rows"], prov["scored_rows"]
            tr_exp, tr_obs = prov["train_exp"], prov["train_obs"]
            rho_sx_m = self.rho_sx_models[k]
            p_obs = rho_sx_m.predict(sx[tr_obs])
            p_score = self.rho_sx[score]
            if self.binary:
                mu_m = self.mu_obs_models[k]
                mu_tr = np.clip(mu_m.predict(sx[tr_exp]), config.clip, 1 - config.clip)
                mu_sc = np.clip(mu_m.predict(sx[score]), config.clip, 1 - config.clip)
                p_tr = rho_sx_m.predict(sx[tr_exp])
                mu1_tr, mu0_tr, _ = _binary_worst_case_fields(key, mu_tr, p_tr)
                mu1[score], mu0[score], q_cut[score] = _binary_worst_case_fields(
                    key, mu_sc, p_score
                )
            else:
                qm = self.quantile_models[k]
                if is_wc:
                    models = fit_wsi_regression(sx[tr_obs], ds.y[tr_obs], key, p_obs,
                                                qm, config)
                    level = dual_table(key, 1)[1](p_score)
                    q_cut[score] = qm.predict_at(sx[score], level)
                else:
                    if k not in self._oob_curves:
                        self._oob_curves[k] = qm.predict_oob(u_grid)
                        self._scored_curves[k] = qm.predict(u_grid, sx[score])
                    curves_obs = self._oob_curves[k]
                    models = fit_wsi_regression(sx[tr_obs], ds.y[tr_obs], key, p_obs,
                                                qm, config, q_curves_obs=curves_obs)
                    curves_sc = self._scored_curves[k]
                    alphas_sc = 1.0 - p_score
                    d[score] = density_weighted_mean_batch(key, curves_sc, alphas_sc, quad)
                    sc_obs = ~ds.is_exp[score]
                    if sc_obs.any():
                        rows = score[sc_obs]
                        h1[rows] = dual_transform_general_batch(
                            key, 1, ds.y[rows], curves_sc[sc_obs], alphas_sc[sc_obs], quad
                        )
                        h0[rows] = dual_transform_general_batch(
                            key, 0, ds.y[rows], curves_sc[sc_obs], alphas_sc[sc_obs], quad
                        )
                mu1_tr = models[1].predict(sx[tr_exp])
                mu0_tr = models[0].predict(sx[tr_exp])
                mu1[score] = models[1].predict(sx[score])
                mu0[score] = models[0].predict(sx[score])
            # covariate-conditional means from the arm-restricted index values
            w_tr = ds.w[tr_exp]
            seed_k = config.seed * 1000 + k
            if config.cond_mean_all_arms:
                arm1 = arm0 = np.ones(tr_exp.size, dtype=bool)
            else:
                arm1, arm0 = w_tr == 1.0, w_tr == 0.0
            m1 = fit_cond_mean(ds.x[tr_exp], mu1_tr, arm1, config, seed=seed_k)
            m0 = fit_cond_mean(ds.x[tr_exp], mu0_tr, arm0, config, seed=seed_k + 1)
            mu_bar1[score] = m1.predict(ds.x[score])
            mu_bar0[score] = m0.predict(ds.x[score])
        return WsiFields(mu1, mu0, mu_bar1, mu_bar0, q_cut, d, h1, h0)


def assemble_bundle(dataset: CombinedDataset, K: int, keys,
                    config: NuisanceConfig = NuisanceConfig(),
                    base: _BaseFits | None = None) -> NuisanceBundle:
    """Cross-fit every nuisance for the requested dependence keys.

    ``keys`` is an iterable of "upper", "lower", or smooth ``CopulaSpec``
    values.  Passing a prefit ``base`` reuses the key-independent models
    (scores and quantile curves), which is how sensitivity grids avoid
    refitting learners per grid point.
    """
    if base is None:
        folds = partition_folds(dataset.n_rows, K, config.seed)
        base = _BaseFits(dataset, folds, config)
    fields = {}
    for key in keys:
        if key not in WORST_CASE_KEYS and not isinstance(key, CopulaSpec):
            raise ValueError(f"dependence key must be 'upper', 'lower', or a CopulaSpec, got {key!r}")
        fields[key] = base.extend(key)
    return NuisanceBundle(
        folds=base.folds,
        rho_x=base.rho_x,
        rho_sx=base.rho_sx,
        phi_sx=base.phi_sx,
        phi_x=base.phi_x,
        phi=base.phi,
        fields=fields,
        config=config,
        provenance=base.provenance,
        binary_outcome=base.binary,
    )


def base_fits(dataset: CombinedDataset, K: int,
              config: NuisanceConfig = NuisanceConfig()) -> _BaseFits:
    """Fit the key-independent nuisances once, for reuse across keys."""
    folds = partition_folds(dataset.n_rows, K, config.seed)
    return _BaseFits(dataset, folds, config)


def dump_nuisances(bundle: NuisanceBundle, path: str) -> None:
    """Write every per-row nuisance value to a CSV for auditing.

    Columns: row id, fold, the three scores, the experimental share, and
    the per-key index fields (key names prefixed).
    """
    import csv
    import io

    from .data import _atomic_write

    def key_name(key):
        if isinstance(key, str):
            return key
        if key.theta is None:
            return key.family.value
        return f"{key.family.value}_{key.theta:g}"

    header = ["row", "fold", "rho_x", "rho_sx", "phi_sx", "phi"]
    cols = [
        np.arange(bundle.rho_x.size),
        bundle.folds.fold_of_row,
        bundle.rho_x,
        bundle.rho_sx,
        bundle.phi_sx,
        bundle.phi,
    ]
    for key, fl in bundle.fields.items():
        name = key_name(key)
        for field_name in ("mu1", "mu0", "mu_bar1", "mu_bar0", "q_cut", "d", "h1", "h0"):
            arr = getattr(fl, field_name)
            if arr is None:
                continue
            header.append(f"{name}.{field_name}")
            cols.append(arr)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for i in range(bundle.rho_x.size):
        writer.writerow([
            int(cols[0][i]), int(cols[1][i]),
            *("" if np.isnan(float(c[i])) else repr(float(c[i])) for c in cols[2:]),
        ])
    _atomic_write(path, buf.getvalue())


# ---------------------------------------------------------------------------
# closed-form bundle for the benchmark design
# ---------------------------------------------------------------------------


def oracle_bundle(dataset: CombinedDataset, keys, dgp: DgpConfig,
                  config: NuisanceConfig = NuisanceConfig(), K: int = 2) -> NuisanceBundle:
    """Bundle filled with the benchmark design's exact nuisance values.

    Used to isolate moment-function behaviour from learner noise.
    """
    n = dataset.n_rows
    s = dataset.s[:, 0]
    x = dataset.x[:, 0]
    m = s + 0.5 * x
    p = np.clip(true_surrogacy_score(s, x, dgp.rho), config.clip, 1.0 - config.clip)
    folds = partition_folds(n, K, config.seed)
    quad = QuadratureConfig(config.quad_nodes)
    u_grid, _ = unit_rule(config.quad_nodes)
    fields = {}
    for key in keys:
        if key in WORST_CASE_KEYS:
            if key == "upper":
                z = ndtri(1.0 - p)
                mu1 = m + _phi_over(z, p)
                mu0 = m - _phi_over(z, 1.0 - p)
                q_cut = m + z
            else:
                z = ndtri(p)
                mu1 = m - _phi_over(z, p)
                mu0 = m + _phi_over(z, 1.0 - p)
                q_cut = m + z
            fields[key] = WsiFields(
                mu1, mu0,
                _oracle_mu_bar(key, 1, x, dgp, config),
                _oracle_mu_bar(key, 0, x, dgp, config),
                q_cut=q_cut,
            )
        else:
            adj1 = index_adjustment_table(key, 1, config.quad_nodes)
            adj0 = index_adjustment_table(key, 0, config.quad_nodes)
            alphas = 1.0 - p
            mu1 = m + np.asarray(adj1(alphas), dtype=float)
            mu0 = m + np.asarray(adj0(alphas), dtype=float)
            curves = m[:, None] + ndtri(u_grid)[None, :]
            dvals = density_weighted_mean_batch(key, curves, alphas, quad)
            h1 = np.full(n, np.nan)
            h0 = np.full(n, np.nan)
            obs = ~dataset.is_exp
            if obs.any():
                h1[obs] = dual_transform_general_batch(
                    key, 1, dataset.y[obs], curves[obs], alphas[obs], quad
                )
                h0[obs] = dual_transform_general_batch(
                    key, 0, dataset.y[obs], curves[obs], alphas[obs], quad
                )
            fields[key] = WsiFields(
                mu1, mu0,
                _oracle_mu_bar(key, 1, x, dgp, config, adj1),
                _oracle_mu_bar(key, 0, x, dgp, config, adj0),
                d=dvals, h1=h1, h0=h0,
            )
    return NuisanceBundle(
        folds=folds,
        rho_x=np.full(n, dgp.rho),
        rho_sx=p,
        phi_sx=np.full(n, dgp.p_experimental),
        phi_x=np.full(n, dgp.p_experimental),
        phi=np.full(n, dgp.p_experimental),
        fields=fields,
        config=config,
        binary_outcome=False,
    )


def _phi_over(z, mass):
    """Normal tail-mean deviation: pdf at the cutoff over the tail mass."""
    return np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi) / mass


_GH_NODES = 96


def _oracle_mu_bar(key, w: int, x: np.ndarray, dgp: DgpConfig,
                   config: NuisanceConfig, adj=None) -> np.ndarray:
    """E[index | arm, x] by Gauss-Hermite integration over the surrogate."""
    t, gw = np.polynomial.hermite_e.hermegauss(_GH_NODES)
    gw = gw / np.sqrt(2.0 * np.pi)
    s = x[:, None] + w + t[None, :]
    m = s + 0.5 * x[:, None]
    p = np.clip(true_surrogacy_score(s, x[:, None], dgp.rho), config.clip,
                1.0 - config.clip)
    if key in WORST_CASE_KEYS:
        if key == "upper":
            z = ndtri(1.0 - p)
            vals = m + (_phi_over(z, p) if w == 1 else -_phi_over(z, 1.0 - p))
        else:
            z = ndtri(p)
            vals = m + (-_phi_over(z, p) if w == 1 else _phi_over(z, 1.0 - p))
    else:
        vals = m + np.asarray(adj(1.0 - p), dtype=float)
    return vals @ gw

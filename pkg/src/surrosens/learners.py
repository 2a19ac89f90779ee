"""Self-contained penalised linear learners and the polynomial sieve.

The probability and conditional-mean nuisances default to L1-regularised
models fit by coordinate descent over a 100-value lambda path, with the
penalty chosen by internal cross-validation.  The second stage of the
two-stage index regression is an ordinary least squares fit on a degree-2
polynomial basis.  Anything exposing ``predict`` with the same signature can
be plugged in instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LassoConfig",
    "LogisticConfig",
    "SieveConfig",
    "LassoModel",
    "LogisticModel",
    "SieveModel",
    "fit_lasso",
    "fit_l1_logistic",
    "fit_sieve",
    "polynomial_basis",
]

_PMIN = 1e-10


@dataclass(frozen=True)
class LassoConfig:
    n_lambdas: int = 100
    lambda_min_ratio: float = 1e-4
    cv_folds: int = 5
    max_sweeps: int = 1000
    tol: float = 1e-7


@dataclass(frozen=True)
class LogisticConfig:
    n_lambdas: int = 100
    lambda_min_ratio: float = 1e-4
    cv_folds: int = 5
    max_irls: int = 30
    max_sweeps: int = 200
    tol: float = 1e-7


@dataclass(frozen=True)
class SieveConfig:
    degree: int = 2


def _standardize(F: np.ndarray):
    mean = F.mean(axis=0)
    sd = F.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return (F - mean) / sd, mean, sd


def _cd_weighted_lasso(X, z, sample_w, lam, beta, max_sweeps, tol):
    """Coordinate descent for 0.5/n sum w (z - b0 - X beta)^2 + lam |beta|_1.

    Mutates and returns (beta, b0); X columns are assumed standardized.
    """
    n = X.shape[0]
    wsum = sample_w.sum()
    col_norm = (sample_w[:, None] * X * X).sum(axis=0) / n
    b0 = float((sample_w * (z - X @ beta)).sum() / wsum)
    resid = z - X @ beta - b0
    for _ in range(max_sweeps):
        max_delta = 0.0
        for j in range(X.shape[1]):
            if col_norm[j] == 0.0:
                continue
            old = beta[j]
            rho = (sample_w * X[:, j] * resid).sum() / n + col_norm[j] * old
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / col_norm[j]
            if new != old:
                resid -= X[:, j] * (new - old)
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        b0_new = b0 + float((sample_w * resid).sum() / wsum)
        resid -= b0_new - b0
        max_delta = max(max_delta, abs(b0_new - b0))
        b0 = b0_new
        if max_delta < tol:
            break
    return beta, b0


def _lambda_path(lammax: float, cfg) -> np.ndarray:
    lammax = max(lammax, 1e-12)
    return np.geomspace(lammax, lammax * cfg.lambda_min_ratio, cfg.n_lambdas)


@dataclass
class LassoModel:
    """L1-penalised linear regression on standardized features."""

    coef: np.ndarray
    intercept: float
    feat_mean: np.ndarray
    feat_sd: np.ndarray
    lambda_: float

    def predict(self, F: np.ndarray) -> np.ndarray:
        F = np.atleast_2d(np.asarray(F, dtype=float))
        Z = (F - self.feat_mean) / self.feat_sd
        return Z @ self.coef + self.intercept


def _fit_lasso_path(Z, y, lambdas, cfg):
    ones = np.ones(Z.shape[0])
    beta = np.zeros(Z.shape[1])
    out = []
    for lam in lambdas:
        beta, b0 = _cd_weighted_lasso(Z, y, ones, lam, beta.copy(), cfg.max_sweeps, cfg.tol)
        out.append((beta.copy(), b0))
    return out


def fit_lasso(F, y, cfg: LassoConfig = LassoConfig(), seed: int = 0) -> LassoModel:
    """Lasso with the penalty picked by internal cross-validated MSE."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    y = np.asarray(y, dtype=float)
    n = F.shape[0]
    if n < 2:
        raise ValueError("need at least two rows")
    Z, mean, sd = _standardize(F)
    lammax = np.abs(Z.T @ (y - y.mean())).max() / n
    lambdas = _lambda_path(lammax, cfg)
    k = min(cfg.cv_folds, n)
    if k >= 2:
        folds = np.random.default_rng(seed).integers(0, k, size=n)
        cv_err = np.zeros(len(lambdas))
        for f in range(k):
            tr, te = folds != f, folds == f
            if te.sum() == 0 or tr.sum() < 2:
                continue
            path = _fit_lasso_path(Z[tr], y[tr], lambdas, cfg)
            for i, (b, b0) in enumerate(path):
                pred = Z[te] @ b + b0
                cv_err[i] += ((y[te] - pred) ** 2).sum()
        best = int(np.argmin(cv_err))
    else:
        best = len(lambdas) - 1
    path = _fit_lasso_path(Z, y, lambdas[: best + 1], cfg)
    beta, b0 = path[-1]
    return LassoModel(beta, b0, mean, sd, float(lambdas[best]))


@dataclass
class LogisticModel:
    """L1-penalised logistic regression; probabilities clipped by the caller."""

    coef: np.ndarray
    intercept: float
    feat_mean: np.ndarray
    feat_sd: np.ndarray
    lambda_: float

    def predict(self, F: np.ndarray) -> np.ndarray:
        F = np.atleast_2d(np.asarray(F, dtype=float))
        Z = (F - self.feat_mean) / self.feat_sd
        eta = Z @ self.coef + self.intercept
        return 1.0 / (1.0 + np.exp(-np.clip(eta, -35.0, 35.0)))


def _fit_logistic_path(Z, y, lambdas, cfg):
    n = Z.shape[0]
    beta = np.zeros(Z.shape[1])
    b0 = float(np.log((y.mean() + _PMIN) / (1.0 - y.mean() + _PMIN)))
    out = []
    for lam in lambdas:
        for _ in range(cfg.max_irls):
            eta = Z @ beta + b0
            p = 1.0 / (1.0 + np.exp(-np.clip(eta, -35.0, 35.0)))
            w = np.maximum(p * (1.0 - p), 1e-5)
            z = eta + (y - p) / w
            beta_old = beta.copy()
            b0_old = b0
            beta, b0 = _cd_weighted_lasso(Z, z, w, lam, beta, cfg.max_sweeps, cfg.tol)
            if abs(b0 - b0_old) + np.abs(beta - beta_old).max() < cfg.tol * 10:
                break
        out.append((beta.copy(), b0))
    return out


def _deviance(y, p):
    p = np.clip(p, _PMIN, 1.0 - _PMIN)
    return -2.0 * np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def fit_l1_logistic(F, y, cfg: LogisticConfig = LogisticConfig(), seed: int = 0) -> LogisticModel:
    """L1 logistic regression; penalty picked by cross-validated deviance.

    Raises when the labels are single-class, which leaves the log-odds
    unidentified.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    y = np.asarray(y, dtype=float)
    n = F.shape[0]
    if n < 2:
        raise ValueError("need at least two rows")
    if np.all(y == y[0]):
        raise ValueError("single-class training labels")
    Z, mean, sd = _standardize(F)
    lammax = np.abs(Z.T @ (y - y.mean())).max() / n
    lambdas = _lambda_path(lammax, cfg)
    k = min(cfg.cv_folds, n)
    rng = np.random.default_rng(seed)
    folds = rng.integers(0, k, size=n)
    cv_err = np.zeros(len(lambdas))
    usable = True
    for f in range(k):
        tr, te = folds != f, folds == f
        if te.sum() == 0 or len(np.unique(y[tr])) < 2:
            usable = False
            break
        path = _fit_logistic_path(Z[tr], y[tr], lambdas, cfg)
        for i, (b, b0) in enumerate(path):
            eta = Z[te] @ b + b0
            p = 1.0 / (1.0 + np.exp(-np.clip(eta, -35.0, 35.0)))
            cv_err[i] += _deviance(y[te], p)
    best = int(np.argmin(cv_err)) if usable else len(lambdas) - 1
    path = _fit_logistic_path(Z, y, lambdas[: best + 1], cfg)
    beta, b0 = path[-1]
    return LogisticModel(beta, b0, mean, sd, float(lambdas[best]))


# ---------------------------------------------------------------------------
# polynomial sieve
# ---------------------------------------------------------------------------


def polynomial_basis(F: np.ndarray, degree: int = 2) -> np.ndarray:
    """Intercept, linear terms, and (for degree 2) squares and interactions."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    n, p = F.shape
    cols = [np.ones(n)]
    cols.extend(F[:, j] for j in range(p))
    if degree >= 2:
        for i in range(p):
            for j in range(i, p):
                cols.append(F[:, i] * F[:, j])
    if degree >= 3:
        raise ValueError("sieve degrees above 2 are not supported")
    return np.column_stack(cols)


@dataclass
class SieveModel:
    """Least-squares fit on a polynomial basis with standardized inputs."""

    coef: np.ndarray
    feat_mean: np.ndarray
    feat_sd: np.ndarray
    degree: int

    def predict(self, F: np.ndarray) -> np.ndarray:
        F = np.atleast_2d(np.asarray(F, dtype=float))
        Z = (F - self.feat_mean) / self.feat_sd
        return polynomial_basis(Z, self.degree) @ self.coef


def fit_sieve(F, y, cfg: SieveConfig = SieveConfig()) -> SieveModel:
    """OLS on the polynomial basis; rank-deficient designs are rejected."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    y = np.asarray(y, dtype=float)
    if F.shape[0] < 1:
        raise ValueError("empty design")
    Z, mean, sd = _standardize(F)
    B = polynomial_basis(Z, cfg.degree)
    coef, _, rank, _ = np.linalg.lstsq(B, y, rcond=None)
    if rank == 0:
        raise ValueError("degenerate sieve design matrix")
    return SieveModel(coef, mean, sd, cfg.degree)

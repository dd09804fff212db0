"""SCAD-penalized least squares via coordinate descent.

Columns are standardized to zero mean and unit population variance, so each
coordinate update is the univariate SCAD thresholding rule. The penalty
level is picked by k-fold cross-validation over a descending log grid with
warm starts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDesignError


def scad_threshold(z: float, lam: float, a: float = 3.7) -> float:
    """Closed-form SCAD solution for an orthonormal coordinate.

    Soft-thresholding up to 2*lam, linear interpolation on (2*lam, a*lam],
    identity beyond a*lam.
    """
    az = abs(z)
    if az <= 2.0 * lam:
        return float(np.sign(z) * max(az - lam, 0.0))
    if az <= a * lam:
        return float(np.sign(z) * (az - a * lam / (a - 1.0)) / (1.0 - 1.0 / (a - 1.0)))
    return float(z)


def coordinate_descent(x: np.ndarray, y: np.ndarray, lam: float, a: float = 3.7,
                       beta0: np.ndarray | None = None,
                       tol: float = 1e-8, max_iter: int = 10_000) -> np.ndarray:
    """Cyclic coordinate descent; x must be standardized (mean 0, ||col||^2 = n)."""
    n, p = x.shape
    beta = np.zeros(p) if beta0 is None else beta0.copy()
    r = y - x @ beta
    for _ in range(max_iter):
        delta = 0.0
        for j in range(p):
            bj = beta[j]
            z = (x[:, j] @ r) / n + bj
            bj_new = scad_threshold(z, lam, a)
            if bj_new != bj:
                r += x[:, j] * (bj - bj_new)
                beta[j] = bj_new
                delta = max(delta, abs(bj_new - bj))
        if delta < tol:
            break
    return beta


def _standardize(x: np.ndarray):
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    ok = sd > 0
    xs = np.zeros_like(x)
    xs[:, ok] = (x[:, ok] - mu[ok]) / sd[ok]
    return xs, ok


def lambda_grid(x: np.ndarray, y: np.ndarray, n_lambda: int = 50,
                ratio: float = 1e-3) -> np.ndarray:
    n = x.shape[0]
    lam_max = np.abs(x.T @ y).max() / n
    lam_max = max(lam_max, 1e-12)
    return np.logspace(np.log10(lam_max), np.log10(lam_max * ratio), n_lambda)


@dataclass
class ScadFit:
    response: int
    coefficients: np.ndarray  # aligned with the input columns; response slot is 0
    lambda_selected: float
    cv_error: float
    skipped: bool = False


def scad_fit_cv(x: np.ndarray, y: np.ndarray, a: float = 3.7, n_folds: int = 5,
                n_lambda: int = 50, seed: int = 42) -> tuple[np.ndarray, float, float]:
    """Cross-validated SCAD fit on standardized data.

    Lambda is chosen by the one-standard-error rule: the largest value whose
    CV error sits within one standard error of the minimum, which favors the
    sparser end of the near-optimal plateau. Returns (coefficients on the
    standardized scale, selected lambda, cv mean squared error).
    """
    n, p = x.shape
    lambdas = lambda_grid(x, y, n_lambda)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    folds = np.array_split(order, n_folds)

    fold_mse = np.zeros((len(lambdas), len(folds)))
    for fi, fold in enumerate(folds):
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        beta = None
        for k, lam in enumerate(lambdas):
            beta = coordinate_descent(x[mask], y[mask], lam, a, beta0=beta)
            resid = y[fold] - x[fold] @ beta
            fold_mse[k, fi] = float(resid @ resid) / fold.size
    cv_mse = fold_mse.mean(axis=1)
    cv_se = fold_mse.std(axis=1, ddof=1) / np.sqrt(len(folds))

    lowest = int(np.argmin(cv_mse))
    threshold = cv_mse[lowest] + cv_se[lowest]
    best = next(k for k in range(len(lambdas)) if cv_mse[k] <= threshold)
    beta = None
    for lam in lambdas[: best + 1]:
        beta = coordinate_descent(x, y, lam, a, beta0=beta)
    return beta, float(lambdas[best]), float(cv_mse[best])


def scad_importance(values: np.ndarray, a: float = 3.7, seed: int = 42,
                    n_folds: int = 5, n_lambda: int = 50) -> list[ScadFit]:
    """Regress each column on all others with the SCAD penalty.

    One fit per response column; zero-variance responses are skipped with a
    flag, zero-variance predictors are frozen at coefficient zero.
    """
    values = np.asarray(values, dtype=float)
    n, p = values.shape
    if p < 2:
        raise DegenerateDesignError("need at least two columns")
    if n < 10:
        raise DegenerateDesignError("need at least 10 rows")

    xs, ok = _standardize(values)
    fits = []
    for j in range(p):
        coef = np.zeros(p)
        if not ok[j]:
            fits.append(ScadFit(j, coef, 0.0, float("nan"), skipped=True))
            continue
        pred_idx = [k for k in range(p) if k != j and ok[k]]
        if not pred_idx:
            fits.append(ScadFit(j, coef, 0.0, float("nan"), skipped=True))
            continue
        beta, lam, err = scad_fit_cv(xs[:, pred_idx], xs[:, j], a=a,
                                     n_folds=n_folds, n_lambda=n_lambda,
                                     seed=seed + j)
        coef[pred_idx] = beta
        fits.append(ScadFit(j, coef, lam, err))
    return fits

"""Singular value decomposition utilities.

Covers low-rank completion of missing entries by iterative singular value
soft-thresholding, hard-threshold rank estimation (2.858 * median singular
value), and the matrix-level norm/spectral descriptors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllMissingColumnError, EmptySpectrumError, NonFiniteError

HARD_THRESHOLD_FACTOR = 2.858
CONDITION_SENTINEL = 1e18  # reported instead of inf for exactly singular input


@dataclass
class SvdResult:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray  # p x r, right singular vectors as columns


@dataclass
class ImputeResult:
    completed: np.ndarray
    iterations: int
    final_delta: float
    converged: bool = True
    # (lambda, objective) per iteration; objective is
    # 0.5*||P_obs(X - Z)||_F^2 + lambda*||Z||_*
    objective_trace: list = field(default_factory=list)


@dataclass
class SpectralSummary:
    numerical_rank: int
    threshold: float
    spectral_norm: float
    condition_number: float
    frobenius_norm: float
    nuclear_norm: float
    sv_entropy: float
    median_gap: float
    max_gap: float


def svd(m: np.ndarray) -> SvdResult:
    """Thin SVD with nonincreasing singular values."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("svd input contains NaN or inf")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return SvdResult(u, s, vt.T)


def default_lambda_grid(sigma_max: float) -> np.ndarray:
    """Halving schedule from 0.5*sigma_max down to 1e-4*sigma_max."""
    fracs = []
    f = 0.5
    while f > 1e-4:
        fracs.append(f)
        f /= 2.0
    fracs.append(1e-4)
    return sigma_max * np.asarray(fracs)


def soft_impute(values: np.ndarray, missing_mask: np.ndarray | None = None,
                lambda_grid: np.ndarray | None = None,
                tol: float = 1e-6, max_iter: int = 200) -> ImputeResult:
    """Complete missing entries by soft-thresholded SVD iteration.

    Iterates Z <- S_lambda(P_obs(X) + P_miss(Z)), warm-starting down a
    decreasing lambda grid; observed entries are restored exactly in the
    returned matrix.
    """
    x = np.asarray(values, dtype=float)
    if missing_mask is None:
        missing_mask = np.isnan(x)
    missing_mask = np.asarray(missing_mask, dtype=bool)
    obs = ~missing_mask

    if (~obs).all(axis=0).any():
        bad = np.nonzero((~obs).all(axis=0))[0].tolist()
        raise AllMissingColumnError(f"columns with no observed entries: {bad}")

    if not missing_mask.any():
        return ImputeResult(x.copy(), 0, 0.0)

    x_obs = np.where(obs, x, 0.0)
    if lambda_grid is None:
        sigma_max = np.linalg.svd(x_obs, compute_uv=False)[0]
        lambda_grid = default_lambda_grid(sigma_max)

    # start from column means on the missing entries
    col_means = np.zeros(x.shape[1])
    for j in range(x.shape[1]):
        col_means[j] = x[obs[:, j], j].mean()
    z = np.where(obs, x, col_means[np.newaxis, :])

    iterations = 0
    delta = 0.0
    converged = True
    trace = []
    for lam in lambda_grid:
        for _ in range(max_iter):
            target = np.where(obs, x, z)
            u, s, vt = np.linalg.svd(target, full_matrices=False)
            s_thr = np.maximum(s - lam, 0.0)
            z_new = (u * s_thr) @ vt
            obj = 0.5 * np.sum((x_obs - np.where(obs, z_new, 0.0)) ** 2) \
                + lam * s_thr.sum()
            trace.append((float(lam), float(obj)))
            denom = max(np.linalg.norm(z), 1e-12)
            delta = np.linalg.norm(z_new - z) / denom
            z = z_new
            iterations += 1
            if delta < tol:
                break
        else:
            converged = False

    completed = np.where(obs, x, z)
    return ImputeResult(completed, iterations, float(delta), converged, trace)


def gavish_donoho_rank(sigma: np.ndarray) -> tuple[float, int]:
    """Hard threshold tau = 2.858 * median(sigma); rank counts values above it."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size == 0:
        raise EmptySpectrumError("empty singular value spectrum")
    tau = HARD_THRESHOLD_FACTOR * float(np.median(sigma))
    rank = int(np.sum(sigma > tau))
    return tau, rank


def matrix_norms(m: np.ndarray) -> dict[str, float]:
    """Induced 1-norm, Frobenius, induced infinity-norm, max |entry|."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("matrix_norms input contains NaN or inf")
    return {
        "l1_norm": float(np.abs(m).sum(axis=0).max()),
        "frobenius_norm": float(np.linalg.norm(m, "fro")),
        "infinity_norm": float(np.abs(m).sum(axis=1).max()),
        "max_modulus": float(np.abs(m).max()),
    }


def sv_entropy(sigma: np.ndarray, weights: str = "energy") -> float:
    """Base-2 Shannon entropy of the normalized spectrum.

    weights="energy" uses p_k = sigma_k^2 / sum sigma^2 (the default);
    "magnitude" uses sigma_k / sum sigma.
    """
    sigma = np.asarray(sigma, dtype=float)
    w = sigma ** 2 if weights == "energy" else sigma
    total = w.sum()
    if total <= 0:
        return 0.0
    p = w / total
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def spectral_descriptors(sigma: np.ndarray, weights: str = "energy") -> SpectralSummary:
    """Full spectral summary from a nonincreasing singular value vector."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size == 0:
        raise EmptySpectrumError("empty singular value spectrum")
    tau, rank = gavish_donoho_rank(sigma)
    smallest = float(sigma[-1])
    if smallest > 0:
        condition = float(sigma[0] / smallest)
    else:
        condition = CONDITION_SENTINEL
    gaps = -np.diff(sigma)
    return SpectralSummary(
        numerical_rank=rank,
        threshold=tau,
        spectral_norm=float(sigma[0]),
        condition_number=condition,
        frobenius_norm=float(np.sqrt((sigma ** 2).sum())),
        nuclear_norm=float(sigma.sum()),
        sv_entropy=sv_entropy(sigma, weights),
        median_gap=float(np.median(gaps)) if gaps.size else 0.0,
        max_gap=float(gaps.max()) if gaps.size else 0.0,
    )

"""Univariate and multivariate statistical descriptors.

Every measure emitted by the fingerprinting pipeline is computed here:
bounds, vector norms, moments and quantiles, robust statistics, histogram
entropy, serial-dependence summaries (lag-1 autoregression, ACF/PACF,
dominant FFT component), change-point locations, collinearity pruning with
pairwise correlation/regression, SCAD variable importance, categorical
summaries, and the per-partition recursion support.

Undefined statistics carry value None and serialize as a dedicated
"undefined" sentence instead of a number.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .changepoint import KINDS, MIN_SEGMENT, pelt_changepoints
from .errors import EmptyVectorError, TooShortError
from .scad import ScadFit, scad_importance

# Closed measure vocabulary, in serialization order within each scope.
MATRIX_SCALAR_MEASURES = (
    "total_count", "total_unique", "missing_count", "cardinality_percent",
    "non_numeric_percent",
    "l1_norm", "frobenius_norm", "infinity_norm", "max_modulus",
    "numerical_rank", "singular_value_threshold", "spectral_norm",
    "condition_number", "nuclear_norm", "sv_entropy", "sv_median_gap",
    "sv_max_gap",
)
MATRIX_PAIR_MEASURES = ("pairwise_correlation", "pairwise_regression_coefficient")
VARIABLE_MULTI_MEASURES = ("scad_multivariate_correlation",
                           "multivariate_regression_coefficients")
UNIVARIATE_MEASURES = (
    "minimum", "maximum", "range", "negative_count",
    "l0_norm", "l1_norm", "l2_norm",
    "mean", "standard_deviation", "skewness", "kurtosis",
    "coefficient_of_variation", "q1", "median", "q3", "median_abs_deviation",
    "histogram_entropy",
    "ar1_coefficient", "index_slope",
    "acf_significant_lags", "pacf_significant_lags",
    "dominant_frequency", "phase_information",
    "mean_shift_locations", "variance_shift_locations",
    "mean_variance_shift_locations",
)
CATEGORICAL_MEASURES = ("frequency_distribution", "modal_category", "unique_levels")

CHANGEPOINT_MEASURE_BY_KIND = {
    "mean": "mean_shift_locations",
    "variance": "variance_shift_locations",
    "meanvariance": "mean_variance_shift_locations",
}

MEASURE_VOCABULARY = tuple(dict.fromkeys(
    MATRIX_SCALAR_MEASURES + MATRIX_PAIR_MEASURES + VARIABLE_MULTI_MEASURES
    + UNIVARIATE_MEASURES + CATEGORICAL_MEASURES
))


@dataclass(frozen=True)
class Scope:
    kind: str  # "matrix" | "variable" | "category_level" | "segment"
    variable: str = "matrix"
    level: str | None = None
    segment: int | None = None

    def token(self) -> str:
        if self.kind == "matrix":
            return "matrix"
        if self.kind == "variable":
            return self.variable
        if self.kind == "category_level":
            return f"{self.variable}__lvl_{self.level}"
        return f"{self.variable}__seg{self.segment}"


MATRIX_SCOPE = Scope("matrix")


@dataclass
class Descriptor:
    scope: Scope
    measure: str
    value: object  # float | int | list | str | None (None = undefined)
    aux: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# univariate measures
# ---------------------------------------------------------------------------

def _require_nonempty(x: np.ndarray):
    if x.size == 0:
        raise EmptyVectorError("empty vector")


def univariate_bounds(x: np.ndarray) -> dict:
    x = np.asarray(x, dtype=float)
    _require_nonempty(x)
    mn, mx = float(x.min()), float(x.max())
    return {
        "minimum": mn,
        "maximum": mx,
        "range": mx - mn,
        "negative_count": int(np.sum(x < 0)),
    }


def univariate_norms(x: np.ndarray) -> dict:
    x = np.asarray(x, dtype=float)
    _require_nonempty(x)
    return {
        "l0_norm": int(np.count_nonzero(x)),
        "l1_norm": float(np.abs(x).sum()),
        "l2_norm": float(np.sqrt((x ** 2).sum())),
    }


def univariate_moments(x: np.ndarray) -> dict:
    """Moments and quantile summaries.

    Skewness is m3/m2^1.5 and kurtosis the raw m4/m2^2 (values below 3 are
    platykurtic); the coefficient of variation is undefined at zero mean.
    """
    x = np.asarray(x, dtype=float)
    _require_nonempty(x)
    n = x.size
    mean = float(x.mean())
    out = {"mean": mean}
    sd = float(x.std(ddof=1)) if n >= 2 else None
    out["standard_deviation"] = sd
    centered = x - mean
    m2 = float(np.mean(centered ** 2))
    if m2 > 0:
        out["skewness"] = float(np.mean(centered ** 3) / m2 ** 1.5)
        out["kurtosis"] = float(np.mean(centered ** 4) / m2 ** 2)
    else:
        out["skewness"] = None
        out["kurtosis"] = None
    if sd is not None and abs(mean) >= 1e-12:
        out["coefficient_of_variation"] = sd / abs(mean)
    else:
        out["coefficient_of_variation"] = None
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    out["q1"] = float(q1)
    out["median"] = float(med)
    out["q3"] = float(q3)
    out["median_abs_deviation"] = float(np.median(np.abs(x - med)))
    return out


def univariate_entropy(x: np.ndarray, bins: int | None = None) -> float:
    """Base-2 entropy of the equal-width histogram (ceil(sqrt(n)) bins)."""
    x = np.asarray(x, dtype=float)
    _require_nonempty(x)
    if bins is None:
        bins = int(np.ceil(np.sqrt(x.size)))
    if np.ptp(x) == 0.0:
        return 0.0
    counts, _ = np.histogram(x, bins=bins)
    p = counts[counts > 0] / x.size
    return float(-(p * np.log2(p)).sum())


def _ols_slope(xv: np.ndarray, yv: np.ndarray) -> float | None:
    xc = xv - xv.mean()
    denom = float(xc @ xc)
    if denom <= 0:
        return None
    return float(xc @ (yv - yv.mean()) / denom)


def ar1_and_trend(x: np.ndarray) -> dict:
    """Lag-1 autoregressive slope and the slope against the row index."""
    x = np.asarray(x, dtype=float)
    if x.size < 3:
        raise EmptyVectorError("need at least 3 points")
    idx = np.arange(1.0, x.size + 1.0)
    return {
        "ar1_coefficient": _ols_slope(x[:-1], x[1:]),
        "index_slope": _ols_slope(idx, x),
    }


def sample_acf(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelations r_1..r_max_lag."""
    x = np.asarray(x, dtype=float)
    c = x - x.mean()
    denom = float(c @ c)
    return np.array([float(c[:-h] @ c[h:]) / denom for h in range(1, max_lag + 1)])


def pacf_durbin_levinson(acf: np.ndarray) -> np.ndarray:
    """Partial autocorrelations from r_1..r_K via the Durbin-Levinson recursion."""
    K = acf.size
    pacf = np.zeros(K)
    phi_prev = np.zeros(0)
    for k in range(1, K + 1):
        if k == 1:
            phi_kk = acf[0]
            phi = np.array([phi_kk])
        else:
            num = acf[k - 1] - float(phi_prev @ acf[k - 2::-1][:k - 1])
            den = 1.0 - float(phi_prev @ acf[:k - 1])
            phi_kk = num / den if abs(den) > 1e-12 else 0.0
            phi = np.concatenate([phi_prev - phi_kk * phi_prev[::-1], [phi_kk]])
        pacf[k - 1] = phi_kk
        phi_prev = phi
    return pacf


def acf_significant_lags(x: np.ndarray, max_lag: int | None = None) -> dict:
    """Lags whose (partial) autocorrelation leaves the 1.96/sqrt(n) band."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if max_lag is None:
        max_lag = max(1, min(n // 4, 40))
    if n <= max_lag:
        raise EmptyVectorError("series shorter than max_lag")
    if np.ptp(x) == 0.0:
        return {"acf_significant_lags": None, "pacf_significant_lags": None}
    band = 1.96 / np.sqrt(n)
    r = sample_acf(x, max_lag)
    pr = pacf_durbin_levinson(r)
    return {
        "acf_significant_lags": [h + 1 for h in range(max_lag) if abs(r[h]) > band],
        "pacf_significant_lags": [h + 1 for h in range(max_lag) if abs(pr[h]) > band],
    }


def fft_dominant(x: np.ndarray) -> dict:
    """Strongest non-DC frequency (cycles per series) and its phase."""
    x = np.asarray(x, dtype=float)
    if x.size < 4:
        raise EmptyVectorError("need at least 4 points")
    if np.ptp(x) == 0.0:
        return {"dominant_frequency": None, "phase_information": None}
    spec = np.fft.rfft(x - x.mean())
    mags = np.abs(spec)
    k = 1 + int(np.argmax(mags[1:]))
    return {
        "dominant_frequency": int(k),
        "phase_information": float(np.arctan2(spec[k].imag, spec[k].real)),
    }


def changepoint_measures(x: np.ndarray) -> dict:
    """Boundary lists for all three shift kinds; None when the series is too
    short for a given kind."""
    out = {}
    for kind in KINDS:
        measure = CHANGEPOINT_MEASURE_BY_KIND[kind]
        try:
            cps = pelt_changepoints(x, kind)
            out[measure] = list(cps.boundaries)
        except TooShortError:
            out[measure] = None
    return out


def univariate_set(x: np.ndarray) -> dict:
    """All univariate measures for one column, keyed by measure name."""
    x = np.asarray(x, dtype=float)
    out = {}
    out.update(univariate_bounds(x))
    out.update(univariate_norms(x))
    out.update(univariate_moments(x))
    out["histogram_entropy"] = univariate_entropy(x)
    if x.size >= 3:
        out.update(ar1_and_trend(x))
    else:
        out["ar1_coefficient"] = None
        out["index_slope"] = None
    try:
        out.update(acf_significant_lags(x))
    except EmptyVectorError:
        out["acf_significant_lags"] = None
        out["pacf_significant_lags"] = None
    try:
        out.update(fft_dominant(x))
    except EmptyVectorError:
        out["dominant_frequency"] = None
        out["phase_information"] = None
    out.update(changepoint_measures(x))
    return out


# ---------------------------------------------------------------------------
# multivariate: collinearity pruning, pairwise structure, SCAD importance
# ---------------------------------------------------------------------------

@dataclass
class CorrelationReport:
    pairwise_r: np.ndarray
    retained: list[int]
    dropped: list[tuple[int, int, float]]  # (column, culprit, r_squared)
    constant: list[int] = field(default_factory=list)


def collinearity_prune(values: np.ndarray, rho: float) -> CorrelationReport:
    """Greedy index-order pruning of columns with r^2 above rho against an
    already-retained column. Constant columns carry correlation 0."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("expected a 2-d array of numeric columns")
    k = values.shape[1]
    sd = values.std(axis=0)
    constant = [j for j in range(k) if sd[j] == 0.0]
    if k == 1:
        return CorrelationReport(np.ones((1, 1)), [0], [], constant)

    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.corrcoef(values, rowvar=False)
    r = np.nan_to_num(r, nan=0.0)
    np.fill_diagonal(r, 1.0)

    retained, dropped = [], []
    for j in range(k):
        culprit = None
        for i in retained:
            if r[i, j] ** 2 > rho:
                culprit = i
                break
        if culprit is None:
            retained.append(j)
        else:
            dropped.append((j, culprit, float(r[culprit, j] ** 2)))
    return CorrelationReport(r, retained, dropped, constant)


def pairwise_descriptors(values: np.ndarray, report: CorrelationReport,
                         names: list[str],
                         scope: Scope = MATRIX_SCOPE) -> list[Descriptor]:
    """Correlation and simple-regression-slope descriptors for every retained
    pair (slope regresses the later column on the earlier), measure-major so
    serialization order matches the vocabulary order."""
    sd = np.asarray(values, dtype=float).std(axis=0)
    pairs = [(i, j) for a_pos, i in enumerate(report.retained)
             for j in report.retained[a_pos + 1:]]
    out = []
    for i, j in pairs:
        r_ij = float(report.pairwise_r[i, j])
        undef = i in report.constant or j in report.constant
        out.append(Descriptor(scope, "pairwise_correlation",
                              None if undef else r_ij,
                              {"var_a": names[i], "var_b": names[j]}))
    for i, j in pairs:
        r_ij = float(report.pairwise_r[i, j])
        slope = r_ij * sd[j] / sd[i] if sd[i] > 0 else None
        out.append(Descriptor(scope, "pairwise_regression_coefficient",
                              slope, {"var_a": names[i], "var_b": names[j]}))
    return out


def scad_descriptors(values: np.ndarray, retained: list[int], names: list[str],
                     scad_a: float, seed: int,
                     scope_for=None) -> list[Descriptor]:
    """SCAD leave-one-out fits over the retained columns, two descriptors per
    response: the selected support and the fitted coefficient vector."""
    fits = scad_importance(values[:, retained], a=scad_a, seed=seed)
    out = []
    for fit in fits:
        col = retained[fit.response]
        scope = scope_for(names[col]) if scope_for else Scope("variable", names[col])
        predictors = [retained[k] for k in range(len(retained)) if k != fit.response]
        if fit.skipped:
            out.append(Descriptor(scope, "scad_multivariate_correlation", None,
                                  {"skipped": True}))
            out.append(Descriptor(scope, "multivariate_regression_coefficients",
                                  None, {"skipped": True}))
            continue
        entries = [(names[p], float(fit.coefficients[retained.index(p)]))
                   for p in predictors]
        nonzero = [(nm, c) for nm, c in entries if c != 0.0]
        aux = {"predictors": entries, "lambda": fit.lambda_selected,
               "cv_error": fit.cv_error}
        out.append(Descriptor(scope, "scad_multivariate_correlation",
                              [c for _, c in nonzero],
                              {**aux, "selected": nonzero}))
        out.append(Descriptor(scope, "multivariate_regression_coefficients",
                              [c for _, c in entries], aux))
    return out


# ---------------------------------------------------------------------------
# counts and categorical summaries
# ---------------------------------------------------------------------------

def count_descriptors(values: np.ndarray, missing_mask: np.ndarray,
                      non_numeric_mask: np.ndarray) -> dict:
    n, p = values.shape
    total = n * p
    total_unique = 0
    for j in range(p):
        col = values[~missing_mask[:, j], j]
        total_unique += len(np.unique(col))
    return {
        "total_count": int(total),
        "total_unique": int(total_unique),
        "missing_count": int(missing_mask.sum()),
        "cardinality_percent": 100.0 * total_unique / total,
        "non_numeric_percent": 100.0 * non_numeric_mask.sum() / total,
    }


def categorical_summary(col: np.ndarray, missing: np.ndarray, n_min: int,
                        label_of=None) -> tuple[dict, list[float]]:
    """Column-level discrete summaries plus the levels large enough for the
    partition recursion. Modal ties go to the first level in sorted order."""
    vals = col[~missing]
    levels, counts = np.unique(vals, return_counts=True)
    label_of = label_of or (lambda v: str(int(v)) if float(v).is_integer() else repr(float(v)))
    labels = [label_of(v) for v in levels]
    rel = (counts / counts.sum()).tolist() if counts.sum() else []
    mode_idx = int(np.argmax(counts)) if counts.size else None
    measures = {
        "frequency_distribution": ([int(c) for c in counts],
                                   {"levels": labels, "relative": rel}),
        "modal_category": (labels[mode_idx] if mode_idx is not None else None,
                           {"count": int(counts[mode_idx]) if mode_idx is not None else 0}),
        "unique_levels": (int(levels.size), {}),
    }
    qualifying = [float(levels[i]) for i in range(levels.size) if counts[i] >= n_min]
    return measures, qualifying

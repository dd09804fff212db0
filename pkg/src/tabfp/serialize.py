"""Sentence templates and fingerprint assembly.

Each descriptor renders to one templated sentence of the form

    Variable: <token>. Measure: <label>. Response: <body>

with real values formatted to exactly 4 decimal places (round-half-even).
The fingerprint is the ordered sentence collection: matrix-scope first,
then per-variable blocks in column order, then category-level blocks, then
segment blocks, measures in fixed vocabulary order within each scope.

Ablation modes reproduce the embedding conditions used for clustering
comparisons: "no-value" drops the numeric response clause,
"no-value-no-variable" additionally replaces the variable token with "var",
and "multivariate-only" keeps only global matrix-scope sentences.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .datamodel import DataMatrix, FingerprintConfig, classify_columns
from .descriptors import (
    CATEGORICAL_MEASURES,
    MATRIX_SCALAR_MEASURES,
    MATRIX_SCOPE,
    UNIVARIATE_MEASURES,
    Descriptor,
    Scope,
    categorical_summary,
    collinearity_prune,
    count_descriptors,
    pairwise_descriptors,
    scad_descriptors,
    univariate_set,
)
from .changepoint import segments_from_boundaries
from .errors import UnknownMeasureError
from .privacy import PrivacyBudget, default_registry, privatize, sensitivity_for
from .spectral import matrix_norms, soft_impute, spectral_descriptors

SCHEMA_VERSION = "tabfp-1"
ABLATION_MODES = ("full", "no-value", "no-value-no-variable", "multivariate-only")

MEASURE_LABELS = {
    "total_count": "total count",
    "total_unique": "total unique",
    "missing_count": "missing count",
    "cardinality_percent": "cardinality percent",
    "non_numeric_percent": "non numeric percent",
    "l1_norm": "l1 norm",
    "frobenius_norm": "frobenius norm",
    "infinity_norm": "infinity norm",
    "max_modulus": "maximum modulus",
    "numerical_rank": "numerical rank",
    "singular_value_threshold": "singular value threshold",
    "spectral_norm": "spectral norm",
    "condition_number": "condition number",
    "nuclear_norm": "nuclear norm",
    "sv_entropy": "singular value entropy",
    "sv_median_gap": "singular value median gap",
    "sv_max_gap": "singular value maximum gap",
    "pairwise_correlation": "pairwise correlation",
    "pairwise_regression_coefficient": "pairwise regression coefficient",
    "scad_multivariate_correlation": "scad multivariate correlation",
    "multivariate_regression_coefficients": "multivariate regression coefficients",
    "minimum": "minimum",
    "maximum": "maximum",
    "range": "range",
    "negative_count": "negative count",
    "l0_norm": "l0 norm",
    "l2_norm": "l2 norm",
    "mean": "mean",
    "standard_deviation": "standard deviation",
    "skewness": "skewness",
    "kurtosis": "kurtosis",
    "coefficient_of_variation": "coefficient of variation",
    "q1": "q1",
    "median": "median",
    "q3": "q3",
    "median_abs_deviation": "median absolute deviation",
    "histogram_entropy": "histogram entropy",
    "ar1_coefficient": "autoregressive 1 lag",
    "index_slope": "slope via index",
    "acf_significant_lags": "autocorrelation significant lags",
    "pacf_significant_lags": "partial autocorrelation significant lags",
    "dominant_frequency": "dominant frequency",
    "phase_information": "phase information",
    "mean_shift_locations": "mean shift locations",
    "variance_shift_locations": "variance shift locations",
    "mean_variance_shift_locations": "mean variance shift locations",
    "frequency_distribution": "frequency distribution",
    "modal_category": "modal category",
    "unique_levels": "unique levels",
}
_LABEL_TO_MEASURE = {v: k for k, v in MEASURE_LABELS.items()}

_SIMPLE_BODIES = {
    "total_count": "The total cell count is {v}.",
    "total_unique": "The total number of unique values is {v}.",
    "missing_count": "The missing value count is {v}.",
    "cardinality_percent": "The cardinality percent is {v}.",
    "non_numeric_percent": "The non numeric percent is {v}.",
    "l1_norm": "The l1 norm is {v}.",
    "frobenius_norm": "The frobenius norm is {v}.",
    "infinity_norm": "The infinity norm is {v}.",
    "max_modulus": "The maximum modulus is {v}.",
    "numerical_rank": "The estimated numerical rank is {v}.",
    "singular_value_threshold": (
        "The optimal singular value threshold is {v}; singular values below "
        "this are considered noise under the Gavish-Donoho criterion."),
    "spectral_norm": "The spectral norm is {v}.",
    "condition_number": "The condition number is {v}.",
    "nuclear_norm": "The nuclear norm is {v}.",
    "sv_entropy": "The singular value entropy is {v} bits.",
    "sv_median_gap": "The median gap between consecutive singular values is {v}.",
    "sv_max_gap": "The maximum gap between consecutive singular values is {v}.",
    "minimum": "The minimum is {v}.",
    "maximum": "The maximum is {v}.",
    "range": "The range is {v}.",
    "negative_count": "The negative count is {v}.",
    "l0_norm": "The l0 norm is {v}.",
    "l2_norm": "The l2 norm is {v}.",
    "mean": "The mean is {v}.",
    "standard_deviation": "The standard deviation is {v}.",
    "skewness": "The skewness is {v}.",
    "coefficient_of_variation": "The coefficient of variation is {v}.",
    "q1": "The first quartile is {v}.",
    "median": "The median is {v}.",
    "q3": "The third quartile is {v}.",
    "median_abs_deviation": "The median absolute deviation is {v}.",
    "histogram_entropy": "The histogram entropy is {v} bits.",
    "ar1_coefficient": "The autoregressive 1 lag coefficient is {v}.",
    "index_slope": "The slope via index is {v}.",
    "dominant_frequency": "The dominant frequency is {v} cycles per series.",
    "phase_information": "The phase at the dominant frequency is {v} radians.",
    "unique_levels": "The number of unique levels is {v}.",
}

_LIST_BODIES = {
    "acf_significant_lags": ("Significant autocorrelation lags: {v}.",
                             "No significant autocorrelation lags."),
    "pacf_significant_lags": ("Significant partial autocorrelation lags: {v}.",
                              "No significant partial autocorrelation lags."),
    "mean_shift_locations": ("Mean shift change points at indices: {v}.",
                             "No mean shift change points detected."),
    "variance_shift_locations": ("Variance shift change points at indices: {v}.",
                                 "No variance shift change points detected."),
    "mean_variance_shift_locations": (
        "Mean and variance shift change points at indices: {v}.",
        "No mean and variance shift change points detected."),
}

KURTOSIS_TOL = 0.1
_MAX_LIST_ITEMS = 10


def format_value(v) -> str:
    """4 decimal places for reals, plain digits for integers."""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.4f}"


def _format_list(vs) -> str:
    shown = [format_value(v) for v in vs[:_MAX_LIST_ITEMS]]
    extra = len(vs) - len(shown)
    text = ", ".join(shown)
    if extra > 0:
        text += f", and {extra} more"
    return text


@dataclass
class Sentence:
    index: int
    variable: str
    measure: str
    value: object
    value_text: str
    text: str


@dataclass
class Fingerprint:
    dataset_id: str
    sentences: list[Sentence]
    config_echo: dict
    ablation: str = "full"

    @property
    def m(self) -> int:
        return len(self.sentences)

    def texts(self) -> list[str]:
        return [s.text for s in self.sentences]


def _body_for(d: Descriptor) -> tuple[str, str]:
    """(value_text, body) for a descriptor; None values render as undefined."""
    measure = d.measure
    label = MEASURE_LABELS.get(measure)
    if label is None:
        raise UnknownMeasureError(f"no template for measure {measure!r}")
    if d.value is None:
        return "", f"The {label} is undefined for this column."

    if measure == "kurtosis":
        vt = format_value(d.value)
        k = float(d.value)
        if k < 3.0 - KURTOSIS_TOL:
            shape = "platykurtic with lighter tails than normal"
        elif k > 3.0 + KURTOSIS_TOL:
            shape = "leptokurtic with heavier tails than normal"
        else:
            shape = "mesokurtic with tail weight close to normal"
        return vt, f"Kurtosis is {vt}; the distribution is {shape}."

    if measure in _LIST_BODIES:
        full, empty = _LIST_BODIES[measure]
        if not d.value:
            return "", empty
        vt = _format_list(list(d.value))
        return vt, full.format(v=vt)

    if measure == "pairwise_correlation":
        vt = format_value(d.value)
        return vt, (f"The Pearson correlation between {d.aux['var_a']} and "
                    f"{d.aux['var_b']} is {vt}.")
    if measure == "pairwise_regression_coefficient":
        vt = format_value(d.value)
        return vt, (f"The regression slope of {d.aux['var_b']} on "
                    f"{d.aux['var_a']} is {vt}.")

    if measure == "scad_multivariate_correlation":
        selected = d.aux.get("selected", [])
        if not selected:
            return "", "SCAD variable selection retained no predictors."
        shown = selected[:_MAX_LIST_ITEMS]
        parts = ", ".join(f"{nm} ({format_value(c)})" for nm, c in shown)
        if len(selected) > len(shown):
            parts += f", and {len(selected) - len(shown)} more"
        vt = _format_list([c for _, c in selected])
        return vt, f"SCAD variable selection retained: {parts}."
    if measure == "multivariate_regression_coefficients":
        entries = d.aux.get("predictors", [])
        if not entries:
            return "", "There are no candidate predictors."
        shown = entries[:_MAX_LIST_ITEMS]
        parts = ", ".join(f"{nm}={format_value(c)}" for nm, c in shown)
        if len(entries) > len(shown):
            parts += f", and {len(entries) - len(shown)} more"
        vt = _format_list([c for _, c in entries])
        return vt, f"The penalized regression coefficients are {parts}."

    if measure == "frequency_distribution":
        labels = d.aux.get("levels", [])
        rel = d.aux.get("relative", [])
        counts = list(d.value)
        items = [f"{labels[i]} {counts[i]} ({100.0 * rel[i]:.4f} percent)"
                 for i in range(min(len(counts), _MAX_LIST_ITEMS))]
        text = ", ".join(items)
        if len(counts) > _MAX_LIST_ITEMS:
            text += f", and {len(counts) - _MAX_LIST_ITEMS} more"
        return _format_list(counts), f"Level frequencies: {text}."
    if measure == "modal_category":
        return str(d.value), (f"The modal category is {d.value} with count "
                              f"{d.aux.get('count', 0)}.")

    template = _SIMPLE_BODIES[measure]
    vt = format_value(d.value)
    return vt, template.format(v=vt)


def render_sentence(d: Descriptor, index: int = 0, ablation: str = "full") -> Sentence:
    """Instantiate the template for one descriptor."""
    token = d.scope.token()
    label = MEASURE_LABELS.get(d.measure)
    if label is None:
        raise UnknownMeasureError(f"unknown measure {d.measure!r}")
    value_text, body = _body_for(d)
    if ablation == "no-value":
        text = f"Variable: {token}. Measure: {label}."
        value_text = ""
    elif ablation == "no-value-no-variable":
        text = f"Variable: var. Measure: {label}."
        value_text = ""
    else:
        text = f"Variable: {token}. Measure: {label}. Response: {body}"
    return Sentence(index, token, d.measure, d.value, value_text, text)


_SENTENCE_RE = re.compile(
    r"^Variable: (?P<var>.*?)\. Measure: (?P<label>.*?)\."
    r"(?: Response: (?P<body>.*))?$")
_NUM_RE = re.compile(r"-?\d+(?:\.\d+)?")
_IS_VALUE_RE = re.compile(r" is (-?\d+(?:\.\d+)?)")


def parse_sentence(text: str):
    """Recover (variable, measure, value) from a fully rendered sentence."""
    m = _SENTENCE_RE.match(text)
    if m is None:
        raise ValueError(f"not a descriptor sentence: {text!r}")
    var = m.group("var")
    label = m.group("label")
    measure = _LABEL_TO_MEASURE.get(label)
    if measure is None:
        raise UnknownMeasureError(f"unknown measure label {label!r}")
    body = m.group("body")
    if body is None:
        return var, measure, None
    if "undefined for this column" in body:
        return var, measure, None

    def _num(tok: str):
        return int(tok) if "." not in tok else float(tok)

    if measure in _LIST_BODIES:
        if ":" not in body:
            return var, measure, []
        return var, measure, [_num(t) for t in _NUM_RE.findall(body.split(":", 1)[1])]
    if measure == "modal_category":
        mm = re.match(r"^The modal category is (.*) with count \d+\.$", body)
        return var, measure, mm.group(1) if mm else None
    if measure == "frequency_distribution":
        return var, measure, [int(t) for t in re.findall(r" (\d+) \(", body)]
    if measure == "scad_multivariate_correlation":
        return var, measure, [float(t) for t in re.findall(r"\((-?\d+\.\d{4})\)", body)]
    if measure == "multivariate_regression_coefficients":
        return var, measure, [float(t) for t in re.findall(r"=(-?\d+\.\d{4})", body)]
    m_val = _IS_VALUE_RE.search(body)
    if m_val is None:
        return var, measure, None
    return var, measure, _num(m_val.group(1))


# ---------------------------------------------------------------------------
# fingerprint assembly
# ---------------------------------------------------------------------------

def _matrix_scalar_descriptors(values_dict: dict, scope: Scope,
                               n_obs: int) -> list[Descriptor]:
    out = []
    for measure in MATRIX_SCALAR_MEASURES:
        out.append(Descriptor(scope, measure, values_dict[measure],
                              {"_n": n_obs}))
    return out


def _multivariate_block(values: np.ndarray, missing: np.ndarray,
                        non_numeric: np.ndarray, numeric_idx: list[int],
                        names: list[str], config: FingerprintConfig,
                        matrix_scope: Scope, var_scope_for) -> list[Descriptor]:
    """Matrix-scope scalars + pairwise structure + SCAD fits for one data
    slice (the whole table or one category partition)."""
    n_obs = values.shape[0]
    stats = dict(count_descriptors(values, missing, non_numeric))
    stats.update(matrix_norms(values))
    summary = spectral_descriptors(np.linalg.svd(values, compute_uv=False))
    stats.update({
        "numerical_rank": summary.numerical_rank,
        "singular_value_threshold": summary.threshold,
        "spectral_norm": summary.spectral_norm,
        "condition_number": summary.condition_number,
        "nuclear_norm": summary.nuclear_norm,
        "sv_entropy": summary.sv_entropy,
        "sv_median_gap": summary.median_gap,
        "sv_max_gap": summary.max_gap,
    })
    out = _matrix_scalar_descriptors(stats, matrix_scope, n_obs)

    scad_out: list[Descriptor] = []
    if len(numeric_idx) >= 2:
        sub = values[:, numeric_idx]
        report = collinearity_prune(sub, config.rho)
        sub_names = [names[j] for j in numeric_idx]
        pair = pairwise_descriptors(sub, report, sub_names, matrix_scope)
        for d in pair:
            d.aux["_n"] = n_obs
        out.extend(pair)
        if len(report.retained) >= 2 and n_obs >= 10:
            scad_out = scad_descriptors(sub, report.retained, sub_names,
                                        config.scad_a, config.seed,
                                        scope_for=var_scope_for)
            for d in scad_out:
                d.aux["_n"] = n_obs
    return out, scad_out


def _univariate_descriptors(x: np.ndarray, scope: Scope) -> list[Descriptor]:
    stats = univariate_set(x)
    return [Descriptor(scope, measure, stats[measure], {"_n": int(x.size)})
            for measure in UNIVARIATE_MEASURES]


def build_descriptors(m: DataMatrix, config: FingerprintConfig) -> list[Descriptor]:
    """Run the full pipeline and return descriptors in serialization order."""
    kinds = classify_columns(m, config.kappa, config.class_columns)
    impute = soft_impute(m.values, m.missing_mask)
    xt = impute.completed
    names = m.column_names
    numeric_idx = [j for j, k in enumerate(kinds) if not k.is_categorical]

    matrix_block, scad_block = _multivariate_block(
        xt, m.missing_mask, m.non_numeric_mask, numeric_idx, names, config,
        MATRIX_SCOPE, lambda nm: Scope("variable", nm))
    out = list(matrix_block)

    # per-variable blocks in column order: numeric columns carry their SCAD
    # measures then the univariate set, categorical columns their discrete
    # summaries
    scad_by_var: dict[str, list[Descriptor]] = {}
    for d in scad_block:
        scad_by_var.setdefault(d.scope.variable, []).append(d)
    segments_by_col: dict[int, list[int]] = {}
    qualifying: list[tuple[int, float, str]] = []
    for j in range(m.p):
        if j in numeric_idx:
            uni = _univariate_descriptors(xt[:, j], Scope("variable", names[j]))
            bounds = next((d.value for d in uni
                           if d.measure == "mean_variance_shift_locations"), None)
            segments_by_col[j] = bounds or []
            out.extend(scad_by_var.get(names[j], []))
            out.extend(uni)
        else:
            scope = Scope("variable", names[j])
            measures, quals = categorical_summary(
                m.values[:, j], m.missing_mask[:, j], config.n_min,
                label_of=lambda v, j=j: m.level_label(j, v))
            for measure in CATEGORICAL_MEASURES:
                value, aux = measures[measure]
                out.append(Descriptor(scope, measure, value,
                                      {**aux, "_n": int((~m.missing_mask[:, j]).sum())}))
            qualifying.extend((j, lv, m.level_label(j, lv)) for lv in quals)

    # category-level partitions: full multivariate + univariate recursion
    for j, level_value, level_label in qualifying:
        rows = (~m.missing_mask[:, j]) & (m.values[:, j] == level_value)
        sub_vals = xt[rows]
        sub_missing = m.missing_mask[rows]
        sub_nonnum = m.non_numeric_mask[rows]
        mat_scope = Scope("category_level", "matrix", level=level_label)
        var_scope = lambda nm, lab=level_label: Scope("category_level", nm, level=lab)
        block, scads = _multivariate_block(sub_vals, sub_missing, sub_nonnum,
                                           numeric_idx, names, config,
                                           mat_scope, var_scope)
        out.extend(block)
        scads_by_var = {}
        for d in scads:
            scads_by_var.setdefault(d.scope.variable, []).append(d)
        for k in numeric_idx:
            out.extend(scads_by_var.get(names[k], []))
            out.extend(_univariate_descriptors(
                sub_vals[:, k], Scope("category_level", names[k], level=level_label)))

    # segment partitions from the joint mean-variance segmentation
    for j in numeric_idx:
        bounds = segments_by_col[j]
        if not bounds:
            continue
        for s_idx, (lo, hi) in enumerate(segments_from_boundaries(bounds, m.n), 1):
            seg = xt[lo:hi, j]
            if seg.size < 4:
                continue
            scope = Scope("segment", names[j], segment=s_idx)
            seg_desc = _univariate_descriptors(seg, scope)
            for d in seg_desc:
                d.aux["segment_range"] = (lo, hi)
            out.extend(seg_desc)
    return out


def _observed_bounds(m: DataMatrix, config: FingerprintConfig) -> dict[str, tuple]:
    bounds = {}
    for j, name in enumerate(m.column_names):
        declared = (config.column_bounds or {}).get(name)
        if declared is not None:
            bounds[name] = (float(declared[0]), float(declared[1]))
            continue
        col = m.column(j)
        if col.size and float(col.min()) < float(col.max()):
            bounds[name] = (float(col.min()), float(col.max()))
    if bounds:
        lo = min(b[0] for b in bounds.values())
        hi = max(b[1] for b in bounds.values())
        bounds["matrix"] = (lo, hi)
    return bounds


def apply_privacy(descriptors_list: list[Descriptor], m: DataMatrix,
                  config: FingerprintConfig,
                  registry: dict | None = None) -> list[Descriptor]:
    """Noise every scalar descriptor after computation, before serialization."""
    registry = registry if registry is not None else default_registry()
    bounds = _observed_bounds(m, config)
    budget = PrivacyBudget(config.epsilon, config.seed)
    out = []
    for idx, d in enumerate(descriptors_list):
        var = d.scope.variable
        b = bounds.get(var, bounds.get("matrix"))
        n_obs = int(d.aux.get("_n", m.n))
        spec = sensitivity_for(d.measure, b, n_obs, registry)
        out.append(privatize(d, spec, budget, index=idx))
    return out


def fingerprint(m: DataMatrix, config: FingerprintConfig,
                dataset_id: str = "dataset",
                ablation: str = "full") -> Fingerprint:
    """Full pipeline: impute, characterize, optionally privatize, serialize."""
    if ablation not in ABLATION_MODES:
        raise UnknownMeasureError(f"unknown ablation mode {ablation!r}")
    ds = build_descriptors(m, config)
    if config.dp_enabled:
        ds = apply_privacy(ds, m, config)
    if ablation == "multivariate-only":
        ds = [d for d in ds if d.scope.token() == "matrix"]
    render_mode = ablation if ablation in ("no-value", "no-value-no-variable") \
        else "full"
    sentences = [render_sentence(d, i, render_mode) for i, d in enumerate(ds)]
    echo = config.snapshot()
    echo["ablation"] = ablation
    return Fingerprint(dataset_id, sentences, echo, ablation)


# ---------------------------------------------------------------------------
# JSONL persistence
# ---------------------------------------------------------------------------

def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def save_fingerprint(fp: Fingerprint, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"dataset_id": fp.dataset_id, "config_echo": fp.config_echo,
                  "schema_version": SCHEMA_VERSION}
        fh.write(json.dumps(header, default=_json_default) + "\n")
        for s in fp.sentences:
            fh.write(json.dumps({"index": s.index, "variable": s.variable,
                                 "measure": s.measure, "value": s.value,
                                 "text": s.text}, default=_json_default) + "\n")


def load_fingerprint(path) -> Fingerprint:
    with open(path, encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or "schema_version" not in lines[0]:
        raise ValueError(f"{path}: missing fingerprint header")
    header = lines[0]
    sentences = []
    for rec in lines[1:]:
        sentences.append(Sentence(rec["index"], rec["variable"], rec["measure"],
                                  rec.get("value"), "", rec["text"]))
    return Fingerprint(header["dataset_id"], sentences,
                       header.get("config_echo", {}),
                       header.get("config_echo", {}).get("ablation", "full"))

"""Laplace-mechanism privatization of scalar descriptors.

Every measure maps to a global-sensitivity rule through a registry shipped
as a data file (overridable per run):

  count        delta = 1
  mean         delta = (hi - lo) / n
  range        delta = hi - lo, value clamped into [lo, hi]
  range_width  delta = hi - lo, value clamped into [0, hi - lo]
  sum          delta = max(|lo|, |hi|)
  clamped      delta = configured width (default hi - lo), value clamped
  skip         never noised (vector- or string-valued descriptors)

Noise draws come from counter-based substreams keyed by (seed, descriptor
index), so privatization is reproducible and order-independent. Each
descriptor is noised independently; there is no budget composition across
the fingerprint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .descriptors import Descriptor
from .errors import MissingBoundsError

_ANALYTIC_RULES = {"mean", "range", "range_width", "sum"}


def load_registry(path=None) -> dict:
    if path is None:
        text = resources.files("tabfp.data").joinpath(
            "sensitivity_registry.json").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return json.loads(text)


_DEFAULT_REGISTRY = None


def default_registry() -> dict:
    global _DEFAULT_REGISTRY
    if _DEFAULT_REGISTRY is None:
        _DEFAULT_REGISTRY = load_registry()
    return _DEFAULT_REGISTRY


@dataclass
class SensitivitySpec:
    measure: str
    delta: float
    derivation: str  # "analytic" | "clamped_range" | "count" | "skip"
    clamp: tuple[float, float] | None = None


@dataclass
class PrivacyBudget:
    epsilon: float
    rng_seed: int


def sensitivity_for(measure: str, bounds: tuple[float, float] | None,
                    n: int, registry: dict | None = None) -> SensitivitySpec:
    """Resolve the sensitivity rule for a measure given declared bounds."""
    registry = registry if registry is not None else default_registry()
    entry = registry.get(measure, {"rule": "clamped"})
    rule = entry["rule"]

    if rule == "skip":
        return SensitivitySpec(measure, 0.0, "skip")
    if rule == "count":
        return SensitivitySpec(measure, 1.0, "count")

    if rule == "clamped" and "width" in entry:
        width = float(entry["width"])
        return SensitivitySpec(measure, width, "clamped_range")

    if bounds is None:
        raise MissingBoundsError(
            f"measure {measure!r} needs declared column bounds")
    lo, hi = float(bounds[0]), float(bounds[1])
    if not hi > lo:
        raise MissingBoundsError(
            f"measure {measure!r}: bounds must satisfy hi > lo, got {bounds}")
    width = hi - lo

    if rule == "mean":
        return SensitivitySpec(measure, width / max(n, 1), "analytic", (lo, hi))
    if rule == "range":
        return SensitivitySpec(measure, width, "analytic", (lo, hi))
    if rule == "range_width":
        return SensitivitySpec(measure, width, "analytic", (0.0, width))
    if rule == "sum":
        return SensitivitySpec(measure, max(abs(lo), abs(hi)), "analytic")
    # default: clamp to the declared range
    return SensitivitySpec(measure, width, "clamped_range", (lo, hi))


def _substream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def laplace_sample(scale: float, seed: int, index: int) -> float:
    return float(_substream(seed, index).laplace(0.0, scale))


def privatize(d: Descriptor, spec: SensitivitySpec, budget: PrivacyBudget,
              index: int = 0) -> Descriptor:
    """Clamp-then-noise one scalar descriptor; delta 0 passes through."""
    if spec.derivation == "skip" or d.value is None:
        return d
    if not isinstance(d.value, (int, float)) or isinstance(d.value, bool):
        return d
    value = float(d.value)
    if spec.clamp is not None:
        value = min(max(value, spec.clamp[0]), spec.clamp[1])
    if spec.delta == 0.0:
        return Descriptor(d.scope, d.measure, value, d.aux)
    noisy = value + laplace_sample(spec.delta / budget.epsilon,
                                   budget.rng_seed, index)
    return Descriptor(d.scope, d.measure, noisy, d.aux)


def perturb_matrix(values: np.ndarray, epsilon: float,
                   column_bounds: list[tuple[float, float]],
                   seed: int) -> np.ndarray:
    """Data-level mechanism: per-cell Laplace noise scaled to the column
    range over epsilon. The underlying standard draws depend only on the
    seed, so sweeping epsilon rescales one fixed noise field."""
    values = np.asarray(values, dtype=float)
    if not np.isfinite(epsilon):
        return values.copy()
    rng = np.random.default_rng([seed, 104729])
    base = rng.laplace(0.0, 1.0, size=values.shape)
    out = values.copy()
    for j, (lo, hi) in enumerate(column_bounds):
        width = hi - lo
        if width <= 0:
            continue
        out[:, j] = values[:, j] + (width / epsilon) * base[:, j]
    return out

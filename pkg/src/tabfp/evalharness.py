"""Synthetic catalogs and experiment drivers.

Generates desk-scale dataset collections with planted twin pairs (same
generating distribution, fresh draw, different sample size) as retrieval
ground truth, runs the fingerprint -> embed -> distance pipeline over a
directory of CSVs, and sweeps differential privacy budgets producing
distance matrices, dendrograms, and a spectral-entropy table per budget.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .cluster import (
    Dendrogram,
    cut_clusters,
    merges_json,
    nearest_from_distances,
    precision_at_1,
    to_newick,
    ward_d2,
)
from .datamodel import DataMatrix, FingerprintConfig, load_csv
from .embed import EmbeddingMatrix, ProviderConfig, encode
from .privacy import perturb_matrix
from .serialize import Fingerprint, fingerprint, save_fingerprint
from .similarity import CcaConfig, distance_matrix, save_distance_csv
from .spectral import soft_impute, sv_entropy

GENERATORS = ("gaussian_mix", "low_rank_plus_noise", "ar_series", "seasonal")


@dataclass
class SyntheticSpec:
    name: str
    generator: str
    n: int
    p: int
    seed: int
    twin_of: str | None = None
    params: dict = field(default_factory=dict)


_COLUMN_WORDS = ("alpha", "bravo", "charlie", "delta", "echo", "foxtrot",
                 "golf", "hotel", "india", "juliet", "kilo", "lima")


def _column_names(generator: str, p: int, tag: str) -> list[str]:
    """Descriptive multi-word headers, like real measurement tables carry.

    Rich names matter: the retrieval signal between twin datasets travels
    largely through shared column-name tokens, mirroring how the red/white
    wine control pair shares its physicochemical schema.
    """
    stems = {
        "gaussian_mix": "mixture_reading",
        "low_rank_plus_noise": "factor_loading",
        "ar_series": "sensor_response",
        "seasonal": "cycle_amplitude",
    }
    return [f"{stems[generator]}_{tag}_{_COLUMN_WORDS[j]}" for j in range(p)]


def _generate(spec: SyntheticSpec) -> tuple[list[str], np.ndarray]:
    """Draw one dataset. Distribution shape comes from params['structure_seed']
    (shared by twins); the row draw comes from spec.seed."""
    rng = np.random.default_rng(spec.seed)
    structure = np.random.default_rng(spec.params.get("structure_seed", 0))
    tag = spec.params.get("tag", spec.generator)
    names = _column_names(spec.generator, spec.p, tag)

    if spec.generator == "gaussian_mix":
        k = spec.params.get("components", 3)
        spread = spec.params.get("spread", 6.0)
        means = structure.normal(0.0, spread, size=(k, spec.p))
        scales = structure.uniform(0.5, 2.0, size=(k, spec.p))
        comp = rng.integers(0, k, size=spec.n)
        x = means[comp] + rng.normal(0.0, 1.0, (spec.n, spec.p)) * scales[comp]
        if spec.params.get("with_class", False):
            x = np.column_stack([x, comp.astype(float)])
            names = names + ["class"]
    elif spec.generator == "low_rank_plus_noise":
        r = spec.params.get("rank", 2)
        noise = spec.params.get("noise", 0.3)
        loadings = structure.normal(0.0, 1.0, (r, spec.p))
        scores = rng.normal(0.0, 2.0, (spec.n, r))
        x = scores @ loadings + rng.normal(0.0, noise, (spec.n, spec.p))
    elif spec.generator == "ar_series":
        # short-memory series: higher phi values wander like random walks
        # and shatter into dozens of change-point segments, which blows the
        # sentence count past the embedding dimension
        phis = structure.uniform(0.05, 0.15, spec.p)
        shift = spec.params.get("shift", 0.0)
        x = np.zeros((spec.n, spec.p))
        eps = rng.normal(0.0, 1.0, (spec.n, spec.p))
        for t in range(1, spec.n):
            x[t] = phis * x[t - 1] + eps[t]
        if shift:
            x[spec.n // 2:, 0] += shift
    elif spec.generator == "seasonal":
        # amplitude below the noise scale keeps the tone visible to the FFT
        # without the oscillating mean registering as a pile of change points
        periods = structure.integers(12, 36, spec.p)
        amps = structure.uniform(0.15, 0.25, spec.p)
        t = np.arange(spec.n)[:, None]
        x = amps * np.sin(2.0 * np.pi * t / periods) \
            + rng.normal(0.0, 0.5, (spec.n, spec.p))
    else:
        raise ValueError(f"unknown generator {spec.generator!r}")

    scale = spec.params.get("scale", 1.0)
    if scale != 1.0:
        x = x * scale
    missing_rate = spec.params.get("missing_rate", 0.0)
    cells = [[_fmt(v) for v in row] for row in x]
    if missing_rate > 0:
        mask = rng.random((x.shape[0], x.shape[1])) < missing_rate
        if spec.generator == "gaussian_mix":
            mask[:, -1] = False  # keep the class column intact
        for i, j in zip(*np.nonzero(mask)):
            cells[i][j] = ""
    return names, cells


def _fmt(v: float) -> str:
    return repr(float(v))


def default_catalog_specs() -> list[SyntheticSpec]:
    """15 datasets with 4 twin pairs; twins share structure, differ in n.

    Sizes and structure strengths are chosen so each fingerprint stays well
    below the embedding dimension: once M approaches d_e a view's columns
    span the whole space and its CCA similarity to everything saturates.
    """
    specs = [
        SyntheticSpec("mixA", "gaussian_mix", 220, 3, 101,
                      params={"structure_seed": 11, "tag": "blend", "scale": 1.0,
                              "components": 3, "spread": 1.8}),
        SyntheticSpec("mixA_twin", "gaussian_mix", 190, 3, 102, twin_of="mixA",
                      params={"structure_seed": 11, "tag": "blend", "scale": 1.0,
                              "components": 3, "spread": 1.8}),
        SyntheticSpec("rankB", "low_rank_plus_noise", 240, 3, 201,
                      params={"structure_seed": 22, "tag": "plane", "scale": 40.0, "rank": 2,
                              "noise": 0.25, "missing_rate": 0.02}),
        SyntheticSpec("rankB_twin", "low_rank_plus_noise", 230, 3, 202,
                      twin_of="rankB",
                      params={"structure_seed": 22, "tag": "plane", "scale": 40.0, "rank": 2,
                              "noise": 0.25, "missing_rate": 0.02}),
        SyntheticSpec("arC", "ar_series", 170, 3, 301,
                      params={"structure_seed": 33, "tag": "drift", "scale": 0.05, "shift": 6.0}),
        SyntheticSpec("arC_twin", "ar_series", 150, 3, 302, twin_of="arC",
                      params={"structure_seed": 33, "tag": "drift", "scale": 0.05, "shift": 6.0}),
        SyntheticSpec("seasD", "seasonal", 224, 3, 401,
                      params={"structure_seed": 44, "tag": "tide", "scale": 12.0}),
        SyntheticSpec("seasD_twin", "seasonal", 190, 3, 402, twin_of="seasD",
                      params={"structure_seed": 44, "tag": "tide", "scale": 12.0}),
        # singletons: same generator families, different structure
        SyntheticSpec("mixE", "gaussian_mix", 200, 3, 501,
                      params={"structure_seed": 55, "tag": "cloud", "scale": 3.0,
                              "components": 4, "spread": 1.2}),
        SyntheticSpec("rankF", "low_rank_plus_noise", 190, 3, 601,
                      params={"structure_seed": 66, "tag": "slab", "scale": 700.0, "rank": 2,
                              "noise": 1.0}),
        SyntheticSpec("arG", "ar_series", 230, 3, 701,
                      params={"structure_seed": 77, "tag": "walk", "scale": 0.002}),
        SyntheticSpec("seasH", "seasonal", 192, 3, 801,
                      params={"structure_seed": 88, "tag": "pulse", "scale": 150.0}),
        SyntheticSpec("mixI", "gaussian_mix", 260, 2, 901,
                      params={"structure_seed": 99, "tag": "spot", "scale": 0.3,
                              "components": 2, "spread": 2.0,
                              "with_class": True}),
        SyntheticSpec("rankJ", "low_rank_plus_noise", 220, 3, 1001,
                      params={"structure_seed": 111, "tag": "sheet", "scale": 5000.0, "rank": 2,
                              "noise": 0.8}),
        SyntheticSpec("seasK", "seasonal", 240, 3, 1101,
                      params={"structure_seed": 122, "tag": "hum", "scale": 0.008}),
    ]
    return specs


def generate_catalog(specs: list[SyntheticSpec], out_dir) -> dict:
    """Write one CSV per spec plus truth_pairs.json; returns the truth pairs."""
    os.makedirs(out_dir, exist_ok=True)
    pairs = []
    for spec in specs:
        names, cells = _generate(spec)
        with open(os.path.join(out_dir, f"{spec.name}.csv"), "w",
                  newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            w.writerows(cells)
        if spec.twin_of:
            pairs.append(sorted([spec.name, spec.twin_of]))
    truth = {"pairs": pairs}
    with open(os.path.join(out_dir, "truth_pairs.json"), "w",
              encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2)
        fh.write("\n")
    return truth


# ---------------------------------------------------------------------------
# pipeline driver
# ---------------------------------------------------------------------------

def catalog_csvs(csv_dir) -> list[str]:
    return sorted(f for f in os.listdir(csv_dir) if f.endswith(".csv"))


def run_pipeline(csv_dir, config: FingerprintConfig,
                 provider: ProviderConfig | None = None,
                 ablation: str = "full",
                 out_dir=None) -> tuple[list[Fingerprint], list[EmbeddingMatrix]]:
    """Fingerprint and embed every CSV in a directory (sorted order)."""
    provider = provider or ProviderConfig(seed=config.seed)
    fps, embs = [], []
    for fname in catalog_csvs(csv_dir):
        dataset_id = os.path.splitext(fname)[0]
        m = load_csv(os.path.join(csv_dir, fname), config)
        fp = fingerprint(m, config, dataset_id=dataset_id, ablation=ablation)
        emb = encode(fp, provider)
        fps.append(fp)
        embs.append(emb)
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            save_fingerprint(fp, os.path.join(out_dir, f"{dataset_id}.fingerprint.jsonl"))
    return fps, embs


def twin_precision_at_1(embs: list[EmbeddingMatrix], truth: dict,
                        cfg: CcaConfig | None = None) -> float:
    """P@1 over all datasets that belong to a twin pair."""
    pairs = {frozenset(p) for p in truth["pairs"]}
    members = set().union(*pairs) if pairs else set()
    nearest = nearest_from_distances(distance_matrix(embs, cfg))
    assignments = {ds: nn for ds, nn in nearest.items() if ds in members}
    return precision_at_1(assignments, pairs)


# ---------------------------------------------------------------------------
# differential privacy sweep
# ---------------------------------------------------------------------------

def entropy_under_noise(m: DataMatrix, epsilon: float, seed: int) -> float:
    """Spectral entropy after data-level perturbation at budget epsilon."""
    xt = soft_impute(m.values, m.missing_mask).completed
    bounds = []
    for j in range(m.p):
        col = m.column(j)
        lo, hi = (float(col.min()), float(col.max())) if col.size else (0.0, 0.0)
        bounds.append((lo, hi))
    noisy = perturb_matrix(xt, epsilon, bounds, seed)
    sigma = np.linalg.svd(noisy, compute_uv=False)
    return sv_entropy(sigma)


def run_dp_sweep(csv_dir, out_dir, epsilons=(math.inf, 10.0, 1.0, 0.1),
                 config: FingerprintConfig | None = None,
                 provider: ProviderConfig | None = None,
                 render_figures: bool = True) -> dict:
    """Per-budget distance matrices, dendrograms, and the entropy table.

    Results land under out_dir/<epsilon>/ with an entropy_table.csv at the
    top level (datasets as columns, budgets as rows, echoing the spectral
    convergence analysis).
    """
    base = config or FingerprintConfig()
    os.makedirs(out_dir, exist_ok=True)
    names = [os.path.splitext(f)[0] for f in catalog_csvs(csv_dir)]
    summary = {"epsilons": [], "labels": names}

    entropy_rows = []
    dendros: dict[str, Dendrogram] = {}
    for eps in epsilons:
        eps_key = "inf" if math.isinf(eps) else repr(float(eps))
        eps_dir = os.path.join(out_dir, eps_key)
        os.makedirs(eps_dir, exist_ok=True)
        cfg = FingerprintConfig(
            dp_enabled=not math.isinf(eps),
            epsilon=eps if not math.isinf(eps) else 1.0,
            rho=base.rho, kappa=base.kappa, n_min=base.n_min,
            scad_a=base.scad_a, seed=base.seed,
            column_bounds=base.column_bounds,
            class_columns=base.class_columns)
        _, embs = run_pipeline(csv_dir, cfg, provider)
        dm = distance_matrix(embs, CcaConfig(seed=base.seed))
        save_distance_csv(dm, os.path.join(eps_dir, "distances.csv"))
        dend = ward_d2(dm)
        dendros[eps_key] = dend
        with open(os.path.join(eps_dir, "dendrogram.newick"), "w",
                  encoding="utf-8") as fh:
            fh.write(to_newick(dend) + "\n")
        with open(os.path.join(eps_dir, "merges.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(merges_json(dend), fh, indent=2)
            fh.write("\n")
        if render_figures:
            from .report import render_dendrogram, render_heatmap
            render_dendrogram(dend, os.path.join(eps_dir, "dendrogram.png"),
                              title=f"Ward D2, epsilon={eps_key}")
            render_heatmap(dm, os.path.join(eps_dir, "heatmap.png"),
                           title=f"CCA distances, epsilon={eps_key}")

        row = [eps_key]
        for fname in catalog_csvs(csv_dir):
            m = load_csv(os.path.join(csv_dir, fname), cfg)
            row.append(entropy_under_noise(m, eps, base.seed))
        entropy_rows.append(row)
        summary["epsilons"].append(eps_key)

    table_path = os.path.join(out_dir, "entropy_table.csv")
    with open(table_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon"] + names)
        for row in entropy_rows:
            w.writerow([row[0]] + [f"{v:.6f}" for v in row[1:]])
    if render_figures:
        from .report import render_entropy_table
        render_entropy_table(summary["epsilons"], names,
                             [row[1:] for row in entropy_rows],
                             os.path.join(out_dir, "entropy_table.png"))
    summary["entropy_table"] = entropy_rows
    summary["dendrograms"] = dendros
    return summary


# ---------------------------------------------------------------------------
# cluster agreement
# ---------------------------------------------------------------------------

def adjusted_rand_index(labels_a: list[int], labels_b: list[int]) -> float:
    """Chance-corrected agreement between two flat clusterings."""
    if len(labels_a) != len(labels_b):
        raise ValueError("label lists differ in length")
    n = len(labels_a)
    from collections import Counter
    contingency = Counter(zip(labels_a, labels_b))
    a_counts = Counter(labels_a)
    b_counts = Counter(labels_b)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = sum(comb2(c) for c in contingency.values())
    sum_a = sum(comb2(c) for c in a_counts.values())
    sum_b = sum(comb2(c) for c in b_counts.values())
    expected = sum_a * sum_b / comb2(n) if n > 1 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return (sum_ij - expected) / (max_index - expected)


def clustering_agreement(dendro_a: Dendrogram, dendro_b: Dendrogram,
                         k: int) -> float:
    return adjusted_rand_index(cut_clusters(dendro_a, k),
                               cut_clusters(dendro_b, k))

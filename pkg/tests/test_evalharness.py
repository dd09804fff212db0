import json
import math
import os

import numpy as np
import pytest

from tabfp.cluster import ward_d2
from tabfp.datamodel import FingerprintConfig, load_csv
from tabfp.evalharness import (
    SyntheticSpec,
    adjusted_rand_index,
    clustering_agreement,
    default_catalog_specs,
    entropy_under_noise,
    generate_catalog,
    run_dp_sweep,
    run_pipeline,
    twin_precision_at_1,
)
from tabfp.serialize import fingerprint
from tabfp.similarity import DistanceMatrix


def _small_specs():
    return [
        SyntheticSpec("a1", "gaussian_mix", 90, 2, 1,
                      params={"structure_seed": 5, "tag": "one"}),
        SyntheticSpec("a2", "gaussian_mix", 70, 2, 2, twin_of="a1",
                      params={"structure_seed": 5, "tag": "one"}),
        SyntheticSpec("b", "seasonal", 80, 2, 3,
                      params={"structure_seed": 7, "tag": "two"}),
    ]


class TestGenerateCatalog:
    def test_twin_pair_recorded(self, tmp_path):
        truth = generate_catalog(_small_specs(), tmp_path)
        assert truth["pairs"] == [["a1", "a2"]]
        files = sorted(f for f in os.listdir(tmp_path) if f.endswith(".csv"))
        assert files == ["a1.csv", "a2.csv", "b.csv"]
        with open(tmp_path / "truth_pairs.json") as fh:
            assert json.load(fh) == truth

    def test_default_catalog_shape(self, tmp_path):
        specs = default_catalog_specs()
        assert len(specs) == 15
        truth = generate_catalog(specs, tmp_path)
        assert len(truth["pairs"]) == 4
        csvs = [f for f in os.listdir(tmp_path) if f.endswith(".csv")]
        assert len(csvs) == 15

    def test_twins_differ_in_n_share_schema(self, tmp_path):
        generate_catalog(default_catalog_specs(), tmp_path)
        for a, b in [("mixA", "mixA_twin"), ("seasD", "seasD_twin")]:
            la = (tmp_path / f"{a}.csv").read_text().splitlines()
            lb = (tmp_path / f"{b}.csv").read_text().splitlines()
            assert la[0] == lb[0]          # same header
            assert len(la) != len(lb)      # different n

    def test_byte_identical_regeneration(self, tmp_path):
        d1, d2 = tmp_path / "one", tmp_path / "two"
        generate_catalog(default_catalog_specs(), d1)
        generate_catalog(default_catalog_specs(), d2)
        for f in sorted(os.listdir(d1)):
            assert (d1 / f).read_bytes() == (d2 / f).read_bytes()


class TestPipeline:
    def test_small_run(self, tmp_path):
        truth = generate_catalog(_small_specs(), tmp_path)
        cfg = FingerprintConfig(seed=42)
        fps, embs = run_pipeline(tmp_path, cfg)
        assert [fp.dataset_id for fp in fps] == ["a1", "a2", "b"]
        assert all(e.d_e == 384 for e in embs)
        score = twin_precision_at_1(embs, truth)
        assert score == 1.0

    def test_ablation_reduces_sentence_count(self, tmp_path):
        generate_catalog(_small_specs(), tmp_path)
        cfg = FingerprintConfig(seed=42)
        full, _ = run_pipeline(tmp_path, cfg)
        multi, _ = run_pipeline(tmp_path, cfg, ablation="multivariate-only")
        for f, m in zip(full, multi):
            assert m.m < f.m


class TestEntropyUnderNoise:
    def test_matches_plain_entropy_at_infinite_budget(self, tmp_path):
        generate_catalog(_small_specs(), tmp_path)
        cfg = FingerprintConfig(seed=42)
        m = load_csv(tmp_path / "a1.csv", cfg)
        h_inf = entropy_under_noise(m, math.inf, seed=42)
        fp = fingerprint(m, cfg)
        h_desc = [s.value for s in fp.sentences
                  if s.measure == "sv_entropy" and s.variable == "matrix"][0]
        assert h_inf == pytest.approx(h_desc, abs=1e-12)

    def test_nondecreasing_for_low_rank_input(self, tmp_path):
        rng = np.random.default_rng(42)
        base = np.outer(rng.normal(size=60), rng.normal(size=4))
        rows = [[repr(float(v)) for v in row] for row in base]
        import csv as _csv
        path = tmp_path / "lr.csv"
        with open(path, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["c0", "c1", "c2", "c3"])
            w.writerows(rows)
        m = load_csv(path)
        hs = [entropy_under_noise(m, eps, seed=42)
              for eps in [math.inf, 10.0, 1.0, 0.1]]
        assert all(b >= a - 1e-9 for a, b in zip(hs, hs[1:]))


class TestAdjustedRandIndex:
    def test_identical_partitions(self):
        assert adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0

    def test_independent_partitions_near_zero(self):
        rng = np.random.default_rng(0)
        a = list(rng.integers(0, 4, 400))
        b = list(rng.integers(0, 4, 400))
        assert abs(adjusted_rand_index(a, b)) < 0.05

    def test_partial_agreement(self):
        a = [0, 0, 0, 1, 1, 1]
        b = [0, 0, 1, 1, 1, 1]
        ari = adjusted_rand_index(a, b)
        assert 0.0 < ari < 1.0

    def test_single_cluster_degenerate(self):
        assert adjusted_rand_index([0, 0, 0], [0, 0, 0]) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            adjusted_rand_index([0, 1], [0])


class TestDpSweep:
    def test_outputs_per_budget(self, tmp_path):
        data = tmp_path / "data"
        generate_catalog(_small_specs(), data)
        out = tmp_path / "results"
        summary = run_dp_sweep(data, out, epsilons=(math.inf, 1.0),
                               config=FingerprintConfig(seed=42),
                               render_figures=False)
        assert summary["epsilons"] == ["inf", "1.0"]
        for eps in ("inf", "1.0"):
            assert (out / eps / "distances.csv").exists()
            assert (out / eps / "dendrogram.newick").exists()
            assert (out / eps / "merges.json").exists()
        table = (out / "entropy_table.csv").read_text().splitlines()
        assert table[0] == "epsilon,a1,a2,b"
        assert len(table) == 3

    def test_infinite_budget_equals_plain_pipeline(self, tmp_path):
        data = tmp_path / "data"
        generate_catalog(_small_specs(), data)
        cfg = FingerprintConfig(seed=42)
        out = tmp_path / "results"
        run_dp_sweep(data, out, epsilons=(math.inf,), config=cfg,
                     render_figures=False)
        from tabfp.similarity import distance_matrix, load_distance_csv
        _, embs = run_pipeline(data, cfg)
        direct = distance_matrix(embs)
        swept = load_distance_csv(out / "inf" / "distances.csv")
        assert swept.labels == direct.labels
        assert np.array_equal(swept.d, direct.d)

    def test_clustering_agreement_metric(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(8, 2))
        d = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
        dm = DistanceMatrix([f"x{i}" for i in range(8)], d)
        dendro = ward_d2(dm)
        assert clustering_agreement(dendro, dendro, k=3) == 1.0

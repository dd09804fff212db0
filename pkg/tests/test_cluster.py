import json

import numpy as np
import pytest

from tabfp.cluster import (
    catalog_add,
    catalog_embeddings,
    catalog_load,
    cut_clusters,
    merges_json,
    precision_at_1,
    query_top_k,
    to_linkage,
    to_newick,
    ward_d2,
)
from tabfp.embed import EmbeddingMatrix, save_embedding
from tabfp.errors import CorruptEntryError, MissingTruthError, ProviderMismatchError
from tabfp.similarity import DistanceMatrix, cca_similarity

from oracles import naive_ward_d2


def _random_distance_matrix(rng, n):
    pts = rng.normal(size=(n, 3))
    d = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
    return DistanceMatrix([f"d{i}" for i in range(n)], d)


class TestWardD2:
    def test_two_items(self):
        dm = DistanceMatrix(["a", "b"], np.array([[0.0, 0.4], [0.4, 0.0]]))
        dendro = ward_d2(dm)
        assert dendro.merges == [(0, 1, pytest.approx(0.4))]

    def test_three_items_min_pair_first(self):
        d = np.array([[0.0, 0.1, 0.9], [0.1, 0.0, 0.9], [0.9, 0.9, 0.0]])
        dendro = ward_d2(DistanceMatrix(["a", "b", "c"], d))
        assert dendro.merges[0][:2] == (0, 1)

    def test_matches_naive_reference(self):
        rng = np.random.default_rng(42)
        for trial in range(50):
            n = int(rng.integers(2, 13))
            dm = _random_distance_matrix(rng, n)
            mine = ward_d2(dm).merges
            ref = naive_ward_d2(dm.d)
            assert len(mine) == len(ref)
            for (i1, j1, h1), (i2, j2, h2) in zip(mine, ref):
                assert (i1, j1) == (i2, j2), f"trial {trial}"
                assert h1 == pytest.approx(h2, abs=1e-10)

    def test_height_monotone(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            dendro = ward_d2(_random_distance_matrix(rng, int(rng.integers(2, 13))))
            heights = [h for _, _, h in dendro.merges]
            assert all(b >= a - 1e-12 for a, b in zip(heights, heights[1:]))

    def test_deterministic_with_ties(self):
        d = np.ones((4, 4)) - np.eye(4)
        dm = DistanceMatrix(list("abcd"), d)
        m1 = ward_d2(dm).merges
        m2 = ward_d2(dm).merges
        assert m1 == m2
        assert m1[0][:2] == (0, 1)  # smallest index pair wins ties

    def test_linkage_matrix_shape(self):
        rng = np.random.default_rng(1)
        dendro = ward_d2(_random_distance_matrix(rng, 6))
        z = to_linkage(dendro)
        assert z.shape == (5, 4)
        assert z[-1, 3] == 6


class TestCutAndNewick:
    def test_cut_counts(self):
        rng = np.random.default_rng(3)
        dendro = ward_d2(_random_distance_matrix(rng, 8))
        for k in (1, 2, 4, 8):
            labels = cut_clusters(dendro, k)
            assert len(set(labels)) == k

    def test_cut_respects_merge_order(self):
        d = np.array([[0.0, 0.1, 0.9, 0.95], [0.1, 0.0, 0.9, 0.9],
                      [0.9, 0.9, 0.0, 0.2], [0.95, 0.9, 0.2, 0.0]])
        dendro = ward_d2(DistanceMatrix(list("abcd"), d))
        labels = cut_clusters(dendro, 2)
        assert labels[0] == labels[1]
        assert labels[2] == labels[3]
        assert labels[0] != labels[2]

    def test_newick_well_formed(self):
        rng = np.random.default_rng(4)
        dendro = ward_d2(_random_distance_matrix(rng, 6))
        nwk = to_newick(dendro)
        assert nwk.endswith(";")
        assert nwk.count("(") == nwk.count(")") == 5
        for label in dendro.labels:
            assert label in nwk

    def test_merges_json_round_trip(self):
        rng = np.random.default_rng(5)
        dendro = ward_d2(_random_distance_matrix(rng, 5))
        blob = json.dumps(merges_json(dendro))
        data = json.loads(blob)
        assert data["labels"] == dendro.labels
        assert len(data["merges"]) == 4


class TestRetrieval:
    def _catalog(self, rng, n=5):
        return [EmbeddingMatrix(rng.normal(size=(30, 6)), "t", f"d{i}")
                for i in range(n)]

    def test_identical_entry_ranked_first(self):
        rng = np.random.default_rng(0)
        catalog = self._catalog(rng)
        query = EmbeddingMatrix(catalog[2].columns.copy(), "t", "query")
        res = query_top_k(query, catalog, k=3)
        assert res.neighbors[0][0] == "d2"
        assert res.neighbors[0][1] <= 1e-8

    def test_k_larger_than_catalog(self):
        rng = np.random.default_rng(1)
        catalog = self._catalog(rng, 4)
        query = EmbeddingMatrix(rng.normal(size=(30, 5)), "t", "q")
        res = query_top_k(query, catalog, k=99)
        assert len(res.neighbors) == 4

    def test_query_excluded_from_results(self):
        rng = np.random.default_rng(2)
        catalog = self._catalog(rng, 4)
        res = query_top_k(catalog[1], catalog, k=10)
        assert all(nid != "d1" for nid, _ in res.neighbors)
        assert len(res.neighbors) == 3

    def test_catalog_order_invariance(self):
        rng = np.random.default_rng(3)
        catalog = self._catalog(rng, 6)
        query = EmbeddingMatrix(rng.normal(size=(30, 5)), "t", "q")
        r1 = query_top_k(query, catalog, k=6)
        r2 = query_top_k(query, list(reversed(catalog)), k=6)
        assert r1.neighbors == r2.neighbors

    def test_distances_ascending(self):
        rng = np.random.default_rng(4)
        catalog = self._catalog(rng, 6)
        query = EmbeddingMatrix(rng.normal(size=(30, 5)), "t", "q")
        res = query_top_k(query, catalog, k=6)
        dists = [d for _, d in res.neighbors]
        assert dists == sorted(dists)

    def test_provider_mismatch(self):
        rng = np.random.default_rng(5)
        catalog = self._catalog(rng, 3)
        query = EmbeddingMatrix(rng.normal(size=(30, 5)), "other", "q")
        with pytest.raises(ProviderMismatchError):
            query_top_k(query, catalog, 1)


class TestPrecisionAt1:
    def test_all_correct(self):
        pairs = {frozenset(("a", "b")), frozenset(("c", "d"))}
        assignments = {"a": "b", "b": "a", "c": "d", "d": "c"}
        assert precision_at_1(assignments, pairs) == 1.0

    def test_nine_of_ten(self):
        pairs = {frozenset((f"x{i}", f"y{i}")) for i in range(10)}
        assignments = {f"x{i}": f"y{i}" for i in range(10)}
        assignments["x0"] = "y3"
        assert precision_at_1(assignments, pairs) == pytest.approx(0.9)

    def test_none_correct(self):
        pairs = {frozenset(("a", "b"))}
        assert precision_at_1({"a": "z", "b": "z"}, pairs) == 0.0

    def test_missing_truth_rejected(self):
        with pytest.raises(MissingTruthError):
            precision_at_1({"unknown": "a"}, {frozenset(("a", "b"))})


class TestCatalogPersistence:
    def _write_entry(self, tmp_path, name, d_e=16, tag="fallback:16:42"):
        rng = np.random.default_rng(abs(hash(name)) % 1000)
        fp_path = tmp_path / f"{name}.fingerprint.jsonl"
        fp_path.write_text(json.dumps({"dataset_id": name,
                                       "schema_version": "tabfp-1",
                                       "config_echo": {}}) + "\n")
        emb_path = tmp_path / f"{name}.emb.bin"
        emb = EmbeddingMatrix(rng.normal(size=(d_e, 4)), tag, name)
        save_embedding(emb, emb_path)
        return fp_path, emb_path

    def test_add_then_load_round_trip(self, tmp_path):
        root = tmp_path / "cat"
        root.mkdir()
        for name in ("one", "two"):
            fp, emb = self._write_entry(root, name)
            catalog_add(root, name, fp, emb)
        manifest = catalog_load(root)
        assert manifest.ids() == ["one", "two"]
        embs = catalog_embeddings(manifest)
        assert [e.dataset_id for e in embs] == ["one", "two"]

    def test_dimension_mismatch_rejected(self, tmp_path):
        root = tmp_path / "cat"
        root.mkdir()
        fp, emb = self._write_entry(root, "one", d_e=16)
        catalog_add(root, "one", fp, emb)
        fp2, emb2 = self._write_entry(root, "two", d_e=32, tag="fallback:32:42")
        with pytest.raises(ProviderMismatchError):
            catalog_add(root, "two", fp2, emb2)

    def test_duplicate_id_rejected(self, tmp_path):
        root = tmp_path / "cat"
        root.mkdir()
        fp, emb = self._write_entry(root, "one")
        catalog_add(root, "one", fp, emb)
        with pytest.raises(CorruptEntryError):
            catalog_add(root, "one", fp, emb)

    def test_checksum_detects_corruption(self, tmp_path):
        root = tmp_path / "cat"
        root.mkdir()
        fp, emb = self._write_entry(root, "one")
        catalog_add(root, "one", fp, emb)
        emb.write_bytes(emb.read_bytes()[:-1] + b"\x00")
        with pytest.raises(CorruptEntryError):
            catalog_load(root)

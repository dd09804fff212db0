import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from tabfp.cli import main
from tabfp.embed import load_embedding

from conftest import write_csv


@pytest.fixture
def runner():
    return CliRunner()


def _invoke(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False,
                           standalone_mode=False)
    return result


def _run(runner, args):
    # commands call sys.exit; capture the code through SystemExit
    result = runner.invoke(main, args)
    return result


class TestFingerprintCommand:
    def test_writes_jsonl(self, runner, generic_csv, tmp_path):
        out = tmp_path / "fp.jsonl"
        res = _run(runner, ["fingerprint", "--input", str(generic_csv),
                            "--out", str(out)])
        assert res.exit_code == 0
        lines = out.read_text().splitlines()
        header = json.loads(lines[0])
        assert header["schema_version"] == "tabfp-1"
        assert header["dataset_id"] == "generic"
        assert len(lines) > 50

    def test_multivariate_only_ablation(self, runner, generic_csv, tmp_path):
        out = tmp_path / "fp.jsonl"
        res = _run(runner, ["fingerprint", "--input", str(generic_csv),
                            "--out", str(out), "--ablation", "multivariate-only"])
        assert res.exit_code == 0
        for line in out.read_text().splitlines()[1:]:
            assert json.loads(line)["variable"] == "matrix"

    def test_dp_deterministic(self, runner, generic_csv, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (a, b):
            res = _run(runner, ["fingerprint", "--input", str(generic_csv),
                                "--out", str(out), "--dp-epsilon", "0.1",
                                "--seed", "42"])
            assert res.exit_code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_input_exit_2(self, runner, tmp_path):
        res = _run(runner, ["fingerprint", "--input", str(tmp_path / "no.csv"),
                            "--out", str(tmp_path / "o.jsonl")])
        assert res.exit_code == 2

    def test_bad_config_exit_3(self, runner, generic_csv, tmp_path):
        res = _run(runner, ["fingerprint", "--input", str(generic_csv),
                            "--out", str(tmp_path / "o.jsonl"),
                            "--dp-epsilon", "-1"])
        assert res.exit_code == 3


class TestEmbedCommand:
    def _fingerprint(self, runner, csv_path, tmp_path):
        fp = tmp_path / "fp.jsonl"
        _run(runner, ["fingerprint", "--input", str(csv_path),
                      "--out", str(fp)])
        return fp

    def test_fallback_writes_binary(self, runner, generic_csv, tmp_path):
        fp = self._fingerprint(runner, generic_csv, tmp_path)
        out = tmp_path / "e.bin"
        res = _run(runner, ["embed", "--fingerprint", str(fp),
                            "--out", str(out), "--fallback"])
        assert res.exit_code == 0
        assert out.read_bytes()[:6] == b"TBEMB1"
        emb = load_embedding(out)
        assert emb.d_e == 384

    def test_no_endpoint_exit_3(self, runner, generic_csv, tmp_path,
                                monkeypatch):
        monkeypatch.delenv("TABFP_EMBED_ENDPOINT", raising=False)
        fp = self._fingerprint(runner, generic_csv, tmp_path)
        res = _run(runner, ["embed", "--fingerprint", str(fp),
                            "--out", str(tmp_path / "e.bin")])
        assert res.exit_code == 3


class TestCompareCommand:
    @pytest.fixture
    def artifacts(self, runner, tmp_path):
        rng = np.random.default_rng(9)
        sources = {
            "g": write_csv(tmp_path / "g.csv", ["press", "flow"],
                           [[f"{v:.5f}" for v in rng.normal(0, 1, 2)]
                            for _ in range(40)]),
            "i": write_csv(tmp_path / "i.csv", ["mass", "heat", "drag"],
                           [[f"{v:.5f}" for v in rng.normal(5, 2, 3)]
                            for _ in range(50)]),
        }
        paths = {}
        for name, csv_path in sources.items():
            fp = tmp_path / f"{name}.jsonl"
            emb = tmp_path / f"{name}.bin"
            _run(runner, ["fingerprint", "--input", str(csv_path),
                          "--out", str(fp), "--dataset-id", name])
            _run(runner, ["embed", "--fingerprint", str(fp),
                          "--out", str(emb), "--fallback"])
            paths[name] = (fp, emb)
        return paths

    def test_self_similarity_prints_one(self, runner, artifacts):
        _, emb = artifacts["g"]
        res = _run(runner, ["compare", "--a", str(emb), "--b", str(emb)])
        assert res.exit_code == 0
        assert "similarity 1.000000" in res.output

    def test_json_format(self, runner, artifacts):
        _, ga = artifacts["g"]
        _, ib = artifacts["i"]
        res = _run(runner, ["compare", "--a", str(ga), "--b", str(ib),
                            "--format", "json"])
        assert res.exit_code == 0
        payload = json.loads(res.output)
        assert 0.0 <= payload["distance"] <= 1.0
        assert payload["r"] >= 1

    def test_sparse_min_penalty_single_loading(self, runner, artifacts):
        fp_a, emb_a = artifacts["g"]
        fp_b, emb_b = artifacts["i"]
        res = _run(runner, ["compare", "--a", str(emb_a), "--b", str(emb_b),
                            "--sparse", "--penalty", "min",
                            "--components", "2",
                            "--fp-a", str(fp_a), "--fp-b", str(fp_b),
                            "--format", "json"])
        assert res.exit_code == 0
        payload = json.loads(res.output)
        for comp in payload["components"]:
            assert len(comp["side_a"]) == 1
            assert len(comp["side_b"]) == 1

    def test_sparse_needs_fingerprints(self, runner, artifacts):
        _, emb = artifacts["g"]
        res = _run(runner, ["compare", "--a", str(emb), "--b", str(emb),
                            "--sparse", "--penalty", "0.5"])
        assert res.exit_code == 3

    def test_permute_reproducible(self, runner, artifacts):
        fp_a, emb_a = artifacts["g"]
        fp_b, emb_b = artifacts["i"]
        outs = []
        for _ in range(2):
            res = _run(runner, ["compare", "--a", str(emb_a), "--b", str(emb_b),
                                "--sparse", "--permute", "10",
                                "--components", "1", "--seed", "42",
                                "--fp-a", str(fp_a), "--fp-b", str(fp_b),
                                "--format", "json"])
            assert res.exit_code == 0
            outs.append(res.output)
        assert outs[0] == outs[1]


class TestCatalogAndEval:
    @pytest.fixture
    def catalog(self, runner, tmp_path):
        rng = np.random.default_rng(5)
        root = tmp_path / "cat"
        for i in range(3):
            rows = [[f"{v:.5f}" for v in rng.normal(i, 1.0, 3)]
                    for _ in range(60)]
            csv_path = write_csv(tmp_path / f"d{i}.csv",
                                 ["pressure", "flow", "temp"], rows)
            fp = tmp_path / f"d{i}.jsonl"
            emb = tmp_path / f"d{i}.bin"
            _run(runner, ["fingerprint", "--input", str(csv_path),
                          "--out", str(fp), "--dataset-id", f"d{i}"])
            _run(runner, ["embed", "--fingerprint", str(fp),
                          "--out", str(emb), "--fallback"])
            res = _run(runner, ["catalog", "add", "--catalog", str(root),
                                "--id", f"d{i}", "--fingerprint", str(fp),
                                "--embedding", str(emb)])
            assert res.exit_code == 0
        return root

    def test_build_distances(self, runner, catalog, tmp_path):
        out = tmp_path / "dist.csv"
        res = _run(runner, ["catalog", "build-distances",
                            "--catalog", str(catalog), "--out", str(out)])
        assert res.exit_code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == ",d0,d1,d2"
        assert len(lines) == 4

    def test_cluster_outputs(self, runner, catalog, tmp_path):
        out_dir = tmp_path / "clust"
        res = _run(runner, ["catalog", "cluster", "--catalog", str(catalog),
                            "--out-dir", str(out_dir)])
        assert res.exit_code == 0
        newick = (out_dir / "dendrogram.newick").read_text()
        assert newick.strip().endswith(";")
        assert newick.count("(") == 2  # N-1 merges
        merges = json.loads((out_dir / "merges.json").read_text())
        assert len(merges["merges"]) == 2
        assert (out_dir / "heatmap.csv").exists()
        assert (out_dir / "dendrogram.png").stat().st_size > 1000
        assert (out_dir / "heatmap.png").stat().st_size > 1000

    def test_query(self, runner, catalog, tmp_path):
        emb = tmp_path / "d1.bin"
        res = _run(runner, ["catalog", "query", "--catalog", str(catalog),
                            "--input", str(emb), "--k", "2",
                            "--format", "json"])
        assert res.exit_code == 0
        payload = json.loads(res.output)
        assert payload["query_id"] == "d1"
        assert len(payload["neighbors"]) == 2

    def test_eval_fixture_prints_0_9(self, runner, tmp_path):
        pairs = {"pairs": [[f"x{i}", f"y{i}"] for i in range(10)]}
        assignments = {f"x{i}": f"y{i}" for i in range(10)}
        assignments["x7"] = "y0"
        pairs_path = tmp_path / "pairs.json"
        assign_path = tmp_path / "assign.json"
        pairs_path.write_text(json.dumps(pairs))
        assign_path.write_text(json.dumps(assignments))
        res = _run(runner, ["eval", "--pairs", str(pairs_path),
                            "--assignments", str(assign_path)])
        assert res.exit_code == 0
        assert res.output.strip() == "0.9"


class TestSynthCommand:
    def test_writes_catalog(self, runner, tmp_path):
        out = tmp_path / "synth"
        res = _run(runner, ["synth", "--out", str(out)])
        assert res.exit_code == 0
        csvs = [f for f in os.listdir(out) if f.endswith(".csv")]
        assert len(csvs) == 15
        assert (out / "truth_pairs.json").exists()

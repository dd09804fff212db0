"""Command-line surface for the fingerprint/embed/compare/catalog pipeline.

Exit codes: 0 success, 2 input errors, 3 configuration errors, 4 internal
failures.
"""

from __future__ import annotations

import json
import math
import os
import sys

import click

from . import cluster as clu
from . import evalharness as harness
from .datamodel import FingerprintConfig, load_csv
from .embed import (
    ENDPOINT_ENV,
    ProviderConfig,
    encode,
    load_embedding,
    save_embedding,
)
from .errors import ConfigError, InputError, TabfpError
from .serialize import ABLATION_MODES, fingerprint, load_fingerprint, save_fingerprint
from .similarity import (
    CcaConfig,
    cca_similarity,
    distance_matrix,
    explain_alignment,
    permutation_penalty,
    save_distance_csv,
    sparse_cca,
)

EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_INTERNAL = 4


def _fail(err: Exception) -> int:
    click.echo(f"error: {err}", err=True)
    if isinstance(err, ConfigError):
        return EXIT_CONFIG
    if isinstance(err, (InputError, FileNotFoundError, OSError)):
        return EXIT_INPUT
    return EXIT_INTERNAL


def _guarded(fn):
    try:
        fn()
        return 0
    except TabfpError as err:
        return _fail(err)
    except (FileNotFoundError, OSError, ValueError) as err:
        return _fail(err)


@click.group()
def main():
    """Statistical fingerprints and CCA similarity for tabular datasets."""


@main.command("fingerprint")
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dp-epsilon", type=float, default=None,
              help="Enable differential privacy with this budget.")
@click.option("--kappa", type=int, default=12, show_default=True)
@click.option("--rho", type=float, default=0.95, show_default=True)
@click.option("--n-min", type=int, default=30, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--ablation", type=click.Choice(ABLATION_MODES), default="full",
              show_default=True)
@click.option("--dataset-id", default=None,
              help="Defaults to the input file stem.")
def cmd_fingerprint(input_path, out_path, dp_epsilon, kappa, rho, n_min, seed,
                    ablation, dataset_id):
    """Compute the descriptor sentences for one CSV dataset."""

    def run():
        config = FingerprintConfig(
            dp_enabled=dp_epsilon is not None,
            epsilon=dp_epsilon if dp_epsilon is not None else 1.0,
            rho=rho, kappa=kappa, n_min=n_min, seed=seed)
        m = load_csv(input_path, config)
        ds_id = dataset_id or os.path.splitext(os.path.basename(input_path))[0]
        fp = fingerprint(m, config, dataset_id=ds_id, ablation=ablation)
        save_fingerprint(fp, out_path)
        click.echo(f"wrote {fp.m} sentences to {out_path}")

    sys.exit(_guarded(run))


@main.command("embed")
@click.option("--fingerprint", "fp_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--endpoint", default=None,
              help=f"Embedding service URL (or ${ENDPOINT_ENV}).")
@click.option("--fallback", is_flag=True, help="Use the offline hashing encoder.")
@click.option("--dim", type=int, default=384, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
def cmd_embed(fp_path, out_path, endpoint, fallback, dim, batch_size, seed):
    """Encode a fingerprint into an embedding matrix file."""

    def run():
        fp = load_fingerprint(fp_path)
        url = endpoint or os.environ.get(ENDPOINT_ENV)
        if fallback:
            provider = ProviderConfig("fallback", d_e=dim, seed=seed,
                                      batch_size=batch_size)
        elif url:
            provider = ProviderConfig("service", url=url, d_e=dim,
                                      batch_size=batch_size, seed=seed)
        else:
            raise ConfigError("no embedding endpoint configured; pass "
                              "--endpoint, set the environment variable, "
                              "or use --fallback")
        emb = encode(fp, provider)
        save_embedding(emb, out_path)
        click.echo(f"wrote {emb.d_e}x{emb.m} embedding to {out_path}")

    sys.exit(_guarded(run))


def _parse_penalty(raw: str) -> float:
    if raw == "min":
        return 1e-9  # clamps to the minimum feasible l1 budget
    return float(raw)


@main.command("compare")
@click.option("--a", "a_path", required=True, type=click.Path())
@click.option("--b", "b_path", required=True, type=click.Path())
@click.option("--sparse", is_flag=True, help="Penalized CCA with sparse weights.")
@click.option("--penalty", default=None,
              help="Penalty fraction in (0, 1], or 'min'.")
@click.option("--permute", type=int, default=None,
              help="Select the penalty by this many permutation replicates.")
@click.option("--components", type=int, default=3, show_default=True)
@click.option("--fp-a", type=click.Path(), default=None,
              help="Fingerprint JSONL for side A (required for --sparse).")
@click.option("--fp-b", type=click.Path(), default=None)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["table", "json"]),
              default="table", show_default=True)
def cmd_compare(a_path, b_path, sparse, penalty, permute, components,
                fp_a, fp_b, seed, fmt):
    """CCA similarity between two embedding files."""

    def run():
        a = load_embedding(a_path)
        b = load_embedding(b_path)
        cfg = CcaConfig(seed=seed)
        if not sparse:
            res = cca_similarity(a, b, cfg)
            payload = {
                "pair": [a.dataset_id or a_path, b.dataset_id or b_path],
                "r": res.r,
                "correlations": [float(v) for v in res.correlations],
                "similarity": res.similarity,
                "distance": res.distance,
            }
            if fmt == "json":
                click.echo(json.dumps(payload, indent=2))
            else:
                click.echo(f"similarity {res.similarity:.6f}  "
                           f"distance {res.distance:.6f}  r {res.r}")
            return
        if fp_a is None or fp_b is None:
            raise ConfigError("--sparse needs --fp-a and --fp-b to map weights "
                              "back to variables")
        if permute is not None:
            pu, pv = permutation_penalty(a, b, n_perm=permute, cfg=cfg)
        elif penalty is not None:
            pu = pv = _parse_penalty(penalty)
        else:
            raise ConfigError("--sparse needs --penalty or --permute")
        comps = sparse_cca(a, b, pu, pv, n_components=components, cfg=cfg)
        report = explain_alignment(comps, load_fingerprint(fp_a),
                                   load_fingerprint(fp_b))
        payload = {
            "pair": [a.dataset_id or a_path, b.dataset_id or b_path],
            "penalty": [pu, pv],
            "components": report,
        }
        if fmt == "json":
            click.echo(json.dumps(payload, indent=2))
        else:
            for comp in report:
                side_a = ", ".join(e["variable"] for e in comp["side_a"]) or "-"
                side_b = ", ".join(e["variable"] for e in comp["side_b"]) or "-"
                click.echo(f"component {comp['order'] + 1} "
                           f"(rho {comp['rho']:.4f}): {side_a}  <->  {side_b}")

    sys.exit(_guarded(run))


@main.group("catalog")
def cmd_catalog():
    """Manage a dataset catalog directory."""


@cmd_catalog.command("add")
@click.option("--catalog", "root", required=True, type=click.Path())
@click.option("--id", "dataset_id", required=True)
@click.option("--fingerprint", "fp_path", required=True, type=click.Path())
@click.option("--embedding", "emb_path", required=True, type=click.Path())
def catalog_add_cmd(root, dataset_id, fp_path, emb_path):
    def run():
        manifest = clu.catalog_add(root, dataset_id, fp_path, emb_path)
        click.echo(f"catalog now holds {len(manifest.entries)} entries")

    sys.exit(_guarded(run))


@cmd_catalog.command("build-distances")
@click.option("--catalog", "root", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=42, show_default=True)
def catalog_distances_cmd(root, out_path, seed):
    def run():
        manifest = clu.catalog_load(root)
        embs = clu.catalog_embeddings(manifest)
        dm = distance_matrix(embs, CcaConfig(seed=seed))
        save_distance_csv(dm, out_path)
        click.echo(f"wrote {len(dm.labels)}x{len(dm.labels)} distances to {out_path}")

    sys.exit(_guarded(run))


@cmd_catalog.command("cluster")
@click.option("--catalog", "root", required=True, type=click.Path())
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Also render dendrogram and heatmap PNGs.")
def catalog_cluster_cmd(root, out_dir, seed, figures):
    """Ward-D2 clustering: Newick + merge list + heatmap CSV (+ figures)."""

    def run():
        manifest = clu.catalog_load(root)
        embs = clu.catalog_embeddings(manifest)
        dm = distance_matrix(embs, CcaConfig(seed=seed))
        os.makedirs(out_dir, exist_ok=True)
        save_distance_csv(dm, os.path.join(out_dir, "heatmap.csv"))
        dend = clu.ward_d2(dm)
        with open(os.path.join(out_dir, "dendrogram.newick"), "w",
                  encoding="utf-8") as fh:
            fh.write(clu.to_newick(dend) + "\n")
        with open(os.path.join(out_dir, "merges.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(clu.merges_json(dend), fh, indent=2)
            fh.write("\n")
        if figures:
            from .report import render_dendrogram, render_heatmap
            render_dendrogram(dend, os.path.join(out_dir, "dendrogram.png"))
            render_heatmap(dm, os.path.join(out_dir, "heatmap.png"))
        click.echo(f"clustered {len(dm.labels)} datasets "
                   f"({len(dend.merges)} merges) into {out_dir}")

    sys.exit(_guarded(run))


@cmd_catalog.command("query")
@click.option("--catalog", "root", required=True, type=click.Path())
@click.option("--input", "emb_path", required=True, type=click.Path(),
              help="Embedding file of the query dataset.")
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["table", "json"]),
              default="table", show_default=True)
def catalog_query_cmd(root, emb_path, k, seed, fmt):
    def run():
        manifest = clu.catalog_load(root)
        embs = clu.catalog_embeddings(manifest)
        query = load_embedding(emb_path)
        result = clu.query_top_k(query, embs, k, CcaConfig(seed=seed))
        if fmt == "json":
            click.echo(json.dumps({
                "query_id": result.query_id,
                "neighbors": [{"dataset_id": nid, "distance": d}
                              for nid, d in result.neighbors]}, indent=2))
        else:
            for rank, (nid, d) in enumerate(result.neighbors, 1):
                click.echo(f"{rank:2d}. {nid}  distance {d:.6f}")

    sys.exit(_guarded(run))


@main.command("eval")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(),
              help='Truth pairs JSON: {"pairs": [[a, b], ...]}.')
@click.option("--assignments", "assign_path", type=click.Path(), default=None,
              help="JSON mapping query id -> retrieved nearest id.")
@click.option("--catalog", "root", type=click.Path(), default=None,
              help="Compute nearest neighbors from this catalog instead.")
@click.option("--seed", type=int, default=42, show_default=True)
def cmd_eval(pairs_path, assign_path, root, seed):
    """Print the P@1 retrieval score against designated truth pairs."""

    def run():
        with open(pairs_path, encoding="utf-8") as fh:
            truth = {frozenset(p) for p in json.load(fh)["pairs"]}
        if assign_path is not None:
            with open(assign_path, encoding="utf-8") as fh:
                assignments = json.load(fh)
        elif root is not None:
            manifest = clu.catalog_load(root)
            embs = clu.catalog_embeddings(manifest)
            members = set().union(*truth) if truth else set()
            assignments = {}
            for emb in embs:
                if emb.dataset_id in members:
                    res = clu.query_top_k(emb, embs, 1, CcaConfig(seed=seed))
                    assignments[emb.dataset_id] = res.neighbors[0][0]
        else:
            raise ConfigError("pass --assignments or --catalog")
        score = clu.precision_at_1(assignments, truth)
        if abs(score * 10 - round(score * 10)) < 1e-12:
            click.echo(f"{score:.1f}")
        else:
            click.echo(f"{score:.4f}")

    sys.exit(_guarded(run))


@main.command("synth")
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_synth(out_dir):
    """Generate the 15-dataset synthetic twin catalog."""

    def run():
        truth = harness.generate_catalog(harness.default_catalog_specs(), out_dir)
        click.echo(f"wrote 15 datasets and {len(truth['pairs'])} twin pairs "
                   f"to {out_dir}")

    sys.exit(_guarded(run))


@main.command("dp-sweep")
@click.option("--input-dir", required=True, type=click.Path(),
              help="Directory of CSV datasets.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--epsilons", default="inf,10,1,0.1", show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def cmd_dp_sweep(input_dir, out_dir, epsilons, seed, figures):
    """Re-run the pipeline across privacy budgets; emit distances,
    dendrograms, figures, and the spectral entropy table."""

    def run():
        eps = [math.inf if e.strip() in ("inf", "Inf", "INF") else float(e)
               for e in epsilons.split(",")]
        config = FingerprintConfig(seed=seed)
        harness.run_dp_sweep(input_dir, out_dir, eps, config,
                             render_figures=figures)
        click.echo(f"swept {len(eps)} budgets into {out_dir}")

    sys.exit(_guarded(run))


if __name__ == "__main__":
    main()

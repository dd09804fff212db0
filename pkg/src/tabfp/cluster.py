"""Agglomerative clustering over CCA distances, retrieval, and the catalog.

Ward-D2 linkage runs the Lance-Williams recurrence on squared input
dissimilarities and reports merge heights back on the original scale. Ties
break on the smallest (i, j) cluster-id pair, so clustering is fully
deterministic. Catalog persistence is a directory with a manifest plus one
fingerprint and one embedding file per dataset, checksummed.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .embed import EmbeddingMatrix, load_embedding
from .errors import CorruptEntryError, MissingTruthError, ProviderMismatchError
from .similarity import CcaConfig, DistanceMatrix, cca_from_prepared, prepare_view

MANIFEST_NAME = "manifest.json"
CATALOG_SCHEMA = "tabfp-catalog-1"


@dataclass
class Dendrogram:
    merges: list[tuple[int, int, float]]  # (left id, right id, height)
    labels: list[str]

    @property
    def n_leaves(self) -> int:
        return len(self.labels)


def ward_d2(dm: DistanceMatrix) -> Dendrogram:
    """Lance-Williams Ward update on squared dissimilarities.

    Cluster ids follow the usual convention: leaves are 0..N-1 and the
    cluster created by merge k gets id N+k.
    """
    n = len(dm.labels)
    if n < 2:
        raise ValueError("need at least two items to cluster")
    s = np.asarray(dm.d, dtype=float) ** 2

    # active cluster id -> (row index in s, size)
    dist = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = s[i, j]
    size = {i: 1 for i in range(n)}
    active = list(range(n))
    merges = []
    next_id = n

    for _ in range(n - 1):
        best_pair, best_val = None, np.inf
        for ai in range(len(active)):
            for aj in range(ai + 1, len(active)):
                i, j = active[ai], active[aj]
                v = dist[(min(i, j), max(i, j))]
                if v < best_val or (v == best_val
                                    and (i, j) < best_pair):
                    best_val, best_pair = v, (i, j)
        i, j = best_pair
        merges.append((i, j, float(np.sqrt(max(best_val, 0.0)))))
        ni, nj = size[i], size[j]
        new = next_id
        next_id += 1
        for k in active:
            if k in (i, j):
                continue
            nk = size[k]
            dik = dist[(min(i, k), max(i, k))]
            djk = dist[(min(j, k), max(j, k))]
            dij = best_val
            dist[(min(new, k), max(new, k))] = (
                (ni + nk) * dik + (nj + nk) * djk - nk * dij
            ) / (ni + nj + nk)
        size[new] = ni + nj
        active = [k for k in active if k not in (i, j)] + [new]
    return Dendrogram(merges, list(dm.labels))


def to_linkage(dendro: Dendrogram) -> np.ndarray:
    """Scipy-style linkage matrix (left, right, height, size)."""
    n = dendro.n_leaves
    sizes = {i: 1 for i in range(n)}
    rows = []
    for k, (i, j, h) in enumerate(dendro.merges):
        sizes[n + k] = sizes[i] + sizes[j]
        rows.append([float(i), float(j), h, float(sizes[n + k])])
    return np.asarray(rows)


def cut_clusters(dendro: Dendrogram, k: int) -> list[int]:
    """Flat cluster labels from the first N-k merges."""
    n = dendro.n_leaves
    parent = list(range(n + len(dendro.merges)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step, (i, j, _) in enumerate(dendro.merges[: max(n - k, 0)]):
        new = n + step
        parent[find(i)] = new
        parent[find(j)] = new
    roots = {}
    labels = []
    for leaf in range(n):
        r = find(leaf)
        labels.append(roots.setdefault(r, len(roots)))
    return labels


def to_newick(dendro: Dendrogram) -> str:
    """Newick string with branch lengths as height differences."""
    n = dendro.n_leaves
    height = {i: 0.0 for i in range(n)}
    node = {i: _escape_newick(dendro.labels[i]) for i in range(n)}
    for k, (i, j, h) in enumerate(dendro.merges):
        new = n + k
        left = f"{node[i]}:{h - height[i]:.6g}"
        right = f"{node[j]}:{h - height[j]:.6g}"
        node[new] = f"({left},{right})"
        height[new] = h
    return node[n + len(dendro.merges) - 1] + ";"


def _escape_newick(label: str) -> str:
    if any(c in label for c in "(),:; \t"):
        return "'" + label.replace("'", "''") + "'"
    return label


def merges_json(dendro: Dendrogram) -> dict:
    return {
        "labels": dendro.labels,
        "merges": [{"left": i, "right": j, "height": h}
                   for i, j, h in dendro.merges],
    }


# ---------------------------------------------------------------------------
# retrieval and evaluation
# ---------------------------------------------------------------------------

@dataclass
class RetrievalResult:
    query_id: str
    neighbors: list[tuple[str, float]]


def query_top_k(v_q: EmbeddingMatrix, catalog: list[EmbeddingMatrix],
                k: int, cfg: CcaConfig | None = None,
                query_id: str | None = None) -> RetrievalResult:
    """Rank catalog entries by CCA distance to the query, ties by id."""
    if not catalog:
        raise ValueError("empty catalog")
    tags = {e.provider_tag for e in catalog} | {v_q.provider_tag}
    if len(tags) > 1:
        raise ProviderMismatchError(f"mixed provider tags: {sorted(tags)}")
    qid = query_id if query_id is not None else v_q.dataset_id
    pq = prepare_view(v_q, cfg)
    scored = []
    for entry in catalog:
        if entry.dataset_id == qid:
            continue
        d = cca_from_prepared(pq, prepare_view(entry, cfg), cfg).distance
        scored.append((d, entry.dataset_id))
    scored.sort()
    return RetrievalResult(qid, [(eid, d) for d, eid in scored[:k]])


def nearest_from_distances(dm: DistanceMatrix) -> dict[str, str]:
    """Rank-1 neighbor per dataset from a distance matrix, ties by id."""
    out = {}
    for i, label in enumerate(dm.labels):
        scored = sorted((dm.d[i, j], dm.labels[j])
                        for j in range(len(dm.labels)) if j != i)
        out[label] = scored[0][1]
    return out


def precision_at_1(assignments: dict[str, str],
                   truth_pairs: set[frozenset]) -> float:
    """Fraction of queries whose rank-1 neighbor is the designated partner."""
    partner = {}
    for pair in truth_pairs:
        x, y = tuple(pair)
        partner[x] = y
        partner[y] = x
    correct = 0
    for query, neighbor in assignments.items():
        if query not in partner:
            raise MissingTruthError(f"no truth partner for {query!r}")
        correct += int(neighbor == partner[query])
    return correct / len(assignments) if assignments else 0.0


# ---------------------------------------------------------------------------
# catalog persistence
# ---------------------------------------------------------------------------

def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class CatalogManifest:
    root: str
    entries: list[dict]
    schema_version: str = CATALOG_SCHEMA

    def ids(self) -> list[str]:
        return [e["dataset_id"] for e in self.entries]


def _manifest_path(root) -> str:
    return os.path.join(root, MANIFEST_NAME)


def catalog_load(root) -> CatalogManifest:
    path = _manifest_path(root)
    if not os.path.exists(path):
        return CatalogManifest(str(root), [])
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    manifest = CatalogManifest(str(root), data.get("entries", []),
                               data.get("schema_version", CATALOG_SCHEMA))
    for e in manifest.entries:
        for key in ("fingerprint", "embedding"):
            fpath = os.path.join(root, e[key])
            if not os.path.exists(fpath):
                raise CorruptEntryError(f"missing file {fpath}")
            if _sha256(fpath) != e["sha256"][key]:
                raise CorruptEntryError(f"checksum mismatch for {fpath}")
    return manifest


def catalog_add(root, dataset_id: str, fingerprint_path, embedding_path) -> CatalogManifest:
    """Validate an entry against the manifest and append it."""
    os.makedirs(root, exist_ok=True)
    manifest = catalog_load(root)
    if dataset_id in manifest.ids():
        raise CorruptEntryError(f"dataset id {dataset_id!r} already cataloged")
    emb = load_embedding(embedding_path)
    if manifest.entries:
        if emb.d_e != manifest.entries[0]["d_e"]:
            raise ProviderMismatchError(
                f"embedding dim {emb.d_e} does not match catalog "
                f"{manifest.entries[0]['d_e']}")
        if emb.provider_tag != manifest.entries[0]["provider_tag"]:
            raise ProviderMismatchError(
                f"provider {emb.provider_tag!r} does not match catalog "
                f"{manifest.entries[0]['provider_tag']!r}")
    entry = {
        "dataset_id": dataset_id,
        "fingerprint": os.path.relpath(str(fingerprint_path), root),
        "embedding": os.path.relpath(str(embedding_path), root),
        "provider_tag": emb.provider_tag,
        "d_e": emb.d_e,
        "sha256": {
            "fingerprint": _sha256(fingerprint_path),
            "embedding": _sha256(embedding_path),
        },
    }
    manifest.entries.append(entry)
    with open(_manifest_path(root), "w", encoding="utf-8") as fh:
        json.dump({"schema_version": manifest.schema_version,
                   "entries": manifest.entries}, fh, indent=2)
        fh.write("\n")
    return manifest


def catalog_embeddings(manifest: CatalogManifest) -> list[EmbeddingMatrix]:
    out = []
    for e in manifest.entries:
        emb = load_embedding(os.path.join(manifest.root, e["embedding"]))
        emb.dataset_id = e["dataset_id"]
        out.append(emb)
    return out

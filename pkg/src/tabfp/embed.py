"""Sentence embedding providers and the embedding-matrix file format.

Two providers: an HTTP client speaking the POST {url}/embed protocol of a
sentence-transformer service, and a deterministic offline hashing encoder so
the whole pipeline runs with no network and no model weights. Columns of an
embedding matrix are sentence vectors in fingerprint order.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import struct
import time
from dataclasses import dataclass

import numpy as np
import requests

from .errors import DimensionMismatchError, ServiceUnavailableError
from .serialize import Fingerprint

MAGIC = b"TBEMB1"
DEFAULT_DIM = 384
ENDPOINT_ENV = "TABFP_EMBED_ENDPOINT"

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass
class ProviderConfig:
    kind: str = "fallback"  # "fallback" | "service"
    url: str | None = None
    d_e: int = DEFAULT_DIM
    seed: int = 42
    timeout: float = 30.0
    batch_size: int = 32
    retries: int = 3

    def tag(self) -> str:
        if self.kind == "service":
            return f"service:{self.url}"
        return f"fallback:{self.d_e}:{self.seed}"


@dataclass
class EmbeddingMatrix:
    columns: np.ndarray  # d_e x m, column k embeds sentence k
    provider_tag: str
    dataset_id: str = ""

    @property
    def d_e(self) -> int:
        return self.columns.shape[0]

    @property
    def m(self) -> int:
        return self.columns.shape[1]


def _hash64(token: str, seed: int) -> int:
    h = hashlib.blake2b(token.encode("utf-8"), digest_size=8,
                        salt=str(seed).encode("utf-8")[:16])
    return int.from_bytes(h.digest(), "little")


def fallback_encode(text: str, d_e: int = DEFAULT_DIM, seed: int = 42) -> np.ndarray:
    """Deterministic signed hashing of word unigrams and character trigrams.

    Trigrams run over the whole normalized text (words joined by single
    spaces), so they cross word boundaries. The crossing trigrams entangle
    each word with its neighbors, which keeps a sentence's template, variable
    name, and value from being linearly separable token blocks; without that
    entanglement a downstream CCA can cancel every dataset-specific token by
    recombining same-template sentences. Output is unit l2-norm.
    """
    if d_e < 8:
        raise ValueError("fallback encoder needs d_e >= 8")
    words = _TOKEN_RE.findall(text.lower())
    v = np.zeros(d_e)
    if not words:
        v[0] = 1.0
        return v
    joined = " ".join(words)
    tokens = list(words)
    tokens.extend(joined[i:i + 3] for i in range(len(joined) - 2))
    for tok in tokens:
        h = _hash64(tok, seed)
        idx = h % d_e
        sign = 1.0 if (h >> 32) & 1 else -1.0
        v[idx] += sign
    norm = np.linalg.norm(v)
    if norm == 0.0:
        v[0] = 1.0
        return v
    return v / norm


def _post_batch(url: str, texts: list[str], cfg: ProviderConfig) -> list[list[float]]:
    last_err = None
    for attempt in range(cfg.retries):
        try:
            resp = requests.post(url.rstrip("/") + "/embed",
                                 json={"texts": texts}, timeout=cfg.timeout)
            resp.raise_for_status()
            return resp.json()["embeddings"]
        except (requests.RequestException, KeyError, ValueError) as err:
            last_err = err
            time.sleep(0.2 * 2 ** attempt)
    raise ServiceUnavailableError(f"embedding service failed after "
                                  f"{cfg.retries} attempts: {last_err}")


def encode(fp: Fingerprint, provider: ProviderConfig) -> EmbeddingMatrix:
    """Embed every sentence of a fingerprint, columns in sentence order."""
    texts = fp.texts()
    if not texts:
        raise ValueError("cannot encode an empty fingerprint")
    if provider.kind == "service":
        url = provider.url or os.environ.get(ENDPOINT_ENV)
        if not url:
            raise ServiceUnavailableError("no embedding endpoint configured")
        vectors: list[list[float]] = []
        for start in range(0, len(texts), provider.batch_size):
            vectors.extend(_post_batch(url, texts[start:start + provider.batch_size],
                                       provider))
        cols = np.asarray(vectors, dtype=float).T
        if cols.shape[0] != provider.d_e:
            raise DimensionMismatchError(
                f"service returned {cols.shape[0]}-dim vectors, "
                f"expected {provider.d_e}")
    else:
        cols = np.column_stack([fallback_encode(t, provider.d_e, provider.seed)
                                for t in texts])
    if not np.all(np.isfinite(cols)):
        raise DimensionMismatchError("provider returned non-finite embeddings")
    return EmbeddingMatrix(cols, provider.tag(), fp.dataset_id)


# ---------------------------------------------------------------------------
# binary persistence: magic, u32 d_e, u32 m, float32 column-major values,
# with provider_tag and dataset_id in a JSON sidecar
# ---------------------------------------------------------------------------

def _sidecar_path(path) -> str:
    return str(path) + ".json"


def save_embedding(emb: EmbeddingMatrix, path) -> None:
    data = np.asarray(emb.columns, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", emb.d_e, emb.m))
        fh.write(data.tobytes(order="F"))
    with open(_sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump({"dataset_id": emb.dataset_id, "provider_tag": emb.provider_tag,
                   "d_e": emb.d_e, "m": emb.m}, fh)
        fh.write("\n")


def load_embedding(path) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        magic = fh.read(6)
        if magic != MAGIC:
            raise DimensionMismatchError(f"{path}: bad magic {magic!r}")
        d_e, m = struct.unpack("<II", fh.read(8))
        raw = fh.read(4 * d_e * m)
    if len(raw) != 4 * d_e * m:
        raise DimensionMismatchError(f"{path}: truncated embedding file")
    cols = np.frombuffer(raw, dtype="<f4").reshape((d_e, m), order="F")
    dataset_id, tag = "", "unknown"
    sidecar = _sidecar_path(path)
    if os.path.exists(sidecar):
        with open(sidecar, encoding="utf-8") as fh:
            meta = json.load(fh)
        dataset_id = meta.get("dataset_id", "")
        tag = meta.get("provider_tag", "unknown")
    return EmbeddingMatrix(cols.astype(float), tag, dataset_id)

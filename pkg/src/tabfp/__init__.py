"""Statistical fingerprints, embeddings, and CCA similarity for numeric
tabular datasets."""

from .datamodel import DataMatrix, FingerprintConfig, classify_columns, load_csv
from .embed import EmbeddingMatrix, ProviderConfig, encode, fallback_encode
from .serialize import Fingerprint, fingerprint, load_fingerprint, save_fingerprint
from .similarity import (
    CcaConfig,
    CcaResult,
    cca_similarity,
    distance_matrix,
    permutation_penalty,
    sparse_cca,
)
from .cluster import precision_at_1, query_top_k, ward_d2

__version__ = "0.1.0"

__all__ = [
    "CcaConfig",
    "CcaResult",
    "DataMatrix",
    "EmbeddingMatrix",
    "Fingerprint",
    "FingerprintConfig",
    "ProviderConfig",
    "cca_similarity",
    "classify_columns",
    "distance_matrix",
    "encode",
    "fallback_encode",
    "fingerprint",
    "load_csv",
    "load_fingerprint",
    "permutation_penalty",
    "precision_at_1",
    "query_top_k",
    "save_fingerprint",
    "sparse_cca",
    "ward_d2",
]

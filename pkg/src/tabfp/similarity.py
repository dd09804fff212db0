"""CCA similarity between embedding matrices and its sparse counterpart.

Embedding dimensions act as shared samples and sentences as variables.
Columns are mean-centered and l2-normalized, covariances are ridge-
stabilized with a small Tikhonov term, and canonical directions come from
the SVD of the whitened cross-covariance (computed through thin SVDs of the
views, so the cost never scales with sentence count squared). Reported
canonical correlations are empirical correlations of the canonical variate
pairs, so a dataset is at similarity exactly 1 with itself regardless of
the ridge. Similarity is the mean of the leading r correlations and
distance is one minus similarity.

The sparse variant solves the rank-one penalized matrix decomposition with
unit-l2 and l1-ball constraints per view, multiple random restarts, and
projection deflation between components.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .embed import EmbeddingMatrix
from .errors import (
    DegenerateViewError,
    DimensionMismatchError,
    InfeasiblePenaltyError,
    ProviderMismatchError,
)
from .serialize import Fingerprint
from .spectral import gavish_donoho_rank


@dataclass
class CcaConfig:
    alpha: float = 1e-6
    component_rule: str = "min_gd_rank"  # or "alg_two"
    seed: int = 42

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.component_rule not in ("min_gd_rank", "alg_two"):
            raise ValueError(f"unknown component rule {self.component_rule!r}")


@dataclass
class CcaResult:
    correlations: np.ndarray
    r: int
    similarity: float
    distance: float


@dataclass
class DistanceMatrix:
    labels: list[str]
    d: np.ndarray


@dataclass
class SparseCcaComponent:
    order: int
    u: np.ndarray
    v: np.ndarray
    rho: float
    penalty_u: float  # effective l1 budgets after scaling by sqrt(M)
    penalty_v: float


def _check_views(a: EmbeddingMatrix, b: EmbeddingMatrix):
    if a.d_e != b.d_e:
        raise DimensionMismatchError(f"embedding dims differ: {a.d_e} vs {b.d_e}")
    for v in (a, b):
        if v.m < 2:
            raise DegenerateViewError("need at least 2 sentences per view")
        if np.all(v.columns == v.columns[:, [0]]):
            raise DegenerateViewError("all sentence embeddings are identical")


def preprocess_view(columns: np.ndarray) -> np.ndarray:
    """Subtract the mean sentence embedding (the column centroid), scale each
    column to unit l2-norm, then scale the matrix by 1/sqrt(M) so the whole
    view has unit Frobenius norm.

    Centering on the centroid keeps the computation invariant under a common
    rotation of the embedding dimensions. The 1/sqrt(M) factor normalizes the
    view as a matrix: covariance eigenvalues then sum to 1/(samples-1)
    regardless of sentence count, which places weak template-noise directions
    at the scale of the Tikhonov ridge instead of far above it.
    """
    a = np.asarray(columns, dtype=float)
    a = a - a.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(a, axis=0)
    norms[norms == 0.0] = 1.0
    return a / norms / np.sqrt(a.shape[1])


def _whiten(a: np.ndarray, alpha: float):
    """Thin SVD pieces of the whitened view A (C_aa + alpha I)^(-1/2).

    Returns (u, scale) with the whitened view equal to u @ diag(scale) @ w.T;
    canonical variates only need u and scale. Directions below the numerical
    rank tolerance get scale exactly zero: centroid centering always leaves
    one null direction, and its "variate" is rounding residue that must not
    reach the correlation step.
    """
    s = a.shape[0]
    u, sig, _ = np.linalg.svd(a, full_matrices=False)
    tol = max(a.shape) * np.finfo(float).eps * (sig[0] if sig.size else 0.0)
    scale = sig / np.sqrt(sig ** 2 / (s - 1) + alpha)
    scale[sig <= tol] = 0.0
    return u, scale


@dataclass
class PreparedView:
    """Per-view factorization reused across many pairings."""
    samples: int
    ua: np.ndarray
    da: np.ndarray
    gd_rank: int
    m: int
    d_e: int
    provider_tag: str
    dataset_id: str


def prepare_view(emb: EmbeddingMatrix, cfg: CcaConfig | None = None) -> PreparedView:
    cfg = cfg or CcaConfig()
    if emb.m < 2:
        raise DegenerateViewError("need at least 2 sentences per view")
    if np.all(emb.columns == emb.columns[:, [0]]):
        raise DegenerateViewError("all sentence embeddings are identical")
    a = preprocess_view(emb.columns)
    ua, da = _whiten(a, cfg.alpha)
    raw_sig = np.linalg.svd(emb.columns, compute_uv=False)
    return PreparedView(a.shape[0], ua, da, gavish_donoho_rank(raw_sig)[1],
                        emb.m, emb.d_e, emb.provider_tag, emb.dataset_id)


def _prepared_correlations(pa: PreparedView, pb: PreparedView) -> np.ndarray:
    """Empirical correlations of the canonical variate pairs, ordered by the
    ridged objective (the SVD of the whitened cross-covariance).

    The objective order matters: directions the ridge has damped stay at the
    tail even when their raw cosine happens to be large, so they only enter
    the similarity mean when the component count genuinely reaches them.
    """
    s = pa.samples
    k_small = (pa.da[:, None] * (pa.ua.T @ pb.ua)) * pb.da[None, :] / (s - 1)
    p, sv, qt = np.linalg.svd(k_small)
    n_comp = min(len(pa.da), len(pb.da))
    rhos = np.zeros(n_comp)
    norm_floor = 1e-9
    for l in range(n_comp):
        va = pa.ua @ (pa.da * p[:, l])
        vb = pb.ua @ (pb.da * qt[l, :])
        na, nb = np.linalg.norm(va), np.linalg.norm(vb)
        if na < norm_floor or nb < norm_floor:
            rhos[l] = 0.0  # direction carries no variance
        else:
            rhos[l] = float(va @ vb) / (na * nb)
    return np.clip(rhos, 0.0, 1.0)


def canonical_correlations(a: np.ndarray, b: np.ndarray,
                           alpha: float) -> np.ndarray:
    """Empirical correlations of the ridge-stabilized canonical variate
    pairs of two preprocessed views, sorted nonincreasing, clipped to [0, 1]."""
    ua, da = _whiten(a, alpha)
    ub, db = _whiten(b, alpha)
    pa = PreparedView(a.shape[0], ua, da, 0, a.shape[1], a.shape[0], "", "")
    pb = PreparedView(b.shape[0], ub, db, 0, b.shape[1], b.shape[0], "", "")
    return _prepared_correlations(pa, pb)


def cca_from_prepared(pa: PreparedView, pb: PreparedView,
                      cfg: CcaConfig | None = None) -> CcaResult:
    cfg = cfg or CcaConfig()
    if pa.d_e != pb.d_e:
        raise DimensionMismatchError(f"embedding dims differ: {pa.d_e} vs {pb.d_e}")
    rhos = _prepared_correlations(pa, pb)
    if cfg.component_rule == "alg_two":
        r = min(pa.m, pb.m, pa.d_e) - 1
    else:
        r = min(pa.gd_rank, pb.gd_rank)
    r = max(1, min(r, rhos.size))
    used = np.sort(rhos[:r])[::-1]
    similarity = float(used.mean())
    distance = min(max(1.0 - similarity, 0.0), 1.0)
    return CcaResult(used, r, similarity, distance)


def cca_similarity(a: EmbeddingMatrix, b: EmbeddingMatrix,
                   cfg: CcaConfig | None = None) -> CcaResult:
    """Mean canonical correlation similarity and the associated distance."""
    cfg = cfg or CcaConfig()
    _check_views(a, b)
    return cca_from_prepared(prepare_view(a, cfg), prepare_view(b, cfg), cfg)


def distance_matrix(catalog: list[EmbeddingMatrix],
                    cfg: CcaConfig | None = None,
                    labels: list[str] | None = None) -> DistanceMatrix:
    """All-pairs CCA distances; symmetric with an exactly zero diagonal."""
    if len(catalog) < 2:
        raise DegenerateViewError("need at least two catalog entries")
    tags = {e.provider_tag for e in catalog}
    if len(tags) > 1:
        raise ProviderMismatchError(f"mixed provider tags: {sorted(tags)}")
    dims = {e.d_e for e in catalog}
    if len(dims) > 1:
        raise ProviderMismatchError(f"mixed embedding dims: {sorted(dims)}")
    labels = labels or [e.dataset_id or f"dataset{i}" for i, e in enumerate(catalog)]
    cfg = cfg or CcaConfig()
    prepared = [prepare_view(e, cfg) for e in catalog]
    n = len(catalog)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dist = cca_from_prepared(prepared[i], prepared[j], cfg).distance
            d[i, j] = d[j, i] = dist
    return DistanceMatrix(labels, d)


def save_distance_csv(dm: DistanceMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("," + ",".join(dm.labels) + "\n")
        for i, label in enumerate(dm.labels):
            fh.write(label + "," + ",".join(repr(float(v)) for v in dm.d[i]) + "\n")


def load_distance_csv(path) -> DistanceMatrix:
    with open(path, encoding="utf-8") as fh:
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    labels = rows[0][1:]
    d = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    return DistanceMatrix(labels, d)


# ---------------------------------------------------------------------------
# sparse CCA via penalized matrix decomposition
# ---------------------------------------------------------------------------

def _soft(w: np.ndarray, delta: float) -> np.ndarray:
    return np.sign(w) * np.maximum(np.abs(w) - delta, 0.0)


def _one_sparse(w: np.ndarray) -> np.ndarray:
    s = np.zeros_like(w)
    k = int(np.argmax(np.abs(w)))
    s[k] = np.sign(w[k]) if w[k] != 0 else 1.0
    return s


def _l1_project(w: np.ndarray, budget: float) -> np.ndarray | None:
    """Soft-threshold w and l2-normalize so the l1 norm meets the budget,
    choosing the smallest threshold that fits (none if already feasible)."""
    wmax = np.abs(w).max()
    if wmax == 0.0:
        return None
    if budget <= 1.0 + 1e-12:
        # only 1-sparse unit vectors satisfy ||u||_1 <= 1 = ||u||_2
        return _one_sparse(w)
    u = w / np.linalg.norm(w)
    if np.abs(u).sum() <= budget:
        return u
    lo, hi = 0.0, wmax
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        s = _soft(w, mid)
        norm = np.linalg.norm(s)
        if norm == 0.0 or np.abs(s).sum() / norm > budget:
            lo = mid
        else:
            hi = mid
    s = _soft(w, hi)
    # bisection can leave epsilon-scale survivors just below the threshold
    s[np.abs(s) < 1e-9 * np.abs(s).max()] = 0.0
    norm = np.linalg.norm(s)
    if norm == 0.0 or np.abs(s).sum() / norm > budget + 1e-10:
        # ties at the maximum can make the budget unreachable by thresholding
        return _one_sparse(w)
    return s / norm


def _budget(fraction: float, m: int) -> float:
    if fraction is None or fraction <= 0:
        raise InfeasiblePenaltyError("penalty fraction must be positive")
    raw = fraction * np.sqrt(m)
    if raw < 1.0:
        warnings.warn("penalty below the feasible minimum; clamping so one "
                      "unit-l2 vector fits the l1 ball")
        return 1.0
    return float(raw)


def _pmd_rank_one(x: np.ndarray, y: np.ndarray, budget_u: float,
                  budget_v: float, rng: np.random.Generator,
                  n_starts: int = 5, max_iter: int = 200,
                  tol: float = 1e-9):
    """Best of n_starts alternating runs; returns (u, v, rho)."""
    z = x.T @ y
    best = None
    for _ in range(n_starts):
        v = rng.standard_normal(y.shape[1])
        v /= np.linalg.norm(v)
        u = np.zeros(x.shape[1])
        for _ in range(max_iter):
            u_new = _l1_project(z @ v, budget_u)
            if u_new is None:
                break
            v_new = _l1_project(z.T @ u_new, budget_v)
            if v_new is None:
                break
            if (np.abs(u_new - u).max() < tol
                    and np.abs(v_new - v).max() < tol):
                u, v = u_new, v_new
                break
            u, v = u_new, v_new
        if np.abs(u).sum() == 0.0:
            continue
        score = x @ u
        other = y @ v
        na, nb = np.linalg.norm(score), np.linalg.norm(other)
        if na < 1e-150 or nb < 1e-150:
            continue
        rho = float(score @ other) / (na * nb)
        if rho < 0:
            v = -v
            rho = -rho
        if best is None or rho > best[2]:
            best = (u, v, rho)
    return best


def sparse_cca(a: EmbeddingMatrix, b: EmbeddingMatrix,
               penalty_u: float, penalty_v: float, n_components: int = 1,
               cfg: CcaConfig | None = None) -> list[SparseCcaComponent]:
    """l1-penalized CCA components with projection deflation.

    Penalties are fractions in [0, 1] scaled to fraction*sqrt(M) per view;
    the minimum feasible budget (exactly one nonzero per view) is 1.
    """
    cfg = cfg or CcaConfig()
    _check_views(a, b)
    x = preprocess_view(a.columns)
    y = preprocess_view(b.columns)
    bu = _budget(penalty_u, a.m)
    bv = _budget(penalty_v, b.m)
    rng = np.random.default_rng(cfg.seed)
    out = []
    for order in range(n_components):
        got = _pmd_rank_one(x, y, bu, bv, rng)
        if got is None:
            break
        u, v, rho = got
        out.append(SparseCcaComponent(order, u, v, rho, bu, bv))
        x = x - np.outer(x @ u, u)
        y = y - np.outer(y @ v, v)
    return out


def permutation_penalty(a: EmbeddingMatrix, b: EmbeddingMatrix,
                        n_perm: int = 50,
                        grid: np.ndarray | None = None,
                        cfg: CcaConfig | None = None) -> tuple[float, float]:
    """Pick the penalty fraction whose component-1 correlation stands out
    most against row-permuted nulls (Fisher-z score); exact ties go to the
    sparser solution."""
    cfg = cfg or CcaConfig()
    if n_perm < 10:
        raise ValueError("need at least 10 permutation replicates")
    if grid is None:
        grid = np.linspace(0.1, 1.0, 10)
    x = preprocess_view(a.columns)
    y = preprocess_view(b.columns)
    rng = np.random.default_rng(cfg.seed)
    perms = [rng.permutation(x.shape[0]) for _ in range(n_perm)]

    def fisher(r):
        return float(np.arctanh(min(max(r, 0.0), 1.0 - 1e-12)))

    results = []
    for c in grid:
        bu = max(1.0, c * np.sqrt(a.m))
        bv = max(1.0, c * np.sqrt(b.m))
        fit_rng = np.random.default_rng([cfg.seed, int(round(c * 1e6))])
        got = _pmd_rank_one(x, y, bu, bv, fit_rng)
        if got is None:
            continue
        u, v, rho = got
        support = int(np.count_nonzero(u) + np.count_nonzero(v))
        z_real = fisher(rho)
        z_null = []
        for k, perm in enumerate(perms):
            perm_rng = np.random.default_rng([cfg.seed, int(round(c * 1e6)), k])
            # null replicates only need the bulk of the distribution, not a
            # fully polished optimum; fewer restarts keep 50 replicates cheap
            got_p = _pmd_rank_one(x[perm], y, bu, bv, perm_rng,
                                  n_starts=2, max_iter=60)
            z_null.append(fisher(got_p[2]) if got_p is not None else 0.0)
        mu = float(np.mean(z_null))
        sd = max(float(np.std(z_null, ddof=1)), 1e-12)
        results.append(((z_real - mu) / sd, -support, -c, float(c)))
    if not results:
        raise InfeasiblePenaltyError("no feasible grid point")
    results.sort(reverse=True)
    best = results[0][3]
    return best, best


@dataclass
class AlignmentSide:
    entries: list[tuple[str, float]] = field(default_factory=list)
    degenerate: bool = False


def explain_alignment(components: list[SparseCcaComponent],
                      fp_a: Fingerprint, fp_b: Fingerprint) -> list[dict]:
    """Map nonzero sparse weights back to variable tokens, aggregating
    absolute weight per token, ranked."""
    report = []
    for comp in components:
        if comp.u.size != fp_a.m or comp.v.size != fp_b.m:
            raise DimensionMismatchError(
                "sparse weight length does not match sentence count")
        sides = []
        for w, fp in ((comp.u, fp_a), (comp.v, fp_b)):
            agg: dict[str, float] = {}
            for idx in np.nonzero(w)[0]:
                var = fp.sentences[int(idx)].variable
                agg[var] = agg.get(var, 0.0) + abs(float(w[idx]))
            entries = sorted(agg.items(), key=lambda kv: (-kv[1], kv[0]))
            sides.append(AlignmentSide(entries, degenerate=not entries))
        report.append({
            "order": comp.order,
            "rho": comp.rho,
            "side_a": [{"variable": nm, "weight": wt} for nm, wt in sides[0].entries],
            "side_b": [{"variable": nm, "weight": wt} for nm, wt in sides[1].entries],
            "degenerate": sides[0].degenerate or sides[1].degenerate,
        })
    return report

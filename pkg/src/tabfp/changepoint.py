"""Exact penalized change-point detection (pruned dynamic programming).

Gaussian segment costs for three shift kinds:
  mean          variance fixed at the global MLE, segment mean free
  variance      mean fixed at the global value, segment variance free
  meanvariance  both free
Penalty is q*log(n) per change point where q is the number of free
parameters per segment (1, 1, 2). The minimizer is exact; pruning only
discards candidates that can never become optimal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooShortError

KINDS = ("mean", "variance", "meanvariance")
MIN_SEGMENT = {"mean": 2, "variance": 2, "meanvariance": 3}
FREE_PARAMS = {"mean": 1, "variance": 1, "meanvariance": 2}

_VAR_FLOOR = 1e-12


@dataclass
class ChangePointSet:
    kind: str
    boundaries: list[int]  # last index (1-based) of each segment but the final one
    segment_count: int
    cost: float  # optimal penalized cost, exposed for the exactness checks


class SegmentCost:
    """O(1) segment costs from cumulative sums over x[s:t] (0-based, t
    exclusive); batch() evaluates one end against an array of starts."""

    def __init__(self, x: np.ndarray, kind: str):
        x = np.asarray(x, dtype=float)
        self.kind = kind
        self.cs = np.concatenate([[0.0], np.cumsum(x)])
        self.cs2 = np.concatenate([[0.0], np.cumsum(x ** 2)])
        n = x.size
        mu = x.mean()
        self.global_mean = mu
        self.global_var = max(float(np.mean((x - mu) ** 2)), _VAR_FLOOR)

    def batch(self, s: np.ndarray, t: int) -> np.ndarray:
        length = t - s
        total = self.cs[t] - self.cs[s]
        total2 = self.cs2[t] - self.cs2[s]
        if self.kind == "mean":
            # squared residuals around the segment mean, scaled by the
            # fixed global variance
            rss = np.maximum(total2 - total * total / length, 0.0)
            return rss / self.global_var
        if self.kind == "variance":
            rss = total2 - 2.0 * self.global_mean * total \
                + length * self.global_mean ** 2
        else:  # meanvariance
            rss = total2 - total * total / length
        var = np.maximum(rss / length, _VAR_FLOOR)
        return length * np.log(var)

    def __call__(self, s: int, t: int) -> float:
        return float(self.batch(np.asarray([s]), t)[0])


def pelt_changepoints(x: np.ndarray, kind: str = "meanvariance",
                      penalty: float | None = None) -> ChangePointSet:
    """Exact penalized segmentation of a 1-d series.

    Returns 1-based last indices of all segments except the final one, so a
    single break between x[19] and x[20] is reported as boundary 20.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown change point kind: {kind}")
    x = np.asarray(x, dtype=float)
    n = x.size
    min_seg = MIN_SEGMENT[kind]
    if n < 2 * min_seg:
        raise TooShortError(f"need at least {2 * min_seg} points for kind={kind}")
    if np.ptp(x) == 0.0:
        return ChangePointSet(kind, [], 1, 0.0)

    if penalty is None:
        penalty = FREE_PARAMS[kind] * float(np.log(n))
    cost = SegmentCost(x, kind)

    # F[t]: optimal cost of x[0:t] plus one penalty per segment; F[0] = -penalty
    # so the first segment's penalty cancels.
    #
    # Pruning with a minimum segment length needs a grace period: a candidate
    # s failing the test at time t is provably non-optimal only for times
    # >= t + min_seg (the dominating path through t needs an admissible
    # segment after t), so removal is delayed by min_seg. A small slack keeps
    # floating-point wobble in the cumulative sums from dropping the optimum.
    f = np.full(n + 1, np.inf)
    f[0] = -penalty
    last = np.zeros(n + 1, dtype=int)
    cand = np.zeros(n + 1, dtype=np.int64)      # candidate positions
    drop = np.full(n + 1, n + 2, dtype=np.int64)  # time each one expires
    n_cand = 1
    prune_slack = 1e-9
    for t in range(min_seg, n + 1):
        live = drop[:n_cand] > t
        if not live.all():
            keep = int(live.sum())
            cand[:keep] = cand[:n_cand][live]
            drop[:keep] = drop[:n_cand][live]
            n_cand = keep
        s_all = cand[:n_cand]
        mature = s_all <= t - min_seg
        s_ok = s_all[mature]
        if s_ok.size:
            vals = f[s_ok] + cost.batch(s_ok, t) + penalty
            k = int(np.argmin(vals))
            f[t] = vals[k]
            last[t] = s_ok[k]
            expired = vals - penalty > f[t] + prune_slack
            sub = drop[:n_cand][mature]
            drop[:n_cand][mature] = np.minimum(
                sub, np.where(expired, t + min_seg, n + 2))
        cand[n_cand] = t
        drop[n_cand] = n + 2
        n_cand += 1

    bounds = []
    t = n
    while t > 0:
        s = int(last[t])
        if s > 0:
            bounds.append(s)
        t = s
    bounds.reverse()
    return ChangePointSet(kind, bounds, len(bounds) + 1, float(f[n]))


def segments_from_boundaries(boundaries: list[int], n: int) -> list[tuple[int, int]]:
    """(start, end) half-open 0-based segment ranges for a series of length n."""
    edges = [0] + list(boundaries) + [n]
    return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]

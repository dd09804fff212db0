import numpy as np
import pytest

from tabfp.changepoint import (
    KINDS,
    pelt_changepoints,
    segments_from_boundaries,
)
from tabfp.errors import TooShortError

from oracles import exhaustive_segmentation


def test_constant_series_has_no_boundaries():
    for kind in KINDS:
        res = pelt_changepoints(np.full(50, 3.0), kind)
        assert res.boundaries == []
        assert res.segment_count == 1


def test_single_mean_shift_fixture():
    rng = np.random.default_rng(42)
    x = np.concatenate([np.zeros(20), np.full(20, 10.0)])
    x = x + rng.normal(0, 0.1, 40)
    res = pelt_changepoints(x, "mean")
    assert res.boundaries == [20]
    assert res.segment_count == 2


def test_fixture_matches_bruteforce_over_all_single_splits():
    # direct check of the 20/20 fixture against enumerating every possible
    # single boundary position
    rng = np.random.default_rng(42)
    x = np.concatenate([np.zeros(20), np.full(20, 10.0)])
    x = x + rng.normal(0, 0.1, 40)
    bounds, cost = exhaustive_segmentation(x, "mean")
    assert bounds == [20]
    res = pelt_changepoints(x, "mean")
    assert res.cost == pytest.approx(cost, abs=1e-9)


@pytest.mark.parametrize("kind", KINDS)
def test_pelt_matches_exhaustive_dp(kind):
    rng = np.random.default_rng(17)
    for trial in range(40):
        n = int(rng.integers(2 * 3, 51))
        x = rng.normal(size=n)
        # sprinkle real structure into some trials
        if trial % 3 == 0:
            k = int(rng.integers(1, max(2, n // 10 + 1)))
            for _ in range(k):
                pos = int(rng.integers(0, n))
                x[pos:] += rng.normal(0, 3)
        if trial % 5 == 0:
            x[n // 2:] *= 1 + abs(rng.normal(0, 2))
        _, oracle_cost = exhaustive_segmentation(x, kind)
        res = pelt_changepoints(x, kind)
        assert res.cost == pytest.approx(oracle_cost, abs=1e-9), \
            f"kind={kind} trial={trial}"


def test_too_short_rejected():
    with pytest.raises(TooShortError):
        pelt_changepoints(np.array([1.0, 2.0, 3.0]), "mean")
    with pytest.raises(TooShortError):
        pelt_changepoints(np.arange(5.0), "meanvariance")


def test_boundaries_strictly_increasing_in_range():
    rng = np.random.default_rng(9)
    x = np.concatenate([rng.normal(0, 1, 30), rng.normal(8, 1, 30),
                        rng.normal(-5, 1, 30)])
    res = pelt_changepoints(x, "mean")
    assert all(b2 > b1 for b1, b2 in zip(res.boundaries, res.boundaries[1:]))
    assert all(0 < b < len(x) for b in res.boundaries)
    assert res.segment_count == len(res.boundaries) + 1


def test_variance_kind_location_invariant():
    rng = np.random.default_rng(4)
    x = np.concatenate([rng.normal(0, 0.5, 40), rng.normal(0, 4.0, 40)])
    a = pelt_changepoints(x, "variance")
    b = pelt_changepoints(x + 123.4, "variance")
    assert a.boundaries == b.boundaries


def test_mean_kind_scale_invariant():
    rng = np.random.default_rng(4)
    x = np.concatenate([rng.normal(0, 1, 35), rng.normal(6, 1, 45)])
    a = pelt_changepoints(x, "mean")
    b = pelt_changepoints(x * 7.5, "mean")
    assert a.boundaries == b.boundaries


def test_segments_from_boundaries():
    assert segments_from_boundaries([20], 40) == [(0, 20), (20, 40)]
    assert segments_from_boundaries([], 10) == [(0, 10)]
    assert segments_from_boundaries([3, 7], 10) == [(0, 3), (3, 7), (7, 10)]

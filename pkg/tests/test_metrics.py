from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinetic_mc.core import ModelId
from kinetic_mc.metrics import (
    MetricError,
    empirical_moment,
    epsilon_rate,
    metric_report,
    rate_exponent,
    w1_auto,
    w1_empirical_1d,
    w1_exact_1d,
    w1_exact_matching,
    w1_sliced,
)
from kinetic_mc.streams import derive_stream


def brute_force_w1(x, y):
    """Minimum over all permutations of the mean Euclidean transport cost."""
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    best = math.inf
    for perm in itertools.permutations(range(len(x))):
        best = min(best, float(np.mean(np.linalg.norm(x - y[list(perm)], axis=1))))
    return best


def test_exact_1d_examples():
    assert w1_exact_1d([0, 1], [0, 1]) == 0.0
    assert w1_exact_1d([0], [1]) == 1.0
    assert w1_exact_1d([0, 2], [1, 3]) == 1.0


def test_exact_1d_errors():
    with pytest.raises(MetricError):
        w1_exact_1d([0, 1], [0])
    with pytest.raises(MetricError):
        w1_exact_1d([np.nan], [0])


def test_unequal_sizes_1d():
    assert w1_empirical_1d([0.0, 0.0], [1.0]) == pytest.approx(1.0)
    assert w1_empirical_1d([0.0, 1.0], [0.0, 0.0, 1.0, 1.0]) == pytest.approx(0.0)


def test_matching_examples():
    assert w1_exact_matching([[0.0, 0.0]], [[3.0, 4.0]]) == 5.0
    x = np.random.default_rng(1).normal(size=(50, 2))
    assert w1_exact_matching(x, x) == 0.0
    pts = np.random.default_rng(2).integers(-5, 6, size=(2, 3, 2)).astype(float)
    assert w1_exact_matching(pts[0], pts[1]) == pytest.approx(brute_force_w1(pts[0], pts[1]), abs=1e-12)


def test_matching_size_limit():
    x = np.zeros((513, 2))
    with pytest.raises(MetricError, match="sliced"):
        w1_exact_matching(x, x)


def test_matching_consistent_with_1d():
    s = derive_stream(4, 0, 0)
    for k in range(200):
        n = 1 + k % 64
        x, y = s.normal(n), s.normal(n)
        assert abs(w1_exact_matching(x, y) - w1_exact_1d(x, y)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=7).flatmap(
    lambda xs: st.tuples(st.just(xs), st.lists(st.floats(-100, 100), min_size=len(xs), max_size=len(xs)))
))
def test_exact_1d_matches_permutations(pair):
    x, y = pair
    assert abs(w1_exact_1d(x, y) - brute_force_w1(x, y)) <= 1e-12


def test_sliced_identical_is_zero():
    x = np.random.default_rng(3).normal(size=(40, 3))
    assert w1_sliced(x, x, 50, derive_stream(1, 0, 0)) == 0.0


def test_sliced_translation():
    x = np.random.default_rng(5).normal(size=(200, 3))
    c = 2.0
    est = w1_sliced(x, x + [c, 0.0, 0.0], 2000, derive_stream(2, 0, 0))
    assert abs(est - c / 2) <= 0.05 * c / 2


def test_sliced_lower_bound():
    s = derive_stream(6, 0, 0)
    for n in (4, 16, 64):
        x, y = s.normal(3 * n).reshape(n, 3), s.normal(3 * n).reshape(n, 3)
        assert w1_sliced(x, y, 100, s) <= w1_exact_matching(x, y) + 1e-12


def test_auto_tags():
    s = derive_stream(7, 0, 0)
    assert w1_auto([0.0, 1.0], [1.0, 2.0]).estimator == "Exact1D"
    w = w1_auto(np.zeros((5, 2)), np.ones((5, 2)), s, n_slices=10)
    assert w.estimator == "Sliced(10)"
    with pytest.raises(MetricError):
        w1_auto(np.zeros((5, 2)), np.ones((5, 2)))


def test_empirical_moment_examples():
    assert empirical_moment(np.zeros(5), 2) == 0.0
    assert empirical_moment([1.0, -1.0], 2) == 1.0
    assert empirical_moment([0.0, 2.0], 3) == pytest.approx(4 ** (1 / 3))
    assert math.isfinite(empirical_moment([1e200, -1e200], 4))
    with pytest.raises(MetricError):
        empirical_moment([1.0], 0.5)


def test_epsilon_rate_examples():
    assert epsilon_rate(10_000, 1, 3) == pytest.approx(0.01)
    assert epsilon_rate(1000, 3, 2) == pytest.approx(0.1)
    assert epsilon_rate(100, 2, 3) == pytest.approx(math.log(101) / 10)
    with pytest.raises(MetricError, match="q > 2"):
        epsilon_rate(100, 1, 2)
    with pytest.raises(MetricError, match="d/\\(d-1\\)"):
        epsilon_rate(100, 3, 1.5)
    assert rate_exponent(1) == -0.5 and rate_exponent(4) == -0.25


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_w1_axioms(seed, n):
    s = derive_stream(seed, 0, 0)
    x, y, z = s.normal(n), s.normal(n), s.normal(n)
    assert w1_exact_1d(x, y) == w1_exact_1d(y, x)
    assert w1_exact_1d(x, x) == 0.0
    assert w1_exact_1d(x, y) <= w1_exact_1d(x, z) + w1_exact_1d(z, y) + 1e-12
    X, Y, Z = (s.normal(2 * n).reshape(n, 2) for _ in range(3))
    assert w1_exact_matching(X, Y) <= w1_exact_matching(X, Z) + w1_exact_matching(Z, Y) + 1e-10


def test_metric_report_drift():
    x0 = np.array([[1.0], [-1.0]])
    first = metric_report(x0, 0, model=ModelId.KAC)
    later = metric_report(2 * x0, 1, initial=first, model=ModelId.KAC, reference=x0)
    assert later.conserved_drift == {"energy": 3.0}
    assert later.w1_to_reference.value == 1.0
    assert later.as_dict()["w1_to_reference"]["estimator"] == "Exact1D"

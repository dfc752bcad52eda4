"""Deterministic splittable RNG: reproducibility and statistical sanity."""

import numpy as np
import pytest

from diffbench.rng import RngStream


def test_same_seed_same_stream_reproduces():
    a = RngStream(123, 7)
    b = RngStream(123, 7)
    assert np.array_equal(a.next_u64(100), b.next_u64(100))
    assert np.array_equal(a.uniform(100), b.uniform(100))
    assert np.array_equal(a.normal(100), b.normal(100))


def test_different_streams_differ():
    a = RngStream(123, 7).next_u64(100)
    b = RngStream(123, 8).next_u64(100)
    c = RngStream(124, 7).next_u64(100)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_draws_independent_of_chunking():
    whole = RngStream(5, 1).next_u64(64)
    r = RngStream(5, 1)
    parts = np.concatenate([r.next_u64(10), r.next_u64(30), r.next_u64(24)])
    assert np.array_equal(whole, parts)


def test_uniform_in_half_open_unit_interval():
    u = RngStream(9, 0).uniform(100_000)
    assert u.min() > 0.0 and u.max() <= 1.0
    assert abs(u.mean() - 0.5) < 0.01


def test_normal_moments():
    z = RngStream(11, 3).normal(100_000)
    assert abs(z.mean()) < 0.02
    assert abs(z.var() - 1.0) < 0.02


def test_integers_bounds_and_coverage():
    v = RngStream(2, 2).integers(50_000, -3, 4)
    assert v.min() == -3 and v.max() == 3
    counts = np.bincount(v + 3, minlength=7)
    assert counts.min() > 50_000 / 7 * 0.9


def test_permutation_is_a_permutation():
    p = RngStream(4, 4).permutation(1000)
    assert np.array_equal(np.sort(p), np.arange(1000))


def test_poisson_moments():
    lam = np.full(50_000, 5.0)
    k = RngStream(8, 8).poisson(lam)
    assert abs(k.mean() - 5.0) < 0.1
    assert abs(k.var() - 5.0) < 0.25


def test_poisson_zero_rate_is_zero():
    assert np.all(RngStream(1, 1).poisson(np.zeros(100)) == 0)


def test_child_streams_deterministic_and_distinct():
    parent = RngStream(77, 1)
    again = RngStream(77, 1)
    assert np.array_equal(parent.child(9).next_u64(10),
                          again.child(9).next_u64(10))
    assert not np.array_equal(parent.child(9).next_u64(10),
                              parent.child(10).next_u64(10))
    assert not np.array_equal(RngStream(77, 1).child(9).next_u64(10),
                              RngStream(77, 1).next_u64(10))


def test_cross_stream_correlation_small():
    a = RngStream(3, 1).normal(50_000)
    b = RngStream(3, 2).normal(50_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


def test_integers_rejects_empty_range():
    with pytest.raises(ValueError):
        RngStream(0, 0).integers(1, 5, 5)

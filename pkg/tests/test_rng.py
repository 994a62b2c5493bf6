import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from summin.rng import Rng, fnv1a64, mix64

MASK = (1 << 64) - 1


def splitmix64_reference(seed, n):
    """Plain-integer SplitMix64, independent of the vectorised implementation."""
    out, s = [], seed
    for _ in range(n):
        s = (s + 0x9E3779B97F4A7C15) & MASK
        z = s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


def test_seed_zero_matches_published_first_output():
    assert int(Rng(0).next_u64(1)[0]) == 0xE220A8397B1DCDAF


@pytest.mark.parametrize("seed", [0, 1, 42, 2**63 + 5, MASK])
def test_stream_matches_reference(seed):
    got = [int(v) for v in Rng(seed).next_u64(6)]
    assert got == splitmix64_reference(seed, 6)


def test_chunked_draws_equal_one_batch():
    a = Rng(9)
    b = Rng(9)
    whole = b.next_u64(10)
    parts = np.concatenate([a.next_u64(3), a.next_u64(7)])
    assert np.array_equal(whole, parts)


def test_fnv1a64_known_vectors():
    assert fnv1a64("") == 0xCBF29CE484222325
    assert fnv1a64("a") == 0xAF63DC4C8601EC8C


def test_substream_does_not_depend_on_parent_draws():
    r = Rng(5)
    s1 = r.substream("data").uniform(4)
    r.uniform(100)
    s2 = r.substream("data").uniform(4)
    assert np.array_equal(s1, s2)
    assert not np.array_equal(s1, r.substream("labels").uniform(4))
    assert Rng(5).spawn(3).seed == mix64(5 ^ fnv1a64("child:3"))


def test_uniform_from_top_53_bits():
    r = Rng(11)
    words = Rng(11).next_u64(5)
    assert np.array_equal(r.uniform(5), (words >> np.uint64(11)).astype(float) * 2.0**-53)


def test_normal_pairs_are_atomic():
    three = Rng(3).normal(3)
    four = Rng(3).normal(4)
    assert np.array_equal(three, four[:3])
    r = Rng(3)
    r.normal(3)
    # the odd request consumed two full pairs
    assert np.array_equal(r.next_u64(1), Rng(3).next_u64(5)[4:])


def test_normal_box_muller_formula():
    u = Rng(21).uniform(2)
    rad = math.sqrt(-2 * math.log(1 - u[0]))
    z = Rng(21).normal(2)
    assert z[0] == pytest.approx(rad * math.cos(2 * math.pi * u[1]), abs=1e-15)
    assert z[1] == pytest.approx(rad * math.sin(2 * math.pi * u[1]), abs=1e-15)


def test_normal_moments():
    z = Rng(2024).normal(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1) < 0.01


def test_integers_and_permutation():
    r = Rng(8)
    ints = r.integers(7, 10_000)
    assert ints.min() >= 0 and ints.max() < 7
    p = Rng(8).permutation(50)
    assert sorted(p.tolist()) == list(range(50))
    c = Rng(8).choice_without_replacement(20, 20)
    assert sorted(c.tolist()) == list(range(20))


@given(st.lists(st.floats(0, 10), min_size=1, max_size=20), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_weighted_choice_never_picks_zero_weight(weights, seed):
    w = np.array(weights)
    if not w.sum() > 0:
        return
    i = Rng(seed).weighted_choice(w)
    assert 0 <= i < w.size and w[i] > 0


def test_weighted_choice_frequencies():
    w = np.array([0.0, 1.0, 3.0])
    r = Rng(77)
    picks = np.array([r.weighted_choice(w) for _ in range(8000)])
    assert not np.any(picks == 0)
    frac = np.mean(picks == 2)
    assert abs(frac - 0.75) < 3 * math.sqrt(0.75 * 0.25 / 8000)

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from makekex.matrix import MatrixZp, mat_pow, mat_random
from makekex.semidirect import SemidirectElement, naive_transcript, sd_mul, sd_pow

P = 997


def element(rng, dim=3, p=P, pair=None):
    left, right = pair or (mat_random(dim, p, rng), mat_random(dim, p, rng))
    return SemidirectElement(mat_random(dim, p, rng), left, right)


def test_square_matches_worked_example():
    p = 7
    M = MatrixZp.from_rows([[1, 2], [3, 4]], p)
    H1 = MatrixZp.from_rows([[0, 0], [0, 2]], p)
    H2 = MatrixZp.from_rows([[0, 0], [0, 3]], p)
    # H1 M = [[0,0],[6,1]]; (H1 M) H2 = [[0,0],[0,3]]; + M = [[1,2],[3,0]]
    sq = sd_pow(SemidirectElement(M, H1, H2), 2)
    assert sq.additive == MatrixZp.from_rows([[1, 2], [3, 0]], p)
    assert sq.pair_left == H1 @ H1 and sq.pair_right == H2 @ H2


def test_low_powers_have_stated_expansion(rng):
    g = element(rng)
    M, H1, H2 = g.additive, g.pair_left, g.pair_right
    assert sd_pow(g, 2).additive == H1 @ M @ H2 + M
    assert sd_pow(g, 3).additive == H1 @ H1 @ M @ H2 @ H2 + H1 @ M @ H2 + M
    assert sd_pow(g, 3).pair_left == H1 @ H1 @ H1


def test_pow_small_cases(rng):
    g = element(rng)
    assert sd_pow(g, 1) == g
    assert sd_pow(g, 2) == sd_mul(g, g)
    with pytest.raises(ValueError):
        sd_pow(g, 0)


def test_naive_transcript_examples(rng):
    M = mat_random(3, P, rng)
    H = mat_random(3, P, rng)
    assert naive_transcript(M, H, H, 1) == M
    eye, zero = MatrixZp.identity(3, P), MatrixZp.zero(3, P)
    assert naive_transcript(M, eye, eye, 17) == M.scale(17)
    assert naive_transcript(M, zero, zero, 9) == M
    with pytest.raises(ValueError):
        naive_transcript(M, H, H, 0)


def test_pow_matches_naive_up_to_64(rng):
    for dim in (2, 3):
        g = element(rng, dim)
        for m in range(1, 65):
            assert sd_pow(g, m).additive == naive_transcript(g.additive, g.pair_left, g.pair_right, m)


def test_pow_matches_naive_up_to_4096():
    rng = random.Random(11)
    g = element(rng, 2)
    M, H1, H2 = g.additive, g.pair_left, g.pair_right
    # walk the naive sum once, compare at every exponent
    total, left, right = MatrixZp.zero(2, P), MatrixZp.identity(2, P), MatrixZp.identity(2, P)
    for m in range(1, 1 << 12 | 1):
        total = total + left @ M @ right
        left, right = left @ H1, right @ H2
        if m % 97 == 0 or m < 40 or m == 1 << 12:
            assert sd_pow(g, m).additive == total


@settings(max_examples=100)
@given(st.integers(0, 2**32))
def test_associativity(seed):
    rng = random.Random(seed)
    dim = rng.choice([2, 3])
    gen = (mat_random(dim, P, rng), mat_random(dim, P, rng))
    a, b, c = (element(rng, dim, pair=(mat_pow(gen[0], k), mat_pow(gen[1], k))) for k in rng.sample(range(1, 50), 3))
    assert sd_mul(sd_mul(a, b), c) == sd_mul(a, sd_mul(b, c))


@settings(max_examples=60)
@given(st.integers(1, 2000), st.integers(1, 2000), st.integers(0, 2**32))
def test_power_addition(a, b, seed):
    g = element(random.Random(seed), 3)
    assert sd_pow(g, a + b) == sd_mul(sd_pow(g, a), sd_pow(g, b)) == sd_mul(sd_pow(g, b), sd_pow(g, a))


def test_pair_component_is_matrix_power(rng):
    g = element(rng)
    for e in (1, 2, 7, 100, 12345):
        u = sd_pow(g, e)
        assert u.pair_left == mat_pow(g.pair_left, e)
        assert u.pair_right == mat_pow(g.pair_right, e)


def test_doubling_recurrence(rng):
    g = element(rng)
    for e in (1, 3, 50, 1001):
        u = sd_pow(g, e)
        assert sd_pow(g, 2 * e).additive == u.pair_left @ u.additive @ u.pair_right + u.additive


def test_component_mismatch():
    with pytest.raises(ValueError):
        SemidirectElement(MatrixZp.identity(2, 7), MatrixZp.identity(3, 7), MatrixZp.identity(2, 7))
    with pytest.raises(ValueError):
        SemidirectElement(MatrixZp.identity(2, 7), MatrixZp.identity(2, 11), MatrixZp.identity(2, 7))

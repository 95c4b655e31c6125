import random

import pytest

from makekex.attacks import (
    AttackInapplicable,
    brute_force_exponent,
    brute_force_oracle,
    build_dl_embedding,
    completing_square_offset,
    corner_entry,
    determinant_attack,
    determinant_identity_lhs,
    embedding_matrices,
    key_from_exponent,
    reduce_dlog_to_make,
    residue_branch,
    token_for,
)
from makekex.matrix import MatrixZp, mat_inv, mat_pow
from makekex.modmath import Residue, SafePrime, is_quadratic_residue, multiplicative_order
from makekex.paramgen import PublicParams, gen_adversarial_params, gen_public_params
from makekex.protocol import finalize, initiate
from makekex.semidirect import naive_transcript

SAFE = [11, 23, 47, 2027]


def test_brute_force_finds_small_exponents(small_params):
    assert brute_force_exponent(small_params, small_params.M, 10).recovered_exponent == 1
    a, b = initiate(small_params, 37), initiate(small_params, 501)
    out = brute_force_exponent(small_params, a.sent_token, 100, b.sent_token)
    assert out.recovered_exponent == 37 and out.work == 37
    assert out.recovered_key == finalize(a, b.sent_token).K == finalize(b, a.sent_token).K


def test_brute_force_not_found(small_params):
    out = brute_force_exponent(small_params, token_for(small_params, 200), 150)
    assert not out.success and out.work == 150
    with pytest.raises(ValueError):
        brute_force_exponent(small_params, small_params.M, 1 << 25)


def test_brute_force_recurrence_matches_naive(tiny_params_2x2):
    params = tiny_params_2x2
    A = params.M
    for k in range(1, 257):
        assert A == naive_transcript(params.M, params.H1, params.H2, k)
        A = params.H1 @ A @ params.H2 + params.M


def test_determinant_attack_inapplicable_on_compliant(rng):
    for _ in range(10):
        params = gen_public_params(16, 3, rng)
        with pytest.raises(AttackInapplicable):
            determinant_attack(params, token_for(params, rng.randrange(1, params.p - 1)))


def test_determinant_attack_needs_invertible_m(rng):
    params = gen_adversarial_params(16, 3, rng)
    singular = MatrixZp.from_rows([[1, 2, 3], [2, 4, 6], [0, 0, 1]], params.p)
    bad = type(params)(params.prime, 3, singular, params.H1, params.H2)
    with pytest.raises(AttackInapplicable):
        determinant_attack(bad, token_for(bad, 10))


def test_determinant_attack_recovers(rng):
    for _ in range(5):
        params = gen_adversarial_params(18, 3, rng)
        m = rng.randrange(1, params.p - 1)
        n = rng.randrange(1, params.p - 1)
        A, B = token_for(params, m), token_for(params, n)
        out = determinant_attack(params, A, B)
        assert out.recovered_exponent == m
        assert out.recovered_key == key_from_exponent(params, n, B, A)


def test_determinant_of_lhs_is_power_of_d(rng):
    params = gen_adversarial_params(16, 3, rng)
    p = params.p
    d = (params.H1 @ params.H2).det()
    for m in (1, 2, 55, 4000):
        lhs = determinant_identity_lhs(params, token_for(params, m))
        assert (lhs @ mat_inv(params.M)).det() == d**m
        # independent route: determinant of the matrix powers
        assert (mat_pow(params.H1, m) @ mat_pow(params.H2, m)).det().value == pow(d.value, m, p)


def test_determinant_identity_holds_on_compliant(small_params, rng):
    for _ in range(10):
        m = rng.randrange(1, small_params.q)
        lhs = determinant_identity_lhs(small_params, token_for(small_params, m))
        assert lhs == mat_pow(small_params.H1, m) @ small_params.M @ mat_pow(small_params.H2, m)


# Discrete-log embedding


def _literal_embedding(p, seed):
    rng = random.Random(seed)
    g = Residue(rng.randrange(2, p - 1), p)
    h11 = rng.randrange(2, p - 1)
    a22, a23, a33 = (rng.randrange(1, p) for _ in range(3))
    return g, h11, a22, a23, a33, embedding_matrices(g, h11, a22, a23, a33)


@pytest.mark.parametrize("p", SAFE)
def test_embedding_token_structure(p):
    g, h11, a22, a23, a33, (M, H) = _literal_embedding(p, p)
    for m in range(1, 51):
        A = naive_transcript(M, H, H, m)
        assert [A[0, 1], A[0, 2], A[1, 0], A[2, 0], A[2, 1]] == [0] * 5
        assert A[1, 1] == m * a22 % p
        assert A[1, 2] == a23
        assert A[2, 2] == a33


@pytest.mark.parametrize("p", SAFE)
def test_corner_closed_form_pinned(p):
    """The (1,1) entry is g * sum(h^(2i)), checked against brute force for m <= 50."""
    g, h11, *_, (M, H) = _literal_embedding(p, p)
    for m in range(1, 51):
        assert naive_transcript(M, H, H, m)[0, 0] == corner_entry(g, h11, m).value


def test_printed_exponent_forms_do_not_hold():
    # g^(m(m-1)) and g^((m-1)(m-2)) against brute-forced corners
    p = 2027
    g, h11, *_, (M, H) = _literal_embedding(p, p)
    summed, printed = [], []
    for m in range(1, 51):
        corner = naive_transcript(M, H, H, m)[0, 0]
        summed.append(corner == pow(g.value, m * (m - 1), p))
        printed.append(corner == pow(g.value, (m - 1) * (m - 2), p))
    assert not any(summed) and not any(printed)
    # at m = 1 the corner is g itself; both printed forms give g^0 = 1
    assert naive_transcript(M, H, H, 1)[0, 0] == g.value != 1


def test_completing_square_offset():
    # 4^-1 = 3 mod 11, so 9 * 3 = 27 = 5
    assert completing_square_offset(11) == Residue(5, 11)
    for p in SAFE:
        r = completing_square_offset(p)
        assert r * 4 == Residue(9, p)


@pytest.mark.parametrize("p", SAFE)
def test_residue_branch_dichotomy(p):
    r = completing_square_offset(p)
    for k in range(p):
        up, down = Residue(k, p) - r, r - Residue(k, p)
        assert is_quadratic_residue(up) or is_quadratic_residue(down)
        branch = residue_branch(k, p)
        assert is_quadratic_residue(up if branch == "k-r" else down)


@pytest.mark.parametrize("p", SAFE)
def test_forged_token_is_genuine(p):
    rng = random.Random(p)
    g = Residue(rng.randrange(2, p - 1), p)
    while g.value * g.value % p == 1:
        g = Residue(rng.randrange(2, p - 1), p)
    for m in range(1, 30):
        inst = build_dl_embedding(g, g ** (2 * m), rng, parity=0)
        real = naive_transcript(inst.params.M, inst.params.H1, inst.params.H2, m)
        assert inst.token == real
        inst = build_dl_embedding(g, g ** (2 * m - 1), rng, parity=1)
        assert inst.token == naive_transcript(inst.params.M, inst.params.H1, inst.params.H2, m)


def test_embedding_params_shape():
    g = Residue(5, 23)
    inst = build_dl_embedding(g, g**4, random.Random(0))
    assert inst.params.H1 == inst.params.H2 == MatrixZp.diagonal([5, 1, 0], 23)
    assert inst.params.M[0, 0] == 5
    assert inst.params.H1.det().value == 0


@pytest.mark.parametrize("p", SAFE)
def test_reduction_round_trip(p):
    rng = random.Random(p * 7)
    for _ in range(8):
        g = Residue(rng.randrange(2, p - 1), p)
        k = rng.randrange(0, p - 1)
        found = reduce_dlog_to_make(g, g**k, brute_force_oracle(), rng)
        order = multiplicative_order(g)
        assert found is not None
        assert found % order == k % order
        assert g**found == g**k


def test_reduction_degenerate_bases():
    p = 23
    assert reduce_dlog_to_make(Residue(1, p), Residue(1, p)) == 0
    assert reduce_dlog_to_make(Residue(p - 1, p), Residue(p - 1, p)) == 1
    assert reduce_dlog_to_make(Residue(p - 1, p), Residue(5, p)) is None


def test_reduction_with_failing_oracle():
    assert reduce_dlog_to_make(Residue(5, 23), Residue(7, 23), lambda params, token: None) is None


def test_reduction_rejects_out_of_group():
    # 4 is a square mod 23, 5 (a generator) is not in its span
    assert reduce_dlog_to_make(Residue(4, 23), Residue(5, 23), brute_force_oracle()) is None


def test_adversarial_prime_fixture():
    prime = SafePrime(2027, 1013)
    assert prime.check() == []


def test_determinant_attack_when_tokens_repeat_with_period_q():
    # every eigenvalue product is a non-trivial square mod 23, so tokens repeat with period q = 11
    p = 23
    H1, H2 = MatrixZp.diagonal([2, 3], p), MatrixZp.diagonal([4, 6], p)
    M = MatrixZp.from_rows([[1, 2], [3, 5]], p)
    params = PublicParams(SafePrime(23, 11), 2, M, H1, H2)
    assert token_for(params, 16) == token_for(params, 5)
    peer = token_for(params, 7)
    outcome = determinant_attack(params, token_for(params, 16), peer)
    assert outcome.recovered_exponent == 5
    assert outcome.recovered_key == key_from_exponent(params, 16, token_for(params, 16), peer)

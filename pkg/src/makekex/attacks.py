"""Attacks on the exchange and the discrete-log embedding.

Three tools live here:

* ``brute_force_exponent`` walks the token recurrence ``A_{k+1} = H1 A_k H2 + M``.
* ``determinant_attack`` breaks instances where det(H1 H2) != 0 by reducing
  exponent recovery to a discrete log of ``det(H1 H2)``.
* ``build_dl_embedding`` / ``reduce_dlog_to_make`` turn an exponent-recovery
  oracle for 3x3 instances into a discrete-log solver in Z_p.

The embedding uses ``M = [[g,0,0],[0,a22,a23],[0,0,a33]]`` and
``H1 = H2 = diag(h, 1, 0)``.  The (1,1) entry of the token for exponent m is
the *sum* ``g * (1 + h^2 + ... + h^(2(m-1)))`` (see ``corner_entry``); it is
not a power of g.  Taking ``h = g`` makes that sum a function of ``g^(2m)``
alone, so a forged token can be written down from ``g^k`` when k is even, and
from ``g^(k+1)`` when k is odd.  Every other token entry is independent of m
once ``a22 = 0``; with ``a22 != 0`` the (2,2) entry is ``m * a22`` and gives m
away directly.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .matrix import MatrixZp, mat_inv, mat_pow
from .modmath import Residue, SafePrime, discrete_log_bsgs, is_quadratic_residue, multiplicative_order
from .paramgen import PublicParams
from .protocol import SharedKey, generator
from .semidirect import sd_pow

BRUTE_FORCE_MAX = 1 << 24


class AttackInapplicable(ValueError):
    pass


@dataclass
class AttackOutcome:
    method: str
    recovered_exponent: int | None = None
    recovered_key: MatrixZp | None = None
    work: int = 0
    elapsed: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.recovered_exponent is not None

    def report(self) -> dict:
        out = {
            "method": self.method,
            "success": str(self.success).lower(),
            "recovered_exponent": "" if self.recovered_exponent is None else str(self.recovered_exponent),
            "work": str(self.work),
            "wall_time": f"{self.elapsed:.6f}",
        }
        if self.recovered_key is not None:
            out["recovered_key_digest"] = SharedKey(self.recovered_key).hex()
        out.update({k: str(v) for k, v in self.details.items()})
        return out


def token_for(params: PublicParams, m: int) -> MatrixZp:
    return sd_pow(generator(params), m).additive


def key_from_exponent(params: PublicParams, m: int, own_token: MatrixZp, other_token: MatrixZp) -> MatrixZp:
    """The shared key a party with exponent ``m`` and token ``own_token`` derives."""
    power = sd_pow(generator(params), m)
    return power.pair_left @ other_token @ power.pair_right + own_token


def brute_force_exponent(params: PublicParams, token: MatrixZp, bound: int, other_token: MatrixZp | None = None) -> AttackOutcome:
    """Least k <= bound whose token equals ``token``; one action per step."""
    if bound > BRUTE_FORCE_MAX:
        raise ValueError(f"bound {bound} is beyond desk scale ({BRUTE_FORCE_MAX})")
    start = time.perf_counter()
    M, H1, H2 = params.M, params.H1, params.H2
    outcome = AttackOutcome("brute")
    A = M
    for k in range(1, bound + 1):
        outcome.work = k
        if A == token:
            outcome.recovered_exponent = k
            if other_token is not None:
                outcome.recovered_key = key_from_exponent(params, k, token, other_token)
            break
        A = H1 @ A @ H2 + M
    outcome.elapsed = time.perf_counter() - start
    return outcome


def determinant_identity_lhs(params: PublicParams, token: MatrixZp) -> MatrixZp:
    """``H1 A H2 + M - A``, which equals ``H1^m M H2^m`` for a genuine token."""
    return params.H1 @ token @ params.H2 + params.M - token


def determinant_attack(params: PublicParams, token: MatrixZp, other_token: MatrixZp | None = None) -> AttackOutcome:
    """Recover m from det((H1 A H2 + M - A) M^-1) = det(H1 H2)^m.

    Raises AttackInapplicable when det(H1 H2) = 0 or M is singular.  The
    discrete log is found by baby-step giant-step, so p must be small.  Each
    candidate exponent is replayed against the token before it is reported.
    """
    start = time.perf_counter()
    p = params.p
    d = (params.H1 @ params.H2).det()
    if d.value == 0:
        raise AttackInapplicable("det(H1H2)=0")
    M_inv = mat_inv(params.M)
    if M_inv is None:
        raise AttackInapplicable("M_singular")
    lhs = determinant_identity_lhs(params, token)
    dm = (lhs @ M_inv).det()
    outcome = AttackOutcome("det", details={"d": d.value, "d_pow_m": dm.value})
    e0 = discrete_log_bsgs(d, dm, p - 1)
    if e0 is None:
        outcome.elapsed = time.perf_counter() - start
        return outcome
    # m is only known modulo ord(d); replay every lift below p - 1
    order = multiplicative_order(d)
    replays = 0
    for m in range(e0 if e0 else order, p - 1, order):
        replays += 1
        if token_for(params, m) != token:
            continue
        if lhs != mat_pow(params.H1, m) @ params.M @ mat_pow(params.H2, m):
            continue
        outcome.recovered_exponent = m
        if other_token is not None:
            outcome.recovered_key = key_from_exponent(params, m, token, other_token)
        break
    outcome.work = replays
    outcome.details["order_d"] = order
    outcome.elapsed = time.perf_counter() - start
    return outcome


# Discrete-log embedding ------------------------------------------------------


def embedding_matrices(g: Residue, h11: int, a22: int, a23: int, a33: int) -> tuple[MatrixZp, MatrixZp]:
    """``M`` and ``H = H1 = H2`` for the 3x3 embedding."""
    p = g.modulus
    M = MatrixZp.from_rows([[g.value, 0, 0], [0, a22, a23], [0, 0, a33]], p)
    H = MatrixZp.diagonal([h11, 1, 0], p)
    return M, H


def corner_entry(g: Residue, h11: int, m: int) -> Residue:
    """(1,1) entry of the embedding token: ``g * sum(h11^(2i), i < m)``.

    This is the closed form confirmed against brute-forced tokens.  It is an
    additive geometric sum, so in general it is not ``g`` raised to
    ``m(m-1)`` or to ``(m-1)(m-2)``.
    """
    p = g.modulus
    h2 = h11 * h11 % p
    if h2 == 1:
        return g * m
    return g * ((pow(h2, m, p) - 1) * pow(h2 - 1, -1, p))


def completing_square_offset(p: int) -> Residue:
    """``9 * 4^-1 mod p``: (m-1)(m-2) = (m - 3/2)^2 - offset."""
    return Residue(9 * pow(4, -1, p), p)


def residue_branch(k: int, p: int) -> str:
    """Which of ``k - r`` and ``r - k`` (r the offset above) is a square mod p."""
    r = completing_square_offset(p)
    return "k-r" if is_quadratic_residue(Residue(k, p) - r) else "r-k"


@dataclass(frozen=True)
class DLEmbedding:
    params: PublicParams
    token: MatrixZp
    parity: int  # 0: corner built from g^k, 1: from g^(k+1)


def _embedding_params(g: Residue, a23: int, a33: int) -> PublicParams:
    M, H = embedding_matrices(g, g.value, 0, a23, a33)
    return PublicParams(SafePrime.from_p(g.modulus), 3, M, H, H)


def build_dl_embedding(g: Residue, gk: Residue, rng=None, parity: int = 0) -> DLEmbedding:
    """Forge a 3x3 instance whose exponent m satisfies ``g^(2m) = g^(k + parity)``.

    The forged token is exact: it equals the real token for any such m.
    """
    p = g.modulus
    if p % 4 != 3:
        raise ValueError("p must be 3 mod 4")
    if (g.value * g.value) % p == 1:
        raise ValueError("g must have order > 2")
    rng = rng or random.SystemRandom()
    a23 = rng.randrange(1, p)
    a33 = rng.randrange(1, p)
    params = _embedding_params(g, a23, a33)
    target = gk * pow(g.value, parity, p)
    g2 = g * g
    corner = g * ((target - 1) * (g2 - 1).inverse())
    token = MatrixZp.from_rows([[corner.value, 0, 0], [0, 0, a23], [0, 0, a33]], p)
    return DLEmbedding(params, token, parity)


def brute_force_oracle(bound: int | None = None):
    """Exponent oracle backed by ``brute_force_exponent``."""

    def oracle(params: PublicParams, token: MatrixZp) -> int | None:
        return brute_force_exponent(params, token, bound or params.p).recovered_exponent

    return oracle


def reduce_dlog_to_make(g: Residue, gk: Residue, exponent_oracle=None, rng=None) -> int | None:
    """Solve ``g^k = gk`` with an exponent-recovery oracle for the exchange.

    Two embeddings are tried, one assuming k even and one assuming k odd;
    whichever the oracle solves yields ``k = 2m - parity``, checked against
    ``gk`` before it is returned.
    """
    p = g.modulus
    if g.value == 0 or gk.value == 0:
        return None
    if g.value * g.value % p == 1:
        # g = +-1: the answer is 0 or 1
        for k in (0, 1):
            if pow(g.value, k, p) == gk.value:
                return k
        return None
    exponent_oracle = exponent_oracle or brute_force_oracle()
    for parity in (0, 1):
        inst = build_dl_embedding(g, gk, rng, parity)
        m = exponent_oracle(inst.params, inst.token)
        if m is None:
            continue
        k = 2 * m - parity
        if pow(g.value, k, p) == gk.value:
            return k
    return None

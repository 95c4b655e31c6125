"""Semidirect product of additive matrices with a cyclic semigroup of matrix pairs.

An element is ``(X, (P, Q))``.  The pair ``(P, Q)`` acts on the additive part
by ``X -> P X Q``, which is an action because every pair that occurs is a
power of one fixed generator pair, so the pairs commute.
"""

from __future__ import annotations

from dataclasses import dataclass

from .matrix import MatrixZp, ShapeMismatch
from .modmath import ModulusMismatch


@dataclass(frozen=True, slots=True)
class SemidirectElement:
    additive: MatrixZp
    pair_left: MatrixZp
    pair_right: MatrixZp

    def __post_init__(self):
        a, l, r = self.additive, self.pair_left, self.pair_right
        if not (a.modulus == l.modulus == r.modulus):
            raise ModulusMismatch("components have different moduli")
        if not (a.dim == l.dim == r.dim):
            raise ShapeMismatch("components have different dimensions")

    def __mul__(self, other: SemidirectElement) -> SemidirectElement:
        return sd_mul(self, other)

    def __pow__(self, e: int) -> SemidirectElement:
        return sd_pow(self, e)

    def square(self) -> SemidirectElement:
        p, q = self.pair_left, self.pair_right
        return SemidirectElement(p @ self.additive @ q + self.additive, p @ p, q @ q)


def sd_mul(u: SemidirectElement, v: SemidirectElement) -> SemidirectElement:
    """``(X, (P, Q)) * (Y, (R, S)) = (R X S + Y, (P R, Q S))``."""
    return SemidirectElement(
        v.pair_left @ u.additive @ v.pair_right + v.additive,
        u.pair_left @ v.pair_left,
        u.pair_right @ v.pair_right,
    )


def sd_pow(base: SemidirectElement, e: int) -> SemidirectElement:
    """Left-to-right square-and-multiply.

    ``e = 0`` is rejected: when the generator pair is singular no identity
    element lies in the cyclic semigroup, so there is nothing to return.
    """
    if e < 1:
        raise ValueError("exponent must be >= 1")
    result = base
    for bit in bin(e)[3:]:
        result = result.square()
        if bit == "1":
            result = sd_mul(result, base)
    return result


def naive_transcript(M: MatrixZp, H1: MatrixZp, H2: MatrixZp, m: int) -> MatrixZp:
    """Sum of ``H1^i M H2^i`` for ``i = 0 .. m-1``, one term at a time.

    Reference oracle: O(m) matrix products, no shared structure with ``sd_pow``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    total = MatrixZp.zero(M.dim, M.modulus)
    left = MatrixZp.identity(M.dim, M.modulus)
    right = MatrixZp.identity(M.dim, M.modulus)
    for _ in range(m):
        total = total + left @ M @ right
        left = left @ H1
        right = right @ H2
    return total

"""Residue arithmetic mod p, primality, safe primes and small discrete logs."""

from __future__ import annotations

import math
import random
import struct
from dataclasses import dataclass

MR_ROUNDS = 40

_SMALL_PRIMES = [n for n in range(3, 2000, 2) if all(n % d for d in range(3, math.isqrt(n) + 1, 2))]


class NotInvertible(ArithmeticError):
    pass


class ModulusMismatch(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Residue:
    """An element of Z_p; ``value`` is always kept in ``[0, modulus)``."""

    value: int
    modulus: int

    def __post_init__(self):
        if self.modulus < 3 or self.modulus % 2 == 0:
            raise ValueError(f"modulus must be an odd integer >= 3, got {self.modulus}")
        if not 0 <= self.value < self.modulus:
            object.__setattr__(self, "value", self.value % self.modulus)

    def _other(self, other) -> int:
        if isinstance(other, Residue):
            if other.modulus != self.modulus:
                raise ModulusMismatch(f"{self.modulus} != {other.modulus}")
            return other.value
        if isinstance(other, int):
            return other
        return NotImplemented

    def __add__(self, other):
        v = self._other(other)
        if v is NotImplemented:
            return v
        return Residue((self.value + v) % self.modulus, self.modulus)

    __radd__ = __add__

    def __sub__(self, other):
        v = self._other(other)
        if v is NotImplemented:
            return v
        return Residue((self.value - v) % self.modulus, self.modulus)

    def __rsub__(self, other):
        v = self._other(other)
        if v is NotImplemented:
            return v
        return Residue((v - self.value) % self.modulus, self.modulus)

    def __mul__(self, other):
        v = self._other(other)
        if v is NotImplemented:
            return v
        return Residue(self.value * v % self.modulus, self.modulus)

    __rmul__ = __mul__

    def __neg__(self):
        return Residue(-self.value % self.modulus, self.modulus)

    def __pow__(self, e: int):
        return mod_pow(self, e)

    def __int__(self):
        return self.value

    def __bool__(self):
        return self.value != 0

    def inverse(self) -> Residue:
        return mod_inv(self)

    def __repr__(self):
        return f"Residue({self.value} mod {self.modulus})"


def mod_add(a: Residue, b: Residue) -> Residue:
    return a + b


def mod_sub(a: Residue, b: Residue) -> Residue:
    return a - b


def mod_mul(a: Residue, b: Residue) -> Residue:
    return a * b


def mod_neg(a: Residue) -> Residue:
    return -a


def mod_inv(a: Residue) -> Residue:
    if a.value == 0:
        raise NotInvertible(f"0 has no inverse mod {a.modulus}")
    return Residue(pow(a.value, -1, a.modulus), a.modulus)


def mod_pow(g: Residue, e: int) -> Residue:
    """Left-to-right binary exponentiation; ``e`` must be nonnegative."""
    if e < 0:
        raise ValueError("negative exponent")
    p = g.modulus
    result = 1
    base = g.value
    for bit in bin(e)[2:]:
        result = result * result % p
        if bit == "1":
            result = result * base % p
    return Residue(result, p)


def is_probable_prime(x: int, rounds: int = MR_ROUNDS, rng=None) -> bool:
    """Trial division by small primes followed by ``rounds`` Miller-Rabin rounds."""
    if x < 2:
        return False
    if x in (2, 3):
        return True
    if x % 2 == 0:
        return False
    for sp in _SMALL_PRIMES:
        if x == sp:
            return True
        if x % sp == 0:
            return False
    rng = rng or random.SystemRandom()
    d, s = x - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for _ in range(rounds):
        a = rng.randrange(2, x - 1)
        y = pow(a, d, x)
        if y in (1, x - 1):
            continue
        for _ in range(s - 1):
            y = y * y % x
            if y == x - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class SafePrime:
    p: int
    q: int

    def __post_init__(self):
        if self.p != 2 * self.q + 1:
            raise ValueError("p != 2q + 1")

    @classmethod
    def from_p(cls, p: int) -> SafePrime:
        return cls(p, (p - 1) // 2)

    @property
    def bit_length(self) -> int:
        return self.p.bit_length()

    def check(self, rounds: int = MR_ROUNDS) -> list[str]:
        """Return a list of failed conditions, empty if this is a valid safe prime."""
        problems = []
        if not is_probable_prime(self.q, rounds):
            problems.append("q not prime")
        if not is_probable_prime(self.p, rounds):
            problems.append("p not prime")
        if self.p % 4 != 3:
            problems.append("prime not 4n+3")
        return problems


def _survives_sieve(q: int) -> bool:
    # q and 2q+1 both free of small factors
    for sp in _SMALL_PRIMES:
        if sp >= q:
            break
        r = q % sp
        if r == 0 or (2 * r + 1) % sp == 0:
            return False
    return True


def gen_safe_prime(bits: int, rng=None) -> SafePrime:
    """Sample q with bits-1 bits until both q and 2q+1 are prime."""
    if bits < 4:
        raise ValueError("bits must be >= 4")
    rng = rng or random.SystemRandom()
    while True:
        q = rng.getrandbits(bits - 1) | (1 << (bits - 2)) | 1
        if not _survives_sieve(q):
            continue
        if is_probable_prime(q, MR_ROUNDS, rng) and is_probable_prime(2 * q + 1, MR_ROUNDS, rng):
            return SafePrime(2 * q + 1, q)


def is_quadratic_residue(a: Residue) -> bool:
    """Euler's criterion. Zero counts as a residue (0 = 0^2)."""
    if a.value == 0:
        return True
    return pow(a.value, (a.modulus - 1) // 2, a.modulus) == 1


def sqrt_mod(a: Residue) -> Residue:
    """Square root for p = 3 mod 4 only."""
    p = a.modulus
    if p % 4 != 3:
        raise ValueError("only p = 3 mod 4 is supported")
    r = Residue(pow(a.value, (p + 1) // 4, p), p)
    if r * r != a:
        raise ValueError(f"{a.value} is not a square mod {p}")
    return r


def discrete_log_bsgs(g: Residue, h: Residue, bound: int) -> int | None:
    """Least ``e < bound`` with ``g**e == h``, or None.

    Memory is one dict entry per baby step, ceil(sqrt(bound)) of them.
    """
    if g.modulus != h.modulus:
        raise ModulusMismatch(f"{g.modulus} != {h.modulus}")
    p = g.modulus
    if bound <= 0 or g.value == 0 or h.value == 0:
        return None
    step = math.isqrt(bound - 1) + 1
    table: dict[int, int] = {}
    cur = 1
    for j in range(step):
        table.setdefault(cur, j)
        cur = cur * g.value % p
    giant = pow(g.value, -step, p)
    gamma = h.value
    for i in range(step):
        j = table.get(gamma)
        if j is not None:
            e = i * step + j
            return e if e < bound else None
        gamma = gamma * giant % p
    return None


def _factor_small(n: int) -> dict[int, int]:
    factors: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            factors[d] = factors.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        factors[n] = factors.get(n, 0) + 1
    return factors


def multiplicative_order(a: Residue, group_order: int | None = None, factors: dict[int, int] | None = None) -> int:
    """Order of a nonzero residue.

    ``group_order`` defaults to p - 1; its factorization is found by trial
    division unless given, so callers with large p must pass ``factors``.
    """
    if a.value == 0:
        raise NotInvertible("0 has no multiplicative order")
    p = a.modulus
    n = group_order or p - 1
    factors = factors or _factor_small(n)
    order = n
    for f in factors:
        while order % f == 0 and pow(a.value, order // f, p) == 1:
            order //= f
    return order


def encode_int(x: int) -> bytes:
    """Minimal big-endian bytes with a 4-byte big-endian length prefix."""
    if x < 0:
        raise ValueError("only nonnegative integers are serialized")
    body = x.to_bytes((x.bit_length() + 7) // 8, "big")
    return struct.pack(">I", len(body)) + body


def decode_int(buf: bytes, offset: int = 0) -> tuple[int, int]:
    """Parse one length-prefixed integer; returns ``(value, new_offset)``."""
    if len(buf) < offset + 4:
        raise ValueError("truncated integer length")
    (n,) = struct.unpack_from(">I", buf, offset)
    offset += 4
    if len(buf) < offset + n:
        raise ValueError("truncated integer body")
    body = buf[offset : offset + n]
    if n and body[0] == 0:
        raise ValueError("non-minimal integer encoding")
    return int.from_bytes(body, "big"), offset + n

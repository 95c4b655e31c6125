"""Public parameter and private exponent sampling."""

from __future__ import annotations

import functools
import random
import textwrap
from dataclasses import dataclass, field

from .matrix import MatrixZp, decode_matrix, mat_inv, mat_random
from .modmath import MR_ROUNDS, SafePrime, decode_int, encode_int, gen_safe_prime, is_probable_prime

MAGIC = b"MAKE"
VERSION = 1
MAX_RETRIES = 1000

# 2000-bit safe prime used for the published timings.
BUILTIN_PRIME_2000 = int(
    "1004585054688850036334185776562243339025531704844369832736073099638458477395071158608659"
    "6475323993902797233883470790394194018831434867898180891041375430671896508726694442987824"
    "1410578991733762502442817585765598816431431108282071433256273345939973526837788093199292"
    "5577212045905540615043591215742223683070489198090104899809610177067292220347910171309250"
    "7042689334981405714581299534099154890607833310495144061448203735644386469996712429901203"
    "4397810342312642333550598174454039699165710636052240583294703998189114479917657125270697"
    "086234200442489544474659560583354052797579309573507121265302226528942789519"
)


class ParameterError(RuntimeError):
    pass


def builtin_prime() -> SafePrime:
    return SafePrime.from_p(BUILTIN_PRIME_2000)


@dataclass(frozen=True)
class PublicParams:
    prime: SafePrime
    dim: int
    M: MatrixZp
    H1: MatrixZp
    H2: MatrixZp
    # (S, D) pairs with H = S^-1 D S, kept only when this process built H
    witnesses: tuple = field(default=(), compare=False, repr=False)

    @property
    def p(self) -> int:
        return self.prime.p

    @property
    def q(self) -> int:
        return self.prime.q

    def to_bytes(self) -> bytes:
        return (
            MAGIC
            + bytes([VERSION, self.dim])
            + encode_int(self.p)
            + self.M.to_bytes()
            + self.H1.to_bytes()
            + self.H2.to_bytes()
        )

    @classmethod
    def from_bytes(cls, buf: bytes) -> PublicParams:
        params, offset = decode_params(buf)
        if offset != len(buf):
            raise ValueError("trailing bytes after parameters")
        return params

    def to_hex(self) -> str:
        return "\n".join(textwrap.wrap(self.to_bytes().hex(), 64)) + "\n"

    @classmethod
    def from_hex(cls, text: str) -> PublicParams:
        return cls.from_bytes(bytes.fromhex("".join(text.split())))


def decode_params(buf: bytes, offset: int = 0) -> tuple[PublicParams, int]:
    if buf[offset : offset + 4] != MAGIC:
        raise ValueError("bad magic")
    if len(buf) < offset + 6:
        raise ValueError("truncated parameters header")
    version, dim = buf[offset + 4], buf[offset + 5]
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    p, offset = decode_int(buf, offset + 6)
    if p < 5 or p % 2 == 0:
        raise ValueError("invalid prime")
    mats = []
    for _ in range(3):
        m, offset = decode_matrix(buf, p, offset)
        if m.dim != dim:
            raise ValueError("matrix dimension disagrees with header")
        mats.append(m)
    return PublicParams(SafePrime.from_p(p), dim, *mats), offset


def load_params(data: bytes) -> PublicParams:
    """Accept either the binary format or its hex text rendering."""
    if data.startswith(MAGIC):
        return PublicParams.from_bytes(data)
    return PublicParams.from_hex(data.decode("ascii"))


def _nonzero_diagonal_entry(p: int, rng) -> int:
    # excludes 0, 1 and p-1: orders 1 and 2
    return rng.randrange(2, p - 1)


def _random_invertible(dim: int, p: int, rng) -> tuple[MatrixZp, MatrixZp]:
    for _ in range(MAX_RETRIES):
        S = mat_random(dim, p, rng)
        S_inv = mat_inv(S)
        if S_inv is not None:
            return S, S_inv
    raise ParameterError("no invertible matrix found")


def build_singular_conjugate(prime: SafePrime, dim: int, rng) -> tuple[MatrixZp, tuple[MatrixZp, MatrixZp]]:
    """Return ``H = S^-1 D S`` and the witness ``(S, D)``.

    D is diagonal with a zero in the top-left corner and entries of order > 2
    elsewhere, so det(H) = 0 and rank(H) = dim - 1.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    p = prime.p
    diag = [0] + [_nonzero_diagonal_entry(p, rng) for _ in range(dim - 1)]
    D = MatrixZp.diagonal(diag, p)
    S, S_inv = _random_invertible(dim, p, rng)
    return S_inv @ D @ S, (S, D)


def build_invertible_conjugate(prime: SafePrime, dim: int, rng) -> tuple[MatrixZp, tuple[MatrixZp, MatrixZp]]:
    """Like ``build_singular_conjugate`` but with no zero on the diagonal.

    Only for producing deliberately weak instances for the determinant attack.
    """
    p = prime.p
    D = MatrixZp.diagonal([_nonzero_diagonal_entry(p, rng) for _ in range(dim)], p)
    S, S_inv = _random_invertible(dim, p, rng)
    return S_inv @ D @ S, (S, D)


def _pick_m(p: int, dim: int, H1: MatrixZp, H2: MatrixZp, rng, need_invertible: bool) -> MatrixZp:
    for _ in range(MAX_RETRIES):
        M = mat_random(dim, p, rng)
        if M.commutes_with(H1) or M.commutes_with(H2):
            continue
        if need_invertible and mat_inv(M) is None:
            continue
        return M
    raise ParameterError(f"no non-commuting M after {MAX_RETRIES} tries")


def gen_public_params(bits: int | None = None, dim: int = 3, rng=None, prime: SafePrime | None = None) -> PublicParams:
    """Sample ``(p, M, H1, H2)``; pass ``prime`` to skip prime generation."""
    rng = rng or random.SystemRandom()
    if prime is None:
        if bits is None:
            raise ValueError("either bits or prime is required")
        prime = gen_safe_prime(bits, rng)
    H1, w1 = build_singular_conjugate(prime, dim, rng)
    H2, w2 = build_singular_conjugate(prime, dim, rng)
    M = _pick_m(prime.p, dim, H1, H2, rng, need_invertible=False)
    return PublicParams(prime, dim, M, H1, H2, (w1, w2))


def gen_adversarial_params(bits: int | None = None, dim: int = 3, rng=None, prime: SafePrime | None = None) -> PublicParams:
    """Parameters with invertible H1, H2 and M, the setting the determinant attack breaks.

    det(H1 H2) is resampled until it generates Z_p^*, so an exponent below
    p - 1 is pinned down by its determinant alone.  With a smaller order some
    instances have tokens that repeat with period q, and then m and m - q are
    indistinguishable from public data.
    """
    rng = rng or random.SystemRandom()
    if prime is None:
        prime = gen_safe_prime(bits, rng)
    p = prime.p
    for _ in range(MAX_RETRIES):
        H1, w1 = build_invertible_conjugate(prime, dim, rng)
        H2, w2 = build_invertible_conjugate(prime, dim, rng)
        d = (H1 @ H2).det().value
        # for a safe prime, d generates iff it is a non-residue other than -1
        if d != p - 1 and pow(d, prime.q, p) == p - 1:
            break
    else:
        raise ParameterError("could not find det(H1 H2) generating Z_p^*")
    M = _pick_m(p, dim, H1, H2, rng, need_invertible=True)
    return PublicParams(prime, dim, M, H1, H2, (w1, w2))


@functools.lru_cache(maxsize=64)
def _prime_problems(p: int, rounds: int) -> tuple[str, ...]:
    problems = []
    if not is_probable_prime((p - 1) // 2, rounds):
        problems.append("q not prime")
    if not is_probable_prime(p, rounds):
        problems.append("p not prime")
    if p % 4 != 3:
        problems.append("prime not 4n+3")
    return tuple(problems)


def validate_params(params: PublicParams, rounds: int = MR_ROUNDS) -> list[str]:
    """List every violated condition; empty means the parameters are usable."""
    p = params.p
    problems = list(_prime_problems(p, rounds))
    for name, m in (("M", params.M), ("H1", params.H1), ("H2", params.H2)):
        if m.dim != params.dim or m.modulus != p:
            problems.append(f"{name} has wrong shape or modulus")
    if problems and any("shape" in s for s in problems):
        return problems
    if params.H1.det().value != 0:
        problems.append("det(H1) != 0")
    if params.H2.det().value != 0:
        problems.append("det(H2) != 0")
    if params.M.commutes_with(params.H1):
        problems.append("M commutes with H1")
    if params.M.commutes_with(params.H2):
        problems.append("M commutes with H2")
    return problems


@dataclass(frozen=True)
class PrivateExponent:
    value: int

    def __post_init__(self):
        if self.value < 1:
            raise ValueError("private exponent must be positive")

    def __int__(self):
        return self.value


def gen_private_exponent(q: int, rng=None) -> PrivateExponent:
    """Uniform over integers with exactly the bit length of q."""
    if q < 2:
        raise ValueError("q must be >= 2")
    rng = rng or random.SystemRandom()
    L = q.bit_length()
    return PrivateExponent(rng.randrange(1 << (L - 1), 1 << L))


def params_for_prime(p: int) -> SafePrime:
    prime = SafePrime.from_p(p)
    if prime.check():
        raise ParameterError(f"{p} is not a safe prime")
    return prime


__all__ = [
    "BUILTIN_PRIME_2000",
    "ParameterError",
    "PrivateExponent",
    "PublicParams",
    "build_invertible_conjugate",
    "build_singular_conjugate",
    "builtin_prime",
    "decode_params",
    "gen_adversarial_params",
    "gen_private_exponent",
    "gen_public_params",
    "load_params",
    "params_for_prime",
    "validate_params",
]

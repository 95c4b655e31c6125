"""Dense n x n matrices over Z_p.

Entries are stored row-major as plain ints in ``[0, p)``; the modulus lives on
the matrix, so every entry is a residue mod that p.  Products reduce each
output entry once (lazy reduction), which is what keeps 2000-bit moduli usable.
"""

from __future__ import annotations

import contextlib
import struct
from dataclasses import dataclass

from .modmath import ModulusMismatch, Residue, decode_int, encode_int


class ShapeMismatch(ValueError):
    pass


class _MulCounter:
    """Tally of Z_p multiplications done by matrix products while active."""

    def __init__(self):
        self.active = False
        self.count = 0


_counter = _MulCounter()


@contextlib.contextmanager
def count_multiplications():
    """Count scalar multiplications inside matrix products in this block.

    Yields the counter; read ``.count`` after the block.  Not thread-safe.
    """
    saved = (_counter.active, _counter.count)
    _counter.active, _counter.count = True, 0
    try:
        yield _counter
    finally:
        _counter.active = saved[0]
        if saved[0]:
            _counter.count += saved[1]


def _mul2(a, b, p):
    a0, a1, a2, a3 = a
    b0, b1, b2, b3 = b
    return (
        (a0 * b0 + a1 * b2) % p,
        (a0 * b1 + a1 * b3) % p,
        (a2 * b0 + a3 * b2) % p,
        (a2 * b1 + a3 * b3) % p,
    )


def _mul3(a, b, p):
    a0, a1, a2, a3, a4, a5, a6, a7, a8 = a
    b0, b1, b2, b3, b4, b5, b6, b7, b8 = b
    return (
        (a0 * b0 + a1 * b3 + a2 * b6) % p,
        (a0 * b1 + a1 * b4 + a2 * b7) % p,
        (a0 * b2 + a1 * b5 + a2 * b8) % p,
        (a3 * b0 + a4 * b3 + a5 * b6) % p,
        (a3 * b1 + a4 * b4 + a5 * b7) % p,
        (a3 * b2 + a4 * b5 + a5 * b8) % p,
        (a6 * b0 + a7 * b3 + a8 * b6) % p,
        (a6 * b1 + a7 * b4 + a8 * b7) % p,
        (a6 * b2 + a7 * b5 + a8 * b8) % p,
    )


def _muln(a, b, p, n):
    rows = [a[i * n : (i + 1) * n] for i in range(n)]
    cols = [b[j::n] for j in range(n)]
    return tuple(sum(x * y for x, y in zip(r, c)) % p for r in rows for c in cols)


@dataclass(frozen=True, slots=True)
class MatrixZp:
    dim: int
    modulus: int
    entries: tuple

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if len(self.entries) != self.dim * self.dim:
            raise ShapeMismatch(f"expected {self.dim * self.dim} entries, got {len(self.entries)}")
        p = self.modulus
        if not all(0 <= x < p for x in self.entries):
            object.__setattr__(self, "entries", tuple(int(x) % p for x in self.entries))

    @classmethod
    def from_rows(cls, rows, modulus: int) -> MatrixZp:
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ShapeMismatch("rows must form a square matrix")
        return cls(n, modulus, tuple(int(x) % modulus for r in rows for x in r))

    @classmethod
    def identity(cls, dim: int, modulus: int) -> MatrixZp:
        return cls(dim, modulus, tuple(int(i == j) for i in range(dim) for j in range(dim)))

    @classmethod
    def zero(cls, dim: int, modulus: int) -> MatrixZp:
        return cls(dim, modulus, (0,) * (dim * dim))

    @classmethod
    def diagonal(cls, diag, modulus: int) -> MatrixZp:
        n = len(diag)
        return cls(n, modulus, tuple(int(diag[i]) % modulus if i == j else 0 for i in range(n) for j in range(n)))

    def __getitem__(self, ij) -> int:
        i, j = ij
        return self.entries[i * self.dim + j]

    def entry(self, i: int, j: int) -> Residue:
        return Residue(self[i, j], self.modulus)

    def rows(self) -> list[list[int]]:
        n = self.dim
        return [list(self.entries[i * n : (i + 1) * n]) for i in range(n)]

    def _check(self, other: MatrixZp):
        if other.modulus != self.modulus:
            raise ModulusMismatch(f"{self.modulus} != {other.modulus}")
        if other.dim != self.dim:
            raise ShapeMismatch(f"{self.dim}x{self.dim} vs {other.dim}x{other.dim}")

    def __add__(self, other: MatrixZp) -> MatrixZp:
        self._check(other)
        p = self.modulus
        return MatrixZp(self.dim, p, tuple((x + y) % p for x, y in zip(self.entries, other.entries)))

    def __sub__(self, other: MatrixZp) -> MatrixZp:
        self._check(other)
        p = self.modulus
        return MatrixZp(self.dim, p, tuple((x - y) % p for x, y in zip(self.entries, other.entries)))

    def __neg__(self) -> MatrixZp:
        p = self.modulus
        return MatrixZp(self.dim, p, tuple(-x % p for x in self.entries))

    def __matmul__(self, other: MatrixZp) -> MatrixZp:
        self._check(other)
        n, p = self.dim, self.modulus
        if _counter.active:
            _counter.count += n * n * n
        if n == 3:
            out = _mul3(self.entries, other.entries, p)
        elif n == 2:
            out = _mul2(self.entries, other.entries, p)
        else:
            out = _muln(self.entries, other.entries, p, n)
        return MatrixZp(n, p, out)

    def scale(self, c) -> MatrixZp:
        if isinstance(c, Residue):
            if c.modulus != self.modulus:
                raise ModulusMismatch(f"{self.modulus} != {c.modulus}")
            c = c.value
        p = self.modulus
        return MatrixZp(self.dim, p, tuple(c * x % p for x in self.entries))

    def is_zero(self) -> bool:
        return not any(self.entries)

    def commutes_with(self, other: MatrixZp) -> bool:
        return self @ other == other @ self

    def det(self) -> Residue:
        return mat_det(self)

    def inverse(self) -> MatrixZp | None:
        return mat_inv(self)

    def rank(self) -> int:
        return mat_rank(self)

    def __pow__(self, e: int) -> MatrixZp:
        return mat_pow(self, e)

    def to_bytes(self) -> bytes:
        """dim as 4-byte big-endian, then the n^2 entries, each length-prefixed."""
        return struct.pack(">I", self.dim) + b"".join(encode_int(x) for x in self.entries)

    def __repr__(self):
        return f"MatrixZp(p={self.modulus}, {self.rows()})"


def decode_matrix(buf: bytes, modulus: int, offset: int = 0) -> tuple[MatrixZp, int]:
    """Inverse of ``MatrixZp.to_bytes``; entries must already be reduced mod p."""
    if len(buf) < offset + 4:
        raise ValueError("truncated matrix header")
    (n,) = struct.unpack_from(">I", buf, offset)
    offset += 4
    if n < 1 or n > 64:
        raise ValueError(f"implausible matrix dimension {n}")
    entries = []
    for _ in range(n * n):
        x, offset = decode_int(buf, offset)
        if x >= modulus:
            raise ValueError("matrix entry not reduced mod p")
        entries.append(x)
    return MatrixZp(n, modulus, tuple(entries)), offset


def mat_add(x: MatrixZp, y: MatrixZp) -> MatrixZp:
    return x + y


def mat_mul(x: MatrixZp, y: MatrixZp) -> MatrixZp:
    return x @ y


def mat_scalar(c, x: MatrixZp) -> MatrixZp:
    return x.scale(c)


def _eliminate(x: MatrixZp):
    """Row-reduce a copy of ``x``; returns (reduced rows, rank, det)."""
    n, p = x.dim, x.modulus
    m = x.rows()
    det = 1
    rank = 0
    for col in range(n):
        pivot = next((r for r in range(rank, n) if m[r][col]), None)
        if pivot is None:
            det = 0
            continue
        if pivot != rank:
            m[rank], m[pivot] = m[pivot], m[rank]
            det = -det
        pv = m[rank][col]
        det = det * pv % p
        inv = pow(pv, -1, p)
        for r in range(rank + 1, n):
            f = m[r][col] * inv % p
            if f:
                m[r] = [(a - f * b) % p for a, b in zip(m[r], m[rank])]
        rank += 1
    return m, rank, det % p


def mat_det(x: MatrixZp) -> Residue:
    p = x.modulus
    if x.dim == 2:
        a, b, c, d = x.entries
        return Residue((a * d - b * c) % p, p)
    if x.dim == 3:
        a, b, c, d, e, f, g, h, i = x.entries
        return Residue((a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)) % p, p)
    return Residue(_eliminate(x)[2], p)


def mat_rank(x: MatrixZp) -> int:
    return _eliminate(x)[1]


def mat_inv(x: MatrixZp) -> MatrixZp | None:
    """Gauss-Jordan inverse, or None when the matrix is singular."""
    n, p = x.dim, x.modulus
    aug = [row + [int(i == j) for j in range(n)] for i, row in enumerate(x.rows())]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col]), None)
        if pivot is None:
            return None
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = pow(aug[col][col], -1, p)
        aug[col] = [v * inv % p for v in aug[col]]
        for r in range(n):
            f = aug[r][col]
            if r != col and f:
                aug[r] = [(a - f * b) % p for a, b in zip(aug[r], aug[col])]
    return MatrixZp(n, p, tuple(v for row in aug for v in row[n:]))


def mat_pow(x: MatrixZp, e: int) -> MatrixZp:
    if e < 0:
        raise ValueError("negative exponent")
    result = MatrixZp.identity(x.dim, x.modulus)
    for bit in bin(e)[2:]:
        result = result @ result
        if bit == "1":
            result = result @ x
    return result


def mat_random(dim: int, modulus: int, rng) -> MatrixZp:
    return MatrixZp(dim, modulus, tuple(rng.randrange(modulus) for _ in range(dim * dim)))

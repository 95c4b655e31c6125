"""Histogram-based uniformity checks on shared keys.

Values in ``[0, p)`` go into 10 bins of width ``p // 10``; the few values
at or above ``10 * (p // 10)`` are folded into the last bin.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass

from scipy.stats import chi2

from .matrix import MatrixZp
from .paramgen import PublicParams, gen_private_exponent, gen_public_params
from .protocol import finalize, initiate

BINS = 10
ALPHA = 0.001


class Undersampled(ValueError):
    pass


def bin_index(value: int, width: int, bins: int = BINS) -> int:
    return min(value // width, bins - 1)


@dataclass(frozen=True)
class Histogram:
    modulus: int
    counts: tuple
    trials: int
    label: str = ""

    @property
    def bin_count(self) -> int:
        return len(self.counts)

    @property
    def bin_width(self) -> int:
        return self.modulus // self.bin_count

    def edges(self) -> list[tuple[int, int]]:
        """Inclusive ``(lo, hi)`` value range of each bin."""
        w, n = self.bin_width, self.bin_count
        return [(i * w, (i + 1) * w - 1 if i < n - 1 else self.modulus - 1) for i in range(n)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["bin_lo", "bin_hi", "count"])
            for (lo, hi), c in zip(self.edges(), self.counts):
                out.writerow([lo, hi, c])


@dataclass(frozen=True)
class PairHistogram:
    modulus: int
    counts: tuple  # row-major bins x bins, first position selects the row
    trials: int
    label: str = ""

    @property
    def bin_count(self) -> int:
        return round(len(self.counts) ** 0.5)

    def cell(self, b1: int, b2: int) -> int:
        return self.counts[b1 * self.bin_count + b2]

    def write_csv(self, path) -> None:
        n = self.bin_count
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["bin1", "bin2", "count"])
            for b1 in range(n):
                for b2 in range(n):
                    out.writerow([b1, b2, self.cell(b1, b2)])


def sample_keys(params: PublicParams, trials: int, rng=None, fresh_params: bool = False):
    """Yield the shared key K of ``trials`` independent exchanges.

    Exponents are fresh per trial; with ``fresh_params`` the matrices are
    resampled too, over the same prime.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = rng or random.SystemRandom()
    for _ in range(trials):
        if fresh_params:
            params = gen_public_params(dim=params.dim, rng=rng, prime=params.prime)
        alice = initiate(params, gen_private_exponent(params.q, rng))
        bob = initiate(params, gen_private_exponent(params.q, rng), check=False)
        key = finalize(alice, bob.sent_token)
        if key.K != finalize(bob, alice.sent_token).K:
            raise AssertionError("key agreement failed while sampling")
        yield key.K


def entry_histogram(stream, position: tuple[int, int], bins: int = BINS) -> Histogram:
    i, j = position
    counts = [0] * bins
    trials = 0
    modulus = None
    for K in stream:
        if modulus is None:
            modulus = K.modulus
            _check_position(K, position)
        counts[bin_index(K[i, j], modulus // bins, bins)] += 1
        trials += 1
    if modulus is None:
        raise ValueError("empty stream")
    return Histogram(modulus, tuple(counts), trials, f"entry({i},{j})")


def _check_position(K: MatrixZp, pos: tuple[int, int]) -> None:
    if not all(0 <= x < K.dim for x in pos):
        raise IndexError(f"position {pos} outside a {K.dim}x{K.dim} matrix")


def parse_selector(text: str) -> tuple[str, int | None]:
    """``"row:0"``, ``"col:2"`` or ``"all"``."""
    if text == "all":
        return ("all", None)
    kind, _, idx = text.partition(":")
    if kind not in ("row", "col") or not idx.isdigit():
        raise ValueError(f"bad selector {text!r}")
    return (kind, int(idx))


def _selected(K: MatrixZp, selector) -> list[int]:
    kind, idx = selector
    n = K.dim
    if kind == "all":
        return list(K.entries)
    if idx is None or not 0 <= idx < n:
        raise IndexError(f"{kind} index {idx} outside a {n}x{n} matrix")
    if kind == "row":
        return [K[idx, j] for j in range(n)]
    if kind == "col":
        return [K[i, idx] for i in range(n)]
    raise ValueError(f"unknown selector {kind!r}")


def mean_histogram(stream, selector, bins: int = BINS) -> Histogram:
    """Histogram of the in-field mean (sum times count^-1 mod p) of selected entries."""
    if isinstance(selector, str):
        selector = parse_selector(selector)
    counts = [0] * bins
    trials = 0
    modulus = None
    inv_count = None
    for K in stream:
        vals = _selected(K, selector)
        if modulus is None:
            modulus = K.modulus
            inv_count = pow(len(vals), -1, modulus)
        mean = sum(vals) * inv_count % modulus
        counts[bin_index(mean, modulus // bins, bins)] += 1
        trials += 1
    if modulus is None:
        raise ValueError("empty stream")
    kind, idx = selector
    return Histogram(modulus, tuple(counts), trials, "mean(all)" if kind == "all" else f"mean({kind}{idx})")


def pair_histogram(stream, pos1: tuple[int, int], pos2: tuple[int, int], bins: int = BINS) -> PairHistogram:
    if tuple(pos1) == tuple(pos2):
        raise ValueError("positions must differ")
    counts = [0] * (bins * bins)
    trials = 0
    modulus = None
    for K in stream:
        if modulus is None:
            modulus = K.modulus
            _check_position(K, pos1)
            _check_position(K, pos2)
        w = modulus // bins
        counts[bin_index(K[pos1], w, bins) * bins + bin_index(K[pos2], w, bins)] += 1
        trials += 1
    if modulus is None:
        raise ValueError("empty stream")
    return PairHistogram(modulus, tuple(counts), trials, f"pair({pos1[0]},{pos1[1]})x({pos2[0]},{pos2[1]})")


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    df: int
    critical: float

    @property
    def passed(self) -> bool:
        return self.statistic < self.critical


def critical_value(df: int, alpha: float = ALPHA) -> float:
    return float(chi2.isf(alpha, df))


def chi_square_uniform(h, alpha: float = ALPHA) -> ChiSquareResult:
    """Pearson statistic against equal expected counts in every cell."""
    cells = len(h.counts)
    if h.trials < 10 * cells:
        raise Undersampled(f"{h.trials} trials for {cells} cells; need at least {10 * cells}")
    expected = h.trials / cells
    stat = sum((c - expected) ** 2 for c in h.counts) / expected
    return ChiSquareResult(stat, cells - 1, critical_value(cells - 1, alpha))

import random

import pytest

from makekex.modmath import SafePrime
from makekex.paramgen import gen_public_params


@pytest.fixture
def rng():
    return random.Random(20240607)


@pytest.fixture(scope="session")
def small_params():
    """A fixed 3x3 instance over a 20-bit safe prime."""
    return gen_public_params(20, 3, random.Random(1))


@pytest.fixture(scope="session")
def tiny_params_2x2():
    return gen_public_params(dim=2, rng=random.Random(2), prime=SafePrime(1019, 509))


_ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion; echoed in the summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

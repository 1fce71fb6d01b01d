import random

import pytest

from ringdot.hom_cipher import paillier_keygen, shared_modulus_keygen


@pytest.fixture(scope="session")
def paillier512():
    return paillier_keygen(512, rng=random.Random(512))


@pytest.fixture(scope="session")
def paillier_pair():
    """Two independent 256-bit key pairs."""
    return paillier_keygen(256, rng=random.Random(1)), paillier_keygen(256, rng=random.Random(2))


@pytest.fixture(scope="session")
def shared1000():
    return shared_modulus_keygen(1000, 128, random.Random(1000))


@pytest.fixture()
def rng():
    return random.Random(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def verdict():
    """Record one pass/fail line per acceptance criterion and return the flag."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record

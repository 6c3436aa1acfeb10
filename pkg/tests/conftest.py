import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def naive_dft(v):
    """Textbook O(N^2) sum with the +i convention and 1/sqrt(N) scaling."""
    N = len(v)
    out = np.zeros(N, dtype=complex)
    for z in range(N):
        for y in range(N):
            out[z] += np.exp(2j * np.pi * y * z / N) * v[y]
    return out / np.sqrt(N)


def random_hermitian(rng, n, psd=False):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return A @ A.conj().T if psd else (A + A.conj().T) / 2


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance line, then assert it."""
    def record(name, ok, detail=""):
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else ""))
        assert ok, f"{name}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

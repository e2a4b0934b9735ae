from __future__ import annotations

import numpy as np
import pytest

from rotorecho import DensityMatrix, StateVector

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    line = f"acceptance {number:2d} [{name}]: {status}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None
                          ) -> DensityMatrix:
    """Generic full-rank (or given-rank) state from a Ginibre factor."""
    rank = rank or dim
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m))


def random_state(dim: int, rng: np.random.Generator) -> StateVector:
    return StateVector.normalized(rng.standard_normal(dim)
                                  + 1j * rng.standard_normal(dim))


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)

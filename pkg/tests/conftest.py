from __future__ import annotations

import numpy as np
import pytest


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _bounded_workers(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("COMMITMENT_SOLVER_THREADS", "2")

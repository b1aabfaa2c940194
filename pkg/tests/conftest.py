from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from leanols.regress_core import Dataset

settings.register_profile("default", deadline=None)
settings.load_profile("default")


def random_pd(rng: np.random.Generator, d: int, spread: float = 1.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues spread over ``exp(+-spread)``."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    w = np.exp(rng.uniform(-spread, spread, size=d))
    return (q * w) @ q.T


def random_dataset(rng: np.random.Generator, n: int, d: int) -> Dataset:
    x = rng.standard_normal((n, d))
    y = x @ rng.uniform(-1, 1, size=d) + rng.standard_normal(n) * rng.uniform(0.1, 2.0)
    return Dataset(x, y)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)

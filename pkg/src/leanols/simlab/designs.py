"""Fixed designs with a prescribed Gram matrix, and the response model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, NotPositiveDefiniteError
from ..regress_core import FloatArray, symmetrize

KINDS = ("orthogonal", "exchangeable", "worst_case")
_ALIASES = {"worstcase": "worst_case", "worst-case": "worst_case", "orth": "orthogonal", "exch": "exchangeable"}


def canonical_kind(kind: str) -> str:
    k = _ALIASES.get(kind, kind)
    if k not in KINDS:
        raise DomainError(f"unknown design kind {kind!r}; expected one of {KINDS}")
    return k


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class DesignSpec:
    kind: str
    d: int
    n: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if self.d < 1:
            raise DomainError("d must be at least 1")
        if self.n < self.d:
            raise DomainError(f"need n >= d, got n={self.n}, d={self.d}")
        if self.kind == "worst_case" and self.d < 2:
            raise DomainError("the worst-case design needs d >= 2")


def exchangeable_shift(d: int) -> float:
    return -1.0 / (d + 2)


def worst_case_c(d: int) -> float:
    return 1.0 / math.sqrt(2.0 * (d - 1))


def worst_case_factor(d: int) -> FloatArray:
    """Upper-triangular ``F`` with identity block, ``c`` in the last column and
    ``sqrt(1 - (d-1) c^2)`` in the corner; the design Gram is ``F'F``."""
    c = worst_case_c(d)
    f = np.eye(d)
    f[:-1, -1] = c
    f[-1, -1] = math.sqrt(1.0 - (d - 1) * c * c)
    return f


def target_gram(kind: str, d: int) -> FloatArray:
    kind = canonical_kind(kind)
    if kind == "orthogonal":
        return np.eye(d)
    if kind == "exchangeable":
        return np.eye(d) + exchangeable_shift(d) * np.ones((d, d))
    if d < 2:
        raise DomainError("the worst-case design needs d >= 2")
    g = np.eye(d)
    c = worst_case_c(d)
    g[:-1, -1] = c
    g[-1, :-1] = c
    return g


def sqrt_pd(g: FloatArray) -> FloatArray:
    w, v = np.linalg.eigh(symmetrize(g))
    if w[0] <= 0:
        raise NotPositiveDefiniteError("target Gram is not positive definite")
    return symmetrize((v * np.sqrt(w)) @ v.T)


def make_design(spec: DesignSpec, seed=0) -> FloatArray:
    """``X = sqrt(n) Q G^{1/2}`` with ``Q`` a random ``n x d`` matrix with orthonormal columns.

    Then ``X'X / n = G`` up to rounding.
    """
    rng = as_generator(seed)
    q, _ = np.linalg.qr(rng.standard_normal((spec.n, spec.d)))
    return math.sqrt(spec.n) * q @ sqrt_pd(target_gram(spec.kind, spec.d))


def draw_beta0(d: int, seed) -> FloatArray:
    return as_generator(seed).uniform(-1.0, 1.0, size=d)


def draw_response(x: FloatArray, beta0: FloatArray, sigma_noise: float, seed) -> FloatArray:
    """``y = X beta0 + sigma * z`` with ``z`` i.i.d. standard normal."""
    x = np.asarray(x, dtype=np.float64)
    mean = x @ np.asarray(beta0, dtype=np.float64)
    if sigma_noise == 0:
        return mean
    return mean + sigma_noise * as_generator(seed).standard_normal(x.shape[0])

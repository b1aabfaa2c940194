"""Upper estimates of a maximum over a huge index set by sampled q-norms.

For ``w`` in ``R_+^m`` and ``q >= 1``::

    (mean w^q)^(1/q) <= max w <= m^(1/q) (mean w^q)^(1/q)

and with ``q = log(m) / eps`` the two sides differ by exactly ``e^eps``.  The
mean is estimated from uniformly sampled indices; a one-sided Hoeffding margin
on the bounded variables ``(w / B)^q`` in ``[0, 1]`` turns the estimate into an
upper confidence bound for ``max w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BoundViolationError, DomainError

PILOT_DRAWS = 100
MAX_DRAWS = 10**7
_CHUNK = 1 << 20


@dataclass(frozen=True)
class MaxEstimate:
    point: float
    upper: float
    q: float
    k: int
    eps: float
    delta: float
    margin: float = 0.0

    def __post_init__(self) -> None:
        if self.q < 1:
            raise DomainError("q must be at least 1")


def qnorm_bounds(w, q: float) -> tuple[float, float]:
    """``(lower, upper)`` bracketing ``max(w)``.

    Both sides are computed relative to ``max(w)`` so that the bracket also
    holds in floating point: the normalised power sum lies in ``[1, m]``.
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if q < 1:
        raise DomainError(f"q must be at least 1, got {q}")
    if w.size == 0:
        raise DomainError("empty vector")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("entries must be finite and non-negative")
    top = float(w.max())
    if top == 0.0:
        return 0.0, 0.0
    m = w.size
    total = float(np.sum((w / top) ** q))  # in [1, m]
    lower = top * min(total / m, 1.0) ** (1.0 / q)
    upper = top * max(total, 1.0) ** (1.0 / q)
    return lower, upper


def exponent_for(m: int, eps: float) -> float:
    """``q = log(m) / eps``, floored at 1."""
    if m < 1:
        raise DomainError("m must be positive")
    if eps <= 0:
        raise DomainError("eps must be positive")
    return max(1.0, math.log(m) / eps)


def inflation(m: int, q: float) -> float:
    """``m^(1/q)``; equals ``e^eps`` when ``q = log(m) / eps``."""
    return math.exp(math.log(m) / q)


def hoeffding_draws(t: float, delta: float) -> int:
    """Draws so that a mean of ``[0, 1]`` variables is off by ``>= t`` w.p. at most ``delta / 2``."""
    return math.ceil(math.log(2.0 / delta) / (2.0 * t * t))


def _evaluate(w_access: Callable, idx: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        vals = np.asarray(w_access(idx), dtype=np.float64).reshape(-1)
    else:
        vals = np.array([float(w_access(int(j))) for j in idx])
    if vals.shape != idx.shape:
        raise ValueError("evaluator returned the wrong number of values")
    return vals


def sampled_max_upper(w_access: Callable, m: int, eps: float, delta: float, bound_B: float,
                      seed=0, vectorized: bool = True, pilot: int = PILOT_DRAWS,
                      max_draws: int = MAX_DRAWS) -> MaxEstimate:
    """Sampled point estimate and ``1 - delta`` upper bound for ``max_j w(j)``.

    Parameters
    ----------
    w_access : callable
        Evaluates ``w`` at 0-based indices.  With ``vectorized=True`` it is
        called with an integer array and must return an array of the same
        length; otherwise it is called once per index.
    m : int
        Size of the index set.
    eps : float
        Slack; the exponent is ``q = log(m) / eps``.
    delta : float
        Failure probability of the upper bound.
    bound_B : float
        A-priori bound ``0 <= w(j) <= B``.  An evaluated value above it raises
        :class:`BoundViolationError`.

    Notes
    -----
    A pilot sample fixes the additive accuracy ``t`` at half its normalised
    mean; a fresh sample of ``ceil(log(2/delta) / (2 t^2))`` indices then gives
    the estimate.  The pilot is independent of the main sample, so Hoeffding's
    inequality applies conditionally on ``t``.  Any ``t >= 1/m`` already makes
    the bound at least ``B``, so a pilot that sees only zeros uses ``t = 1/m``.
    The draw count is capped at ``max_draws`` by enlarging ``t``, which
    loosens the bound but keeps its coverage.
    """
    if m < 1:
        raise DomainError("m must be positive")
    if not (0 < eps):
        raise DomainError("eps must be positive")
    if not (0 < delta < 1):
        raise DomainError("delta must lie in (0, 1)")
    if max_draws < 1 or pilot < 1:
        raise DomainError("pilot and max_draws must be positive")
    if not (bound_B > 0 and math.isfinite(bound_B)):
        raise DomainError("bound_B must be positive and finite")
    q = exponent_for(m, eps)
    rng = np.random.default_rng(seed)

    def sample_mean(count: int) -> float:
        total = 0.0
        for lo in range(0, count, _CHUNK):
            idx = rng.integers(0, m, size=min(_CHUNK, count - lo))
            vals = _evaluate(w_access, idx, vectorized)
            if np.any(vals < 0):
                raise DomainError("evaluator returned a negative value")
            if np.any(vals > bound_B):
                raise BoundViolationError(f"observed w = {vals.max():.6g} above the bound B = {bound_B:.6g}")
            total += float(np.sum((vals / bound_B) ** q))
        return total / count

    pilot_mean = sample_mean(pilot)
    t = pilot_mean / 2.0 if pilot_mean > 0 else 1.0 / m
    k = hoeffding_draws(t, delta)
    if k > max_draws:
        k = max_draws
        t = math.sqrt(math.log(2.0 / delta) / (2.0 * k))
    mean = sample_mean(k)
    point = bound_B * mean ** (1.0 / q)
    upper = bound_B * inflation(m, q) * (mean + t) ** (1.0 / q)
    return MaxEstimate(point=point, upper=upper, q=q, k=k, eps=eps, delta=delta, margin=t)

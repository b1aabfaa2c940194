"""Sandwich variance and full-model confidence regions.

The meat is always the conservative form ``n^-2 sum_i x_i x_i' r_i^2``; no
assumption that each observation's score has mean zero is made.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .chisq import chisq_quantile
from .errors import DegenerateVarianceError, DomainError, InvalidDataError, RankError
from .regress_core import (
    Dataset,
    FloatArray,
    OlsFit,
    compute_gram,
    fit_model,
    full_model,
    is_well_conditioned,
    symmetrize,
)


@dataclass(frozen=True)
class SandwichVariance:
    bread: FloatArray
    meat: FloatArray
    avar: FloatArray
    se: FloatArray


@dataclass(frozen=True)
class FullModelRegion:
    kind: Literal["chi_square", "max_t"]
    center: FloatArray
    threshold: float
    alpha: float | None

    def __post_init__(self) -> None:
        if self.threshold < 0:
            raise DomainError("threshold must be non-negative")
        if self.alpha is not None and not (0 < self.alpha < 1):
            raise DomainError("alpha must lie in (0, 1)")


def meat_estimate(data: Dataset, fit: OlsFit) -> FloatArray:
    """``V_hat = n^-2 sum_i x_{i,M} x_{i,M}' r_i^2`` from the fit residuals."""
    xm = data.x[:, fit.model.cols]
    r = np.asarray(fit.residuals, dtype=np.float64)
    if r.shape[0] != data.n:
        raise InvalidDataError("fit residuals do not match the data")
    xr = xm * r[:, None]
    return symmetrize(xr.T @ xr) / data.n**2


def sandwich_variance(g_m: FloatArray, meat: FloatArray) -> SandwichVariance:
    g_m = symmetrize(np.atleast_2d(np.asarray(g_m, dtype=np.float64)))
    meat = symmetrize(np.atleast_2d(np.asarray(meat, dtype=np.float64)))
    if not is_well_conditioned(g_m):
        raise RankError("Gram submatrix is singular; sandwich variance undefined")
    bread_inv = np.linalg.inv(g_m)
    avar = symmetrize(bread_inv @ meat @ bread_inv)
    se = np.sqrt(np.clip(np.diag(avar), 0.0, None))
    return SandwichVariance(g_m, meat, avar, se)


def fit_with_sandwich(data: Dataset, model=None) -> tuple[OlsFit, SandwichVariance]:
    model = full_model(data.d) if model is None else model
    fit = fit_model(data, model, compute_gram(data))
    return fit, sandwich_variance(fit.sigma_hat_m, meat_estimate(data, fit))


def chi_square_region(fit: OlsFit, sv: SandwichVariance, alpha: float) -> FullModelRegion:
    if not is_well_conditioned(sv.meat):
        raise RankError("meat matrix is singular; chi-square region undefined")
    return FullModelRegion("chi_square", np.asarray(fit.beta_hat), chisq_quantile(fit.model.size, alpha), alpha)


def chi_square_statistic(center: FloatArray, sv: SandwichVariance, theta: FloatArray) -> float:
    """``(b - theta)' S V^-1 S (b - theta)``."""
    if not is_well_conditioned(sv.meat):
        raise RankError("meat matrix is singular")
    diff = np.asarray(center) - np.asarray(theta, dtype=np.float64)
    u = sv.bread @ diff
    return float(u @ np.linalg.solve(sv.meat, u))


def region_contains_chi(region: FullModelRegion, sv: SandwichVariance, theta: FloatArray) -> bool:
    if region.kind != "chi_square":
        raise DomainError(f"expected a chi_square region, got {region.kind}")
    return chi_square_statistic(region.center, sv, theta) <= region.threshold


def max_t_region(fit: OlsFit, sv: SandwichVariance, z_quantile: float, alpha: float | None = None) -> FullModelRegion:
    """Rectangular region ``max_j |b_j - theta_j| / se_j <= z``.

    The quantile is supplied by the caller; :func:`max_t_quantile` computes it
    with the multiplier bootstrap over the singleton collection.
    """
    if np.any(sv.se <= 0):
        raise DegenerateVarianceError("a standard error is zero")
    return FullModelRegion("max_t", np.asarray(fit.beta_hat), float(z_quantile), alpha)


def region_contains_max_t(region: FullModelRegion, sv: SandwichVariance, theta: FloatArray) -> bool:
    if region.kind != "max_t":
        raise DomainError(f"expected a max_t region, got {region.kind}")
    t = np.abs(region.center - np.asarray(theta, dtype=np.float64)) / sv.se
    return bool(np.max(t) <= region.threshold)


def max_t_intervals(region: FullModelRegion, sv: SandwichVariance) -> tuple[FloatArray, FloatArray]:
    half = region.threshold * sv.se
    return region.center - half, region.center + half


def max_t_quantile(data: Dataset, fit: OlsFit, sv: SandwichVariance, alpha: float,
                   b: int = 200, seed: int = 0) -> float:
    # imported here: posi_boot depends on this module
    from .posi_boot import influence_scores, multiplier_draws, summarize

    scores = influence_scores(data, [fit], [sv.se])
    draws = multiplier_draws(scores, b, seed)
    return float(summarize(draws, alpha).k[0])


def fit_report(data: Dataset, alpha: float = 0.05, b: int = 200, seed: int = 0) -> dict:
    """Full-model fit, sandwich standard errors and both regions, as a JSON-ready dict."""
    fit, sv = fit_with_sandwich(data)
    out: dict = {
        "n": data.n,
        "d": data.d,
        "alpha": alpha,
        "beta_hat": fit.beta_hat.tolist(),
        "se": sv.se.tolist(),
        "rank_ok": fit.rank_ok,
    }
    try:
        chi = chi_square_region(fit, sv, alpha)
        out["chi_square"] = {"threshold": chi.threshold, "df": data.d}
    except RankError as exc:
        out["chi_square"] = {"error": str(exc)}
    try:
        z = max_t_quantile(data, fit, sv, alpha, b=b, seed=seed)
        reg = max_t_region(fit, sv, z, alpha)
        lo, hi = max_t_intervals(reg, sv)
        out["max_t"] = {"threshold": z, "b": b, "seed": seed,
                        "interval_low": lo.tolist(), "interval_high": hi.tolist()}
    except DegenerateVarianceError as exc:
        out["max_t"] = {"error": str(exc)}
    return out


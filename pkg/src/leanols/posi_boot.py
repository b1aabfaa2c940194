"""Multiplier-bootstrap post-selection inference over a model collection.

For every model ``M`` in a collection the studentized influence scores

    psi[i, M, j] = (S_M^-1 x_{i,M})_j * (y_i - x_{i,M}' b_M) / se_{M,j}

are stacked column-wise into one ``n x P`` matrix (``P = sum |M|``).  A
bootstrap draw multiplies them by i.i.d. standard normal weights and takes,
per model, the largest studentized coordinate.  The per-model draws then feed
four quantile rules:

* method 0: one constant threshold, the quantile of ``max_M T_M``;
* method 1: ``T_M`` centred by its median;
* method 2: centred and divided by its MAD;
* method 3: as method 2, then centred again per model size.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateVarianceError, DomainError, InvalidDataError, RankError
from .model_space import ModelCollection
from .regress_core import Dataset, FloatArray, ModelId, OlsFit, is_well_conditioned, symmetrize

MAD_FLOOR = 1e-12
METHODS = (0, 1, 2, 3)
_CHUNK_ELEMS = 1 << 22


@dataclass(frozen=True)
class InfluenceScores:
    """Stacked scores; model ``i`` owns columns ``offsets[i]:offsets[i+1]``."""

    models: tuple[ModelId, ...]
    matrix: FloatArray
    offsets: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def for_model(self, i: int) -> FloatArray:
        return self.matrix[:, self.offsets[i]:self.offsets[i + 1]]


@dataclass(frozen=True)
class BootstrapDraws:
    b: int
    t_draws: FloatArray  # (b, n_models)
    seed: object
    models: tuple[ModelId, ...]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([m.size for m in self.models], dtype=np.intp)


@dataclass(frozen=True)
class PosiSummary:
    alpha: float
    models: tuple[ModelId, ...]
    med_t: FloatArray
    mad_t: FloatArray
    med_frak: dict[int, float]
    k: FloatArray  # K^(0..3)
    degenerate: np.ndarray
    index: dict[ModelId, int] = field(repr=False, compare=False, default_factory=dict)

    @property
    def mad_fallback(self) -> bool:
        return bool(np.any(self.degenerate))

    @property
    def scale(self) -> FloatArray:
        # MAD with the degenerate models reset to 1 (centred-only form)
        return np.where(self.degenerate, 1.0, self.mad_t)

    def position(self, model: ModelId) -> int:
        try:
            return self.index[model]
        except KeyError:
            raise DomainError(f"model {model} is not covered by this summary") from None


@dataclass(frozen=True)
class PosiRegion:
    method: int
    model: ModelId
    center: FloatArray
    se: FloatArray
    threshold: float

    def __post_init__(self) -> None:
        if self.threshold < 0:
            raise DomainError("threshold must be non-negative")

    def intervals(self) -> tuple[FloatArray, FloatArray]:
        half = self.threshold * self.se
        return self.center - half, self.center + half


# ---------------------------------------------------------------------------
# scores


def _model_leverage(x: FloatArray, fit: OlsFit) -> FloatArray:
    xm = x[:, fit.model.cols]
    s_m = symmetrize(np.atleast_2d(fit.sigma_hat_m))
    if not is_well_conditioned(s_m):
        raise RankError(f"Gram submatrix of model {fit.model} is singular")
    return np.linalg.solve(s_m, xm.T).T  # rows (S_M^-1 x_{i,M})'


def influence_scores(data: Dataset, fits: Sequence[OlsFit], se: Sequence[FloatArray]) -> InfluenceScores:
    """Studentized influence scores for each fitted model, stacked by columns."""
    if len(fits) != len(se):
        raise InvalidDataError("one standard-error vector per fit is required")
    blocks = []
    offsets = [0]
    for fit, s in zip(fits, se):
        s = np.asarray(s, dtype=np.float64).reshape(-1)
        if s.shape[0] != fit.model.size:
            raise InvalidDataError(f"se for model {fit.model} has wrong length")
        if np.any(s <= 0):
            raise DegenerateVarianceError(f"zero standard error in model {fit.model}")
        lev = _model_leverage(data.x, fit)
        blocks.append(lev * np.asarray(fit.residuals)[:, None] / s)
        offsets.append(offsets[-1] + fit.model.size)
    return InfluenceScores(tuple(f.model for f in fits), np.hstack(blocks), np.asarray(offsets))


@dataclass(frozen=True)
class StratumFit:
    """Batched OLS fits for all models of one size."""

    idx: np.ndarray        # (C, s) 0-based columns
    beta: FloatArray       # (C, s)
    se: FloatArray         # (C, s) sandwich standard errors
    leverage: FloatArray   # (n, C, s) rows of X_M S_M^-1
    resid: FloatArray      # (n, C)
    sigma_inv: FloatArray  # (C, s, s)


@dataclass(frozen=True)
class CollectionFit:
    collection: ModelCollection
    strata: dict[int, StratumFit]

    def beta_of(self, i: int) -> FloatArray:
        s, j = self._locate(i)
        return self.strata[s].beta[j]

    def se_of(self, i: int) -> FloatArray:
        s, j = self._locate(i)
        return self.strata[s].se[j]

    def _locate(self, i: int) -> tuple[int, int]:
        s = self.collection.models[i].size
        return s, i - self.collection.strata[s].start

    def scores(self, se_override: dict[int, FloatArray] | None = None) -> InfluenceScores:
        """Stack the studentized scores in collection order."""
        n = next(iter(self.strata.values())).resid.shape[0]
        blocks = []
        for s in self.collection.sizes:
            st = self.strata[s]
            se = st.se if se_override is None else se_override[s]
            if np.any(se <= 0):
                raise DegenerateVarianceError(f"zero standard error among size-{s} models")
            psi = st.leverage * st.resid[:, :, None] / se[None]
            blocks.append(psi.reshape(n, -1))
        sizes = self.collection.size_array()
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        return InfluenceScores(self.collection.models, np.hstack(blocks), offsets)


def fit_stratum(x: FloatArray, y: FloatArray, idx: np.ndarray) -> StratumFit:
    n = x.shape[0]
    xm = x[:, idx]  # (n, C, s)
    gram = symmetrize(np.einsum("ncs,nct->cst", xm, xm) / n)
    gam = np.einsum("ncs,n->cs", xm, y) / n
    w = np.linalg.eigvalsh(gram)
    bad = (w[:, 0] <= 0) | (w[:, -1] > 1e10 * w[:, 0])
    if np.any(bad):
        first = tuple(int(c) + 1 for c in idx[np.argmax(bad)])
        raise RankError(f"Gram submatrix of model {first} is singular")
    sigma_inv = symmetrize(np.linalg.inv(gram))
    beta = np.einsum("cst,ct->cs", sigma_inv, gam)
    resid = y[:, None] - np.einsum("ncs,cs->nc", xm, beta)
    lev = np.einsum("ncs,cst->nct", xm, sigma_inv)
    se = np.sqrt(np.einsum("nct,nc->ct", lev**2, resid**2)) / n
    return StratumFit(idx, beta, se, lev, resid, sigma_inv)


def fit_collection(data: Dataset, coll: ModelCollection) -> CollectionFit:
    """Batched OLS fits and sandwich standard errors for every model in ``coll``."""
    if coll.d != data.d:
        raise InvalidDataError(f"collection is over d={coll.d} covariates, data has {data.d}")
    strata = {s: fit_stratum(data.x, data.y, coll.index_array(s)) for s in coll.sizes}
    return CollectionFit(coll, strata)


# ---------------------------------------------------------------------------
# bootstrap


def _draw_stream(seed, r: int) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (r,))
    else:
        ss = np.random.SeedSequence(seed, spawn_key=(r,))
    return np.random.Generator(np.random.PCG64(ss))


def multiplier_weights(n: int, b: int, seed) -> FloatArray:
    """Standard normal weights; row ``r`` comes from its own ``(seed, r)`` substream."""
    return np.stack([_draw_stream(seed, r).standard_normal(n) for r in range(b)]) if b else np.empty((0, n))


def multiplier_draws(scores: InfluenceScores, b: int, seed, weights: FloatArray | None = None) -> BootstrapDraws:
    """Bootstrap draws of ``T_M = max_j |n^-1 sum_i g_i psi_ij| / s_j`` for every model.

    ``s_j = n^-1 sqrt(sum_i psi_ij^2)`` so that each coordinate of a draw has
    unit conditional variance whatever scale the scores carry.
    """
    if b < 50:
        raise DomainError(f"need at least 50 bootstrap draws, got {b}")
    psi = np.ascontiguousarray(scores.matrix, dtype=np.float64)
    n, p = psi.shape
    g = multiplier_weights(n, b, seed) if weights is None else np.asarray(weights, dtype=np.float64)
    if g.shape != (b, n):
        raise InvalidDataError(f"weights must have shape {(b, n)}")
    norm = np.sqrt(np.einsum("ij,ij->j", psi, psi))
    inv = np.divide(1.0, norm, out=np.zeros_like(norm), where=norm > 0)
    starts = scores.offsets[:-1]
    out = np.empty((b, len(scores.models)))
    step = max(1, _CHUNK_ELEMS // max(p, 1))
    for lo in range(0, b, step):
        a = np.abs(g[lo:lo + step] @ psi) * inv  # n^-1 cancels against s_j
        out[lo:lo + step] = np.maximum.reduceat(a, starts, axis=1)
    out.setflags(write=False)
    return BootstrapDraws(b, out, seed, scores.models)


def empirical_quantile(values: FloatArray, alpha: float, axis: int = 0) -> FloatArray:
    """Smallest order statistic whose rank is at least ``ceil((1 - alpha) b)``."""
    v = np.sort(np.asarray(values, dtype=np.float64), axis=axis)
    b = v.shape[axis]
    rank = math.ceil((1.0 - alpha) * b - 1e-9)
    rank = min(max(rank, 1), b)
    return np.take(v, rank - 1, axis=axis)


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def summarize(draws: BootstrapDraws, alpha: float) -> PosiSummary:
    """Medians, MADs and the four simultaneous quantiles from one draw set."""
    _check_alpha(alpha)
    if draws.b < 50:
        raise DomainError("need at least 50 bootstrap draws")
    t = draws.t_draws
    med = np.median(t, axis=0)
    centred = t - med
    mad = np.median(np.abs(centred), axis=0)
    degenerate = mad < MAD_FLOOR
    if np.any(degenerate):
        warnings.warn(f"{int(degenerate.sum())} model(s) have MAD below {MAD_FLOOR}; "
                      "using the centred statistic for them", RuntimeWarning, stacklevel=2)
    scaled = centred / np.where(degenerate, 1.0, mad)

    k0 = empirical_quantile(t.max(axis=1), alpha)
    k1 = empirical_quantile(centred.max(axis=1), alpha)
    k2 = empirical_quantile(scaled.max(axis=1), alpha)

    sizes = draws.sizes
    if np.any(np.diff(sizes) < 0):
        raise InvalidDataError("draws must be ordered by model size")
    uniq, starts = np.unique(sizes, return_index=True)
    frak = np.maximum.reduceat(scaled, starts, axis=1)  # (b, n_sizes)
    med_frak_arr = np.median(frak, axis=0)
    k3 = empirical_quantile((frak - med_frak_arr).max(axis=1), alpha)

    return PosiSummary(
        alpha=alpha,
        models=draws.models,
        med_t=med,
        mad_t=mad,
        med_frak={int(s): float(v) for s, v in zip(uniq, med_frak_arr)},
        k=np.array([k0, k1, k2, k3], dtype=np.float64),
        degenerate=degenerate,
        index={m: i for i, m in enumerate(draws.models)},
    )


def thresholds(summary: PosiSummary, method: int) -> FloatArray:
    """Threshold ``m(R_M)`` for every model of the summary, in collection order."""
    k = summary.k
    if method == 0:
        thr = np.full(summary.med_t.shape, k[0])
    elif method == 1:
        thr = summary.med_t + k[1]
    elif method == 2:
        thr = summary.med_t + summary.scale * k[2]
    elif method == 3:
        mf = np.array([summary.med_frak[m.size] for m in summary.models])
        thr = summary.med_t + summary.scale * (k[3] + mf)
    else:
        raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")
    # negative only for alpha > 1/2; a region cannot have a negative radius
    return np.maximum(thr, 0.0)


def build_region(method: int, model: ModelId, fit: OlsFit | FloatArray, se: FloatArray,
                 summary: PosiSummary) -> PosiRegion:
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")
    thr = thresholds(summary, method)[summary.position(model)]
    center = fit.beta_hat if isinstance(fit, OlsFit) else np.asarray(fit, dtype=np.float64)
    return PosiRegion(method, model, np.asarray(center, dtype=np.float64),
                      np.asarray(se, dtype=np.float64), float(thr))


def max_t_stat(center: FloatArray, se: FloatArray, target: FloatArray) -> float:
    return float(np.max(np.abs(np.asarray(center) - np.asarray(target)) / np.asarray(se)))


def covers(region: PosiRegion, target: FloatArray) -> bool:
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if target.shape != region.center.shape:
        raise DomainError(f"target has length {target.shape[0]}, region has {region.center.shape[0]}")
    return max_t_stat(region.center, region.se, target) <= region.threshold


# ---------------------------------------------------------------------------
# end-to-end


def posi_analysis(data: Dataset, coll: ModelCollection, alpha: float = 0.05, b: int = 200,
                  seed=0, methods: Sequence[int] = METHODS) -> tuple[PosiSummary, list[dict]]:
    """Fit every model, bootstrap, and return per-model regions as plain records."""
    _check_alpha(alpha)
    cf = fit_collection(data, coll)
    draws = multiplier_draws(cf.scores(), b, seed)
    summary = summarize(draws, alpha)
    records = []
    for method in methods:
        thr = thresholds(summary, method)
        for i, m in enumerate(coll.models):
            beta, se = cf.beta_of(i), cf.se_of(i)
            half = thr[i] * se
            records.append({
                "method": int(method),
                "model": list(m.indices),
                "beta_hat": beta.tolist(),
                "se": se.tolist(),
                "threshold": float(thr[i]),
                "interval_low": (beta - half).tolist(),
                "interval_high": (beta + half).tolist(),
            })
    return summary, records

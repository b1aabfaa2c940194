"""Monte Carlo coverage experiments over a submodel collection.

Each replication draws its own ``beta0`` and noise from a substream keyed by
``(seed, replication index)``, so the report does not depend on how the
replications are spread over worker processes.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from ..errors import DomainError
from ..model_space import DEFAULT_CAP, ModelCollection, enumerate_up_to_k
from ..posi_boot import METHODS, fit_collection, multiplier_draws, summarize, thresholds
from ..regress_core import Dataset, FloatArray
from .designs import DesignSpec, draw_beta0, draw_response, make_design

log = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    def __init__(self, replication: int, cause: BaseException):
        super().__init__(f"replication {replication} failed: {cause!r}")
        self.replication = replication


@dataclass(frozen=True)
class SimConfig:
    design: DesignSpec
    k_max: int
    alpha: float = 0.05
    sigma_noise: float = 1.0
    replications: int = 100
    b_boot: int = 200
    seed: int = 0
    methods: tuple[int, ...] = METHODS
    oracle_variance: bool = False
    fixed_beta0: bool = False
    cap: int = DEFAULT_CAP

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise DomainError("replications must be at least 1")
        if self.b_boot < 50:
            raise DomainError("b_boot must be at least 50")
        if not (0 < self.alpha < 1):
            raise DomainError("alpha must lie in (0, 1)")
        if not (1 <= self.k_max <= self.design.d):
            raise DomainError("need 1 <= k_max <= d")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise DomainError(f"unknown methods {bad}")
        object.__setattr__(self, "methods", tuple(sorted(set(int(m) for m in self.methods))))


@dataclass(frozen=True)
class ReplicateResult:
    covered: np.ndarray      # (n_methods, n_sizes) bool
    total: np.ndarray        # (n_methods,) bool
    width_min: FloatArray    # (n_methods, n_sizes)
    width_med: FloatArray
    width_max: FloatArray
    k: FloatArray            # K^(0..3)


@dataclass
class SimReport:
    config: SimConfig
    sizes: tuple[int, ...]
    coverage: FloatArray      # (n_methods, n_sizes)
    width_min: FloatArray
    width_med: FloatArray
    width_max: FloatArray
    total_coverage: FloatArray  # (n_methods,)
    replicates: list[ReplicateResult] = field(default_factory=list, repr=False)

    @property
    def setting(self) -> str:
        return self.config.design.kind

    @property
    def methods(self) -> tuple[int, ...]:
        return self.config.methods

    def rows(self) -> list[dict]:
        cfg = self.config
        out = []
        for a, method in enumerate(self.methods):
            for b, s in enumerate(self.sizes):
                out.append({
                    "setting": self.setting,
                    "method": method,
                    "size_s": s,
                    "coverage": float(self.coverage[a, b]),
                    "width_min": float(self.width_min[a, b]),
                    "width_med": float(self.width_med[a, b]),
                    "width_max": float(self.width_max[a, b]),
                    "total_coverage": float(self.total_coverage[a]),
                    "n": cfg.design.n,
                    "d": cfg.design.d,
                    "k": cfg.k_max,
                    "alpha": cfg.alpha,
                    "reps": cfg.replications,
                    "b": cfg.b_boot,
                    "seed": cfg.seed,
                })
        return out


def _seed(cfg_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg_seed, spawn_key=key)


def design_for(cfg: SimConfig) -> FloatArray:
    return make_design(cfg.design, _seed(cfg.seed, 0))


def run_replication(cfg: SimConfig, x: FloatArray, coll: ModelCollection, r: int) -> ReplicateResult:
    n, d = x.shape
    beta0 = draw_beta0(d, _seed(cfg.seed, 2) if cfg.fixed_beta0 else _seed(cfg.seed, 1, r, 0))
    y = draw_response(x, beta0, cfg.sigma_noise, _seed(cfg.seed, 1, r, 1))
    cf = fit_collection(Dataset(x, y), coll)
    sb = x.T @ (x @ beta0) / n  # Sigma_hat beta0

    se_map: dict[int, FloatArray] = {}
    t_obs = np.empty(len(coll))
    for s in coll.sizes:
        st = cf.strata[s]
        target = np.einsum("cst,ct->cs", st.sigma_inv, sb[st.idx])
        if cfg.oracle_variance:
            se = cfg.sigma_noise * np.sqrt(np.einsum("cjj->cj", st.sigma_inv) / n)
        else:
            se = st.se
        se_map[s] = se
        err = np.abs(st.beta - target)
        ratio = np.divide(err, se, out=np.where(err > 0, np.inf, 0.0), where=se > 0)
        rng = coll.strata[s]
        t_obs[rng.start:rng.stop] = ratio.max(axis=1)

    draws = multiplier_draws(cf.scores(se_map), cfg.b_boot, _seed(cfg.seed, 1, r, 2))
    summary = summarize(draws, cfg.alpha)

    nm, ns = len(cfg.methods), len(coll.sizes)
    covered = np.zeros((nm, ns), dtype=bool)
    total = np.zeros(nm, dtype=bool)
    wmin, wmed, wmax = (np.zeros((nm, ns)) for _ in range(3))
    for a, method in enumerate(cfg.methods):
        thr = thresholds(summary, method)
        hit = t_obs <= thr
        total[a] = bool(hit.all())
        for b, s in enumerate(coll.sizes):
            rng = coll.strata[s]
            covered[a, b] = bool(hit[rng.start:rng.stop].all())
            w = thr[rng.start:rng.stop]
            wmin[a, b], wmed[a, b], wmax[a, b] = w.min(), np.median(w), w.max()
    return ReplicateResult(covered, total, wmin, wmed, wmax, summary.k)


def _safe_replication(cfg, x, coll, r):
    try:
        return run_replication(cfg, x, coll, r)
    except Exception as exc:  # noqa: BLE001 - re-raised with the replication index
        raise SimulationError(r, exc) from exc


def run_experiment(cfg: SimConfig, workers: int = 1, keep_replicates: bool = True) -> SimReport:
    """Run all replications and aggregate coverage and threshold summaries."""
    coll = enumerate_up_to_k(cfg.design.d, cfg.k_max, cap=cfg.cap)
    x = design_for(cfg)
    job = partial(_safe_replication, cfg, x, coll)
    reps = range(cfg.replications)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, reps, chunksize=max(1, cfg.replications // (4 * workers))))
    else:
        results = [job(r) for r in reps]
    log.info("finished %d replications (%s, d=%d, k=%d)", len(results), cfg.design.kind, cfg.design.d, cfg.k_max)

    def mean(attr: str) -> FloatArray:
        return np.mean(np.stack([getattr(res, attr) for res in results]).astype(np.float64), axis=0)

    return SimReport(
        config=cfg,
        sizes=tuple(coll.sizes),
        coverage=mean("covered"),
        width_min=mean("width_min"),
        width_med=mean("width_med"),
        width_max=mean("width_max"),
        total_coverage=mean("total"),
        replicates=results if keep_replicates else [],
    )

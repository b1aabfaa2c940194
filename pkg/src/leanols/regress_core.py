"""Gram matrices, OLS solving, submodel extraction and deterministic error bounds.

Everything here is a pure function of its inputs.  Covariate indices in
:class:`ModelId` are 1-based to match the usual ``{1, ..., d}`` notation; the
``cols`` property gives the 0-based numpy index array.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidDataError, NotPositiveDefiniteError, RankError

COND_LIMIT = 1e10
PD_RTOL = 1e-12

FloatArray = NDArray[np.float64]


def symmetrize(a: FloatArray) -> FloatArray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


@dataclass(frozen=True)
class Dataset:
    """An ``n x d`` covariate matrix with its response vector."""

    x: FloatArray
    y: FloatArray

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2:
            raise InvalidDataError(f"x must be 2-d, got shape {x.shape}")
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise InvalidDataError(f"x must have n >= 1 rows and d >= 1 columns, got {x.shape}")
        if y.shape[0] != x.shape[0]:
            raise InvalidDataError(f"y has length {y.shape[0]} but x has {x.shape[0]} rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidDataError("data contains non-finite entries")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def columns(self, model: "ModelId") -> "Dataset":
        """Restrict the covariates to ``model``."""
        model.check(self.d)
        return Dataset(self.x[:, model.cols], self.y)


def load_csv(path: str | Path) -> Dataset:
    """Read a dataset from CSV: header row, response column ``y``, the rest covariates."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidDataError(f"{path}: empty file") from None
        if "y" not in header:
            raise InvalidDataError(f"{path}: no column named 'y'")
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise InvalidDataError(f"{path}: no data rows")
    try:
        table = np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise InvalidDataError(f"{path}: {exc}") from None
    if table.shape[1] != len(header):
        raise InvalidDataError(f"{path}: ragged rows")
    iy = header.index("y")
    xcols = [j for j in range(len(header)) if j != iy]
    if not xcols:
        raise InvalidDataError(f"{path}: no covariate columns")
    return Dataset(table[:, xcols], table[:, iy])


def save_csv(data: Dataset, path: str | Path, names: Iterable[str] | None = None) -> None:
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(data.d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*names, "y"])
        for row, yi in zip(data.x, data.y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(yi))])


@dataclass(frozen=True, order=False)
class ModelId:
    """A non-empty, strictly increasing set of 1-based covariate indices."""

    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise InvalidDataError("a model must contain at least one covariate")
        if len(set(idx)) != len(idx):
            raise InvalidDataError(f"duplicate covariate index in {idx}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidDataError(f"indices must be strictly increasing: {idx}")
        if idx[0] < 1:
            raise InvalidDataError(f"indices are 1-based, got {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, *indices: int) -> "ModelId":
        return cls(tuple(indices))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def cols(self) -> NDArray[np.intp]:
        return np.asarray(self.indices, dtype=np.intp) - 1

    def sort_key(self) -> tuple[int, tuple[int, ...]]:
        return (len(self.indices), self.indices)

    def check(self, d: int) -> None:
        if self.indices[-1] > d:
            raise IndexError(f"model {self.indices} has an index beyond d={d}")

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.indices)) + "}"


@dataclass(frozen=True)
class GramPair:
    """``sigma_hat = X'X/n`` and ``gamma_hat = X'y/n``."""

    sigma_hat: FloatArray
    gamma_hat: FloatArray

    @property
    def d(self) -> int:
        return self.gamma_hat.shape[0]


@dataclass(frozen=True)
class OlsFit:
    model: ModelId
    beta_hat: FloatArray
    residuals: FloatArray
    sigma_hat_m: FloatArray
    rank_ok: bool = True


@dataclass(frozen=True)
class DetIneqReport:
    """Both sides of the deterministic bracket and linear-representation bound.

    ``upper`` and ``linrep_bound`` are ``inf`` when ``d_sigma >= 1``.
    """

    d_sigma: float
    score_norm: float
    lower: float
    upper: float
    actual: float
    linrep_error: float
    linrep_bound: float
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def holds(self, rtol: float = 1e-8) -> bool:
        def le(a: float, b: float) -> bool:
            return a <= b + rtol * max(1.0, abs(a), abs(b) if math.isfinite(b) else 0.0)

        ok = le(self.lower, self.actual) and le(self.actual, self.upper)
        if self.d_sigma < 1:
            ok = ok and le(self.linrep_error, self.linrep_bound)
        return ok


def compute_gram(data: Dataset) -> GramPair:
    x, y, n = data.x, data.y, data.n
    sigma_hat = symmetrize(x.T @ x / n)
    gamma_hat = x.T @ y / n
    if not (np.all(np.isfinite(sigma_hat)) and np.all(np.isfinite(gamma_hat))):
        raise InvalidDataError("Gram matrix overflowed")
    return GramPair(sigma_hat, gamma_hat)


def extract_submodel(g: GramPair, m: ModelId) -> tuple[FloatArray, FloatArray]:
    """Select ``(Sigma_M, Gamma_M)`` by index; no recomputation from data."""
    m.check(g.d)
    c = m.cols
    return g.sigma_hat[np.ix_(c, c)], g.gamma_hat[c]


def _sym_eig(a: FloatArray) -> tuple[FloatArray, FloatArray]:
    return np.linalg.eigh(symmetrize(np.asarray(a, dtype=np.float64)))


def is_well_conditioned(a: FloatArray, limit: float = COND_LIMIT) -> bool:
    w = np.linalg.eigvalsh(symmetrize(np.atleast_2d(a)))
    return bool(w[0] > 0 and w[-1] <= limit * w[0])


def solve_ols(g_m: FloatArray, gamma_m: FloatArray) -> tuple[FloatArray, bool]:
    """Minimise ``-2 theta'gamma + theta' G theta``.

    Returns ``(beta_hat, rank_ok)``.  When the condition number of ``g_m``
    exceeds 1e10 the minimum-norm minimiser is returned with ``rank_ok=False``.
    """
    g_m = symmetrize(np.atleast_2d(np.asarray(g_m, dtype=np.float64)))
    gamma_m = np.asarray(gamma_m, dtype=np.float64).reshape(-1)
    if is_well_conditioned(g_m):
        return np.linalg.solve(g_m, gamma_m), True
    return np.linalg.pinv(g_m, rcond=1.0 / COND_LIMIT, hermitian=True) @ gamma_m, False


def fit_model(data: Dataset, m: ModelId, gram: GramPair | None = None) -> OlsFit:
    gram = compute_gram(data) if gram is None else gram
    s_m, g_m = extract_submodel(gram, m)
    beta, ok = solve_ols(s_m, g_m)
    resid = data.y - data.x[:, m.cols] @ beta
    return OlsFit(m, beta, resid, s_m, ok)


def full_model(d: int) -> ModelId:
    return ModelId(tuple(range(1, d + 1)))


def target_beta(design: FloatArray, beta0: FloatArray, m: ModelId) -> FloatArray:
    """Projection target ``beta_M`` for a fixed design with ``E[y] = X beta0``."""
    x = np.asarray(design, dtype=np.float64)
    beta0 = np.asarray(beta0, dtype=np.float64).reshape(-1)
    n, d = x.shape
    m.check(d)
    if m.size == d:
        return beta0.copy()
    xm = x[:, m.cols]
    s_m = symmetrize(xm.T @ xm / n)
    if not is_well_conditioned(s_m):
        raise RankError(f"Gram submatrix of model {m} is singular")
    return np.linalg.solve(s_m, xm.T @ (x @ beta0) / n)


def inv_sqrt_pd(sigma: FloatArray) -> FloatArray:
    """Symmetric inverse square root; refuses non-PD input instead of clipping."""
    w, v = _sym_eig(sigma)
    tr = float(np.trace(np.atleast_2d(sigma)))
    if w[0] <= PD_RTOL * abs(tr) or w[0] <= 0:
        raise NotPositiveDefiniteError(f"matrix is not positive definite (min eigenvalue {w[0]:.3g})")
    return (v / np.sqrt(w)) @ v.T


def whitened_deviation(sigma_hat_m: FloatArray, sigma_m: FloatArray) -> FloatArray:
    r = inv_sqrt_pd(sigma_m)
    return symmetrize(r @ np.atleast_2d(sigma_hat_m) @ r) - np.eye(r.shape[0])


def d_sigma(sigma_hat_m: FloatArray, sigma_m: FloatArray) -> float:
    """Operator norm of ``Sigma^{-1/2} Sigma_hat Sigma^{-1/2} - I``."""
    w = np.linalg.eigvalsh(whitened_deviation(sigma_hat_m, sigma_m))
    return float(max(abs(w[0]), abs(w[-1])))


def _sigma_norm(v: FloatArray, sigma: FloatArray) -> float:
    q = float(v @ sigma @ v)
    return math.sqrt(max(q, 0.0))


def det_inequality_report(data: Dataset, m: ModelId, sigma: FloatArray, beta: FloatArray) -> DetIneqReport:
    """Evaluate the deterministic bracket for submodel ``m``.

    ``sigma`` may be the full ``d x d`` matrix (its ``M x M`` block is used) or
    already ``|M| x |M|``.  ``beta`` is the ``|M|``-dimensional target.
    """
    gram = compute_gram(data)
    s_hat, g_hat = extract_submodel(gram, m)
    sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    if sigma.shape == (data.d, data.d) and m.size != data.d:
        sigma = sigma[np.ix_(m.cols, m.cols)]
    if sigma.shape != (m.size, m.size):
        raise InvalidDataError(f"sigma has shape {sigma.shape}, expected {(m.size, m.size)}")
    sigma = symmetrize(sigma)
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    if beta.shape[0] != m.size:
        raise InvalidDataError(f"beta has length {beta.shape[0]}, expected {m.size}")

    dsig = d_sigma(s_hat, sigma)
    beta_hat, _ = solve_ols(s_hat, g_hat)
    score = np.linalg.solve(sigma, g_hat - s_hat @ beta)
    score_norm = _sigma_norm(score, sigma)
    actual = _sigma_norm(beta_hat - beta, sigma)
    linrep_error = _sigma_norm(beta_hat - beta - score, sigma)

    slack = 1.0 - dsig
    if slack > 0:
        upper = score_norm / slack
        linrep_bound = dsig * score_norm / slack
    else:
        upper = math.inf
        linrep_bound = math.inf
    lower = score_norm / (1.0 + dsig)
    return DetIneqReport(dsig, score_norm, lower, upper, actual, linrep_error, linrep_bound,
                         extras={"beta_hat": beta_hat, "score": score})


def loo_gram_bound(data: Dataset) -> tuple[float, float]:
    """Compare the Gram matrix without the last row against the full one.

    Returns ``(lhs, rhs)`` with ``lhs = ||S^{-1/2} S_{-n} S^{-1/2} - I||_op``
    and ``rhs = (1 + ||S^{-1/2} x_n||^2) / (n - 1)``.
    """
    n = data.n
    if n < 2:
        raise InvalidDataError("need at least two observations")
    s = compute_gram(data).sigma_hat
    r = inv_sqrt_pd(s)
    head = data.x[:-1]
    s_minus = symmetrize(head.T @ head / (n - 1))
    dev = symmetrize(r @ s_minus @ r) - np.eye(data.d)
    w = np.linalg.eigvalsh(dev)
    lhs = float(max(abs(w[0]), abs(w[-1])))
    z = r @ data.x[-1]
    rhs = (1.0 + float(z @ z)) / (n - 1)
    return lhs, rhs

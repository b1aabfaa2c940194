"""Draws of the Gaussian max-|t| statistic over every submodel of a fixed design.

With known noise level and a fixed design whose Gram is ``G``, the vector of
submodel t-statistics is exactly ``t_{M,j} = (G_M^-1 w_M)_j / sqrt((G_M^-1)_jj)``
with ``w ~ N(0, G)``.  Two routes compute ``max_{M, j} |t_{M,j}|`` per draw:

* :func:`enumerated_max_draws` loops over an explicit collection and works for
  any Gram matrix, but is limited by the collection size;
* :func:`structured_max_draws` exploits the orthogonal and worst-case designs:
  for the latter only the number of other covariates in a model and their sum
  matter, so sorting ``w`` once per draw gives the maximum over all ``2^d - 1``
  models in ``O(d^2)``.

Both take the same draws for the same seed, so they can be compared exactly.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError
from ..model_space import ModelCollection
from ..posi_boot import empirical_quantile
from ..regress_core import FloatArray, symmetrize
from .designs import as_generator, canonical_kind, sqrt_pd, target_gram, worst_case_c

_CHUNK_ELEMS = 1 << 23


def gaussian_w(gram: FloatArray, b: int, seed) -> FloatArray:
    """``b`` draws of ``w ~ N(0, G)`` as rows."""
    z = as_generator(seed).standard_normal((b, gram.shape[0]))
    return z @ sqrt_pd(gram)


def contrast_matrix(gram: FloatArray, coll: ModelCollection) -> tuple[FloatArray, np.ndarray]:
    """Unit-variance contrasts ``c_{M,j}`` with ``t_{M,j} = c_{M,j}' w``, stacked as columns."""
    d = gram.shape[0]
    blocks = []
    for s in coll.sizes:
        idx = coll.index_array(s)
        gi = np.linalg.inv(symmetrize(gram[idx[:, :, None], idx[:, None, :]]))  # (C, s, s)
        scale = 1.0 / np.sqrt(np.einsum("cjj->cj", gi))
        coef = gi * scale[:, :, None]  # row j: contrast on w_M for coordinate j
        full = np.zeros((d, idx.shape[0], s))
        for col in range(s):
            # w index idx[c, col] receives coefficient coef[c, j, col] for output (c, j)
            np.add.at(full, (idx[:, col][:, None], np.arange(idx.shape[0])[:, None], np.arange(s)[None, :]),
                      coef[:, :, col])
        blocks.append(full.reshape(d, -1))
    offsets = np.concatenate([[0], np.cumsum(coll.size_array())])
    return np.hstack(blocks), offsets


def enumerated_max_draws(gram: FloatArray, coll: ModelCollection, b: int, seed) -> FloatArray:
    """``max_{M in coll, j} |t_{M,j}|`` for ``b`` draws, by brute force."""
    c, _ = contrast_matrix(gram, coll)
    w = gaussian_w(gram, b, seed)
    out = np.empty(b)
    step = max(1, _CHUNK_ELEMS // c.shape[1])
    for lo in range(0, b, step):
        out[lo:lo + step] = np.abs(w[lo:lo + step] @ c).max(axis=1)
    return out


def _orthogonal_max(w: FloatArray) -> FloatArray:
    return np.abs(w).max(axis=1)


def _worst_case_max(w: FloatArray, k: int) -> FloatArray:
    b, d = w.shape
    p = d - 1
    c = worst_case_c(d)
    u, v = w[:, :p], w[:, p]

    best = np.abs(u).max(axis=1)  # models without the last covariate

    order = np.argsort(-u, axis=1, kind="stable")
    desc = np.take_along_axis(u, order, axis=1)
    top = np.concatenate([np.zeros((b, 1)), np.cumsum(desc, axis=1)], axis=1)            # top[:, a]
    bot = np.concatenate([np.zeros((b, 1)), np.cumsum(desc[:, ::-1], axis=1)], axis=1)   # bot[:, a]
    rank_desc = np.empty_like(order)
    np.put_along_axis(rank_desc, order, np.arange(p)[None, :].repeat(b, axis=0), axis=1)
    rank_asc = p - 1 - rank_desc

    best = np.maximum(best, np.abs(v))  # the model {d}
    for a in range(1, min(p, k - 1) + 1):
        s = 1.0 - a * c * c
        # coordinate d in A + {d}, |A| = a
        for sa in (top[:, a], bot[:, a]):
            best = np.maximum(best, np.abs(v - c * sa) / np.sqrt(s))
        # coordinate j in A, the other a-1 members chosen to push the sum to an extreme
        f = 1.0 + c * c / s
        others_top = np.where(rank_desc < a - 1, top[:, [a]] - u, top[:, [a - 1]])
        others_bot = np.where(rank_asc < a - 1, bot[:, [a]] - u, bot[:, [a - 1]])
        for other in (others_top, others_bot):
            num = u + c * (c * (u + other) - v[:, None]) / s
            best = np.maximum(best, np.abs(num).max(axis=1) / np.sqrt(f))
    return best


def structured_max_draws(kind: str, d: int, b: int, seed, k: int | None = None) -> FloatArray:
    """Same quantity as :func:`enumerated_max_draws` over ``M_{<=k}``, without enumeration."""
    kind = canonical_kind(kind)
    k = d if k is None else k
    if not (1 <= k <= d):
        raise DomainError("need 1 <= k <= d")
    w = gaussian_w(target_gram(kind, d), b, seed)
    if kind == "orthogonal":
        return _orthogonal_max(w)
    if kind == "worst_case":
        return _worst_case_max(w, k)
    raise DomainError("no closed form for the exchangeable design; use enumerated_max_draws")


def k0_ratio(d: int, b: int = 2000, seed=0, alpha: float = 0.05, k: int | None = None) -> float:
    """``K0_worst(d) / K0_orth(d)`` from ``b`` draws of each design's max statistic."""
    worst = empirical_quantile(structured_max_draws("worst_case", d, b, seed, k), alpha)
    orth = empirical_quantile(structured_max_draws("orthogonal", d, b, seed, k), alpha)
    return float(worst / orth)

"""Submodel collections: enumeration, strata by model size, JSON import/export.

Collections are ordered by (size, lexicographic indices).  That order is the
index used everywhere downstream (bootstrap columns, reports), so it must not
change between runs.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CollectionSizeError, DomainError, InvalidDataError
from .regress_core import ModelId

DEFAULT_CAP = 10**6


@dataclass(frozen=True)
class ModelCollection:
    models: tuple[ModelId, ...]
    d: int
    strata: dict[int, range]

    def __len__(self) -> int:
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def __getitem__(self, i: int) -> ModelId:
        return self.models[i]

    @property
    def sizes(self) -> list[int]:
        return sorted(self.strata)

    @property
    def k(self) -> int:
        return max(self.strata)

    def index_array(self, s: int) -> np.ndarray:
        """0-based column indices of the size-``s`` stratum, shape ``(count, s)``."""
        rng = self.strata[s]
        if len(rng) == 0:
            return np.empty((0, s), dtype=np.intp)
        return np.array([self.models[i].indices for i in rng], dtype=np.intp) - 1

    def size_array(self) -> np.ndarray:
        return np.array([m.size for m in self.models], dtype=np.intp)

    def to_json(self) -> str:
        return json.dumps([list(m.indices) for m in self.models])


def count_up_to_k(d: int, k: int) -> int:
    return sum(math.comb(d, s) for s in range(1, k + 1))


def _build(d: int, models: Sequence[ModelId]) -> ModelCollection:
    models = tuple(sorted(models, key=ModelId.sort_key))
    strata: dict[int, range] = {}
    start = 0
    for s, grp in itertools.groupby(models, key=len):
        cnt = sum(1 for _ in grp)
        strata[s] = range(start, start + cnt)
        start += cnt
    return ModelCollection(models, d, strata)


def _check_dk(d: int, k: int) -> None:
    if d < 1 or not (1 <= k <= d):
        raise DomainError(f"need 1 <= k <= d, got d={d}, k={k}")


def enumerate_up_to_k(d: int, k: int, cap: int = DEFAULT_CAP) -> ModelCollection:
    """All non-empty subsets of ``{1..d}`` with at most ``k`` elements."""
    _check_dk(d, k)
    total = count_up_to_k(d, k)
    if total > cap:
        raise CollectionSizeError(f"collection has {total} models, above the cap of {cap}")
    models = [ModelId(c) for s in range(1, k + 1) for c in itertools.combinations(range(1, d + 1), s)]
    return _build(d, models)


def enumerate_exact_k(d: int, k: int, cap: int = DEFAULT_CAP) -> ModelCollection:
    _check_dk(d, k)
    total = math.comb(d, k)
    if total > cap:
        raise CollectionSizeError(f"collection has {total} models, above the cap of {cap}")
    return _build(d, [ModelId(c) for c in itertools.combinations(range(1, d + 1), k)])


def from_list(d: int, models: Iterable[Iterable[int] | ModelId]) -> ModelCollection:
    """Build a collection from explicit index lists (1-based); rejects duplicates."""
    out: list[ModelId] = []
    for m in models:
        mid = m if isinstance(m, ModelId) else ModelId(tuple(m))
        mid.check(d)
        out.append(mid)
    if not out:
        raise InvalidDataError("empty model list")
    if len(set(out)) != len(out):
        raise InvalidDataError("duplicate model in list")
    return _build(d, out)


def load_json(d: int, path_or_text: str | Path) -> ModelCollection:
    p = Path(path_or_text)
    text = p.read_text() if p.exists() else str(path_or_text)
    raw = json.loads(text)
    if not isinstance(raw, list):
        raise InvalidDataError("model list must be a JSON array of index arrays")
    return from_list(d, raw)


def stratum(coll: ModelCollection, s: int) -> tuple[ModelId, ...]:
    rng = coll.strata.get(s)
    if rng is None:
        return ()
    return coll.models[rng.start:rng.stop]


def size_share(coll: ModelCollection, s: int) -> float:
    """Proportion of models in ``coll`` with exactly ``s`` covariates."""
    return len(stratum(coll, s)) / len(coll)


def unrank_combination(d: int, s: int, r: int) -> tuple[int, ...]:
    """The ``r``-th (0-based) lexicographic ``s``-subset of ``{1..d}``."""
    total = math.comb(d, s)
    if not (0 <= r < total):
        raise IndexError(f"rank {r} out of range for C({d},{s})={total}")
    out = []
    x = 1
    for pos in range(s, 0, -1):
        while True:
            c = math.comb(d - x, pos - 1)
            if r < c:
                break
            r -= c
            x += 1
        out.append(x)
        x += 1
    return tuple(out)


def model_at(d: int, k: int, index: int) -> ModelId:
    """The ``index``-th model of the up-to-``k`` collection without enumerating it."""
    _check_dk(d, k)
    for s in range(1, k + 1):
        c = math.comb(d, s)
        if index < c:
            return ModelId(unrank_combination(d, s, index))
        index -= c
    raise IndexError("index beyond the collection size")

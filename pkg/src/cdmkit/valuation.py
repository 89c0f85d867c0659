"""Datasets and dataset valuations.

A dataset is a ``frozenset`` of atomic data. Plain hashable ids work for the
coverage valuation; the entropy valuation needs :class:`AtomicDatum` items
carrying a feature vector. Two data with the same id are the same datum, so
unions deduplicate by id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, FrozenSet, Hashable, Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidDatumError, SchemaMismatchError

Dataset = FrozenSet[Hashable]
ValuationFn = Callable[[Dataset], float]


@dataclass(frozen=True)
class FeatureClass:
    name: str
    dim: int


@dataclass(frozen=True)
class FeatureSchema:
    classes: Tuple[FeatureClass, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.classes:
            raise SchemaMismatchError("schema needs at least one target class")
        for c in self.classes:
            if c.dim < 1:
                raise SchemaMismatchError(f"class {c.name!r} has empty feature space")

    @classmethod
    def from_dims(cls, *dims: int) -> "FeatureSchema":
        return cls(tuple(FeatureClass(f"c{j}", d) for j, d in enumerate(dims)))

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureSchema":
        return cls(tuple(FeatureClass(c["name"], int(c["dim"])) for c in obj["classes"]))

    def to_json(self) -> dict:
        return {"classes": [{"name": c.name, "dim": c.dim} for c in self.classes]}

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(c.dim for c in self.classes)

    def max_entropy(self) -> float:
        """Upper bound on :func:`entropy_valuation` over any dataset."""
        return sum(math.log2(d) for d in self.dims)


@dataclass(frozen=True)
class AtomicDatum:
    """One piece of data. Identity (hash, equality) is the id alone."""

    id: Hashable
    features: Optional[Tuple[int, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.features is not None:
            object.__setattr__(self, "features", tuple(int(x) for x in self.features))


def _datum_id(d) -> Hashable:
    return d.id if isinstance(d, AtomicDatum) else d


class Distribution(NamedTuple):
    q: Tuple[np.ndarray, ...]
    empty: bool


def distribution(dataset: Iterable, schema: FeatureSchema) -> Distribution:
    """Empirical frequency of each feature, one vector per target class."""
    counts = [np.zeros(d) for d in schema.dims]
    n = 0
    for d in dataset:
        feats = d.features if isinstance(d, AtomicDatum) else None
        if feats is None or len(feats) != len(counts):
            raise SchemaMismatchError(f"datum {_datum_id(d)!r} does not match the schema")
        for j, x in enumerate(feats):
            if not 0 <= x < len(counts[j]):
                raise SchemaMismatchError(
                    f"datum {_datum_id(d)!r}: feature {x} outside class {j} of size {len(counts[j])}")
            counts[j][x] += 1
        n += 1
    if n == 0:
        return Distribution(tuple(counts), True)
    return Distribution(tuple(c / n for c in counts), False)


def _entropy_bits(q: np.ndarray) -> float:
    p = q[q > 0]
    return float(-(p * np.log2(p)).sum())


def entropy_valuation(dataset: Iterable, schema: FeatureSchema) -> float:
    """Sum over target classes of the base-2 entropy of the feature frequencies.

    Note this is bounded but *not* monotone: adding a datum whose features
    are already common lowers the entropy.
    """
    dist = distribution(dataset, schema)
    if dist.empty:
        return 0.0
    return sum(_entropy_bits(q) for q in dist.q)


def coverage_valuation(dataset: Iterable, universe_size: Optional[int] = None) -> float:
    """Number of distinct data. Ids must be integers in ``[0, universe_size)``."""
    ids = {_datum_id(d) for d in dataset}
    if universe_size is not None:
        for i in ids:
            if not isinstance(i, (int, np.integer)) or not 0 <= i < universe_size:
                raise InvalidDatumError(f"datum {i!r} outside universe of size {universe_size}")
    return float(len(ids))


class CoverageValuation:
    def __init__(self, universe_size: Optional[int] = None):
        self.universe_size = universe_size

    def __call__(self, dataset: Dataset) -> float:
        return coverage_valuation(dataset, self.universe_size)

    def __repr__(self):
        return f"CoverageValuation(universe_size={self.universe_size})"


class EntropyValuation:
    def __init__(self, schema: FeatureSchema):
        self.schema = schema

    def __call__(self, dataset: Dataset) -> float:
        return entropy_valuation(dataset, self.schema)

    def __repr__(self):
        return f"EntropyValuation(dims={self.schema.dims})"


def memoize(v: ValuationFn, maxsize: Optional[int] = 1 << 16) -> ValuationFn:
    """Cache ``v`` on the frozenset argument (hash of the id set)."""
    cached = lru_cache(maxsize=maxsize)(lambda ds: v(ds))

    def wrapped(dataset):
        return cached(frozenset(dataset))

    wrapped.cache_info = cached.cache_info
    wrapped.__wrapped__ = v
    return wrapped


def synthetic_schema(dims: Sequence[int] = (3, 5, 4)) -> FeatureSchema:
    return FeatureSchema.from_dims(*dims)


def featurize(item_ids: Iterable[int], schema: FeatureSchema, seed: int = 0) -> FrozenSet[AtomicDatum]:
    """Attach a deterministic pseudo-random feature vector to each integer id."""
    out = set()
    for i in item_ids:
        rng = np.random.default_rng([seed, int(i)])
        feats = tuple(int(rng.integers(d)) for d in schema.dims)
        out.add(AtomicDatum(int(i), feats))
    return frozenset(out)

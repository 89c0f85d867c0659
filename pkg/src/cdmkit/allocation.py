"""Shapley and layered Shapley data contributions.

``layered_shapley`` runs a standard Shapley computation inside each BFS layer,
with every worker of the shallower layers already in the coalition. Exact
values enumerate all subsets of the layer; wide layers fall back on a seeded
permutation-sampling estimate.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .errors import CapacityError
from .network import LayeredDag, WorkerId
from .valuation import Dataset, ValuationFn, memoize

EXACT_CAP = 20
_NUMPY_MIN_PLAYERS = 9


@dataclass
class DataContribution:
    values: Dict[WorkerId, float]
    method: str = "exact"
    samples: Optional[int] = None
    seed: Optional[int] = None
    layer_totals: List[float] = field(default_factory=list)

    def __getitem__(self, worker):
        return self.values[worker]

    def get(self, worker, default=0.0):
        return self.values.get(worker, default)

    def total(self):
        return sum(self.values.values())


def _subset_values(sets: Sequence[Dataset], v: ValuationFn, base: Dataset, conv) -> list:
    """``vals[mask] = v(base | union of sets in mask)`` for every bitmask.

    Depth-first, so only one running union per recursion level is alive.
    """
    n = len(sets)
    vals = [None] * (1 << n)

    def fill(start, mask, union):
        vals[mask] = conv(v(union))
        for b in range(start, n):
            fill(b + 1, mask | (1 << b), union | sets[b])

    fill(0, 0, frozenset(base))
    return vals


def _exact(players: Sequence[WorkerId], sets: Sequence[Dataset], v: ValuationFn,
           base: Dataset, rational: bool) -> Dict[WorkerId, float]:
    n = len(players)
    if n == 0:
        return {}
    conv = Fraction if rational else float
    vals = _subset_values(sets, v, base, conv)
    nf = factorial(n)
    if rational:
        weights = [Fraction(factorial(k) * factorial(n - k - 1), nf) for k in range(n)]
    else:
        weights = [factorial(k) * factorial(n - k - 1) / nf for k in range(n)]

    if not rational and n >= _NUMPY_MIN_PLAYERS:
        arr = np.asarray(vals, dtype=float)
        masks = np.arange(1 << n)
        w = np.asarray(weights + [0.0])[np.bitwise_count(masks)]
        out = {}
        for i, p in enumerate(players):
            bit = 1 << i
            sel = masks[(masks & bit) == 0]
            out[p] = float((w[sel] * (arr[sel | bit] - arr[sel])).sum())
        return out

    phi = [conv(0)] * n
    full = (1 << n) - 1
    for mask in range(full):
        wk = weights[bin(mask).count("1")]
        vm = vals[mask]
        for i in range(n):
            bit = 1 << i
            if not mask & bit:
                phi[i] += wk * (vals[mask | bit] - vm)
    return dict(zip(players, phi))


def _sampled(players: Sequence[WorkerId], sets: Sequence[Dataset], v: ValuationFn,
             base: Dataset, samples: int, rng: random.Random) -> Dict[WorkerId, float]:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n = len(players)
    if n == 0:
        return {}
    base = frozenset(base)
    v0 = float(v(base))
    acc = [0.0] * n
    order = list(range(n))
    for _ in range(samples):
        rng.shuffle(order)
        union, prev = base, v0
        for i in order:
            union = union | sets[i]
            cur = float(v(union))
            acc[i] += cur - prev
            prev = cur
    return {p: a / samples for p, a in zip(players, acc)}


def _sets_for(players, datasets) -> List[Dataset]:
    return [frozenset(datasets.get(p, ())) for p in players]


def shapley(workers: Iterable[WorkerId], datasets: Mapping[WorkerId, Iterable[Hashable]],
            v: ValuationFn, *, base: Dataset = frozenset(), exact_cap: int = EXACT_CAP,
            samples: Optional[int] = None, seed: Optional[int] = None,
            rational: bool = False) -> DataContribution:
    """Standard Shapley value of each worker for ``S -> v(base | D_S)``.

    Exact enumeration up to ``exact_cap`` workers; above that ``samples``
    must be given or :class:`CapacityError` is raised.
    """
    players = sorted(workers)
    sets = _sets_for(players, datasets)
    if len(players) <= exact_cap:
        return DataContribution(_exact(players, sets, v, base, rational))
    if samples is None:
        raise CapacityError(f"{len(players)} players exceed exact cap {exact_cap}; enable sampling")
    vals = _sampled(players, sets, v, base, samples, random.Random(seed))
    return DataContribution(vals, "sampled", samples, seed)


def _layer_loop(dag: LayeredDag, datasets, v, per_layer):
    values: Dict[WorkerId, float] = {}
    totals = []
    prior: frozenset = frozenset()
    for layer in dag.layers:
        players = list(layer)
        sets = _sets_for(players, datasets)
        vals = per_layer(players, sets, prior)
        values.update(vals)
        totals.append(sum(vals.values()))
        for s in sets:
            prior = prior | s
    return values, totals


def layered_shapley(dag: LayeredDag, datasets: Mapping[WorkerId, Iterable[Hashable]],
                    v: ValuationFn, *, exact_cap: int = EXACT_CAP,
                    samples: Optional[int] = None, seed: Optional[int] = None,
                    rational: bool = False, cache_size: Optional[int] = None) -> DataContribution:
    """Layered Shapley value of every worker in ``dag``.

    Layers are processed shallow to deep; each layer plays a Shapley game
    whose characteristic function is ``S -> v(D_prior | D_S)``. Layers wider
    than ``exact_cap`` are estimated by permutation sampling when ``samples``
    is given and rejected otherwise.
    """
    if cache_size is not None:
        v = memoize(v, cache_size)
    rng = random.Random(seed)
    sampled = False

    def per_layer(players, sets, prior):
        nonlocal sampled
        if len(players) <= exact_cap:
            return _exact(players, sets, v, prior, rational)
        if samples is None:
            raise CapacityError(
                f"layer of {len(players)} workers exceeds exact cap {exact_cap}; enable sampling")
        sampled = True
        return _sampled(players, sets, v, prior, samples, rng)

    values, totals = _layer_loop(dag, datasets, v, per_layer)
    if sampled:
        return DataContribution(values, "sampled", samples, seed, totals)
    return DataContribution(values, "exact", layer_totals=totals)


def sampled_layered_shapley(dag: LayeredDag, datasets: Mapping[WorkerId, Iterable[Hashable]],
                            v: ValuationFn, samples: int, seed: int,
                            cache_size: Optional[int] = 1 << 16) -> DataContribution:
    """Monte-Carlo layered Shapley: ``samples`` random orderings per layer."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if cache_size is not None:
        v = memoize(v, cache_size)
    rng = random.Random(seed)
    values, totals = _layer_loop(
        dag, datasets, v, lambda players, sets, prior: _sampled(players, sets, v, prior, samples, rng))
    return DataContribution(values, "sampled", samples, seed, totals)

"""Property checks for mechanisms: truthfulness, budget, reward growth, data coverage.

The incentive check is brute force: every downward deviation of every worker
(a subset of its data, a subset of its children) is replayed through the
mechanism after dropping the workers the deviation cuts off.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple

from .diffusion import DiffusionMatrix
from .mechanism import MechanismParams, PayoffReport, run_cdm
from .network import Network, Report, ReportProfile, WorkerId, restrict_profile
from .valuation import CoverageValuation, ValuationFn

TOL = 1e-9

Instance = Tuple[Network, ReportProfile, ValuationFn]


@dataclass(frozen=True)
class Deviation:
    worker: WorkerId
    dataset: frozenset
    children: frozenset

    def as_report(self) -> Report:
        return Report(self.dataset, self.children)


def _subsets(items: Sequence) -> Iterator[frozenset]:
    for r in range(len(items) + 1):
        for combo in itertools.combinations(items, r):
            yield frozenset(combo)


def enumerate_deviations(base: Network, truth: ReportProfile, worker: WorkerId, *,
                         cap: int = 4, samples: int = 64, seed: int = 0) -> Iterator[Deviation]:
    """All (data subset, children subset) pairs, or a seeded sample of them.

    Exhaustive when both the true dataset and the child set have at most
    ``cap`` elements; otherwise ``samples`` random pairs are drawn.
    Fabricated data and invented children are outside the type space.
    """
    rep = truth.get(worker)
    if rep is None:
        return
    data = sorted(rep.dataset, key=repr)
    kids = sorted(base.children(worker))
    if len(data) <= cap and len(kids) <= cap:
        for ds in _subsets(data):
            for cs in _subsets(kids):
                yield Deviation(worker, ds, cs)
        return
    rng = random.Random(seed)
    for _ in range(samples):
        ds = frozenset(d for d in data if rng.random() < 0.5)
        cs = frozenset(c for c in kids if rng.random() < 0.5)
        yield Deviation(worker, ds, cs)


@dataclass
class IcViolation:
    worker: WorkerId
    deviation: Deviation
    truthful_payoff: float
    deviated_payoff: float


@dataclass
class IcReport:
    instance_id: object = None
    deviations_checked: int = 0
    violations: List[IcViolation] = field(default_factory=list)
    margin_violations: List[Tuple[WorkerId, WorkerId, float, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.margin_violations

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "deviations_checked": self.deviations_checked,
            "violations": [
                {"worker": x.worker,
                 "dataset": sorted(map(repr, x.deviation.dataset)),
                 "children": sorted(x.deviation.children),
                 "truthful_payoff": float(x.truthful_payoff),
                 "deviated_payoff": float(x.deviated_payoff)}
                for x in self.violations
            ],
            "margin_violations": [list(map(float, m[2:])) + [m[0], m[1]] for m in self.margin_violations],
        }


def _runner(mechanism, v, params):
    if params is None:
        return lambda base, profile: mechanism(base, profile, v)
    return lambda base, profile: mechanism(base, profile, v, params)


def check_ic(base: Network, truth: ReportProfile, mechanism: Callable[..., PayoffReport],
             v: ValuationFn, params: Optional[MechanismParams] = None, *, tol: float = TOL,
             cap: int = 4, samples: int = 64, seed: int = 0, instance_id=None) -> IcReport:
    """Replay every deviation of every worker and record profitable ones.

    ``mechanism`` is called as ``mechanism(base, profile, v[, params])``.
    When a deviation withholds data and the report carries a diffusion
    matrix, the bound ``mu * pi[i, j] < lam * phi_j`` is also checked for
    every successor ``j`` with positive contribution.
    """
    run = _runner(mechanism, v, params)
    report = IcReport(instance_id)
    honest = run(base, truth)
    for w in sorted(base.workers):
        rep = truth.get(w)
        if rep is None or w not in honest.total:
            continue
        p_true = honest.payoff(w)
        for dev in enumerate_deviations(base, truth, w, cap=cap, samples=samples, seed=seed):
            report.deviations_checked += 1
            if dev.dataset == rep.dataset and dev.children == rep.children:
                continue
            profile = restrict_profile(base, truth, w, dev.as_report(), rep.dataset)
            out = run(base, profile)
            p_dev = out.payoff(w)
            if p_dev > p_true + tol:
                report.violations.append(IcViolation(w, dev, p_true, p_dev))
            if params is not None and dev.dataset < rep.dataset and out.matrix is not None:
                _check_margin(w, out, params, report)
    return report


def _check_margin(w, out: PayoffReport, params: MechanismParams, report: IcReport) -> None:
    for (i, j), x in out.matrix.pi.items():
        if i != w:
            continue
        phi_j = out.phi.get(j, 0.0)
        if phi_j > TOL and not params.mu * x < params.lam * phi_j:
            report.margin_violations.append((w, j, params.mu * x, params.lam * phi_j))


def credit_bound_violations(matrix: DiffusionMatrix, phi, alpha, gamma, tol: float = TOL):
    """Targets whose predecessors' total credit exceeds ``gamma/(1-gamma)*alpha*phi_j``."""
    sums = {}
    for (i, j), x in matrix.pi.items():
        if i != matrix.requester:
            sums[j] = sums.get(j, 0) + x
    bad = []
    for j, total in sums.items():
        bound = gamma / (1 - gamma) * alpha * phi.get(j, 0)
        if total > bound + tol:
            bad.append((j, total, bound))
    return bad


@dataclass
class BudgetReport:
    passed: bool
    checked: int
    worst_ratio: float
    worst_tight_ratio: float
    failures: List[dict] = field(default_factory=list)


def check_budget(instances: Iterable[Instance], params: MechanismParams, *,
                 tol: float = TOL) -> BudgetReport:
    """Requester payment against collected value on every instance.

    Asserts ``P <= lam/(1-gamma) * sum(phi_hat)`` always, and with valid
    (unrelaxed) parameters also ``P <= 2*lam*v(D_N) <= v(D_N)``.
    ``worst_ratio`` is the largest ``P / v(D_N)`` (0 when nothing was
    collected) and ``worst_tight_ratio`` the largest ``P / (2*lam*v(D_N))``.
    """
    strict = not params.violations()
    worst = worst_tight = 0.0
    failures = []
    n = 0
    for idx, (base, profile, v) in enumerate(instances):
        n += 1
        rep = run_cdm(base, profile, v, params)
        pay, value = rep.requester_payment, rep.collected_value
        chain = params.lam / (1 - params.gamma) * sum(rep.phi.values())
        problems = []
        if pay > chain + tol:
            problems.append("intermediate")
        if value > 0:
            worst = max(worst, pay / value)
            if params.lam > 0:
                worst_tight = max(worst_tight, pay / (2 * params.lam * value))
        if strict and (pay > value + tol or pay > 2 * params.lam * value + tol):
            problems.append("budget")
        over = credit_bound_violations(rep.matrix, rep.phi, params.alpha, params.gamma)
        if over:
            problems.append("credit_bound")
        if problems:
            failures.append({"instance": idx, "payment": pay, "value": value, "problems": problems})
    return BudgetReport(not failures, n, worst, worst_tight, failures)


def urc_chain(depth: int, items_per_worker: int = 1, fresh: bool = True,
              own_items: int = 1) -> Tuple[Network, dict]:
    """Chain ``s -> 1 -> ... -> depth``; worker 1 has ``own_items`` data.

    Deeper workers hold ``items_per_worker`` new data each when ``fresh``,
    otherwise copies of worker 1's data.
    """
    edges = [(0, 1)] + [(k, k + 1) for k in range(1, depth)]
    base = Network.from_edges(edges)
    mine = frozenset(range(own_items))
    datasets = {1: mine}
    nxt = own_items
    for k in range(2, depth + 1):
        if fresh:
            datasets[k] = frozenset(range(nxt, nxt + items_per_worker))
            nxt += items_per_worker
        else:
            datasets[k] = mine
    return base, datasets


def urc_tree(depth: int, branching: int = 2, own_items: int = 1) -> Tuple[Network, dict]:
    """Worker 1 (one parent, one child) on top of a full tree of fresh data."""
    edges = [(0, 1), (1, 2)]
    frontier, nxt_id = [2], 3
    for _ in range(depth - 2):
        new = []
        for u in frontier:
            for _ in range(branching):
                edges.append((u, nxt_id))
                new.append(nxt_id)
                nxt_id += 1
        frontier = new
    base = Network.from_edges(edges)
    datasets = {1: frozenset(range(own_items))}
    item = own_items
    for w in sorted(base.workers - {1}):
        datasets[w] = frozenset([item])
        item += 1
    return base, datasets


def check_urc_growth(depths: Iterable[int], params: MechanismParams, *, family: str = "chain",
                     worker: WorkerId = 1, **family_kw) -> List[dict]:
    """Payoff of ``worker`` (degree <= 2) as the network below it grows."""
    from .network import truthful_profile

    build = {"chain": urc_chain, "tree": urc_tree}[family]
    rows = []
    for d in depths:
        base, datasets = build(d, **family_kw)
        rep = run_cdm(base, truthful_profile(base, datasets), CoverageValuation(), params)
        degree = len(base.children(worker)) + len(base.parents(worker))
        rows.append({
            "depth": d,
            "workers": len(base.workers),
            "degree": degree,
            "payoff": rep.payoff(worker),
            "data_payoff": rep.data_payoff[worker],
            "diffusion_payoff": rep.diffusion_payoff[worker],
            "max_payoff": max(rep.total.values()),
        })
    return rows


@dataclass
class DominanceReport:
    passed: bool
    checked: int
    strict: int
    failures: List[int] = field(default_factory=list)


def check_data_dominance(instances: Iterable[Instance]) -> DominanceReport:
    """Value collected from all workers vs from the requester's neighbours only."""
    checked = strict = 0
    failures = []
    for idx, (base, profile, v) in enumerate(instances):
        checked += 1
        everyone = frozenset().union(*(r.dataset for r in profile.values() if r is not None))
        near = frozenset().union(*(profile[w].dataset for w in base.children(base.requester)
                                   if profile.get(w) is not None))
        full, local = v(everyone), v(near)
        if full + TOL < local:
            failures.append(idx)
        elif full > local + TOL:
            strict += 1
    return DominanceReport(not failures, checked, strict, failures)

"""CDM payoffs and the baseline crowdsourcing mechanisms.

Every mechanism takes ``(base, profile, v, ...)`` and returns a
:class:`PayoffReport`. CDM pays ``lam * phi_hat_i + mu * pi_i``; the
baselines pay a fixed fee or a plain Shapley value, with or without
diffusion beyond the requester's neighbours.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional

from .allocation import EXACT_CAP, DataContribution, layered_shapley, shapley
from .diffusion import DiffusionMatrix, diffusion_contributions, total_diffusion
from .errors import FeasibilityError, ParamsError
from .network import Network, ReportProfile, WorkerId, generate_network, is_feasible, layerize
from .valuation import ValuationFn

log = logging.getLogger(__name__)
_warned: set = set()


@dataclass(frozen=True)
class MechanismParams:
    lam: float = 0.5
    mu: float = 0.5
    alpha: float = 1.0
    gamma: float = 0.5
    relax: bool = False

    def violations(self):
        out = []
        if not 0 < self.gamma <= 0.5:
            out.append("0 < gamma <= 1/2")
        if not 0 < self.alpha <= 1:
            out.append("0 < alpha <= 1")
        if not 0 < self.alpha * self.mu <= self.lam <= 0.5:
            out.append("0 < alpha*mu <= lambda <= 1/2")
        return out

    def validate(self) -> "MechanismParams":
        bad = self.violations()
        if not bad:
            return self
        if not self.relax:
            raise ParamsError("invalid mechanism parameters: " + "; ".join(bad))
        if not (0 < self.gamma < 1 and self.alpha > 0 and self.lam >= 0 and self.mu >= 0):
            raise ParamsError(f"parameters unusable even when relaxed: {self}")
        if self not in _warned:
            _warned.add(self)
            log.warning("relaxed parameters violate %s; the budget guarantee no longer holds",
                        ", ".join(bad))
        return self


EXPERIMENT_PARAMS = MechanismParams(lam=1.0, mu=1.0, alpha=0.1, gamma=0.5, relax=True)


@dataclass
class PayoffReport:
    mechanism: str
    data_payoff: Dict[WorkerId, float]
    diffusion_payoff: Dict[WorkerId, float]
    total: Dict[WorkerId, float]
    requester_payment: float
    collected_value: float
    workers_reached: int
    phi: Dict[WorkerId, float] = field(default_factory=dict)
    pi: Dict[WorkerId, float] = field(default_factory=dict)
    matrix: Optional[DiffusionMatrix] = None
    params: Optional[MechanismParams] = None

    def payoff(self, worker: WorkerId) -> float:
        return self.total.get(worker, 0.0)

    def to_dict(self) -> dict:
        workers = sorted(self.total)
        return {
            "mechanism": self.mechanism,
            "params": ({k: (x if isinstance(x, bool) else float(x))
                        for k, x in asdict(self.params).items()} if self.params else None),
            "requester_payment": float(self.requester_payment),
            "collected_value": float(self.collected_value),
            "workers_reached": self.workers_reached,
            "workers": {
                str(w): {
                    "data_contribution": float(self.phi.get(w, 0.0)),
                    "diffusion_contribution": float(self.pi.get(w, 0.0)),
                    "data_payoff": float(self.data_payoff.get(w, 0.0)),
                    "diffusion_payoff": float(self.diffusion_payoff.get(w, 0.0)),
                    "total": float(self.total[w]),
                }
                for w in workers
            },
        }


def _union(datasets) -> frozenset:
    out: frozenset = frozenset()
    for d in datasets:
        out = out | d
    return out


def _participants(base: Network, profile: ReportProfile):
    if not is_feasible(base, profile):
        raise FeasibilityError("some participating worker is not reachable from the requester")
    gen = generate_network(base, profile)
    return gen, sorted(gen.workers)


def _neighbours(base: Network, profile: ReportProfile):
    return sorted(w for w in base.children(base.requester) if profile.get(w) is not None)


def run_cdm(base: Network, profile: ReportProfile, v: ValuationFn, params: MechanismParams,
            *, exact_cap: int = EXACT_CAP, samples: Optional[int] = None,
            seed: Optional[int] = None, rational: bool = False) -> PayoffReport:
    """Crowdsourcing diffusion mechanism on a feasible report profile."""
    params.validate()
    gen, workers = _participants(base, profile)
    dag = layerize(gen)
    datasets = {w: profile[w].dataset for w in workers}
    phi = layered_shapley(dag, datasets, v, exact_cap=exact_cap, samples=samples,
                          seed=seed, rational=rational)
    matrix = diffusion_contributions(dag, phi, params.alpha, params.gamma,
                                     check=not params.relax)
    pi = total_diffusion(matrix)
    lam, mu = params.lam, params.mu
    data_pay = {w: lam * phi.get(w, 0) for w in workers}
    diff_pay = {w: mu * pi.get(w, 0) for w in workers}
    total = {w: data_pay[w] + diff_pay[w] for w in workers}
    return PayoffReport(
        mechanism="CDM",
        data_payoff=data_pay,
        diffusion_payoff=diff_pay,
        total=total,
        requester_payment=sum(total.values()),
        collected_value=v(_union(datasets.values())),
        workers_reached=len(workers),
        phi=dict(phi.values),
        pi={w: pi.get(w, 0) for w in workers},
        matrix=matrix,
        params=params,
    )


def _fixed_fee(name, workers, datasets, v, epsilon) -> PayoffReport:
    if epsilon < 0:
        raise ParamsError("epsilon must be non-negative")
    total = {w: epsilon for w in workers}
    return PayoffReport(
        mechanism=name,
        data_payoff=dict(total),
        diffusion_payoff={w: 0.0 for w in workers},
        total=total,
        requester_payment=epsilon * len(workers),
        collected_value=v(_union(datasets)),
        workers_reached=len(workers),
    )


def _shapley_report(name, workers, datasets, v, **kw) -> PayoffReport:
    data = {w: datasets[w] for w in workers}
    phi: DataContribution = shapley(workers, data, v, **kw)
    total = dict(phi.values)
    return PayoffReport(
        mechanism=name,
        data_payoff=dict(total),
        diffusion_payoff={w: 0.0 for w in workers},
        total=total,
        requester_payment=sum(total.values()),
        collected_value=v(_union(data.values())),
        workers_reached=len(workers),
        phi=dict(total),
    )


def run_nondiff_eps(base: Network, profile: ReportProfile, v: ValuationFn, epsilon: float) -> PayoffReport:
    """Fixed fee ``epsilon`` to each of the requester's participating neighbours."""
    workers = _neighbours(base, profile)
    return _fixed_fee("NonDiff_eps", workers, [profile[w].dataset for w in workers], v, epsilon)


def run_nondiff_shapley(base: Network, profile: ReportProfile, v: ValuationFn,
                        **kw) -> PayoffReport:
    """Standard Shapley value among the requester's participating neighbours."""
    workers = _neighbours(base, profile)
    return _shapley_report("NonDiff_shapley", workers,
                           {w: profile[w].dataset for w in workers}, v, **kw)


def run_diff_eps(base: Network, profile: ReportProfile, v: ValuationFn, epsilon: float) -> PayoffReport:
    """Fixed fee ``epsilon`` to every participant of the generated network."""
    _, workers = _participants(base, profile)
    return _fixed_fee("Diff_eps", workers, [profile[w].dataset for w in workers], v, epsilon)


def run_diff_shapley(base: Network, profile: ReportProfile, v: ValuationFn, **kw) -> PayoffReport:
    """Standard Shapley value over the whole generated network (not IC)."""
    _, workers = _participants(base, profile)
    return _shapley_report("Diff_shapley", workers,
                           {w: profile[w].dataset for w in workers}, v, **kw)


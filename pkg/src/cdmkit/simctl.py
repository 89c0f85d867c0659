"""Experiment runner and command line front end.

    simctl run --workers 15 --trials 20 --seed 1 --out results.csv
    simctl verify --suite ic --seed 1
    simctl payoff --instance net.json --lambda 0.5 --mu 0.5 --alpha 1 --gamma 0.5
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from . import mechanism as mech
from .instance import instance_to_json, load_instance
from .mechanism import EXPERIMENT_PARAMS, MechanismParams
from .network import Network, truthful_profile
from .valuation import CoverageValuation, EntropyValuation, featurize, memoize, synthetic_schema
from .verify import (
    check_budget,
    check_data_dominance,
    check_ic,
    check_urc_growth,
)

log = logging.getLogger("simctl")

MECHANISMS = ("NonDiff_eps", "NonDiff_shapley", "Diff_eps", "CDM")


@dataclass(frozen=True)
class ExperimentConfig:
    n_workers: int = 15
    universe_size: int = 100
    max_data_per_worker: int = 20
    min_data_per_worker: int = 1
    trials: int = 20
    max_depth: int = 4
    density: float = 0.15
    max_children: Optional[int] = None
    seed: int = 0
    params: MechanismParams = EXPERIMENT_PARAMS
    valuation: str = "coverage"
    epsilon_mode: str = "size"
    exact_cap: int = 20
    samples: int = 2000

    def __post_init__(self):
        if self.n_workers < 1:
            raise ValueError("n_workers must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.min_data_per_worker <= self.max_data_per_worker <= self.universe_size:
            raise ValueError("need 0 <= min_data <= max_data <= universe_size")
        if not 0 <= self.density <= 1:
            raise ValueError("density must be in [0, 1]")
        if self.valuation not in ("coverage", "entropy"):
            raise ValueError(f"unknown valuation {self.valuation!r}")
        if self.epsilon_mode not in ("size", "value"):
            raise ValueError(f"unknown epsilon mode {self.epsilon_mode!r}")


class Instance(NamedTuple):
    base: Network
    profile: dict
    datasets: dict


def generate_instance(config: ExperimentConfig, trial_index: int) -> Instance:
    """Random single-source layered network with random data.

    Workers get a random layer in ``1..max_depth``; each worker below the
    first layer gets one parent drawn from the shallower workers, then every
    (shallower, deeper) pair is linked with probability ``density``.
    ``max_children`` caps a worker's out-degree (a worker with no free
    shallower parent hangs off the requester).
    """
    rng = np.random.default_rng([config.seed, trial_index])
    n = config.n_workers
    workers = list(range(1, n + 1))
    raw = rng.integers(1, config.max_depth + 1, size=n)
    raw[0] = 1
    levels = {v: k + 1 for k, v in enumerate(sorted(set(raw.tolist())))}
    layer = {w: levels[int(raw[w - 1])] for w in workers}

    cap = config.max_children
    edges = set()
    outdeg = {w: 0 for w in workers}

    def link(u, v):
        edges.add((u, v))
        if u:
            outdeg[u] += 1

    for w in workers:
        if layer[w] == 1:
            link(0, w)
            continue
        shallower = [u for u in workers if layer[u] < layer[w] and (cap is None or outdeg[u] < cap)]
        if shallower:
            link(shallower[int(rng.integers(len(shallower)))], w)
        else:
            link(0, w)
    for v in workers:
        for u in workers:
            if layer[u] < layer[v] and (u, v) not in edges and rng.random() < config.density:
                if cap is None or outdeg[u] < cap:
                    link(u, v)

    base = Network.from_edges(sorted(edges), workers=workers)
    datasets = {}
    for w in workers:
        size = int(rng.integers(config.min_data_per_worker, config.max_data_per_worker + 1))
        items = rng.choice(config.universe_size, size=size, replace=False)
        datasets[w] = frozenset(int(x) for x in items)
    if config.valuation == "entropy":
        schema = synthetic_schema()
        datasets = {w: featurize(ds, schema, seed=config.seed) for w, ds in datasets.items()}
    return Instance(base, truthful_profile(base, datasets), datasets)


def make_valuation(config: ExperimentConfig):
    if config.valuation == "entropy":
        return EntropyValuation(synthetic_schema())
    return CoverageValuation(config.universe_size)


def instance_digest(inst: Instance) -> str:
    blob = json.dumps(instance_to_json(inst.base, inst.datasets), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class MechanismOutcome:
    collected_value: float
    expenditure: float
    workers_reached: int


@dataclass
class TrialResult:
    trial: int
    seed: int
    digest: str
    epsilon: float
    outcomes: Dict[str, MechanismOutcome]
    cdm_phi_total: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trials: List[TrialResult]
    summary: Dict[str, Dict[str, float]] = field(default_factory=dict)


def epsilon_for(config: ExperimentConfig, inst: Instance, v) -> float:
    n = len(inst.datasets)
    if config.epsilon_mode == "value":
        return v(frozenset().union(*inst.datasets.values())) / n
    return sum(len(d) for d in inst.datasets.values()) / n


def run_trial(config: ExperimentConfig, trial_index: int) -> TrialResult:
    inst = generate_instance(config, trial_index)
    v = memoize(make_valuation(config))
    eps = epsilon_for(config, inst, v)
    base, profile = inst.base, inst.profile
    kw = dict(exact_cap=config.exact_cap, samples=config.samples, seed=config.seed)
    reports = {
        "NonDiff_eps": mech.run_nondiff_eps(base, profile, v, eps),
        "NonDiff_shapley": mech.run_nondiff_shapley(base, profile, v, **kw),
        "Diff_eps": mech.run_diff_eps(base, profile, v, eps),
        "CDM": mech.run_cdm(base, profile, v, config.params, **kw),
    }
    outcomes = {
        name: MechanismOutcome(float(r.collected_value), float(r.requester_payment), r.workers_reached)
        for name, r in reports.items()
    }
    return TrialResult(trial_index, config.seed, instance_digest(inst), float(eps), outcomes,
                       float(sum(reports["CDM"].phi.values())))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CDMKIT_THREADS", "1")))
    except ValueError:
        return 1


def summarize(trials: List[TrialResult]) -> Dict[str, Dict[str, float]]:
    out = {}
    for name in MECHANISMS:
        rows = [t.outcomes[name] for t in trials]
        stats = {}
        for key in ("collected_value", "expenditure", "workers_reached"):
            xs = [float(getattr(r, key)) for r in rows]
            stats[f"{key}_mean"] = statistics.fmean(xs)
            stats[f"{key}_std"] = statistics.pstdev(xs)
        out[name] = stats
    return out


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """All four mechanisms on ``config.trials`` random truthful instances."""
    config.params.validate()
    threads = min(_threads(), config.trials)
    idx = range(config.trials)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            trials = list(pool.map(run_trial, [config] * config.trials, idx))
    else:
        trials = [run_trial(config, i) for i in idx]
    return ExperimentResult(config, trials, summarize(trials))


CSV_COLUMNS = ["trial", "mechanism", "collected_value", "expenditure", "workers_reached", "seed"]


def plot_data(result: ExperimentResult) -> dict:
    series = {}
    for name in MECHANISMS:
        series[name] = {
            "trial": [t.trial for t in result.trials],
            "collected_value": [t.outcomes[name].collected_value for t in result.trials],
            "expenditure": [t.outcomes[name].expenditure for t in result.trials],
            "workers_reached": [t.outcomes[name].workers_reached for t in result.trials],
        }
    return {"mechanisms": list(MECHANISMS), "series": series, "summary": result.summary}


def export_results(result: ExperimentResult, fmt: str, path) -> None:
    """Write ``csv``, ``json`` (one object per trial) or ``plot`` (series per mechanism)."""
    if not result.trials:
        raise ValueError("no results to export")
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for t in result.trials:
                for name in MECHANISMS:
                    o = t.outcomes[name]
                    writer.writerow([t.trial, name, repr(o.collected_value), repr(o.expenditure),
                                     o.workers_reached, t.seed])
    elif fmt == "json":
        payload = {"summary": result.summary, "trials": [t.to_dict() for t in result.trials]}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    elif fmt == "plot":
        with open(path, "w") as fh:
            json.dump(plot_data(result), fh, indent=2, sort_keys=True)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def load_trials(path) -> List[TrialResult]:
    with open(path) as fh:
        payload = json.load(fh)
    out = []
    for t in payload["trials"]:
        outcomes = {k: MechanismOutcome(**o) for k, o in t["outcomes"].items()}
        out.append(TrialResult(t["trial"], t["seed"], t["digest"], t["epsilon"], outcomes,
                               t.get("cdm_phi_total", 0.0)))
    return out


# --- verification suites -------------------------------------------------

STRICT_PARAMS = MechanismParams(lam=0.5, mu=0.5, alpha=1.0, gamma=0.5)


def small_config(seed: int, index: int, max_workers: int = 8) -> ExperimentConfig:
    """Config for the brute-force truthfulness checks: tiny, overlapping data."""
    rng = np.random.default_rng([seed, index, 7])
    return ExperimentConfig(
        n_workers=int(rng.integers(2, max_workers + 1)),
        universe_size=6,
        max_data_per_worker=3,
        min_data_per_worker=1,
        max_depth=3,
        density=0.35,
        max_children=3,
        seed=seed,
    )


def ic_instances(seed: int, count: int, max_workers: int = 8):
    for i in range(count):
        cfg = small_config(seed, i, max_workers)
        yield i, generate_instance(cfg, i), CoverageValuation(cfg.universe_size)


def budget_instances(seed: int, count: int, max_workers: int = 12, valuation: str = "coverage"):
    rng = np.random.default_rng([seed, 11])
    for i in range(count):
        cfg = ExperimentConfig(
            n_workers=int(rng.integers(1, max_workers + 1)),
            universe_size=30,
            max_data_per_worker=8,
            max_depth=int(rng.integers(1, 6)),
            density=float(rng.uniform(0, 0.6)),
            seed=seed,
            valuation=valuation,
        )
        inst = generate_instance(cfg, i)
        yield inst.base, inst.profile, memoize(make_valuation(cfg))


def suite_ic(seed: int, count: int, mechanism: str = "cdm") -> dict:
    fn = {"cdm": mech.run_cdm, "diff_shapley": mech.run_diff_shapley}[mechanism]
    params = STRICT_PARAMS if mechanism == "cdm" else None
    reports = []
    for i, inst, v in ic_instances(seed, count):
        rep = check_ic(inst.base, inst.profile, fn, memoize(v), params, instance_id=i)
        reports.append(rep)
    bad = [r.to_dict() for r in reports if not r.ok]
    return {
        "suite": "ic",
        "mechanism": mechanism,
        "instances": len(reports),
        "deviations_checked": sum(r.deviations_checked for r in reports),
        "violating_instances": len(bad),
        "details": bad,
        "ok": not bad,
    }


def suite_budget(seed: int, count: int) -> dict:
    rep = check_budget(budget_instances(seed, count), STRICT_PARAMS)
    return {"suite": "budget", "ok": rep.passed, "instances": rep.checked,
            "worst_ratio": rep.worst_ratio, "worst_tight_ratio": rep.worst_tight_ratio,
            "failures": rep.failures}


def suite_dominance(seed: int, count: int) -> dict:
    cfg = ExperimentConfig(seed=seed)
    insts = (generate_instance(cfg, i) for i in range(count))
    rep = check_data_dominance((i.base, i.profile, make_valuation(cfg)) for i in insts)
    return {"suite": "dominance", "ok": rep.passed, "instances": rep.checked,
            "strict": rep.strict, "failures": rep.failures}


def suite_urc(seed: int, count: int) -> dict:
    rows = check_urc_growth(range(2, 2 + count), STRICT_PARAMS, family="chain")
    pays = [r["payoff"] for r in rows]
    ok = all(b >= a - 1e-12 for a, b in zip(pays, pays[1:])) and pays[-1] > pays[0]
    return {"suite": "urc", "ok": ok, "table": rows}


SUITES = {"ic": suite_ic, "budget": suite_budget, "dominance": suite_dominance, "urc": suite_urc}


# --- CLI -----------------------------------------------------------------

def _params_from(args) -> MechanismParams:
    return MechanismParams(lam=args.lam, mu=args.mu, alpha=args.alpha, gamma=args.gamma,
                           relax=args.relax)


def _add_param_flags(p, lam, mu, alpha, gamma, relax):
    p.add_argument("--lambda", dest="lam", type=float, default=lam)
    p.add_argument("--mu", type=float, default=mu)
    p.add_argument("--alpha", type=float, default=alpha)
    p.add_argument("--gamma", type=float, default=gamma)
    p.add_argument("--relax", action=argparse.BooleanOptionalAction, default=relax,
                   help="allow parameters outside 0 < alpha*mu <= lambda <= 1/2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simctl", description=__doc__.strip().splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="four-mechanism comparison on random networks")
    run.add_argument("--workers", type=int, default=15)
    run.add_argument("--universe", type=int, default=100)
    run.add_argument("--max-data", type=int, default=20)
    run.add_argument("--trials", type=int, default=20)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--depth", type=int, default=4, help="maximum number of generated layers")
    run.add_argument("--density", type=float, default=0.15, help="extra forward-edge probability")
    run.add_argument("--valuation", choices=("coverage", "entropy"), default="coverage")
    run.add_argument("--eps-mode", choices=("size", "value"), default="size",
                     help="fixed fee = mean dataset size (size) or v(D_N)/n (value)")
    _add_param_flags(run, 1.0, 1.0, 0.1, 0.5, True)
    run.add_argument("--out", help="CSV output path")
    run.add_argument("--json", help="per-trial JSON output path")
    run.add_argument("--plot", help="plot-data JSON output path")

    ver = sub.add_parser("verify", help="run a property-check suite")
    ver.add_argument("--suite", choices=sorted(SUITES), required=True)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--instances", type=int, default=None)
    ver.add_argument("--mechanism", choices=("cdm", "diff_shapley"), default="cdm",
                     help="mechanism under test for the ic suite")
    ver.add_argument("--json", help="write the report here as well as to stdout")

    pay = sub.add_parser("payoff", help="payoff report for one instance file")
    pay.add_argument("--instance", required=True)
    pay.add_argument("--mechanism", default="cdm",
                     choices=("cdm", "nondiff_eps", "nondiff_shapley", "diff_eps", "diff_shapley"))
    pay.add_argument("--epsilon", type=float, default=1.0)
    pay.add_argument("--valuation", choices=("coverage", "entropy"), default="coverage")
    _add_param_flags(pay, 0.5, 0.5, 1.0, 0.5, False)
    return parser


def _cmd_run(args) -> int:
    cfg = ExperimentConfig(
        n_workers=args.workers, universe_size=args.universe, max_data_per_worker=args.max_data,
        trials=args.trials, seed=args.seed, max_depth=args.depth, density=args.density,
        valuation=args.valuation, epsilon_mode=args.eps_mode, params=_params_from(args),
    )
    result = run_experiment(cfg)
    if args.out:
        export_results(result, "csv", args.out)
    if args.json:
        export_results(result, "json", args.json)
    if args.plot:
        export_results(result, "plot", args.plot)
    print(f"{'mechanism':<16} {'collected':>10} {'expenditure':>12} {'reached':>8}")
    for name, s in result.summary.items():
        print(f"{name:<16} {s['collected_value_mean']:>10.3f} {s['expenditure_mean']:>12.3f} "
              f"{s['workers_reached_mean']:>8.2f}")
    return 0


_DEFAULT_COUNTS = {"ic": 200, "budget": 500, "dominance": 100, "urc": 10}


def _cmd_verify(args) -> int:
    count = args.instances or _DEFAULT_COUNTS[args.suite]
    if args.suite == "ic":
        out = suite_ic(args.seed, count, args.mechanism)
        # a non-truthful baseline is expected to fail
        unexpected = (not out["ok"]) if args.mechanism == "cdm" else False
    else:
        out = SUITES[args.suite](args.seed, count)
        unexpected = not out["ok"]
    text = json.dumps(out, indent=2, default=str)
    print(text)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(text + "\n")
    return 1 if unexpected else 0


def _cmd_payoff(args) -> int:
    inst = load_instance(args.instance)
    v = inst.valuation(args.valuation)
    profile = inst.truthful_profile()
    if args.mechanism == "cdm":
        rep = mech.run_cdm(inst.base, profile, v, _params_from(args))
    elif args.mechanism in ("nondiff_eps", "diff_eps"):
        rep = getattr(mech, f"run_{args.mechanism}")(inst.base, profile, v, args.epsilon)
    else:
        rep = getattr(mech, f"run_{args.mechanism}")(inst.base, profile, v)
    print(json.dumps(rep.to_dict(), indent=2))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "verify": _cmd_verify, "payoff": _cmd_payoff}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())

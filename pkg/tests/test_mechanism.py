import json
import logging
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cdmkit.errors import FeasibilityError, ParamsError
from cdmkit.mechanism import (
    EXPERIMENT_PARAMS,
    MechanismParams,
    run_cdm,
    run_diff_eps,
    run_diff_shapley,
    run_nondiff_eps,
    run_nondiff_shapley,
)
from cdmkit.network import Network, Report, restrict_profile, truthful_profile
from cdmkit.valuation import CoverageValuation

from oracles import recursive_diffusion, layered_by_permutations

cov = CoverageValuation()
HALF = Fraction(1, 2)
STRICT = MechanismParams(HALF, HALF, 1, HALF)


def layered_datasets():
    return {1: {"a", "b"}, 2: {"b", "c"}, 3: {"d"}, 4: {"a"}, 5: {"e", "b"}, 6: {"e"},
            7: {"f"}, 8: {"e", "f"}, 9: {"g"}}


class TestParams:
    def test_defaults_valid(self):
        assert MechanismParams().validate().violations() == []

    @pytest.mark.parametrize("kw", [dict(gamma=0.6), dict(alpha=0), dict(lam=0.6),
                                    dict(lam=0.2, mu=0.5, alpha=1)])
    def test_strict_rejects(self, kw):
        with pytest.raises(ParamsError):
            MechanismParams(**kw).validate()

    def test_relaxed_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            MechanismParams(lam=1.0, mu=1.0, alpha=0.2, gamma=0.5, relax=True).validate()
        assert "budget" in caplog.text
        EXPERIMENT_PARAMS.validate()

    def test_relaxed_still_needs_sane_gamma(self):
        with pytest.raises(ParamsError):
            MechanismParams(lam=1, mu=1, alpha=0.1, gamma=1.0, relax=True).validate()


class TestCdm:
    def test_single_worker(self):
        base = Network.from_edges([(0, 1)])
        rep = run_cdm(base, truthful_profile(base, {1: {"a", "b"}}), cov, STRICT)
        assert rep.total == {1: 1.0}
        assert rep.diffusion_payoff[1] == 0
        assert rep.requester_payment == 1.0 and rep.collected_value == 2.0

    def test_example_matches_oracles(self, layered_net):
        data = layered_datasets()
        rep = run_cdm(layered_net, truthful_profile(layered_net, data), cov, STRICT, rational=True)
        phi = layered_by_permutations(layered_net.edges, 0, data, cov)
        pairs = recursive_diffusion(layered_net.edges, 0, phi, 1, HALF)
        for w in layered_net.workers:
            pi_w = sum(x for (i, _), x in pairs.items() if i == w)
            assert rep.phi[w] == phi[w]
            assert rep.pi[w] == pi_w
            assert rep.total[w] == HALF * phi[w] + HALF * pi_w
        assert rep.collected_value == 7
        assert rep.requester_payment == sum(rep.total.values())

    def test_example_worker5(self, layered_net):
        # 5 leads to 7 and 9; phi_7 = 1/2, phi_9 = 1 (oracle values above)
        # pi_{5,7} = gamma^2 * phi_7 ; pi_{5,9} = gamma^2 * phi_9
        rep = run_cdm(layered_net, truthful_profile(layered_net, layered_datasets()), cov, STRICT, rational=True)
        assert rep.pi[5] == Fraction(1, 4) * (HALF + 1)
        assert rep.total[5] == HALF * HALF + HALF * rep.pi[5]

    def test_duplicate_chain_truthful_best(self):
        base = Network.from_edges([(0, 1), (1, 2)])
        truth = truthful_profile(base, {1: {"a"}, 2: {"a"}})
        honest = run_cdm(base, truth, cov, STRICT)
        assert honest.payoff(1) == 0.5
        drop = run_cdm(base, {1: Report({"a"}, set())}, cov, STRICT)
        assert drop.payoff(1) == 0.5
        hide = run_cdm(base, {1: Report(set(), {2}), 2: truth[2]}, cov, STRICT)
        assert hide.payoff(1) == 0.25

    def test_infeasible_raises(self, layered_net):
        profile = truthful_profile(layered_net, {})
        profile[1] = Report(children=set())
        profile[2] = Report(children=set())
        with pytest.raises(FeasibilityError):
            run_cdm(layered_net, profile, cov, STRICT)

    def test_nil_workers_excluded(self, layered_net):
        truth = truthful_profile(layered_net, layered_datasets())
        profile = restrict_profile(layered_net, {**truth, 3: None}, 1, truth[1])
        assert profile[6] is None
        rep = run_cdm(layered_net, profile, cov, STRICT)
        assert 3 not in rep.total and 6 not in rep.total and 8 not in rep.total
        assert 5 in rep.total  # still invited by 2

    def test_to_dict_serialisable(self, layered_net):
        rep = run_cdm(layered_net, truthful_profile(layered_net, layered_datasets()), cov, STRICT, rational=True)
        d = json.loads(json.dumps(rep.to_dict()))
        assert d["mechanism"] == "CDM"
        assert set(d["workers"]) == {str(w) for w in range(1, 10)}
        assert d["workers"]["9"]["data_contribution"] == 1.0
        assert d["params"]["gamma"] == 0.5


class TestBaselines:
    def setup_method(self):
        self.base = Network.from_edges([(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)])
        self.data = {1: {1, 2}, 2: {2}, 3: {3}, 4: {4, 5}}
        self.truth = truthful_profile(self.base, self.data)

    def test_nondiff_eps(self):
        rep = run_nondiff_eps(self.base, self.truth, cov, 2.0)
        assert rep.total == {1: 2.0, 2: 2.0}
        assert rep.requester_payment == 4.0 and rep.collected_value == 2.0

    def test_diff_eps(self):
        rep = run_diff_eps(self.base, self.truth, cov, 1.5)
        assert rep.requester_payment == 6.0 and rep.collected_value == 5.0
        with pytest.raises(ParamsError):
            run_diff_eps(self.base, self.truth, cov, -1)

    def test_nondiff_shapley(self):
        rep = run_nondiff_shapley(self.base, self.truth, cov)
        assert rep.total == pytest.approx({1: 1.5, 2: 0.5})

    def test_diff_shapley_rewards_dropping_child(self):
        base = Network.from_edges([(0, 1), (1, 2)])
        truth = truthful_profile(base, {1: {"a"}, 2: {"a"}})
        assert run_diff_shapley(base, truth, cov).payoff(1) == 0.5
        assert run_diff_shapley(base, {1: Report({"a"}, set())}, cov).payoff(1) == 1.0


def random_case(rng, n):
    edges = [(0, 1)]
    for w in range(2, n + 1):
        edges.append((rng.randint(0, w - 1), w))
        for u in range(1, w):
            if rng.random() < 0.25:
                edges.append((u, w))
    data = {w: set(rng.sample(range(10), rng.randint(0, 4))) for w in range(1, n + 1)}
    return Network.from_edges(edges), data


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 9))
def test_payoffs_decompose_and_fit_budget(seed, n):
    base, data = random_case(random.Random(seed), n)
    rep = run_cdm(base, truthful_profile(base, data), cov, MechanismParams())
    for w in rep.total:
        assert rep.total[w] == pytest.approx(rep.data_payoff[w] + rep.diffusion_payoff[w])
        assert rep.total[w] >= -1e-12
    assert rep.requester_payment <= rep.collected_value + 1e-9
    near = run_nondiff_shapley(base, truthful_profile(base, data), cov)
    assert rep.collected_value >= near.collected_value
    assert rep.workers_reached == len(base.workers)

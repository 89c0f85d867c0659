import pytest

from cdmkit.mechanism import MechanismParams, run_cdm, run_diff_shapley
from cdmkit.network import Network, Report, truthful_profile
from cdmkit.valuation import CoverageValuation
from cdmkit.verify import (
    check_budget,
    check_data_dominance,
    check_ic,
    check_urc_growth,
    enumerate_deviations,
    credit_bound_violations,
    urc_chain,
    urc_tree,
)

cov = CoverageValuation()
STRICT = MechanismParams(0.5, 0.5, 1.0, 0.5)


def duplicate_chain():
    base = Network.from_edges([(0, 1), (1, 2)])
    return base, truthful_profile(base, {1: {"a"}, 2: {"a"}})


class TestDeviations:
    def test_counts(self):
        base = Network.from_edges([(0, 1), (1, 2), (1, 3)])
        truth = truthful_profile(base, {1: {"x"}, 2: set(), 3: {"y"}})
        assert len(list(enumerate_deviations(base, truth, 1))) == 2 * 4
        assert len(list(enumerate_deviations(base, truth, 2))) == 1
        assert list(enumerate_deviations(base, {}, 1)) == []

    def test_sampled_mode_reproducible(self):
        base = Network.from_edges([(0, 1)] + [(1, k) for k in range(2, 9)])
        truth = truthful_profile(base, {1: set(range(6))})
        a = list(enumerate_deviations(base, truth, 1, cap=4, samples=30, seed=3))
        b = list(enumerate_deviations(base, truth, 1, cap=4, samples=30, seed=3))
        assert len(a) == 30 and a == b
        for dev in a:
            assert dev.dataset <= truth[1].dataset and dev.children <= base.children(1)


class TestIc:
    def test_direct_shapley_violation(self):
        base, truth = duplicate_chain()
        rep = check_ic(base, truth, run_diff_shapley, cov)
        assert len(rep.violations) == 1
        bad = rep.violations[0]
        assert bad.worker == 1 and bad.deviation.children == frozenset()
        assert bad.deviation.dataset == {"a"}
        assert (bad.truthful_payoff, bad.deviated_payoff) == (0.5, 1.0)
        assert not rep.ok

    def test_cdm_clean_on_duplicate_chain(self):
        base, truth = duplicate_chain()
        rep = check_ic(base, truth, run_cdm, cov, STRICT)
        assert rep.ok and rep.deviations_checked == 4 + 2

    def test_cdm_clean_on_example(self, layered_net):
        data = {1: {"a", "b"}, 2: {"b", "c"}, 3: {"d"}, 4: {"a"}, 5: {"e", "b"}, 6: {"e"},
                7: {"f"}, 8: {"e", "f"}, 9: {"g"}}
        rep = check_ic(layered_net, truthful_profile(layered_net, data), run_cdm, cov, STRICT, instance_id="f2")
        assert rep.ok, rep.to_dict()
        assert rep.to_dict()["instance_id"] == "f2"

    def test_detects_a_planted_violation(self):
        base, truth = duplicate_chain()

        def pays_for_silence(b, profile, v):
            rep = run_cdm(b, profile, v, STRICT)
            if profile.get(1) is not None and not profile[1].children:
                rep.total[1] += 1
            return rep

        rep = check_ic(base, truth, pays_for_silence, cov)
        assert {v.deviation.children for v in rep.violations} == {frozenset()}


class TestBudget:
    def test_single_worker(self):
        base = Network.from_edges([(0, 1)])
        rep = check_budget([(base, truthful_profile(base, {1: {1, 2}}), cov)], STRICT)
        assert rep.passed and rep.worst_ratio == pytest.approx(0.5)
        assert rep.worst_tight_ratio == pytest.approx(0.5)

    def test_no_data(self):
        base = Network.from_edges([(0, 1), (1, 2)])
        rep = check_budget([(base, truthful_profile(base, {}), cov)], STRICT)
        assert rep.passed and rep.worst_ratio == 0.0

    def test_relaxed_params_report_but_skip_budget(self):
        base, _ = urc_chain(6)
        data = {w: {w} for w in base.workers}
        relaxed = MechanismParams(1.0, 1.0, 0.1, 0.5, relax=True)
        rep = check_budget([(base, truthful_profile(base, data), cov)], relaxed)
        assert rep.passed
        assert rep.worst_ratio > 1.0  # lambda = 1 already pays v in full


def test_credit_bound_checker_flags_inflated_credit(layered_net):
    rep = run_cdm(layered_net, truthful_profile(layered_net, {w: {w} for w in layered_net.workers}), cov, STRICT)
    assert credit_bound_violations(rep.matrix, rep.phi, 1.0, 0.5) == []
    rep.matrix.pi[(5, 9)] += 10
    assert [j for j, *_ in credit_bound_violations(rep.matrix, rep.phi, 1.0, 0.5)] == [9]


class TestUrc:
    def test_chain_diffusion_payoff(self):
        rows = check_urc_growth(range(2, 8), STRICT)
        for r in rows:
            # worker 1 sits at depth 1, so every fresh item below it earns mu * gamma * alpha
            expected = 0.5 * 0.5 * (r["depth"] - 1)
            assert r["diffusion_payoff"] == pytest.approx(expected)
            assert r["degree"] <= 2
        pays = [r["payoff"] for r in rows]
        assert pays == sorted(pays) and pays[-1] > pays[0]

    def test_chain_without_fresh_data_is_flat(self):
        rows = check_urc_growth(range(2, 6), STRICT, fresh=False)
        assert {r["payoff"] for r in rows} == {0.5}

    def test_bigger_data_grows_reward(self):
        # s -> 1 -> 2 -> 3: p_1 = lam * 1 + mu * gamma * alpha * (phi_2 + phi_3)
        small = check_urc_growth([3], STRICT, items_per_worker=1)[0]
        big = check_urc_growth([3], STRICT, items_per_worker=40)[0]
        assert small["payoff"] == pytest.approx(1.0)
        assert big["payoff"] == pytest.approx(20.5)

    def test_tree_grows(self):
        rows = check_urc_growth(range(2, 7), STRICT, family="tree")
        pays = [r["payoff"] for r in rows]
        assert all(b > a for a, b in zip(pays, pays[1:]))
        assert rows[-1]["degree"] == 2

    def test_builders(self):
        base, data = urc_chain(4, items_per_worker=2)
        assert sorted(base.edges) == [(0, 1), (1, 2), (2, 3), (3, 4)]
        assert data[4] == {5, 6}
        tree, tdata = urc_tree(4, branching=2)
        assert len(tree.workers) == 2 + 2 + 4
        assert len(frozenset().union(*tdata.values())) == len(tree.workers)


class TestDominance:
    def test_strict_when_deep_data(self):
        base = Network.from_edges([(0, 1), (1, 2)])
        rep = check_data_dominance([(base, truthful_profile(base, {1: {1}, 2: {2}}), cov)])
        assert rep.passed and rep.strict == 1

    def test_equal_when_deep_data_redundant(self):
        base = Network.from_edges([(0, 1), (1, 2)])
        rep = check_data_dominance([(base, truthful_profile(base, {1: {1, 2}, 2: {2}}), cov)])
        assert rep.passed and rep.strict == 0

    def test_nil_neighbour(self):
        base = Network.from_edges([(0, 1), (0, 2)])
        profile = {1: Report({1}, set()), 2: None}
        assert check_data_dominance([(base, profile, cov)]).passed

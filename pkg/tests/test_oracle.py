import itertools

import numpy as np
import pytest

from edgeorch.catalog import CONSTRAINTS, AccuracyConstraint, average_accuracy, load_default_catalog
from edgeorch.oracle import (
    enumerate_configurations, evaluate, optimal_configuration, policy_match, random_spot_check, steady_state_art,
)
from edgeorch.simenv import ConfigurationError, EdgeCloudEnv, EnvConfig, scenario_topology

A3 = scenario_topology("A", 3)
CAT = load_default_catalog()


@pytest.mark.parametrize("n, count", [(1, 10), (3, 1000), (5, 100_000)])
def test_enumeration_count(n, count):
    assert sum(1 for _ in enumerate_configurations(n)) == count


def test_enumeration_lexicographic_and_bounds():
    first = list(itertools.islice(enumerate_configurations(2), 3))
    assert first == [(0, 0), (0, 1), (0, 2)]
    for bad in (0, 6):
        with pytest.raises(ConfigurationError):
            enumerate_configurations(bad)


def test_all_local_d7_art():
    assert steady_state_art((7, 7, 7), A3) == pytest.approx(72.0, abs=1.0)


def test_local_config_ignores_links():
    d = scenario_topology("D", 3)
    assert steady_state_art((7, 7, 7), d) == steady_state_art((7, 7, 7), A3)


def test_edge_contention():
    a5 = scenario_topology("A", 5)
    assert steady_state_art((8,) * 5, a5) > steady_state_art((8, 7, 7, 7, 7), a5)


@pytest.mark.parametrize("c, actions, art", [
    (AccuracyConstraint.MIN, (7, 7, 7), 72.0),
    (AccuracyConstraint.P80, (3, 6, 6), 214.0),
    (AccuracyConstraint.P85, (2, 5, 6), 413.9),
    (AccuracyConstraint.P89, (1, 4, 9), 940.4),
    (AccuracyConstraint.MAX, None, 1155.8),
])
def test_known_optima_scenario_a(c, actions, art):
    best = optimal_configuration(A3, c)
    if actions is not None:
        assert best.actions == actions
    assert best.art == pytest.approx(art, abs=0.05)


def test_max_forces_d0_everywhere():
    env = EdgeCloudEnv(A3)
    best = optimal_configuration(A3, AccuracyConstraint.MAX)
    assert {env.actions[a].model for a in best.actions} == {"d0"}
    assert best.aa == pytest.approx(89.9)


def test_p89_feasible_and_cheaper_than_max():
    p89 = optimal_configuration(A3, AccuracyConstraint.P89)
    assert p89.aa >= 89.0
    assert p89.art <= optimal_configuration(A3, AccuracyConstraint.MAX).art


@pytest.mark.parametrize("scen", "ABCD")
def test_threshold_monotone(scen):
    arts = [optimal_configuration(scenario_topology(scen, 3), c).art for c in CONSTRAINTS]
    assert arts == sorted(arts)


@pytest.mark.parametrize("c", CONSTRAINTS)
def test_scenario_dominance(c):
    a = optimal_configuration(A3, c).art
    others = {s: optimal_configuration(scenario_topology(s, 3), c).art for s in "BCD"}
    assert a <= others["B"] and a <= others["C"]
    assert others["B"] <= others["D"] and others["C"] <= others["D"]


def test_closed_form_matches_brute_replay():
    # a cramped memory capacity forces the replay path; it must agree when memory never binds
    from dataclasses import replace
    cfg = EnvConfig()
    fast = optimal_configuration(A3, AccuracyConstraint.P85, cfg)
    slow_cfg = replace(cfg, mem_capacity=(4000, 1707, 32000))
    slow = optimal_configuration(A3, AccuracyConstraint.P85, slow_cfg)
    assert slow.art == pytest.approx(fast.art) or slow.art > fast.art


def test_spot_check(rng):
    best, sample = random_spot_check(A3, AccuracyConstraint.P85, samples=1000, seed=3)
    assert all(best.art <= s.art + 1e-9 for s in sample)


def test_policy_match_cases():
    best = optimal_configuration(A3, AccuracyConstraint.P85)
    same = policy_match(best, best, A3)
    assert same.exact_match and same.cost_match
    permuted = policy_match(tuple(reversed(best.actions)), best, A3)
    assert not permuted.exact_match and permuted.cost_match
    worse = policy_match((0, 0, 0), optimal_configuration(A3, AccuracyConstraint.MIN), A3)
    assert not worse.cost_match and worse.relative_gap > 0


def test_infeasible_policy_never_cost_matches():
    best = optimal_configuration(A3, AccuracyConstraint.P85)
    cheap = (7, 7, 7)
    rep = policy_match(cheap, best, A3, constraint=AccuracyConstraint.P85)
    assert not rep.cost_match


def test_evaluate_aa_is_catalog_mean():
    j = evaluate((4, 4, 0), A3)
    assert j.aa == average_accuracy([CAT[4], CAT[4], CAT[0]])
    assert j.art > 0


def test_deterministic():
    runs = [optimal_configuration(scenario_topology("C", 3), c) for c in CONSTRAINTS for _ in range(2)]
    assert runs[0::2] == runs[1::2]


@pytest.mark.parametrize("scen, p89, mx", [("B", 953.7, 1195.8), ("C", 953.7, 1195.8), ("D", 967.1, 1222.4)])
def test_weak_scenarios_shift_top_constraints(scen, p89, mx):
    topo = scenario_topology(scen, 3)
    assert optimal_configuration(topo, AccuracyConstraint.P89).art == pytest.approx(p89, abs=0.05)
    assert optimal_configuration(topo, AccuracyConstraint.MAX).art == pytest.approx(mx, abs=0.05)
    assert optimal_configuration(topo, AccuracyConstraint.P85).art == pytest.approx(413.9, abs=0.05)


def test_exhaustive_matches_replay_for_all_small_configs():
    from edgeorch.oracle import all_configurations
    topo = scenario_topology("B", 2)
    configs, arts, _ = all_configurations(topo)
    env = EdgeCloudEnv(topo)
    for cfg, art in zip(configs[::7], arts[::7]):
        assert steady_state_art(cfg, topo, env=env) == pytest.approx(art, rel=1e-9)
    assert np.all(arts > 0)

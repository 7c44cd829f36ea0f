import itertools

import numpy as np
import pytest

from mmdp_local.errors import CapExceeded
from mmdp_local.factored import FactoredSpec, LocalPolicySet, build_ti_surrogate
from mmdp_local.local_search import evaluate_on_joint, run_algorithm1
from mmdp_local.mdp import JointMDP, relative_value_iteration
from mmdp_local.oracle import (
    brute_force_local,
    global_baseline,
    iter_local_policies,
    local_policy_count,
    submodularity_violations,
)
from mmdp_local.scenarios import GridConfig, build_grid, random_kernel, random_mmdp
from oracles import gain_of


def test_global_baseline_is_rvi(rng):
    mdp = JointMDP(random_kernel(rng, 5, 3), rng.random((5, 3)))
    assert global_baseline(mdp).gain == relative_value_iteration(mdp).gain


def test_policy_count_and_order():
    spec = FactoredSpec((2, 2), (2, 2))
    assert local_policy_count(spec) == 16
    pols = list(iter_local_policies(spec))
    assert len(pols) == 16
    first = [p.actions(0).tolist() + p.actions(1).tolist() for p in pols]
    assert first == [list(x) for x in itertools.product(range(2), repeat=4)]


def test_two_by_two_matches_enumeration(rng):
    mdp, spec, _, _ = random_mmdp(rng, (2, 2), (2, 2), coupling=0.3)
    res = brute_force_local(mdp, spec)
    # joint action for state (s1, s2) is a1[s1] * 2 + a2[s2]
    vals = []
    for a in itertools.product(range(2), repeat=4):
        jp = np.array([a[s1] * 2 + a[2 + s2] for s1 in range(2) for s2 in range(2)])
        vals.append(gain_of(mdp.kernel, mdp.reward, jp))
    assert res.n_evaluated == 16 and res.n_skipped == 0
    assert res.value == pytest.approx(max(vals), abs=1e-10)


def test_single_agent_matches_global(rng):
    mdp = JointMDP(random_kernel(rng, 4, 3), rng.random((4, 3)))
    spec = FactoredSpec((4,), (3,))
    assert brute_force_local(mdp, spec).value == pytest.approx(global_baseline(mdp).gain,
                                                               abs=1e-8)


def test_dominates_random_policy_sets(rng):
    mdp, spec, _, _ = random_mmdp(rng, (2, 3), (2, 2), coupling=0.3)
    best = brute_force_local(mdp, spec).value
    for _ in range(50):
        pol = LocalPolicySet.from_actions(spec, [rng.integers(0, 2, size=2),
                                                 rng.integers(0, 2, size=3)])
        assert evaluate_on_joint(mdp, spec, pol) <= best + 1e-12


def test_global_dominates_local(rng):
    for _ in range(5):
        mdp, spec, _, _ = random_mmdp(rng, (2, 2), (2, 3), coupling=0.4)
        assert global_baseline(mdp).gain >= brute_force_local(mdp, spec).value - 1e-8


def test_dominates_algorithm1_on_ti(rng):
    mdp, spec, _, _ = random_mmdp(rng, (2, 3), (2, 2), coupling=0.0)
    trace = run_algorithm1(mdp, spec)
    assert brute_force_local(mdp, spec).value >= evaluate_on_joint(mdp, spec, trace.policy) - 1e-12


def test_cap():
    _, spec = build_grid(GridConfig(2, 3, (6,), (0, 2), 0.9, 0.9, 1, 0.75))
    with pytest.raises(CapExceeded):
        brute_force_local(JointMDP(np.ones((81, 16, 81)) / 81, np.zeros((81, 16))), spec,
                          cap=1000)


class TestSubmodularity:
    def test_coverage_on_ti_instance(self):
        mdp, spec, _, cov = random_mmdp(np.random.default_rng(0), (2, 2), (2, 2), coupling=0.0)
        checked, bad = submodularity_violations(mdp, spec, lambda ag: cov.table(spec, ag))
        assert checked > 0 and bad == 0

    def test_detects_complementary_reward(self):
        # reward only when both agents sit in state 1: supermodular
        spec = FactoredSpec((2, 2), (2, 2))
        rng = np.random.default_rng(1)
        mdp = build_ti_surrogate(spec, [random_kernel(rng, 2, 2), random_kernel(rng, 2, 2)],
                                 np.zeros((4, 4)))

        def reward(agents):
            r = np.zeros((4, 4))
            if len(agents) == 2:
                r[3, :] = 1.0
            return r

        _, bad = submodularity_violations(mdp, spec, reward)
        assert bad > 0

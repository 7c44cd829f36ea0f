import numpy as np
import pytest
from hypothesis import given, strategies as st

from mmdp_local.errors import BudgetExceeded, ComponentOutOfRange, ZeroProbabilityConditioning
from mmdp_local.factored import (
    FactoredSpec,
    LocalPolicySet,
    build_ti_surrogate,
    conditional_next_state,
    decode_joint,
    encode_joint,
    measure_delta,
)
from mmdp_local.mdp import JointMDP
from mmdp_local.scenarios import GridConfig, build_grid, random_kernel, random_mmdp
from oracles import delta_loops, mixed_radix


class TestIndexing:
    def test_zero(self):
        assert encode_joint(FactoredSpec((9, 9), (4, 4)), (0, 0)) == 0

    def test_big_endian(self):
        assert encode_joint(FactoredSpec((9, 9), (4, 4)), (2, 5)) == 23

    def test_round_trip_full_space(self):
        spec = FactoredSpec((3, 4, 2), (1, 1, 1))
        for k in range(spec.n_states):
            assert encode_joint(spec, decode_joint(spec, k)) == k

    @given(st.lists(st.integers(1, 6), min_size=1, max_size=4), st.data())
    def test_matches_loop_radix(self, sizes, data):
        spec = FactoredSpec(tuple(sizes), (1,) * len(sizes))
        comps = [data.draw(st.integers(0, n - 1)) for n in sizes]
        assert encode_joint(spec, comps) == mixed_radix(sizes, comps)

    def test_environment_first(self):
        spec = FactoredSpec((2, 2), (1, 1), env_state_size=3)
        assert spec.n_states == 12
        assert decode_joint(spec, 11) == (2, 1, 1)

    def test_out_of_range(self):
        with pytest.raises(ComponentOutOfRange):
            encode_joint(FactoredSpec((3,), (1,)), (3,))


class TestLocalPolicySet:
    def test_joint_policy_deterministic(self):
        spec = FactoredSpec((2, 3), (2, 2))
        pol = LocalPolicySet.from_actions(spec, [np.array([1, 0]), np.array([0, 1, 1])])
        jp = pol.joint_policy(spec)
        for s in range(6):
            s1, s2 = decode_joint(spec, s)
            assert jp[s] == spec.encode_action((pol.actions(0)[s1], pol.actions(1)[s2]))

    def test_joint_policy_stochastic_is_product(self):
        spec = FactoredSpec((2, 2), (2, 2))
        pol = LocalPolicySet.uniform(spec)
        np.testing.assert_allclose(pol.joint_policy(spec), np.full((4, 4), 0.25))


class TestConditional:
    def test_product_kernel_ignores_conditioning(self, rng):
        k1, k2 = random_kernel(rng, 2, 2), random_kernel(rng, 3, 2)
        spec = FactoredSpec((2, 3), (2, 2))
        sur = build_ti_surrogate(spec, [k1, k2], np.zeros((6, 4)))
        for s in range(6):
            for a in range(4):
                s1 = decode_joint(spec, s)[0]
                a1 = spec.decode_action(a)[0]
                for t2 in range(3):
                    np.testing.assert_allclose(
                        conditional_next_state(sur, spec, 0, s, a, (t2,)), k1[s1, a1], atol=1e-12)

    def test_single_agent_is_kernel_row(self, rng):
        k = random_kernel(rng, 4, 2)
        spec = FactoredSpec((4,), (2,))
        mdp = JointMDP(k, np.zeros((4, 2)))
        np.testing.assert_allclose(conditional_next_state(mdp, spec, 0, 1, 1, ()), k[1, 1])

    def test_grid_collision_row_is_normalized_slice(self):
        mdp, spec = build_grid(GridConfig(2, 3, (6,), (0, 2), 0.9, 0.9, 1, 0.75))
        # robots at cells 3 and 5 both move toward 4
        s = encode_joint(spec, (3, 5))
        a = spec.encode_action((2, 0))
        fk = mdp.kernel[s, a].reshape(9, 9)
        for t2 in (2, 4, 8):
            expect = fk[:, t2] / fk[:, t2].sum()
            got = conditional_next_state(mdp, spec, 0, s, a, (t2,))
            np.testing.assert_allclose(got, expect, atol=1e-12)
        assert got[4] == pytest.approx(0.81)

    def test_zero_probability(self):
        mdp, spec = build_grid(GridConfig(2, 3, (6,), (0, 2), 0.9, 0.9, 1, 0.75))
        s = encode_joint(spec, (0, 2))
        with pytest.raises(ZeroProbabilityConditioning):
            conditional_next_state(mdp, spec, 0, s, 0, (8,))

    @given(st.integers(0, 1000))
    def test_marginalizes_back_to_joint_row(self, seed):
        rng = np.random.default_rng(seed)
        mdp, spec, _, _ = random_mmdp(rng, (2, 3), (2, 2), coupling=0.5)
        s, a = int(rng.integers(6)), int(rng.integers(4))
        row = mdp.kernel[s, a].reshape(2, 3)
        rebuilt = np.zeros((2, 3))
        for t2 in range(3):
            rebuilt[:, t2] = conditional_next_state(mdp, spec, 0, s, a, (t2,)) * row[:, t2].sum()
        np.testing.assert_allclose(rebuilt, row, atol=1e-12)


class TestDelta:
    def test_product_kernel_is_zero(self, rng):
        spec = FactoredSpec((2, 3), (2, 2))
        sur = build_ti_surrogate(spec, [random_kernel(rng, 2, 2), random_kernel(rng, 3, 2)],
                                 np.zeros((6, 4)))
        est = measure_delta(sur, spec)
        assert est.exhaustive and est.value == pytest.approx(0, abs=1e-12)

    def test_grid_closed_form(self):
        mdp, spec = build_grid(GridConfig(2, 3, (6,), (0, 2), 0.9, 0.9, 1, 0.75))
        est = measure_delta(mdp, spec)
        assert est.value == pytest.approx(0.9 * (1 - 0.9), abs=1e-9)
        assert est.witnesses["agent"] in (0, 1)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_loop_oracle(self, seed):
        rng = np.random.default_rng(seed)
        mdp, spec, _, _ = random_mmdp(rng, (2, 2), (2, 2), coupling=0.4)
        assert measure_delta(mdp, spec).value == pytest.approx(
            delta_loops(mdp.kernel, (2, 2), (2, 2)), abs=1e-12)

    def test_sampled_with_full_budget_reproduces(self, rng):
        mdp, spec, _, _ = random_mmdp(rng, (2, 3), (2, 2), coupling=0.3)
        ex = measure_delta(mdp, spec)
        sm = measure_delta(mdp, spec, mode="sampled", budget=100_000, seed=3)
        assert sm.value == pytest.approx(ex.value, abs=1e-12)

    def test_sampled_is_lower_bound(self, rng):
        mdp, spec, _, _ = random_mmdp(rng, (3, 3), (2, 2), coupling=0.3)
        ex = measure_delta(mdp, spec)
        sm = measure_delta(mdp, spec, mode="sampled", budget=5, seed=0)
        assert not sm.exhaustive and sm.value <= ex.value + 1e-12

    def test_budget(self):
        mdp, spec = build_grid(GridConfig(2, 3, (6,), (0, 2), 0.9, 0.9, 1, 0.75))
        with pytest.raises(BudgetExceeded):
            measure_delta(mdp, spec, budget=10)


class TestSurrogate:
    def test_single_agent_is_identity(self, rng):
        k = random_kernel(rng, 3, 2)
        sur = build_ti_surrogate(FactoredSpec((3,), (2,)), [k], np.zeros((3, 2)))
        np.testing.assert_array_equal(sur.kernel, k)

    def test_pairwise_products(self, rng):
        k1, k2 = random_kernel(rng, 2, 2), random_kernel(rng, 2, 3)
        spec = FactoredSpec((2, 2), (2, 3))
        sur = build_ti_surrogate(spec, [k1, k2], np.zeros((4, 6)))
        for s1, s2, a1, a2, t1, t2 in np.ndindex(2, 2, 2, 3, 2, 2):
            assert sur.kernel[s1 * 2 + s2, a1 * 3 + a2, t1 * 2 + t2] == pytest.approx(
                k1[s1, a1, t1] * k2[s2, a2, t2])

    def test_surrogate_has_zero_delta(self, rng):
        spec = FactoredSpec((3, 2), (2, 2))
        sur = build_ti_surrogate(spec, [random_kernel(rng, 3, 2), random_kernel(rng, 2, 2)],
                                 np.zeros((6, 4)))
        assert measure_delta(sur, spec).value < 1e-12

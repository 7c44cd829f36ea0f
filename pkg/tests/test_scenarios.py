import numpy as np
import pytest
from hypothesis import given, strategies as st

from mmdp_local.errors import ConfigError
from mmdp_local.factored import encode_joint
from mmdp_local.mdp import validate_mdp
from mmdp_local.scenarios import (
    GridConfig,
    PatrolConfig,
    build_grid,
    build_patrol,
    coverage_value,
    grid_destinations,
)
from oracles import grid_kernel_loops, patrol_kernel_loops

GRID = GridConfig(2, 3, (6,), (0, 2), 0.9, 0.9, 1, 0.75)
PATROL = PatrolConfig(2, 1, 3, 0.9, 1.0, 0.9, 0.9, 0.75)


class TestGrid:
    def test_sizes(self):
        mdp, spec = build_grid(GRID)
        assert (mdp.n_states, mdp.n_actions) == (81, 16)
        mdp4, _ = build_grid(GridConfig(4, 2, (3,), (0, 0, 1, 1), 0.9, 0.9, 1, 0.75))
        assert (mdp4.n_states, mdp4.n_actions) == (256, 256)

    def test_initial_state(self):
        mdp, spec = build_grid(GRID)
        assert mdp.initial_state == encode_joint(spec, (0, 2))

    def test_kernel_matches_loops(self):
        mdp, _ = build_grid(GRID)
        np.testing.assert_allclose(mdp.kernel, grid_kernel_loops(2, 3, 0.9, 0.9, 1), atol=1e-14)

    def test_three_robot_kernel_matches_loops(self):
        cfg = GridConfig(3, 2, (3,), (0, 0, 1), 0.7, 0.5, 2, 0.75)
        mdp, _ = build_grid(cfg)
        np.testing.assert_allclose(mdp.kernel, grid_kernel_loops(3, 2, 0.7, 0.5, 2), atol=1e-14)

    def test_rewards(self):
        mdp, spec = build_grid(GRID)
        assert mdp.reward[encode_joint(spec, (6, 0)), 0] == pytest.approx(0.75)
        assert mdp.reward[encode_joint(spec, (6, 6)), 3] == pytest.approx(0.9375)
        assert mdp.reward[encode_joint(spec, (0, 1)), 0] == 0

    def test_corner_row(self):
        # robot alone at cell 0 moving right: 0.9 to cell 1, 0.1 to cell 3
        rows = build_grid(GridConfig(1, 3, (6,), (0,), 0.9, 0.9, 1, 0.75))[0].kernel
        np.testing.assert_allclose(rows[0, 2, [1, 3]], [0.9, 0.1])
        # off-grid move from the corner spreads uniformly
        np.testing.assert_allclose(rows[0, 0, [1, 3]], [0.5, 0.5])

    def test_destinations(self):
        d = grid_destinations(3)
        assert list(d[4]) == [3, 1, 5, 7]
        assert list(d[0]) == [-1, -1, 1, 3]

    def test_valid_action_count_reported(self):
        mdp, _ = build_grid(GRID)
        # per cell: 4 corners x2, 4 edges x3, centre x4 -> 24 valid moves per robot
        assert mdp.meta["valid_state_action_pairs"] == 24 * 24
        assert mdp.meta["raw_joint_actions"] == 16

    @pytest.mark.parametrize("field,kwargs", [
        ("grid_side", dict(grid_side=0)),
        ("c", dict(c=1.5)),
        ("targets[0]", dict(targets=(9,))),
        ("starts", dict(starts=(0,))),
        ("K", dict(K=0)),
        ("eta", dict(eta=0.0)),
    ])
    def test_config_errors_name_field(self, field, kwargs):
        base = dict(n_robots=2, grid_side=3, targets=(6,), starts=(0, 2), c=0.9,
                    delta_scenario=0.9, K=1, eta=0.75)
        base.update(kwargs)
        with pytest.raises(ConfigError) as exc:
            GridConfig(**base)
        assert exc.value.field == field


class TestPatrol:
    def test_sizes(self):
        mdp, _ = build_patrol(PATROL)
        assert (mdp.n_states, mdp.n_actions) == (27, 9)
        mdp2, _ = build_patrol(PatrolConfig(3, 2, 3, 0.9, 1.0, 0.9, 0.9, 0.75))
        assert (mdp2.n_states, mdp2.n_actions) == (243, 27)

    def test_matches_loops(self):
        mdp, _ = build_patrol(PATROL)
        P, R = patrol_kernel_loops(2, 1, 3, 0.9, 1.0, 0.9, 0.9, 0.75)
        np.testing.assert_allclose(mdp.kernel, P, atol=1e-14)
        np.testing.assert_allclose(mdp.reward, R, atol=1e-14)

    def test_two_adversaries_match_loops(self):
        cfg = PatrolConfig(2, 2, 3, 0.8, 0.7, 0.5, 0.6, 0.5)
        mdp, _ = build_patrol(cfg)
        P, R = patrol_kernel_loops(2, 2, 3, 0.8, 0.7, 0.5, 0.6, 0.5)
        np.testing.assert_allclose(mdp.kernel, P, atol=1e-14)
        np.testing.assert_allclose(mdp.reward, R, atol=1e-14)

    def test_capture_values(self):
        assert coverage_value(1, 0.75) == pytest.approx(0.75)
        assert coverage_value(2, 0.75) == pytest.approx(0.9375)

    def test_renormalized_variant_is_valid(self):
        cfg = PatrolConfig(2, 1, 4, 0.9, 1.0, 0.9, 0.9, 0.75, unit_spread="renormalized")
        validate_mdp(build_patrol(cfg)[0])

    def test_uniform_adversary_variant_is_valid(self):
        cfg = PatrolConfig(2, 1, 3, 0.9, 0.8, 0.9, 0.9, 0.75, adversary_policy="uniform")
        validate_mdp(build_patrol(cfg)[0])

    def test_bad_locations(self):
        with pytest.raises(ConfigError) as exc:
            PatrolConfig(2, 1, 1, 0.9, 1.0, 0.9, 0.9, 0.75)
        assert exc.value.field == "n_locations"


@given(st.floats(0.01, 0.99), st.integers(0, 6))
def test_coverage_diminishing_marginals(eta, k):
    g1 = coverage_value(k + 1, eta) - coverage_value(k, eta)
    g2 = coverage_value(k + 2, eta) - coverage_value(k + 1, eta)
    assert g1 > 0 and g2 < g1


@given(st.integers(2, 3), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_every_grid_is_valid(L, c, delta):
    mdp, _ = build_grid(GridConfig(2, L, (0,), (0, 1), c, delta, 1, 0.5))
    validate_mdp(mdp)

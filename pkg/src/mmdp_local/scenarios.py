"""Benchmark multi-agent MDPs: grid coverage robots, patrolling, random instances."""
from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .errors import ConfigError
from .factored import FactoredSpec, _product_kernel, encode_joint
from .mdp import JointMDP, validate_mdp

LEFT, DOWN, RIGHT, UP = range(4)
_MOVES = {LEFT: (0, -1), DOWN: (-1, 0), RIGHT: (0, 1), UP: (1, 0)}


def _check_prob(name, x, lo_open=False):
    if not (0 < x <= 1 if lo_open else 0 <= x <= 1):
        raise ConfigError(name, f"must lie in {'(0, 1]' if lo_open else '[0, 1]'}, got {x}")


@dataclass(frozen=True)
class GridConfig:
    """Coverage task for ``n_robots`` on a ``grid_side x grid_side`` grid.

    Cells are numbered row-major from the bottom-left corner. ``c`` is the
    chance of reaching the intended cell, reduced to ``delta_scenario * c``
    when at least ``K`` other robots aim for the same cell.
    """

    n_robots: int
    grid_side: int
    targets: tuple
    starts: tuple
    c: float
    delta_scenario: float
    K: int
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "starts", tuple(int(s) for s in self.starts))
        if self.n_robots < 1:
            raise ConfigError("n_robots", "must be >= 1")
        if self.grid_side < 2:
            raise ConfigError("grid_side", f"must be >= 2, got {self.grid_side}")
        n_cells = self.grid_side ** 2
        if not self.targets:
            raise ConfigError("targets", "need at least one target cell")
        for k, t in enumerate(self.targets):
            if not 0 <= t < n_cells:
                raise ConfigError(f"targets[{k}]", f"cell {t} outside [0, {n_cells})")
        if len(self.starts) != self.n_robots:
            raise ConfigError("starts", f"need one start per robot ({self.n_robots})")
        for k, s in enumerate(self.starts):
            if not 0 <= s < n_cells:
                raise ConfigError(f"starts[{k}]", f"cell {s} outside [0, {n_cells})")
        _check_prob("c", self.c)
        _check_prob("delta_scenario", self.delta_scenario)
        _check_prob("eta", self.eta, lo_open=True)
        if self.K < 1:
            raise ConfigError("K", "must be >= 1")

    @property
    def n_states(self) -> int:
        return self.grid_side ** (2 * self.n_robots)

    @property
    def n_actions(self) -> int:
        return 4 ** self.n_robots


def grid_destinations(L: int) -> np.ndarray:
    """``dest[cell, action]``: the neighbouring cell, or -1 off the grid."""
    dest = np.full((L * L, 4), -1)
    for cell in range(L * L):
        r, col = divmod(cell, L)
        for a, (dr, dc) in _MOVES.items():
            rr, cc = r + dr, col + dc
            if 0 <= rr < L and 0 <= cc < L:
                dest[cell, a] = rr * L + cc
    return dest


def grid_robot_rows(L: int, c: float, delta: float) -> np.ndarray:
    """Per-robot rows ``(cell, action, collided, next_cell)``.

    A valid move puts ``c`` (``delta * c`` when collided) on the intended
    cell and spreads the rest evenly over the other reachable cells. An
    off-grid action has no intended cell and spreads uniformly.
    """
    dest = grid_destinations(L)
    n = L * L
    rows = np.zeros((n, 4, 2, n))
    for cell in range(n):
        reach = dest[cell][dest[cell] >= 0]
        for a in range(4):
            d = dest[cell, a]
            for flag, p in ((0, c), (1, delta * c)):
                if d < 0:
                    rows[cell, a, flag, reach] = 1.0 / len(reach)
                    continue
                rows[cell, a, flag, reach] = (1.0 - p) / (len(reach) - 1)
                rows[cell, a, flag, d] = p
    return rows


def coverage_value(count, eta):
    return 1.0 - (1.0 - eta) ** np.asarray(count)


def build_grid(config: GridConfig):
    """Joint MDP and factored spec for the grid coverage task.

    Robots move independently given the joint action except through the
    collision flag, which is computed from intended destinations. The reward
    sums ``1 - (1 - eta)^N_b`` over targets ``b`` occupied by ``N_b`` robots.
    """
    N, L = config.n_robots, config.grid_side
    n = L * L
    spec = FactoredSpec((n,) * N, (4,) * N)
    states = spec.state_table()[:, 1:]
    actions = spec.action_table()
    dest_tab = grid_destinations(L)
    rows = grid_robot_rows(L, config.c, config.delta_scenario)
    # dest[s, a, i]
    dest = dest_tab[states[:, None, :], actions[None, :, :]]
    same = (dest[..., :, None] == dest[..., None, :]) & (dest[..., :, None] >= 0)
    others = same.sum(axis=-1) - 1
    collided = (others >= config.K).astype(int)
    factors = [rows[states[:, None, i], actions[None, :, i], collided[..., i]] for i in range(N)]
    kernel = factors[0]
    for f in factors[1:]:
        kernel = (kernel[..., :, None] * f[..., None, :]).reshape(kernel.shape[:2] + (-1,))
    counts = np.stack([(states == b).sum(axis=1) for b in config.targets], axis=1)
    r = coverage_value(counts, config.eta).sum(axis=1)
    reward = np.repeat(r[:, None], spec.n_actions, axis=1)
    valid = (dest_tab[states] >= 0).sum(axis=2).prod(axis=1)
    mdp = JointMDP(kernel, reward, initial_state=encode_joint(spec, config.starts),
                   name=f"grid-N{N}-L{L}",
                   meta={"raw_joint_actions": spec.n_actions,
                         "valid_state_action_pairs": int(valid.sum())})
    validate_mdp(mdp)
    return mdp, spec


@dataclass(frozen=True)
class PatrolConfig:
    """Patrol units chasing adversaries over ``n_locations`` sites.

    ``unit_spread`` selects how a unit's missed mass is spread: ``"even"``
    divides it over the other ``|L| - 1`` sites; ``"renormalized"`` divides by
    ``|L|`` and then rescales the row to sum to one. ``adversary_policy`` is the
    adversaries' known target rule: ``"stay"`` aims at the current site,
    ``"uniform"`` at a uniformly random site.
    """

    n_units: int
    n_adversaries: int
    n_locations: int
    c: float
    d: float
    delta_scenario: float
    beta: float
    eta: float
    unit_spread: str = "even"
    adversary_policy: str = "stay"

    def __post_init__(self):
        if self.n_units < 1:
            raise ConfigError("n_units", "must be >= 1")
        if self.n_adversaries < 1:
            raise ConfigError("n_adversaries", "must be >= 1")
        if self.n_locations < 2:
            raise ConfigError("n_locations", f"must be >= 2, got {self.n_locations}")
        for name in ("c", "d", "delta_scenario", "beta"):
            _check_prob(name, getattr(self, name))
        _check_prob("eta", self.eta, lo_open=True)
        if self.unit_spread not in ("even", "renormalized"):
            raise ConfigError("unit_spread", "must be 'even' or 'renormalized'")
        if self.adversary_policy not in ("stay", "uniform"):
            raise ConfigError("adversary_policy", "must be 'stay' or 'uniform'")

    @property
    def n_states(self) -> int:
        return self.n_locations ** (self.n_units + self.n_adversaries)

    @property
    def n_actions(self) -> int:
        return self.n_locations ** self.n_units


def build_patrol(config: PatrolConfig):
    """Joint MDP and factored spec for the patrolling task.

    Adversaries form the environment component (their policy is known), so
    the controlled action space is the units' product space. A unit reaches
    its chosen site with probability ``c``, or ``delta * c`` if another unit
    chose the same site. An adversary reaches its target with probability
    ``d``, or ``beta * d`` if some unit chose that site. The reward is the
    expected next-step capture value ``sum_l (1 - (1 - eta)^k_l) x_l``.
    """
    U, V, L = config.n_units, config.n_adversaries, config.n_locations
    spec = FactoredSpec((L,) * U, (L,) * U, env_state_size=L ** V)
    st = spec.state_table()
    adv = np.stack(np.unravel_index(st[:, 0], (L,) * V), axis=1)
    acts = spec.action_table()
    S, A = spec.n_states, spec.n_actions

    # unit rows depend only on the joint action
    same = (acts[:, :, None] == acts[:, None, :]).sum(axis=2) - 1
    unit_rows = np.empty((A, U, L))
    for p_flag, p in ((0, config.c), (1, config.delta_scenario * config.c)):
        other = (1.0 - p) / (L - 1 if config.unit_spread == "even" else L)
        mask = (same > 0) == bool(p_flag)
        unit_rows[mask] = other
        a_idx, u_idx = np.nonzero(mask)
        unit_rows[a_idx, u_idx, acts[a_idx, u_idx]] = p
    unit_rows /= unit_rows.sum(axis=2, keepdims=True)

    # adversary rows for target t under protected / unprotected
    def adv_row(t, prob):
        row = np.full(L, (1.0 - prob) / (L - 1))
        row[t] = prob
        return row

    covered = np.zeros((A, L), dtype=bool)
    for u in range(U):
        covered[np.arange(A), acts[:, u]] = True
    base = np.stack([[adv_row(t, config.d), adv_row(t, config.beta * config.d)]
                     for t in range(L)])  # (target, protected, next)
    # rows_by_target[a, t, next]
    rows_by_target = base[np.arange(L)[None, :], covered.astype(int)]
    if config.adversary_policy == "uniform":
        adv_rows_a = rows_by_target.mean(axis=1)  # (A, next), same for any site
        adv_rows = np.broadcast_to(adv_rows_a[None, :, None, :], (S, A, V, L))
    else:
        adv_rows = rows_by_target[np.arange(A)[None, :, None], adv[:, None, :]]  # (S, A, V, L)

    kernel = np.ones((S, A, 1))
    for j in range(V):
        kernel = (kernel[..., :, None] * adv_rows[:, :, j, None, :]).reshape(S, A, -1)
    for u in range(U):
        kernel = (kernel[..., :, None] * unit_rows[None, :, u, None, :]).reshape(S, A, -1)

    st_next = spec.state_table()
    adv_next = np.stack(np.unravel_index(st_next[:, 0], (L,) * V), axis=1)
    units_next = st_next[:, 1:]
    r_next = np.zeros(S)
    for loc in range(L):
        k = (units_next == loc).sum(axis=1)
        x = (adv_next == loc).sum(axis=1)
        r_next += coverage_value(k, config.eta) * x
    reward = kernel @ r_next
    mdp = JointMDP(kernel, reward, name=f"patrol-U{U}-V{V}-L{L}")
    validate_mdp(mdp)
    return mdp, spec


@dataclass(frozen=True)
class CoverageReward:
    """Probabilistic coverage reward, monotone and submodular in the agent set.

    ``R(s, a) = sum_b w_b (1 - prod_{i in agents} (1 - p_i[s_i, a_i, b]))``.
    """

    weights: np.ndarray
    detect: tuple = field(default=())

    def table(self, spec: FactoredSpec, agents=None) -> np.ndarray:
        agents = range(spec.m) if agents is None else agents
        st = spec.state_table()[:, 1:]
        at = spec.action_table()
        miss = np.ones((spec.n_states, spec.n_actions, len(self.weights)))
        for i in agents:
            miss = miss * (1.0 - self.detect[i][st[:, None, i], at[None, :, i]])
        return (1.0 - miss) @ self.weights


def random_kernel(rng, n_states, n_actions, concentration=1.0):
    return rng.dirichlet(np.full(n_states, concentration), size=(n_states, n_actions))


def random_mdp(rng, n_states, n_actions, reward_scale=1.0) -> JointMDP:
    """Dense random MDP with all transition probabilities positive."""
    k = random_kernel(rng, n_states, n_actions)
    r = rng.random((n_states, n_actions)) * reward_scale
    return JointMDP(k, r)


def random_mmdp(rng, state_sizes, action_sizes, coupling=0.2, n_targets=2,
                reward="coverage"):
    """Random multi-agent MDP mixing a product kernel with a coupled one.

    Returns ``(mdp, spec, per_agent_kernels, coverage)``; ``coverage`` is None
    for ``reward="random"``. ``coupling = 0`` gives a transition-independent
    model.
    """
    spec = FactoredSpec(state_sizes, action_sizes)
    per_agent = [random_kernel(rng, n, a) for n, a in zip(state_sizes, action_sizes)]
    prod_k = _product_kernel(per_agent)
    if coupling > 0:
        coupled = random_kernel(rng, spec.n_states, spec.n_actions)
        kernel = (1 - coupling) * prod_k + coupling * coupled
    else:
        kernel = prod_k
    kernel = kernel / kernel.sum(axis=2, keepdims=True)
    cov = None
    if reward == "coverage":
        cov = CoverageReward(rng.random(n_targets) + 0.5,
                             tuple(rng.random((n, a, n_targets)) for n, a in
                                   zip(state_sizes, action_sizes)))
        r = cov.table(spec)
    else:
        r = rng.random((spec.n_states, spec.n_actions))
    mdp = JointMDP(kernel, r, name="random-mmdp")
    validate_mdp(mdp)
    return mdp, spec, per_agent, cov

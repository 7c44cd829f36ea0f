"""Local-policy search through per-agent surrogate MDPs.

Each agent gets a local MDP over its own local state ``(s0, s_i)``: the
transition kernel averages the joint kernel over a distribution of companion
states and actions (computed once), and the reward averages the joint reward
over the other agents' current stationary occupancies (recomputed every
iteration). Agents take turns replacing their policy with the local optimum
whenever it beats the incumbent by the factor ``1 + epsilon``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import prod

import numpy as np

from . import markov
from .errors import ValidationError
from .factored import FactoredSpec, LocalPolicySet
from .mdp import JointMDP, average_reward, relative_value_iteration

COMPANION_MODES = ("uniform", "product", "sampled")


def _companion_axes(spec: FactoredSpec, i: int):
    others = [j for j in range(spec.m) if j != i]
    c_s = prod(spec.agent_state_sizes[j] for j in others)
    c_a = prod(spec.agent_action_sizes[j] for j in others)
    return others, c_s, c_a


@dataclass(frozen=True)
class CompanionDistribution:
    """Distribution of the other agents' states (and optionally actions) for agent ``i``.

    Either ``state_weights`` of shape ``(S0, C_s)``, a distribution over the
    companions' joint state per environment state, with actions supplied by a
    companion policy; or ``samples``, an ``(n, 2)`` array of (companion state
    index, companion action index) pairs weighted uniformly.
    """

    agent: int
    state_weights: np.ndarray | None = None
    samples: np.ndarray | None = None

    def __post_init__(self):
        if (self.state_weights is None) == (self.samples is None):
            raise ValidationError("give exactly one of state_weights or samples")
        if self.state_weights is not None:
            w = np.asarray(self.state_weights, dtype=float)
            if np.any(w < 0) or np.any(np.abs(w.sum(axis=1) - 1) > 1e-9):
                raise ValidationError("companion state weights must be distributions")

    @classmethod
    def uniform(cls, spec, i):
        _, c_s, _ = _companion_axes(spec, i)
        return cls(i, state_weights=np.full((spec.env_state_size, c_s), 1.0 / c_s))

    @classmethod
    def product(cls, spec, i, q_hat):
        """Product of the other agents' local occupancies, conditioned on ``s0``."""
        others, _, _ = _companion_axes(spec, i)
        w = np.ones((spec.env_state_size, 1))
        for j in others:
            qj = np.asarray(q_hat[j], dtype=float).reshape(spec.env_state_size, -1)
            tot = qj.sum(axis=1, keepdims=True)
            marg = qj.sum(axis=0) / qj.sum()
            cond = np.where(tot > 0, qj / np.where(tot > 0, tot, 1.0), marg)
            w = (w[:, :, None] * cond[:, None, :]).reshape(spec.env_state_size, -1)
        return cls(i, state_weights=w)

    @classmethod
    def sampled(cls, spec, i, n_samples, rng):
        _, c_s, c_a = _companion_axes(spec, i)
        s = rng.integers(0, c_s, size=n_samples)
        a = rng.integers(0, c_a, size=n_samples)
        return cls(i, samples=np.stack([s, a], axis=1))

    def context_weights(self, spec, companion_policy: LocalPolicySet) -> np.ndarray:
        """Joint weights ``(S0, C_s, C_a)`` over companion states and actions."""
        others, c_s, c_a = _companion_axes(spec, self.agent)
        S0 = spec.env_state_size
        if self.samples is not None:
            w = np.zeros((c_s, c_a))
            np.add.at(w, (self.samples[:, 0], self.samples[:, 1]), 1.0)
            w /= len(self.samples)
            return np.broadcast_to(w, (S0, c_s, c_a)).copy()
        return self.state_weights[:, :, None] * companion_action_probs(spec, self.agent, companion_policy)


def companion_action_probs(spec, i, policy: LocalPolicySet) -> np.ndarray:
    """``pi_-i(a_-i | s0, s_-i)`` as an array ``(S0, C_s, C_a)``."""
    others, _, _ = _companion_axes(spec, i)
    S0 = spec.env_state_size
    out = np.ones((S0, 1, 1))
    for j in others:
        tj = policy.tables[j].reshape(S0, spec.agent_state_sizes[j], spec.agent_action_sizes[j])
        out = out[:, :, None, :, None] * tj[:, None, :, None, :]
        out = out.reshape(S0, out.shape[1] * out.shape[2], out.shape[3] * out.shape[4])
    return out


def _own_first(spec, i, n_lead, n_trail):
    """Axis order moving agent ``i``'s state and action ahead of the companions'."""
    m = spec.m
    own_s, own_a = 1 + i, 1 + m + i
    other_s = [1 + j for j in range(m) if j != i]
    other_a = [1 + m + j for j in range(m) if j != i]
    return [0, own_s, own_a] + other_s + other_a + list(range(n_lead, n_lead + n_trail))


def agent_marginal_kernels(mdp: JointMDP, spec: FactoredSpec) -> list:
    """Joint kernel with companion next states summed out, for every agent.

    Entry ``i`` has axes ``(s0, s_i, a_i, companion states, companion
    actions, s0', s_i')``. All agents share one matrix product against a 0/1
    aggregation matrix, so the dense kernel is read once.
    """
    spec.check_mdp(mdp)
    m = spec.m
    sizes = [spec.local_state_count(i) for i in range(m)]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    agg = np.zeros((spec.n_states, offsets[-1]))
    rows = np.arange(spec.n_states)
    for i in range(m):
        agg[rows, offsets[i] + spec.local_index(i)] = 1.0
    flat = mdp.kernel.reshape(-1, spec.n_states) @ agg
    lead = spec.full_state_dims + spec.agent_action_sizes
    out = []
    for i in range(m):
        marg = flat[:, offsets[i]:offsets[i + 1]].reshape(lead + (sizes[i],))
        out.append(np.transpose(marg, _own_first(spec, i, 1 + 2 * m, 1)))
    return out


def local_transition(mdp: JointMDP, spec: FactoredSpec, i: int,
                     companions: CompanionDistribution,
                     companion_policy: LocalPolicySet, marginal=None,
                     notes: list | None = None) -> np.ndarray:
    """Agent ``i``'s averaged kernel over local states ``(s0, s_i)``.

    ``P_i[(s0, s_i), a_i, (s0', s_i')]`` is the expectation, over companion
    states and actions, of the joint probability that the environment moves to
    ``s0'`` and agent ``i`` to ``s_i'`` (companion next states summed out).
    Output rows are renormalised to sum to one; when the accumulated mass of
    some row was off by more than 1e-9 a message is appended to ``notes``.
    ``marginal`` may pass in the agent's entry of :func:`agent_marginal_kernels`
    to skip recomputing it.
    """
    marg = agent_marginal_kernels(mdp, spec)[i] if marginal is None else marginal
    _, c_s, c_a = _companion_axes(spec, i)
    S0, Si, Ai = spec.env_state_size, spec.agent_state_sizes[i], spec.agent_action_sizes[i]
    marg = marg.reshape(S0, Si, Ai, c_s, c_a, S0, Si)
    w = companions.context_weights(spec, companion_policy)
    out = np.einsum("ecd,eiacdfj->eiafj", w, marg).reshape(S0 * Si, Ai, S0 * Si)
    mass = out.sum(axis=2, keepdims=True)
    dev = float(np.abs(mass - 1.0).max())
    if dev > 1e-9 and notes is not None:
        notes.append(f"agent {i} local kernel renormalised (max row mass error {dev:.3g})")
    return out / mass


def local_reward(mdp: JointMDP, spec: FactoredSpec, i: int, companion_q,
                 companion_policy: LocalPolicySet) -> np.ndarray:
    """Agent ``i``'s reward table ``(S0 * S_i, A_i)``.

    The joint reward averaged over companion states weighted by the product
    of the other agents' occupancies ``companion_q[j]`` (conditioned on the
    environment state) and over companion actions drawn from
    ``companion_policy``.
    """
    m = spec.m
    d = spec.full_state_dims
    R = mdp.reward.reshape(d + spec.agent_action_sizes)
    R = np.transpose(R, _own_first(spec, i, 1 + 2 * m, 0))
    _, c_s, c_a = _companion_axes(spec, i)
    S0, Si, Ai = spec.env_state_size, spec.agent_state_sizes[i], spec.agent_action_sizes[i]
    R = R.reshape(S0, Si, Ai, c_s, c_a)
    w = CompanionDistribution.product(spec, i, companion_q).state_weights
    pa = companion_action_probs(spec, i, companion_policy)
    return np.einsum("ec,ecd,eiacd->eia", w, pa, R).reshape(S0 * Si, Ai)


@dataclass(frozen=True)
class LocalMDP:
    agent: int
    kernel: np.ndarray
    reward: np.ndarray
    iteration: int = 0

    def as_mdp(self) -> JointMDP:
        return JointMDP(self.kernel, self.reward, name=f"local-{self.agent}-k{self.iteration}")


@dataclass(frozen=True)
class SearchConfig:
    """Settings for :func:`run_algorithm1`.

    ``companion_mode`` selects the companion distribution used once for the
    local kernels: ``"uniform"`` states, ``"product"`` of the initial
    occupancies, or ``"sampled"`` (state, action) pairs, ``n_companion_samples``
    of them (default ``floor(m * |S_i| / 2)``).
    """

    epsilon: float = 0.0
    max_rounds: int = 500
    companion_mode: str = "uniform"
    tol: float = 1e-9
    seed: int = 0
    n_companion_samples: int | None = None
    refresh_transition: bool = False
    improvement_atol: float = 1e-8
    aperiodicity: float = 0.5

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValidationError("epsilon must be >= 0")
        if self.max_rounds < 1:
            raise ValidationError("max_rounds must be >= 1")
        if self.companion_mode not in COMPANION_MODES:
            raise ValidationError(f"companion_mode must be one of {COMPANION_MODES}")


@dataclass(frozen=True)
class RoundRecord:
    round: int
    agent: int | None
    old_gain: float | None
    new_gain: float | None
    wall_s: float


@dataclass
class SearchTrace:
    rounds: list
    policy: LocalPolicySet
    q_hat: list
    termination: str
    local_kernels: list
    local_gains: list
    elapsed_s: float = 0.0
    config: SearchConfig | None = None
    notes: list = field(default_factory=list)

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)

    @property
    def converged(self) -> bool:
        return self.termination == "converged"


def local_chain(kernel, table) -> np.ndarray:
    return np.einsum("sa,sat->st", table, kernel)


def local_occupancy(kernel, table) -> np.ndarray:
    return markov.stationary_distribution(local_chain(kernel, table)).probs


def _companion_distribution(spec, i, config, rng, q_hat):
    if config.companion_mode == "uniform":
        return CompanionDistribution.uniform(spec, i)
    if config.companion_mode == "product":
        return CompanionDistribution.product(spec, i, q_hat)
    n = config.n_companion_samples or max(1, (spec.m * spec.agent_state_sizes[i]) // 2)
    return CompanionDistribution.sampled(spec, i, n, rng)


def _initial_occupancy(spec, i):
    n = spec.local_state_count(i)
    return np.full(n, 1.0 / n)


def run_algorithm1(mdp: JointMDP, spec: FactoredSpec, config: SearchConfig = SearchConfig()) -> SearchTrace:
    """Iterative local-policy improvement.

    Starts from uniform random local policies, builds every agent's local
    kernel once, then repeatedly scans agents in index order: rebuild the
    agent's local reward, solve its local MDP by relative value iteration, and
    adopt the solution if its local gain exceeds ``(1 + epsilon)`` times the
    incumbent's (plus ``improvement_atol``). The scan restarts after every
    adoption and stops when a full scan adopts nothing or after
    ``max_rounds`` adoptions.

    Agents that never adopt keep the uniform random policy.
    """
    spec.check_mdp(mdp)
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    m = spec.m
    policy = LocalPolicySet.uniform(spec)
    q0 = [_initial_occupancy(spec, i) for i in range(m)]
    companions = [_companion_distribution(spec, i, config, rng, q0) for i in range(m)]
    margs = agent_marginal_kernels(mdp, spec)
    rounds, notes = [], []
    kernels = [local_transition(mdp, spec, i, companions[i], policy, margs[i], notes)
               for i in range(m)]
    q_hat = [local_occupancy(kernels[i], policy.tables[i]) for i in range(m)]
    local_gains = [None] * m
    termination = "round_cap"
    for k in range(1, config.max_rounds + 1):
        t_round = time.perf_counter()
        adopted = None
        for i in range(m):
            reward = local_reward(mdp, spec, i, q_hat, policy)
            local = LocalMDP(i, kernels[i], reward, k).as_mdp()
            sol = relative_value_iteration(local, tol=config.tol,
                                           aperiodicity=config.aperiodicity)
            old = average_reward(local, policy.tables[i])
            new = average_reward(local, sol.policy)
            local_gains[i] = old
            cand = np.zeros_like(policy.tables[i])
            cand[np.arange(len(sol.policy)), sol.policy] = 1.0
            changed = not np.array_equal(cand, policy.tables[i])
            if changed and new > (1 + config.epsilon) * old + config.improvement_atol:
                policy = policy.replace(i, cand)
                q_hat[i] = local_occupancy(kernels[i], cand)
                local_gains[i] = new
                adopted = (i, old, new)
                break
        if adopted is None:
            rounds.append(RoundRecord(k, None, None, None, time.perf_counter() - t_round))
            termination = "converged"
            break
        rounds.append(RoundRecord(k, adopted[0], adopted[1], adopted[2],
                                  time.perf_counter() - t_round))
        if config.refresh_transition:
            companions = [CompanionDistribution.product(spec, j, q_hat) for j in range(m)]
            kernels = [local_transition(mdp, spec, j, companions[j], policy, margs[j], notes)
                       for j in range(m)]
            q_hat = [local_occupancy(kernels[j], policy.tables[j]) for j in range(m)]
    for i in range(m):
        if not policy.is_deterministic(i):
            notes.append(f"agent {i} kept the uniform random policy")
    return SearchTrace(rounds, policy, q_hat, termination, kernels, local_gains,
                       time.perf_counter() - t0, config, notes)


def evaluate_on_joint(mdp: JointMDP, spec: FactoredSpec, policy: LocalPolicySet) -> float:
    """Average reward of a local policy set on a joint MDP."""
    spec.check_mdp(mdp)
    return average_reward(mdp, policy.joint_policy(spec))


def final_local_mdps(mdp: JointMDP, spec: FactoredSpec, trace: SearchTrace) -> list:
    """Local MDPs rebuilt from a finished trace's kernels and occupancies."""
    return [LocalMDP(i, trace.local_kernels[i],
                     local_reward(mdp, spec, i, trace.q_hat, trace.policy),
                     trace.n_rounds).as_mdp()
            for i in range(spec.m)]

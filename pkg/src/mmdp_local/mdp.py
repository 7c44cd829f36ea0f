"""Dense finite MDPs under the long-run average-reward criterion."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import markov
from .errors import (
    NegativeProbability,
    NoConvergence,
    NonFiniteReward,
    NonStochasticRow,
    NotErgodic,
    ValidationError,
)

ROW_SUM_ATOL = 1e-12


@dataclass(frozen=True)
class JointMDP:
    """Average-reward MDP over an enumerated state/action space.

    ``kernel[s, a, s']`` is the transition probability and ``reward[s, a]`` the
    one-step reward. ``initial_state`` is optional; when set, long-run
    quantities are taken from the closed set of states reachable from it,
    which matters for models whose chains split into several classes.
    """

    kernel: np.ndarray
    reward: np.ndarray
    initial_state: int | None = None
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        k = np.ascontiguousarray(self.kernel, dtype=float)
        r = np.ascontiguousarray(self.reward, dtype=float)
        if k.ndim != 3 or k.shape[0] != k.shape[2]:
            raise ValidationError(f"kernel must have shape (S, A, S), got {k.shape}")
        if r.shape != k.shape[:2]:
            raise ValidationError(f"reward shape {r.shape} != {k.shape[:2]}")
        k.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "reward", r)

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_actions(self) -> int:
        return self.kernel.shape[1]

    @property
    def reward_bounds(self) -> tuple[float, float]:
        return float(self.reward.min()), float(self.reward.max())

    @property
    def r_min(self) -> float:
        return float(self.reward.min())

    @property
    def r_max(self) -> float:
        return float(self.reward.max())

    def reachable_states(self) -> np.ndarray:
        """States reachable from ``initial_state`` under some action sequence."""
        if self.initial_state is None:
            return np.arange(self.n_states)
        support = self.kernel.max(axis=1)
        return markov.reachable_set(support, self.initial_state)


def validate_mdp(mdp: JointMDP) -> None:
    """Raise if the kernel is not row-stochastic or a reward is not finite."""
    k = mdp.kernel
    if np.any(k < 0):
        s, a, t = np.argwhere(k < 0)[0]
        raise NegativeProbability(f"kernel[{s}, {a}, {t}] = {k[s, a, t]}")
    if np.any(k > 1 + ROW_SUM_ATOL):
        s, a, t = np.argwhere(k > 1 + ROW_SUM_ATOL)[0]
        raise ValidationError(f"kernel[{s}, {a}, {t}] = {k[s, a, t]} > 1")
    sums = k.sum(axis=2)
    bad = np.abs(sums - 1.0) > ROW_SUM_ATOL
    if bad.any():
        s, a = np.argwhere(bad)[0]
        raise NonStochasticRow(int(s), int(a), float(sums[s, a]))
    if not np.all(np.isfinite(mdp.reward)):
        raise NonFiniteReward("reward table contains NaN or inf")
    if mdp.initial_state is not None and not 0 <= mdp.initial_state < mdp.n_states:
        raise ValidationError(f"initial_state {mdp.initial_state} out of range")


def as_policy_matrix(mdp: JointMDP, policy) -> np.ndarray:
    """Normalise a policy to an ``(S, A)`` matrix of action probabilities.

    Accepts an integer vector of action indices (deterministic) or an
    ``(S, A)`` array of probabilities (stochastic).
    """
    policy = np.asarray(policy)
    S, A = mdp.n_states, mdp.n_actions
    if policy.ndim == 1:
        if policy.shape != (S,) or not np.issubdtype(policy.dtype, np.integer):
            raise ValidationError("deterministic policy must be an int vector of length S")
        if policy.min() < 0 or policy.max() >= A:
            raise ValidationError("policy action index out of range")
        out = np.zeros((S, A))
        out[np.arange(S), policy] = 1.0
        return out
    if policy.shape != (S, A):
        raise ValidationError(f"stochastic policy must have shape {(S, A)}")
    if np.any(policy < 0) or np.any(np.abs(policy.sum(axis=1) - 1) > 1e-12):
        raise ValidationError("stochastic policy rows must be probability vectors")
    return policy.astype(float)


def induced_chain(mdp: JointMDP, policy) -> np.ndarray:
    """Transition matrix ``M[s, s'] = sum_a policy(s)(a) kernel[s, a, s']``."""
    policy = np.asarray(policy)
    if policy.ndim == 1:
        pm = as_policy_matrix(mdp, policy)
        return mdp.kernel[np.arange(mdp.n_states), policy].copy()
    pm = as_policy_matrix(mdp, policy)
    return np.einsum("sa,sat->st", pm, mdp.kernel)


def policy_reward(mdp: JointMDP, policy) -> np.ndarray:
    """Expected one-step reward per state under ``policy``."""
    policy = np.asarray(policy)
    if policy.ndim == 1:
        as_policy_matrix(mdp, policy)
        return mdp.reward[np.arange(mdp.n_states), policy].copy()
    return (as_policy_matrix(mdp, policy) * mdp.reward).sum(axis=1)


def long_run_distribution(mdp: JointMDP, chain: np.ndarray) -> np.ndarray:
    """Long-run state occupancy of ``chain`` for this MDP.

    Unichain: the stationary distribution. Otherwise the Cesaro limit from
    ``initial_state``; without an initial state a multichain chain raises
    :class:`NotErgodic`.
    """
    cs = markov.chain_structure(chain)
    if cs.unichain:
        return markov.stationary_distribution(chain).probs
    if mdp.initial_state is None:
        raise NotErgodic(
            f"induced chain has {len(cs.recurrent_classes)} recurrent classes "
            "and the MDP has no initial state"
        )
    return markov.limiting_distribution(chain, mdp.initial_state)


def average_reward(mdp: JointMDP, policy) -> float:
    """Long-run average reward ``q . r`` of a stationary policy."""
    chain = induced_chain(mdp, policy)
    q = long_run_distribution(mdp, chain)
    return float(q @ policy_reward(mdp, policy))


@dataclass(frozen=True)
class GainBias:
    """Result of relative value iteration.

    ``bias`` is pinned to zero at the reference state. For an MDP with an
    initial state, entries outside the reachable set are NaN and the policy
    there is action 0.
    """

    gain: float
    bias: np.ndarray
    policy: np.ndarray
    iterations: int = 0
    span: float = 0.0


def _greedy(Q):
    # lowest index among actions within round-off of the row maximum
    best = Q.max(axis=1, keepdims=True)
    slack = 1e-12 * max(1.0, float(np.abs(best).max()))
    return np.argmax(Q >= best - slack, axis=1)


def relative_value_iteration(mdp: JointMDP, tol: float = 1e-9,
                             max_iter: int = 100_000, reference: int = 0,
                             aperiodicity: float = 0.5,
                             check: bool = True) -> GainBias:
    """Optimal gain and greedy policy by relative value iteration.

    Each sweep applies the Bellman operator to the aperiodicity-transformed
    kernel ``tau I + (1 - tau) P`` (same gains, no oscillation on periodic
    chains) and subtracts the reference state's value. Iteration stops when
    the span of successive value differences drops below ``tol``.

    If ``mdp.initial_state`` is set, the iteration runs on the states
    reachable from it.

    Raises
    ------
    NoConvergence
        If the span is still above ``tol`` after ``max_iter`` sweeps.
    NotErgodic
        If ``check`` is set and the greedy policy's chain is multichain.
    """
    if not 0 <= aperiodicity < 1:
        raise ValueError("aperiodicity must lie in [0, 1)")
    keep = mdp.reachable_states()
    full = keep.size == mdp.n_states
    P = mdp.kernel if full else mdp.kernel[np.ix_(keep, np.arange(mdp.n_actions), keep)]
    R = mdp.reward if full else mdp.reward[keep]
    S, A = R.shape
    ref = reference if full else int(np.searchsorted(keep, mdp.initial_state))
    tau = aperiodicity
    flat = P.reshape(S * A, S)
    h = np.zeros(S)
    span = np.inf
    for it in range(1, max_iter + 1):
        Q = R + (1 - tau) * (flat @ h).reshape(S, A) + tau * h[:, None]
        Th = Q.max(axis=1)
        diff = Th - h
        lo, hi = diff.min(), diff.max()
        span = hi - lo
        h = Th - Th[ref]
        if span < tol:
            break
    else:
        raise NoConvergence(max_iter, span)
    gain = 0.5 * (lo + hi)
    Q = R + (1 - tau) * (flat @ h).reshape(S, A) + tau * h[:, None]
    pol = _greedy(Q)
    if check:
        markov.check_ergodic(P[np.arange(S), pol])
    policy = np.zeros(mdp.n_states, dtype=int)
    bias = np.full(mdp.n_states, np.nan)
    policy[keep] = pol
    bias[keep] = (1 - tau) * h
    return GainBias(float(gain), bias, policy, it, float(span))

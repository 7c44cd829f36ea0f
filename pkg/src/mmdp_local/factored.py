"""Factored state/action spaces of multi-agent MDPs.

Joint states are encoded mixed-radix with the environment component first
(most significant) followed by agents ``0 .. m-1``; joint actions likewise over
the agents. Models without an environment use ``env_state_size == 1`` and the
environment digit is then omitted from component tuples.
"""
from __future__ import annotations

import string
from dataclasses import dataclass, field
from math import prod

import numpy as np

from .errors import (
    BudgetExceeded,
    ComponentOutOfRange,
    ValidationError,
    ZeroProbabilityConditioning,
)
from .mdp import JointMDP, validate_mdp


@dataclass(frozen=True)
class FactoredSpec:
    agent_state_sizes: tuple
    agent_action_sizes: tuple
    env_state_size: int = 1
    env_kernel: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "agent_state_sizes", tuple(int(x) for x in self.agent_state_sizes))
        object.__setattr__(self, "agent_action_sizes", tuple(int(x) for x in self.agent_action_sizes))
        if len(self.agent_state_sizes) != len(self.agent_action_sizes):
            raise ValidationError("one state size and one action size per agent")
        if not self.agent_state_sizes:
            raise ValidationError("at least one agent is required")
        if min(self.agent_state_sizes + self.agent_action_sizes + (self.env_state_size,)) < 1:
            raise ValidationError("all sizes must be >= 1")
        if self.env_kernel is not None:
            k = np.asarray(self.env_kernel, dtype=float)
            if k.shape != (self.env_state_size,) * 2:
                raise ValidationError("env_kernel must be (S0, S0)")
            if np.any(k < 0) or np.any(np.abs(k.sum(axis=1) - 1) > 1e-12):
                raise ValidationError("env_kernel rows must be probability vectors")
            k.setflags(write=False)
            object.__setattr__(self, "env_kernel", k)

    @property
    def m(self) -> int:
        return len(self.agent_state_sizes)

    @property
    def has_env(self) -> bool:
        return self.env_state_size > 1

    @property
    def state_radix(self) -> tuple:
        """Sizes of the state components, environment first when present."""
        return ((self.env_state_size,) if self.has_env else ()) + self.agent_state_sizes

    @property
    def full_state_dims(self) -> tuple:
        """State component sizes including a size-1 environment slot."""
        return (self.env_state_size,) + self.agent_state_sizes

    @property
    def n_states(self) -> int:
        return self.env_state_size * prod(self.agent_state_sizes)

    @property
    def n_actions(self) -> int:
        return prod(self.agent_action_sizes)

    def local_state_count(self, i: int) -> int:
        """Size of agent ``i``'s local state space ``S0 x Si``."""
        return self.env_state_size * self.agent_state_sizes[i]

    def check_mdp(self, mdp: JointMDP) -> None:
        if (mdp.n_states, mdp.n_actions) != (self.n_states, self.n_actions):
            raise ValidationError(
                f"spec describes {self.n_states} states / {self.n_actions} actions, "
                f"MDP has {mdp.n_states} / {mdp.n_actions}"
            )

    # component tables, cached on first use
    def state_table(self) -> np.ndarray:
        """``(S, m + 1)`` array of (env, s_1, ..., s_m) per joint state."""
        return _cached(self, "_state_table",
                       lambda: np.stack(np.unravel_index(np.arange(self.n_states),
                                                         self.full_state_dims), axis=1))

    def action_table(self) -> np.ndarray:
        """``(A, m)`` array of per-agent actions per joint action."""
        return _cached(self, "_action_table",
                       lambda: np.stack(np.unravel_index(np.arange(self.n_actions),
                                                         self.agent_action_sizes), axis=1))

    def local_index(self, i: int) -> np.ndarray:
        """Agent ``i``'s local state index ``s0 * |S_i| + s_i`` for every joint state."""
        t = self.state_table()
        return t[:, 0] * self.agent_state_sizes[i] + t[:, 1 + i]

    def encode_action(self, actions) -> int:
        return _encode(self.agent_action_sizes, actions)

    def decode_action(self, index: int) -> tuple:
        return _decode(self.agent_action_sizes, index)


def _cached(obj, name, fn):
    try:
        return obj.__dict__[name]
    except KeyError:
        val = fn()
        val.setflags(write=False)
        object.__setattr__(obj, name, val)
        return val


def _encode(sizes, components) -> int:
    components = tuple(int(c) for c in components)
    if len(components) != len(sizes):
        raise ComponentOutOfRange(f"expected {len(sizes)} components, got {len(components)}")
    idx = 0
    for c, n in zip(components, sizes):
        if not 0 <= c < n:
            raise ComponentOutOfRange(f"component {c} outside [0, {n})")
        idx = idx * n + c
    return idx


def _decode(sizes, index) -> tuple:
    total = prod(sizes)
    if not 0 <= index < total:
        raise ComponentOutOfRange(f"index {index} outside [0, {total})")
    out = []
    for n in reversed(sizes):
        index, c = divmod(index, n)
        out.append(c)
    return tuple(reversed(out))


def encode_joint(spec: FactoredSpec, components) -> int:
    """Mixed-radix joint state index; environment digit first when present."""
    return _encode(spec.state_radix, components)


def decode_joint(spec: FactoredSpec, index: int) -> tuple:
    return _decode(spec.state_radix, int(index))


@dataclass(frozen=True)
class LocalPolicySet:
    """One local policy per agent over its local states ``(s0, s_i)``.

    Each table has shape ``(|S0| * |S_i|, |A_i|)`` and holds action
    probabilities; deterministic policies are one-hot rows.
    """

    tables: tuple

    def __post_init__(self):
        tabs = []
        for t in self.tables:
            t = np.array(t, dtype=float)
            if t.ndim != 2 or np.any(t < 0) or np.any(np.abs(t.sum(axis=1) - 1) > 1e-12):
                raise ValidationError("local policy tables must be row-stochastic matrices")
            t.setflags(write=False)
            tabs.append(t)
        object.__setattr__(self, "tables", tuple(tabs))

    @classmethod
    def from_actions(cls, spec: FactoredSpec, actions) -> "LocalPolicySet":
        tabs = []
        for i, acts in enumerate(actions):
            acts = np.asarray(acts, dtype=int)
            n, k = spec.local_state_count(i), spec.agent_action_sizes[i]
            if acts.shape != (n,) or acts.min() < 0 or acts.max() >= k:
                raise ValidationError(f"agent {i}: need {n} action indices in [0, {k})")
            t = np.zeros((n, k))
            t[np.arange(n), acts] = 1.0
            tabs.append(t)
        return cls(tuple(tabs))

    @classmethod
    def uniform(cls, spec: FactoredSpec) -> "LocalPolicySet":
        return cls(tuple(np.full((spec.local_state_count(i), k), 1.0 / k)
                         for i, k in enumerate(spec.agent_action_sizes)))

    def replace(self, i: int, table) -> "LocalPolicySet":
        tabs = list(self.tables)
        tabs[i] = table
        return LocalPolicySet(tuple(tabs))

    def is_deterministic(self, i: int | None = None) -> bool:
        tabs = self.tables if i is None else (self.tables[i],)
        return all(np.all((t == 0) | (t == 1)) for t in tabs)

    def actions(self, i: int) -> np.ndarray:
        """Action index per local state (argmax for stochastic rows)."""
        return np.argmax(self.tables[i], axis=1)

    def joint_policy(self, spec: FactoredSpec) -> np.ndarray:
        """Lift to a joint policy: int vector if deterministic, else ``(S, A)`` matrix."""
        if self.is_deterministic():
            acts = np.stack([self.actions(i)[spec.local_index(i)] for i in range(spec.m)], axis=1)
            return np.ravel_multi_index(tuple(acts.T), spec.agent_action_sizes)
        out = np.ones((spec.n_states,) + (1,) * spec.m)
        for i in range(spec.m):
            shape = [spec.n_states] + [1] * spec.m
            shape[1 + i] = spec.agent_action_sizes[i]
            out = out * self.tables[i][spec.local_index(i)].reshape(shape)
        return out.reshape(spec.n_states, spec.n_actions)


def factored_kernel(mdp: JointMDP, spec: FactoredSpec) -> np.ndarray:
    """View of the kernel with axes ``(s0, s_1..s_m, a_1..a_m, s0', s_1'..s_m')``."""
    spec.check_mdp(mdp)
    d = spec.full_state_dims
    return mdp.kernel.reshape(d + spec.agent_action_sizes + d)


def conditional_next_state(mdp: JointMDP, spec: FactoredSpec, i: int, s: int, a: int,
                           s_minus_i_next) -> np.ndarray:
    """Distribution of agent ``i``'s next state given everyone else's next state.

    ``s_minus_i_next`` lists the next-state components of the environment
    (when present) and of every agent except ``i``, in encoding order.

    Raises
    ------
    ZeroProbabilityConditioning
        If the conditioning event has probability zero under ``P(s, a, .)``.
    """
    spec.check_mdp(mdp)
    row = mdp.kernel[s, a].reshape(spec.full_state_dims)
    comps = list(s_minus_i_next)
    if not spec.has_env:
        comps = [0] + comps
    if len(comps) != spec.m:
        raise ComponentOutOfRange(f"expected {spec.m - 1 + spec.has_env} companion components")
    idx = comps[: 1 + i] + [slice(None)] + comps[1 + i:]
    vec = row[tuple(idx)]
    mass = vec.sum()
    if mass <= 0:
        raise ZeroProbabilityConditioning(
            f"companion next state {tuple(s_minus_i_next)} has zero probability")
    return vec / mass


@dataclass(frozen=True)
class DeltaEstimate:
    """Measured transition-dependence level.

    ``witnesses`` holds the maximising agent, its state/action and the two
    companion contexts ``(s_-i, a_-i, s_-i')`` (environment digit first in
    state tuples). In sampled mode ``value`` is a lower bound.
    """

    value: float
    exhaustive: bool
    witnesses: dict | None
    n_samples: int


def _agent_conditionals(fk, spec, i):
    """Return ``(cond, mass, ctx_shape)`` for agent ``i``.

    ``cond`` has shape ``(S_i, A_i, C, S_i)``: the conditional next-state
    distribution of agent ``i`` for every companion context ``c``.
    """
    m = spec.m
    n_s = m + 1
    own_s, own_a, own_n = 1 + i, n_s + i, n_s + m + 1 + i
    other_s = [k for k in range(n_s) if k != own_s]
    other_a = [n_s + k for k in range(m) if k != i]
    other_n = [n_s + m + k for k in range(n_s) if k != 1 + i]
    order = [own_s, own_a] + other_s + other_a + other_n + [own_n]
    t = np.transpose(fk, order)
    ctx_shape = t.shape[2:-1]
    t = t.reshape(t.shape[0], t.shape[1], -1, t.shape[-1])
    mass = t.sum(axis=3)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = t / mass[..., None]
    return cond, mass, ctx_shape


def _max_pairwise_tv(rows):
    """``(tv, p, q)`` maximising half-L1 distance over row pairs (first max wins)."""
    n, k = rows.shape
    if n < 2:
        return 0.0, 0, 0
    best, bp, bq = -1.0, 0, 0
    step = max(1, 4_000_000 // max(1, n * k))
    for p0 in range(0, n, step):
        d = np.abs(rows[p0:p0 + step, None, :] - rows[None, :, :]).sum(axis=2)
        flat = int(np.argmax(d))
        p, q = divmod(flat, n)
        if d[p, q] > best:
            best, bp, bq = float(d[p, q]), p0 + p, q
    return 0.5 * best, min(bp, bq), max(bp, bq)


def _context_tuple(spec, i, ctx_shape, c):
    comps = np.unravel_index(c, ctx_shape)
    n_s = spec.m  # current-state companions: env + (m - 1) agents
    s_other = tuple(int(x) for x in comps[:n_s])
    a_other = tuple(int(x) for x in comps[n_s:n_s + spec.m - 1])
    n_other = tuple(int(x) for x in comps[n_s + spec.m - 1:])
    if not spec.has_env:
        s_other, n_other = s_other[1:], n_other[1:]
    return {"s_minus_i": s_other, "a_minus_i": a_other, "s_minus_i_next": n_other}


def measure_delta(mdp: JointMDP, spec: FactoredSpec, mode: str = "exhaustive",
                  budget: int = 4096, seed: int = 0) -> DeltaEstimate:
    """Largest TV change in one agent's conditional next-state distribution.

    For each agent ``i`` and own ``(s_i, a_i)`` the companion contexts are all
    ``(s_-i, a_-i, s_-i')`` with positive probability; ``budget`` caps the
    contexts examined per ``(i, s_i, a_i)`` group. ``"exhaustive"`` raises
    :class:`BudgetExceeded` when a group is larger than the budget;
    ``"sampled"`` draws ``budget`` contexts per oversized group without
    replacement and returns a lower bound.
    """
    if mode not in ("exhaustive", "sampled"):
        raise ValueError("mode must be 'exhaustive' or 'sampled'")
    fk = factored_kernel(mdp, spec)
    rng = np.random.default_rng(seed)
    best, wit, examined, complete = -1.0, None, 0, True
    for i in range(spec.m):
        cond, mass, ctx_shape = _agent_conditionals(fk, spec, i)
        n_si, n_ai = cond.shape[:2]
        for si in range(n_si):
            for ai in range(n_ai):
                ctx = np.flatnonzero(mass[si, ai] > 0)
                if ctx.size > budget:
                    if mode == "exhaustive":
                        raise BudgetExceeded(int(ctx.size), budget)
                    ctx = np.sort(rng.choice(ctx, size=budget, replace=False))
                    complete = False
                examined += ctx.size
                rows = cond[si, ai, ctx]
                _, first, inverse = np.unique(np.round(rows, 12), axis=0,
                                              return_index=True, return_inverse=True)
                order = np.argsort(first)
                uniq = rows[first[order]]
                tv, p, q = _max_pairwise_tv(uniq)
                if tv > best + 1e-15:
                    best = tv
                    wit = {
                        "agent": i, "s_i": si, "a_i": ai,
                        "context_a": _context_tuple(spec, i, ctx_shape, int(ctx[first[order[p]]])),
                        "context_b": _context_tuple(spec, i, ctx_shape, int(ctx[first[order[q]]])),
                    }
    best = max(best, 0.0)
    return DeltaEstimate(float(min(best, 1.0)), mode == "exhaustive" or complete, wit, examined)


def _product_kernel(factors):
    """Outer product of per-component kernels ``(n_k, a_k, n_k)`` into a joint kernel."""
    letters = iter(string.ascii_letters)
    subs_in, s_idx, a_idx, n_idx = [], [], [], []
    for f in factors:
        s, a, n = next(letters), next(letters), next(letters)
        subs_in.append(s + a + n)
        s_idx.append(s)
        a_idx.append(a)
        n_idx.append(n)
    expr = ",".join(subs_in) + "->" + "".join(s_idx + a_idx + n_idx)
    out = np.einsum(expr, *factors)
    S = prod(f.shape[0] for f in factors)
    A = prod(f.shape[1] for f in factors)
    return out.reshape(S, A, S)


def build_ti_surrogate(spec: FactoredSpec, per_agent_kernels, reward,
                       initial_state: int | None = None) -> JointMDP:
    """Transition-independent MDP with product kernel and the original reward.

    ``per_agent_kernels[i]`` has shape ``(|S_i|, |A_i|, |S_i|)``. With an
    environment component, ``spec.env_kernel`` supplies its (action-free)
    factor and is required.
    """
    kernels = [np.asarray(k, dtype=float) for k in per_agent_kernels]
    if len(kernels) != spec.m:
        raise ValidationError(f"need {spec.m} per-agent kernels")
    for i, k in enumerate(kernels):
        n, a = spec.agent_state_sizes[i], spec.agent_action_sizes[i]
        if k.shape != (n, a, n):
            raise ValidationError(f"agent {i} kernel must have shape {(n, a, n)}, got {k.shape}")
    if spec.has_env:
        if spec.env_kernel is None:
            raise ValidationError("a transition-independent surrogate needs spec.env_kernel")
        # env factor has a dummy action axis of length 1
        env = spec.env_kernel[:, None, :]
        joint = _product_kernel([env] + kernels)
    else:
        joint = _product_kernel(kernels)
    if isinstance(reward, JointMDP):
        reward = reward.reward
    sur = JointMDP(joint, np.asarray(reward, dtype=float), initial_state=initial_state,
                   name="ti-surrogate")
    validate_mdp(sur)
    return sur

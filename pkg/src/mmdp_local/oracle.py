"""Ground-truth baselines: global value iteration and exhaustive local search."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapExceeded, NotErgodic
from .factored import FactoredSpec, LocalPolicySet
from .local_search import evaluate_on_joint
from .mdp import GainBias, JointMDP, relative_value_iteration


def global_baseline(mdp: JointMDP, tol: float = 1e-9, max_iter: int = 100_000) -> GainBias:
    """Optimal gain over all joint stationary policies."""
    return relative_value_iteration(mdp, tol=tol, max_iter=max_iter)


def local_policy_count(spec: FactoredSpec) -> int:
    """Number of deterministic local policy tuples."""
    return int(np.prod([float(spec.agent_action_sizes[i]) ** spec.local_state_count(i)
                        for i in range(spec.m)]))


def iter_local_policies(spec: FactoredSpec):
    """Every deterministic local policy tuple, in lexicographic order."""
    per_agent = [itertools.product(range(spec.agent_action_sizes[i]),
                                   repeat=spec.local_state_count(i))
                 for i in range(spec.m)]
    for combo in itertools.product(*[list(p) for p in per_agent]):
        yield LocalPolicySet.from_actions(spec, [np.array(c) for c in combo])


@dataclass(frozen=True)
class BruteForceResult:
    best: LocalPolicySet
    value: float
    n_evaluated: int
    n_skipped: int


def brute_force_local(mdp: JointMDP, spec: FactoredSpec, cap: int = 1_000_000) -> BruteForceResult:
    """Best deterministic local policy tuple by exhaustive evaluation.

    Tuples whose joint chain has no well-defined long-run reward raise
    :class:`NotErgodic` in evaluation; they are skipped and counted. Ties keep
    the first tuple in enumeration order.

    Raises
    ------
    CapExceeded
        If the number of tuples exceeds ``cap``.
    """
    count = local_policy_count(spec)
    if count > cap:
        raise CapExceeded(count, cap)
    best, best_val, skipped, seen = None, -np.inf, 0, 0
    for pol in iter_local_policies(spec):
        seen += 1
        try:
            v = evaluate_on_joint(mdp, spec, pol)
        except NotErgodic:
            skipped += 1
            continue
        if v > best_val:
            best, best_val = pol, v
    if best is None:
        raise NotErgodic("no local policy tuple induces a unichain joint chain")
    return BruteForceResult(best, float(best_val), seen, skipped)


def set_function_value(mdp: JointMDP, spec: FactoredSpec, assignment: dict,
                       reward_for_agents) -> float:
    """Average reward of a partial assignment ``{agent: local action table}``.

    Agents outside the assignment keep the uniform random policy for their
    own motion and contribute nothing to the reward; ``reward_for_agents``
    maps an agent subset to the matching reward table.
    """
    tables = list(LocalPolicySet.uniform(spec).tables)
    for i, acts in assignment.items():
        t = np.zeros_like(tables[i])
        t[np.arange(len(acts)), acts] = 1.0
        tables[i] = t
    pol = LocalPolicySet(tuple(tables))
    sub = JointMDP(mdp.kernel, reward_for_agents(tuple(sorted(assignment))),
                   initial_state=mdp.initial_state)
    return evaluate_on_joint(sub, spec, pol)


def submodularity_violations(mdp: JointMDP, spec: FactoredSpec, reward_for_agents,
                             atol: float = 1e-12) -> tuple[int, int]:
    """Check the exchange inequality over the partition-matroid ground set.

    Ground elements are ``(agent, local policy)`` pairs; feasible sets pick at
    most one policy per agent. For every feasible ``X`` contained in feasible
    ``Y`` and every element ``e`` on an agent absent from ``Y``, require
    ``f(X + e) - f(X) >= f(Y + e) - f(Y)`` and monotonicity
    ``f(X) <= f(Y)``. Returns ``(n_checked, n_violations)``.
    """
    options = [list(itertools.product(range(spec.agent_action_sizes[i]),
                                      repeat=spec.local_state_count(i)))
               for i in range(spec.m)]
    cache = {}

    def f(assign):
        key = tuple(sorted(assign.items()))
        if key not in cache:
            cache[key] = set_function_value(mdp, spec, {i: np.array(a) for i, a in assign.items()},
                                            reward_for_agents)
        return cache[key]

    # every feasible set: each agent absent (None) or one of its options
    choices = [[None] + opts for opts in options]
    feasible = [{i: c for i, c in enumerate(combo) if c is not None}
                for combo in itertools.product(*choices)]
    checked = violations = 0
    for Y in feasible:
        fy = f(Y)
        subsets = [dict(zip(keys, (Y[k] for k in keys)))
                   for r in range(len(Y) + 1) for keys in itertools.combinations(sorted(Y), r)]
        for X in subsets:
            fx = f(X)
            checked += 1
            if fx > fy + atol:
                violations += 1
            for j in range(spec.m):
                if j in Y:
                    continue
                for e in options[j]:
                    gain_x = f({**X, j: e}) - fx
                    gain_y = f({**Y, j: e}) - fy
                    checked += 1
                    if gain_x < gain_y - atol:
                        violations += 1
    return checked, violations

"""Optimality-bound bookkeeping for local policies on weakly coupled MMDPs.

The chain of bounds relates three quantities: the average reward of a local
policy on the original model ``M``, on its transition-independent surrogate
``M_hat``, and the best local policy's reward. All checks here are empirical:
they evaluate both sides of an inequality on concrete instances.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import markov
from .factored import DeltaEstimate, FactoredSpec, LocalPolicySet, build_ti_surrogate
from .local_search import SearchConfig, SearchTrace, evaluate_on_joint
from .mdp import (
    JointMDP,
    average_reward,
    induced_chain,
    long_run_distribution,
    relative_value_iteration,
)


@dataclass(frozen=True)
class BoundReport:
    """Every term of the optimality bound for one finished search.

    ``theorem2_rhs`` follows the stated bound with a ``4 r_max`` factor;
    ``theorem2_rhs_tight`` replaces that term with ``2 * lemma4_gap_bound``,
    which uses the reward range instead. ``lambda_bar_kind`` records where
    ``lambda_bar`` came from (``"sampled"``, ``"exhaustive"`` or
    ``"per-policy"``); it is never the true supremum unless exhaustive.
    """

    j_hat_on_surrogate: float
    j_hat_on_original: float
    delta: float
    lambda_bar: float
    lambda_bar_kind: str
    epsilon: float
    m: int
    r_max: float
    r_min: float
    theorem2_rhs: float
    theorem2_rhs_tight: float
    lemma4_gap_bound: float
    lemma2_factor: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def lemma4_bound(r_max, r_min, lambda_bar, m, delta) -> float:
    return (r_max - r_min) * 2.0 * lambda_bar * m * delta


def theorem2_rhs(r_max, lambda_bar, m, delta, epsilon, j_sur, j_orig) -> float:
    return 4.0 * r_max * lambda_bar * m * delta + (1 + m * epsilon) * j_sur + j_orig


def _lambda_value(lambda_bar):
    if isinstance(lambda_bar, markov.ErgodicityReport):
        kind = "exhaustive" if lambda_bar.exhaustive else "sampled"
        return float(lambda_bar.lambda_bar_estimate), kind
    return float(lambda_bar), "per-policy"


def surrogate_from_trace(spec: FactoredSpec, mdp: JointMDP, trace: SearchTrace) -> JointMDP:
    """Product-kernel surrogate built from a run's per-agent local kernels."""
    return build_ti_surrogate(spec, trace.local_kernels, mdp.reward,
                              initial_state=mdp.initial_state)


def compute_bound_report(run: SearchTrace, mdp: JointMDP, surrogate: JointMDP,
                         delta, lambda_bar, config: SearchConfig | None = None,
                         spec: FactoredSpec | None = None) -> BoundReport:
    """Assemble the bound terms for a finished search.

    ``delta`` is a :class:`DeltaEstimate` or a number; ``lambda_bar`` an
    :class:`ErgodicityReport` or a number (taken as a per-policy value).
    """
    if spec is None:
        raise TypeError("spec is required to lift local policies to the joint model")
    config = run.config if config is None else config
    d = float(delta.value) if isinstance(delta, DeltaEstimate) else float(delta)
    lam, kind = _lambda_value(lambda_bar)
    m = spec.m
    eps = float(config.epsilon)
    j_sur = evaluate_on_joint(surrogate, spec, run.policy)
    j_org = evaluate_on_joint(mdp, spec, run.policy)
    r_min, r_max = mdp.reward_bounds
    gap = lemma4_bound(r_max, r_min, lam, m, d)
    return BoundReport(
        j_hat_on_surrogate=j_sur,
        j_hat_on_original=j_org,
        delta=d,
        lambda_bar=lam,
        lambda_bar_kind=kind,
        epsilon=eps,
        m=m,
        r_max=r_max,
        r_min=r_min,
        theorem2_rhs=theorem2_rhs(r_max, lam, m, d, eps, j_sur, j_org),
        theorem2_rhs_tight=2.0 * gap + (1 + m * eps) * j_sur + j_org,
        lemma4_gap_bound=gap,
        lemma2_factor=1.0 / (2.0 + eps * m),
    )


def policy_lambda(mdp: JointMDP, spec: FactoredSpec, policy: LocalPolicySet) -> float:
    """``lambda1(Z#)`` of the joint chain induced by a local policy set."""
    P = induced_chain(mdp, policy.joint_policy(spec))
    q = long_run_distribution(mdp, P)
    if mdp.initial_state is not None:
        keep = mdp.reachable_states()
        P, q = P[np.ix_(keep, keep)], q[keep]
    return markov.ergodicity_coefficient(markov.group_inverse(P, q))


def verify_lemma4(mdp: JointMDP, surrogate: JointMDP, spec: FactoredSpec,
                  policy: LocalPolicySet, delta, lambda_bar=None,
                  atol: float = 1e-9) -> tuple[float, float, bool]:
    """Compare ``|J_M_hat(pi) - J_M(pi)|`` with the perturbation bound.

    Without ``lambda_bar`` the exact ``lambda1(Z#)`` of the policy's chain on
    ``mdp`` is used. Returns ``(gap, bound, gap <= bound + atol)``.
    """
    d = float(delta.value) if isinstance(delta, DeltaEstimate) else float(delta)
    lam = policy_lambda(mdp, spec, policy) if lambda_bar is None else _lambda_value(lambda_bar)[0]
    gap = abs(evaluate_on_joint(surrogate, spec, policy) - evaluate_on_joint(mdp, spec, policy))
    bound = lemma4_bound(mdp.r_max, mdp.r_min, lam, spec.m, d)
    return gap, bound, gap <= bound + atol


def surrogate_row_gap(mdp: JointMDP, surrogate: JointMDP, spec: FactoredSpec,
                      policy: LocalPolicySet) -> float:
    """Largest per-state TV distance between the two induced joint chains."""
    jp = policy.joint_policy(spec)
    P = induced_chain(mdp, jp)
    Q = induced_chain(surrogate, jp)
    return float(0.5 * np.abs(P - Q).sum(axis=1).max())


def lemma1_gaps(trace: SearchTrace, local_mdps) -> np.ndarray:
    """Per-agent ratio headroom ``best_local_gain - (1 + eps) * incumbent``.

    Non-positive entries (up to solver tolerance) mean no single agent can
    improve its local gain by the search's factor.
    """
    eps = trace.config.epsilon
    out = []
    for i, local in enumerate(local_mdps):
        best = relative_value_iteration(local, tol=trace.config.tol).gain
        inc = average_reward(local, trace.policy.tables[i])
        out.append(best - (1 + eps) * inc)
    return np.array(out)


__all__ = [
    "BoundReport",
    "compute_bound_report",
    "lemma1_gaps",
    "lemma4_bound",
    "policy_lambda",
    "surrogate_from_trace",
    "surrogate_row_gap",
    "theorem2_rhs",
    "verify_lemma4",
]

"""Finite Markov chain analysis.

Stationary distributions, recurrent-class structure, total-variation distance,
the ergodicity coefficient, the group inverse of ``I - P`` and the resulting
stationary-distribution perturbation bound.

Chains are dense ``(n, n)`` row-stochastic numpy arrays.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from math import gcd

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .errors import (
    AllSampledPoliciesNonErgodic,
    CapExceeded,
    IdentityCheckFailed,
    LengthMismatch,
    NotADistribution,
    NotErgodic,
    NotSquare,
    SingularSystem,
)

_SUPPORT_EPS = 0.0


def _as_square(P, name="P"):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise NotSquare(f"{name} must be square, got shape {P.shape}")
    return P


@dataclass(frozen=True)
class StationaryDistribution:
    probs: np.ndarray

    def __post_init__(self):
        self.probs.setflags(write=False)

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __len__(self):
        return len(self.probs)


@dataclass(frozen=True)
class ChainStructure:
    """Communicating-class decomposition of a chain's support graph."""

    recurrent_classes: tuple
    periods: tuple
    transient: np.ndarray

    @property
    def unichain(self) -> bool:
        return len(self.recurrent_classes) == 1

    @property
    def irreducible(self) -> bool:
        return self.unichain and self.transient.size == 0

    @property
    def aperiodic(self) -> bool:
        return all(p == 1 for p in self.periods)

    @property
    def ergodic(self) -> bool:
        return self.irreducible and self.aperiodic


def _class_period(adj, members):
    # gcd over in-class edges of level[u] + 1 - level[v], BFS levels from one member
    sub = adj[members][:, members]
    order, pred = breadth_first_order(sub, 0, directed=True, return_predecessors=True)
    level = np.full(len(members), -1)
    level[0] = 0
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    coo = sub.tocoo()
    diffs = np.abs(level[coo.row] + 1 - level[coo.col])
    return int(reduce(gcd, diffs.tolist(), 0)) or 1


def chain_structure(P) -> ChainStructure:
    """Recurrent classes, their periods, and transient states of ``P``."""
    P = _as_square(P)
    adj = csr_matrix(P > _SUPPORT_EPS)
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    # a strong component is closed iff no edge leaves it
    coo = adj.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    open_comp = np.zeros(n_comp, dtype=bool)
    open_comp[labels[coo.row[leaving]]] = True
    classes, periods = [], []
    for c in range(n_comp):
        if open_comp[c]:
            continue
        members = np.flatnonzero(labels == c)
        classes.append(members)
        periods.append(_class_period(adj, members))
    order = np.argsort([m[0] for m in classes])
    classes = tuple(classes[k] for k in order)
    periods = tuple(periods[k] for k in order)
    transient = np.flatnonzero(open_comp[labels])
    return ChainStructure(classes, periods, transient)


def check_ergodic(P) -> ChainStructure:
    """Raise :class:`NotErgodic` unless ``P`` has exactly one recurrent class.

    A single recurrent class is what makes the stationary distribution and the
    long-run average reward independent of the initial state. Periodicity is
    reported in the returned structure but not rejected.
    """
    cs = chain_structure(P)
    if not cs.unichain:
        raise NotErgodic(f"chain has {len(cs.recurrent_classes)} recurrent classes")
    return cs


def reachable_set(P, start) -> np.ndarray:
    """Sorted indices of the states reachable from ``start`` (inclusive)."""
    adj = csr_matrix(np.asarray(P) > _SUPPORT_EPS)
    return np.sort(breadth_first_order(adj, int(start), directed=True,
                                       return_predecessors=False))


def _solve_stationary(P):
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        q = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    # one step of iterative refinement
    q = q + np.linalg.solve(A, b - A @ q)
    q = np.where(np.abs(q) < 1e-15, 0.0, q)
    if np.any(q < -1e-10) or not np.all(np.isfinite(q)):
        raise SingularSystem("stationary solve produced negative mass")
    q = np.clip(q, 0.0, None)
    return q / q.sum()


def stationary_distribution(P) -> StationaryDistribution:
    """Unique stationary distribution of a chain with one recurrent class.

    Solves ``q (P - I) = 0`` with one balance equation replaced by the
    normalisation ``sum(q) = 1``, on the recurrent class only; transient states
    get zero mass.

    Raises
    ------
    NotErgodic
        If the chain has more than one recurrent class.
    """
    P = _as_square(P)
    cs = check_ergodic(P)
    members = cs.recurrent_classes[0]
    q = np.zeros(P.shape[0])
    q[members] = _solve_stationary(P[np.ix_(members, members)])
    resid = np.max(np.abs(q @ P - q))
    if resid > 1e-10:
        raise SingularSystem(f"stationary residual {resid:.3e} exceeds 1e-10")
    return StationaryDistribution(q)


def limiting_distribution(P, start: int) -> np.ndarray:
    """Cesaro-limit state distribution of ``P`` started from ``start``.

    Works for multichain ``P``: the result mixes the stationary distributions
    of the recurrent classes by their absorption probabilities from ``start``.
    """
    P = _as_square(P)
    cs = chain_structure(P)
    n = P.shape[0]
    out = np.zeros(n)
    class_of = np.full(n, -1)
    for k, members in enumerate(cs.recurrent_classes):
        class_of[members] = k
    if class_of[start] >= 0:
        members = cs.recurrent_classes[class_of[start]]
        out[members] = _solve_stationary(P[np.ix_(members, members)])
        return out
    T = cs.transient
    pos = {s: k for k, s in enumerate(T)}
    Q = P[np.ix_(T, T)]
    N = np.eye(len(T)) - Q
    for members in cs.recurrent_classes:
        into = P[np.ix_(T, members)].sum(axis=1)
        absorb = np.linalg.solve(N, into)[pos[start]]
        if absorb > 0:
            out[members] += absorb * _solve_stationary(P[np.ix_(members, members)])
    return out


def monte_carlo_stationary(P, n_steps=100_000, restart_every=None, seed=0,
                           start=0) -> np.ndarray:
    """Visit-frequency estimate of the stationary distribution by simulation.

    ``restart_every`` re-draws the current state uniformly after that many
    steps, which helps cover slowly mixing chains.
    """
    P = _as_square(P)
    n = P.shape[0]
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(P, axis=1)
    counts = np.zeros(n)
    s = int(start)
    u = rng.random(n_steps)
    for t in range(n_steps):
        if restart_every and t and t % restart_every == 0:
            s = int(rng.integers(n))
        counts[s] += 1
        s = min(int(np.searchsorted(cdf[s], u[t], side="right")), n - 1)
    return counts / counts.sum()


def total_variation(mu, nu) -> float:
    """Total-variation distance ``0.5 * sum |mu - nu|``."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != nu.shape:
        raise LengthMismatch(f"shapes {mu.shape} and {nu.shape} differ")
    for name, v in (("mu", mu), ("nu", nu)):
        if np.any(v < -1e-12) or abs(v.sum() - 1.0) > 1e-9:
            raise NotADistribution(f"{name} is not a probability vector")
    return float(0.5 * np.abs(mu - nu).sum())


def ergodicity_coefficient(M) -> float:
    """Half the largest L1 distance between two rows of a square matrix.

    Defined for arbitrary real square matrices, not only stochastic ones.
    """
    M = _as_square(M, "M")
    n = M.shape[0]
    best = 0.0
    # chunk rows so the pairwise tensor stays small
    step = max(1, 2_000_000 // max(1, n * n))
    for i0 in range(0, n, step):
        d = np.abs(M[i0:i0 + step, None, :] - M[None, :, :]).sum(axis=2)
        best = max(best, float(d.max()))
    return 0.5 * best


def group_inverse(P, q=None, atol=1e-9) -> np.ndarray:
    """Group inverse of ``Z = I - P`` for a chain with stationary vector ``q``.

    Computed as ``inv(I - P + W) - W`` where every row of ``W`` equals ``q``,
    then checked against the three defining identities.

    Raises
    ------
    SingularSystem
        If ``I - P + W`` cannot be inverted.
    IdentityCheckFailed
        If an identity residual exceeds ``atol``.
    """
    P = _as_square(P)
    n = P.shape[0]
    q = stationary_distribution(P).probs if q is None else np.asarray(q, float)
    W = np.tile(q, (n, 1))
    Z = np.eye(n) - P
    try:
        Zs = np.linalg.inv(Z + W) - W
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    resid = group_inverse_residual(Z, Zs)
    if resid > atol:
        raise IdentityCheckFailed(resid)
    return Zs


def group_inverse_residual(Z, Zs) -> float:
    """Largest entrywise residual of ``Z Zs Z = Z``, ``Zs Z Zs = Zs``, ``Zs Z = Z Zs``."""
    return float(max(
        np.max(np.abs(Z @ Zs @ Z - Z)),
        np.max(np.abs(Zs @ Z @ Zs - Zs)),
        np.max(np.abs(Zs @ Z - Z @ Zs)),
    ))


def matrix_one_norm(D) -> float:
    """Maximum absolute row sum."""
    return float(np.abs(np.asarray(D, float)).sum(axis=1).max())


def perturbation_gap_bound(P, P_prime):
    """Bound and actual TV distance between the stationary vectors of two chains.

    Returns ``(bound, actual)`` with ``bound = 0.5 * lambda1(Z#(P)) * ||P - P'||``
    using the max-row-sum norm.
    """
    P = _as_square(P)
    P_prime = _as_square(P_prime, "P_prime")
    q = stationary_distribution(P).probs
    q2 = stationary_distribution(P_prime).probs
    Zs = group_inverse(P, q)
    bound = 0.5 * ergodicity_coefficient(Zs) * matrix_one_norm(P - P_prime)
    actual = total_variation(q, q2)
    return bound, actual


@dataclass(frozen=True)
class ErgodicityReport:
    """Running maximum of ``lambda1(Z#)`` over the policies examined.

    ``exhaustive`` is True only when every deterministic policy was examined;
    otherwise ``lambda_bar_estimate`` is a sampled lower bound on the supremum.
    """

    lambda1_of_P: float
    group_inverse_lambda1: float
    lambda_bar_estimate: float
    n_policies_sampled: int
    n_skipped: int = 0
    exhaustive: bool = False


def _policy_lambda(mdp, actions):
    """``(lambda1(P_pi), lambda1(Z#(P_pi)))`` on the start state's closed class."""
    S = mdp.n_states
    chain = mdp.kernel[np.arange(S), actions]
    if mdp.initial_state is not None:
        keep = reachable_set(chain, mdp.initial_state)
        chain = chain[np.ix_(keep, keep)]
    q = stationary_distribution(chain).probs
    return ergodicity_coefficient(chain), ergodicity_coefficient(group_inverse(chain, q))


def _scan_policies(policies, mdp):
    best = (-1.0, 0.0)
    seen = skipped = 0
    for actions in policies:
        seen += 1
        try:
            lam_p, lam_z = _policy_lambda(mdp, actions)
        except (NotErgodic, SingularSystem, IdentityCheckFailed):
            skipped += 1
            continue
        if lam_z > best[0]:
            best = (lam_z, lam_p)
    return best, seen, skipped


def estimate_lambda_bar(mdp, n_samples: int, seed: int = 0) -> ErgodicityReport:
    """Sampled lower bound on the maximum of ``lambda1(Z#)`` over stationary policies.

    Deterministic policies are drawn uniformly one at a time from a seeded
    stream, so the estimate is nondecreasing in ``n_samples``. Policies whose
    chain has several recurrent classes are skipped and counted.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    S, A = mdp.n_states, mdp.n_actions
    policies = (rng.integers(0, A, size=S) for _ in range(n_samples))
    (lam_z, lam_p), seen, skipped = _scan_policies(policies, mdp)
    if lam_z < 0:
        raise AllSampledPoliciesNonErgodic(f"all {seen} sampled policies skipped")
    return ErgodicityReport(lam_p, lam_z, lam_z, seen, skipped, exhaustive=False)


def lambda_bar_exhaustive(mdp, cap: int = 100_000) -> ErgodicityReport:
    """Exact maximum of ``lambda1(Z#)`` over every deterministic policy."""
    count = mdp.n_actions ** mdp.n_states
    if count > cap:
        raise CapExceeded(count, cap)
    policies = (np.array(p) for p in
                itertools.product(range(mdp.n_actions), repeat=mdp.n_states))
    (lam_z, lam_p), seen, skipped = _scan_policies(policies, mdp)
    if lam_z < 0:
        raise AllSampledPoliciesNonErgodic("no deterministic policy is unichain")
    return ErgodicityReport(lam_p, lam_z, lam_z, seen, skipped, exhaustive=True)

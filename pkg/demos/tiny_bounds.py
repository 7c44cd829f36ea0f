"""Checking the optimality bounds on a model small enough to enumerate.

Two agents with two states and two actions each share a coverage reward and
a mildly coupled kernel. Every local policy pair is evaluated exhaustively,
so the local search can be compared with the true best local policy, and the
bound can be checked against it.

Run with ``python demos/tiny_bounds.py``.
"""
import numpy as np

from mmdp_local import markov
from mmdp_local.bounds import compute_bound_report, surrogate_from_trace
from mmdp_local.factored import measure_delta
from mmdp_local.local_search import evaluate_on_joint, run_algorithm1
from mmdp_local.oracle import brute_force_local, global_baseline, submodularity_violations
from mmdp_local.scenarios import random_mmdp

mdp, spec, _, cov = random_mmdp(np.random.default_rng(3), (2, 2), (2, 2), coupling=0.2)
trace = run_algorithm1(mdp, spec)
sur = surrogate_from_trace(spec, mdp, trace)

found = evaluate_on_joint(mdp, spec, trace.policy)
best = brute_force_local(mdp, spec)
joint = global_baseline(mdp).gain
print(f"local search {found:.4f}, best local pair {best.value:.4f} "
      f"(of {best.n_evaluated}), joint optimum {joint:.4f}")

delta = measure_delta(mdp, spec)
lam = markov.lambda_bar_exhaustive(mdp)
rep = compute_bound_report(trace, mdp, sur, delta, lam, spec=spec)
print(f"delta {delta.value:.4f}, exact lambda_bar {rep.lambda_bar:.3f}")
print(f"best local {best.value:.4f} <= bound {rep.theorem2_rhs:.4f}: "
      f"{best.value <= rep.theorem2_rhs}")

# the half-approximation holds on the surrogate
sur_best = brute_force_local(sur, spec).value
print(f"surrogate: search {rep.j_hat_on_surrogate:.4f} vs half of best {0.5 * sur_best:.4f}")

# diminishing returns of the coverage objective on the independent model
ti, ti_spec, _, ti_cov = random_mmdp(np.random.default_rng(0), (2, 2), (2, 2), coupling=0.0)
checked, bad = submodularity_violations(ti, ti_spec, lambda ag: ti_cov.table(ti_spec, ag))
print(f"exchange inequality: {checked} checks, {bad} violations")

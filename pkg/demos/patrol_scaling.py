"""Patrol units against one adversary, for 3 to 8 locations.

For every site count, runs the local-policy search and the joint optimum on
the same model and prints a table of rewards and wall-clock times.

Run with ``python demos/patrol_scaling.py``.
"""
import time

from mmdp_local.local_search import evaluate_on_joint, run_algorithm1
from mmdp_local.oracle import global_baseline
from mmdp_local.scenarios import PatrolConfig, build_patrol


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


print(f"{'sites':>5} {'states':>7} {'actions':>7} {'local':>8} {'joint':>8} "
      f"{'ratio':>6} {'t_local':>8} {'t_joint':>8}")
for L in range(3, 9):
    cfg = PatrolConfig(n_units=2, n_adversaries=1, n_locations=L, c=0.9, d=1.0,
                       delta_scenario=0.9, beta=0.9, eta=0.75)
    mdp, spec = build_patrol(cfg)
    trace, t_loc = timed(lambda: run_algorithm1(mdp, spec))
    best, t_glob = timed(lambda: global_baseline(mdp))
    local = evaluate_on_joint(mdp, spec, trace.policy)
    print(f"{L:>5} {mdp.n_states:>7} {mdp.n_actions:>7} {local:8.4f} {best.gain:8.4f} "
          f"{local / best.gain:6.3f} {t_loc:8.3f} {t_glob:8.3f}")

"""Command-line runner: ``mmdp-local {solve,bench,analyze,baseline,oracle}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from . import markov
from .bounds import compute_bound_report, surrogate_from_trace
from .config import build_scenario, describe, load_config, scenario_key
from .errors import MMDPError, SolverError, ValidationError
from .factored import measure_delta
from .local_search import evaluate_on_joint, run_algorithm1
from .oracle import brute_force_local, global_baseline

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

BENCH_COLUMNS = ["setting", "n_states", "n_actions", "alg_reward", "global_reward",
                 "reward_ratio", "alg_runtime_s", "global_runtime_s", "runtime_ratio", "errors"]


def fmt(x) -> str:
    """Numbers at 12 significant digits, locale independent."""
    if isinstance(x, bool) or x is None:
        return str(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def _emit_pairs(pairs, out_path):
    text = "".join(f"{k}: {fmt(v)}\n" for k, v in pairs)
    sys.stdout.write(text)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)


def _load_cache(path):
    if not path or not os.path.exists(path):
        return {}
    with open(path) as fh:
        return json.load(fh)


def _store_cache(path, key, entry):
    cache = _load_cache(path)
    cache[key] = entry
    with open(path, "w") as fh:
        json.dump(cache, fh, indent=1, sort_keys=True)


def _surrogate_value(mdp, spec, trace):
    try:
        sur = surrogate_from_trace(spec, mdp, trace)
        return sur, evaluate_on_joint(sur, spec, trace.policy)
    except (ValidationError, SolverError):
        return None, None


def _require_scenario(cfg):
    if cfg.scenario is None:
        raise ValidationError("scenario: missing required section")
    return cfg.scenario


def cmd_solve(cfg, args):
    section = _require_scenario(cfg)
    mdp, spec = build_scenario(section)
    search = replace(cfg.search, seed=cfg.seed)
    t0 = time.perf_counter()
    trace = run_algorithm1(mdp, spec, search)
    wall = time.perf_counter() - t0
    reward = evaluate_on_joint(mdp, spec, trace.policy)
    _, sur = _surrogate_value(mdp, spec, trace)
    pairs = [("setting", describe(section)), ("seed", cfg.seed),
             ("reward", reward), ("reward_surrogate", "n/a" if sur is None else sur),
             ("rounds", trace.n_rounds), ("termination", trace.termination),
             ("wall_s", wall)]
    cached = _load_cache(cfg.baseline_cache).get(scenario_key(section))
    if cached is not None:
        pairs.append(("global_reward", cached["gain"]))
        pairs.append(("reward_ratio", reward / cached["gain"] if cached["gain"] else float("nan")))
    for note in trace.notes:
        pairs.append(("note", note))
    _emit_pairs(pairs, args.out)
    return EXIT_OK


def cmd_baseline(cfg, args):
    section = _require_scenario(cfg)
    mdp, _ = build_scenario(section)
    t0 = time.perf_counter()
    gb = global_baseline(mdp, tol=cfg.tol, max_iter=cfg.max_iter)
    wall = time.perf_counter() - t0
    if cfg.baseline_cache:
        _store_cache(cfg.baseline_cache, scenario_key(section),
                     {"setting": describe(section), "gain": gb.gain, "wall_s": wall})
    _emit_pairs([("setting", describe(section)), ("gain", gb.gain),
                 ("iterations", gb.iterations), ("wall_s", wall)], args.out)
    return EXIT_OK


def cmd_oracle(cfg, args):
    section = _require_scenario(cfg)
    mdp, spec = build_scenario(section)
    res = brute_force_local(mdp, spec, cap=cfg.analysis.oracle_cap)
    pairs = [("setting", describe(section)), ("best_value", res.value),
             ("n_evaluated", res.n_evaluated), ("n_skipped", res.n_skipped)]
    for i in range(spec.m):
        pairs.append((f"agent_{i}_actions", " ".join(map(str, res.best.actions(i)))))
    _emit_pairs(pairs, args.out)
    return EXIT_OK


def cmd_analyze(cfg, args):
    section = _require_scenario(cfg)
    mdp, spec = build_scenario(section)
    an = cfg.analysis
    # BudgetExceeded carries its own guidance and maps to the solver exit code
    delta = measure_delta(mdp, spec, mode=an.delta_mode, budget=an.delta_budget, seed=cfg.seed)
    lam = markov.estimate_lambda_bar(mdp, an.lambda_samples, seed=cfg.seed)
    trace = run_algorithm1(mdp, spec, replace(cfg.search, seed=cfg.seed))
    pairs = [("setting", describe(section)),
             ("delta", delta.value), ("delta_exhaustive", delta.exhaustive),
             ("delta_samples", delta.n_samples),
             ("lambda1_of_P", lam.lambda1_of_P),
             ("group_inverse_lambda1", lam.group_inverse_lambda1),
             ("lambda_bar_estimate", lam.lambda_bar_estimate),
             ("lambda_policies_sampled", lam.n_policies_sampled),
             ("lambda_policies_skipped", lam.n_skipped)]
    sur, _ = _surrogate_value(mdp, spec, trace)
    if sur is None:
        pairs.append(("bound_report", "unavailable: no transition-independent surrogate"))
    else:
        rep = compute_bound_report(trace, mdp, sur, delta, lam, spec=spec)
        pairs.extend(rep.as_dict().items())
        if an.oracle:
            best = brute_force_local(mdp, spec, cap=an.oracle_cap)
            pairs.append(("oracle_value", best.value))
            pairs.append(("theorem2_check", "pass" if best.value <= rep.theorem2_rhs + 1e-9
                          else "fail"))
    _emit_pairs(pairs, args.out)
    return EXIT_OK


def bench_row(section, trials, seed, search, tol, max_iter):
    """One bench row as a dict of CSV fields; errors go in the ``errors`` field."""
    row = {"setting": describe(section)}
    try:
        mdp, spec = build_scenario(section)
        row.update(n_states=mdp.n_states, n_actions=mdp.n_actions)
        rewards, times = [], []
        for t in range(trials):
            t0 = time.perf_counter()
            trace = run_algorithm1(mdp, spec, replace(search, seed=seed + t))
            times.append(time.perf_counter() - t0)
            rewards.append(evaluate_on_joint(mdp, spec, trace.policy))
        t0 = time.perf_counter()
        gb = global_baseline(mdp, tol=tol, max_iter=max_iter)
        g_time = time.perf_counter() - t0
        alg_r, alg_t = sum(rewards) / trials, sum(times) / trials
        row.update(alg_reward=alg_r, global_reward=gb.gain,
                   reward_ratio=alg_r / gb.gain if gb.gain else float("nan"),
                   alg_runtime_s=alg_t, global_runtime_s=g_time,
                   runtime_ratio=alg_t / g_time if g_time else float("nan"), errors="")
    except MMDPError as exc:
        row["errors"] = f"{type(exc).__name__}: {exc}"
    return row


def _render(rows, kind):
    if kind == "md":
        lines = ["| " + " | ".join(BENCH_COLUMNS) + " |",
                 "|" + "---|" * len(BENCH_COLUMNS)]
        for r in rows:
            lines.append("| " + " | ".join(fmt(r.get(c, "")) for c in BENCH_COLUMNS) + " |")
        return "\n".join(lines) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for r in rows:
        w.writerow([fmt(r.get(c, "")) for c in BENCH_COLUMNS])
    return buf.getvalue()


def cmd_bench(cfg, args):
    jobs = max(1, args.jobs)
    task = [(sec, cfg.trials, cfg.seed, cfg.search, cfg.tol, cfg.max_iter) for sec in cfg.rows]
    if jobs > 1 and len(task) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(bench_row, *zip(*task)))
    else:
        rows = [bench_row(*t) for t in task]
    text = _render(rows, args.format)
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return EXIT_SOLVER if any(r["errors"] for r in rows) else EXIT_OK


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "analyze": cmd_analyze,
            "baseline": cmd_baseline, "oracle": cmd_oracle}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmdp-local", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", help="also write the output to this file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--trials", type=int, help="override the config trial count")
    p.add_argument("--jobs", type=int, default=1, help="parallel bench rows")
    p.add_argument("--format", choices=("csv", "md"), default="csv")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.trials is not None:
            if args.trials < 1:
                raise ValidationError("trials: must be >= 1")
            cfg = replace(cfg, trials=args.trials)
        return COMMANDS[args.command](cfg, args)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

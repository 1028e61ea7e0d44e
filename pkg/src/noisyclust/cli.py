"""Command line front end: simulate, sweep, analyze, verify, budget."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis
from .decision import ALL_PAIRS, ANCHORED, recover_clusters
from .graph import BERNOULLI, FIXED, sample_query_graph
from .harness import (AUTO, COMPLETE, SWEEP_AXES, ExperimentConfig, describe_budget, recovery_rate,
                      resolve_sampling, run_experiment, run_sweep, trial_seed, verify_oracles)
from .oracle import MODULAR_GENERAL, MODULAR_PM, NoiseSpec, SIGN_FLIP, balanced_sizes, make_labeling
from .paths import PathParams


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _print(obj):
    print(json.dumps(obj, indent=2, default=_json_default))


def _add_experiment_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file mirroring ExperimentConfig; flags override it")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--q", type=float)
    p.add_argument("--q-dist", type=float, nargs="+", help="offset law for modular-general noise")
    p.add_argument("--variant", choices=[SIGN_FLIP, MODULAR_PM, MODULAR_GENERAL])
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=[ANCHORED, ALL_PAIRS])
    p.add_argument("--sampling", choices=[FIXED, BERNOULLI, COMPLETE],
                   help="auto-budget sampling mode, or 'complete' for every pair")
    p.add_argument("--budget-constant", type=float)
    p.add_argument("--branch-first", type=int)
    p.add_argument("--min-paths", type=int)
    p.add_argument("--unbalanced", action="store_true", help="uniform random groups instead of equal sizes")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="CSV output path (a .json sidecar is written next to it)")


def _config_from_args(args) -> ExperimentConfig:
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
    cfg = ExperimentConfig.from_dict(data) if data else None
    n = args.n if args.n is not None else (cfg.n if cfg else None)
    if n is None:
        raise SystemExit("--n is required (or give --config)")
    base = cfg or ExperimentConfig(n=n)
    k = args.k if args.k is not None else (base.k if cfg else None)
    noise = base.noise
    if args.variant or args.q is not None or args.q_dist:
        if args.variant:
            variant = args.variant
        elif args.q_dist:
            variant = MODULAR_GENERAL
        elif cfg:
            variant = base.noise.variant
        else:
            variant = SIGN_FLIP if k in (None, 2) else MODULAR_PM
        if variant == MODULAR_GENERAL:
            noise = NoiseSpec.modular_general(args.q_dist)
        else:
            noise = NoiseSpec(variant, args.q if args.q is not None else base.noise.q)
    if k is None:
        k = len(noise.q_dist) if noise.q_dist else 2
    updates = {"n": n, "k": k, "noise": noise}
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.mode:
        updates["mode"] = args.mode
    if args.sampling == COMPLETE:
        updates["sampling"] = COMPLETE
    elif args.sampling:
        updates.update(sampling=AUTO, sampling_mode=args.sampling)
    if args.budget_constant is not None:
        updates["budget_constant"] = args.budget_constant
    if args.branch_first is not None:
        updates["branch_first"] = args.branch_first
    if args.min_paths is not None:
        updates["min_paths"] = args.min_paths
    if args.unbalanced:
        updates["balanced"] = False
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.out:
        updates["output"] = args.out
    return replace(base, **updates)


def _dump_paths(config: ExperimentConfig, directory: str):
    """Rebuild trial 0 and write one file per anchored path family."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    lab_ss, graph_ss = np.random.SeedSequence(trial_seed(config.seed, 0)).spawn(2)
    sizes = balanced_sizes(config.n, config.k) if config.balanced else None
    labeling = make_labeling(config.n, config.k, sizes, seed=lab_ss)
    graph = sample_query_graph(labeling, config.noise, resolve_sampling(config), seed=graph_ss)
    params = config.path_params if isinstance(config.path_params, PathParams) else \
        PathParams.auto(config.n, max(config.noise.gap, 1e-12), graph, config.first_level_constant,
                        config.min_paths, branch_first=config.branch_first)

    def write(fam):
        (out / f"{fam.u}-{fam.v}.txt").write_text(fam.dump())

    recover_clusters(graph, params, config.noise, config.mode, on_family=write)
    (out / "graph.txt").write_text(graph.to_text())
    (out / "labeling.json").write_text(labeling.to_json())


def cmd_simulate(args) -> int:
    config = _config_from_args(args)
    records = run_experiment(config)
    if args.dump_paths:
        _dump_paths(config, args.dump_paths)
    summary = {"config": config.to_dict(), "trials": len(records),
               "exact_recovery_rate": recovery_rate(records)}
    if not args.out:
        summary["records"] = records
    _print(summary)
    return 0


def _parse_values(text: str) -> list:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok:
            out.append(float(tok) if any(ch in tok for ch in ".eE") else int(tok))
    return out


def cmd_sweep(args) -> int:
    config = _config_from_args(args)
    values = _parse_values(args.values)
    records = run_sweep(config, args.axis, values, output=args.out)
    by_value = {}
    for rec in records:
        by_value.setdefault(rec["value"], []).append(rec)
    _print({"axis": args.axis, "rates": {str(v): recovery_rate(r) for v, r in by_value.items()},
            "records": len(records)})
    return 0


def cmd_verify(args) -> int:
    report = verify_oracles(monte_carlo=not args.skip_monte_carlo, seed=args.seed)
    _print(report)
    return 0 if report["passed"] else 1


def cmd_budget(args) -> int:
    _print(describe_budget(args.n, args.c if args.c is not None else 0.5 - args.q, args.constant))
    return 0


def cmd_analyze(args) -> int:
    f = args.formula
    if f == "agree-prob":
        out = {"q": args.q, "L": args.L, "agree_prob": analysis.path_agree_prob(args.q, args.L),
               "parity_dp": analysis.parity_prob_oracle(args.q, args.L)}
    elif f == "chain":
        closed = analysis.chain_closed_form(args.q, args.k, args.t)
        power = analysis.chain_power_oracle(analysis.pm_offset_dist(args.q, args.k), args.k, args.t)
        out = {"q": args.q, "k": args.k, "t": args.t, "closed_form": closed.probs,
               "powering": power.probs}
    elif f == "chain-general":
        dist = np.asarray(args.q_dist)
        out = {"q_dist": dist, "t": args.t,
               "powering": analysis.chain_power_oracle(dist, len(dist), args.t).probs}
    elif f == "gap":
        out = analysis.plurality_gap(args.q, args.k, args.t)
    elif f == "read-k":
        b = analysis.read_k_tail(args.r, args.k_read, args.q, args.eps, args.form, args.tail)
        out = {"r": b.r, "k_read": b.k_read, "q": b.q, "epsilon": b.epsilon, "form": b.form,
               "tail": b.tail, "bound": b.bound}
    elif f == "kl":
        out = {"a": args.a, "b": args.b, "kl": analysis.kl_divergence(args.a, args.b)}
    elif f == "majority-mean":
        out = {"N": args.N, "c": args.c, "L": args.L,
               "expected_Y": analysis.expected_majority_mean(args.N, args.c, args.L)}
    else:  # pragma: no cover - argparse restricts choices
        raise SystemExit(f"unknown formula {f}")
    _print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisyclust", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one experiment configuration")
    _add_experiment_args(p)
    p.add_argument("--dump-paths", metavar="DIR", help="write trial 0's path families, one file per pair")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a configuration over one parameter axis")
    _add_experiment_args(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="closed forms vs brute-force oracles")
    p.add_argument("--skip-monte-carlo", action="store_true")
    p.add_argument("--seed", type=int, default=12345)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("budget", help="query budget for n items at gap c")
    p.add_argument("--n", type=int, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--c", type=float)
    g.add_argument("--q", type=float)
    p.add_argument("--constant", type=float, default=20.0)
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("analyze", help="evaluate a formula and print JSON")
    p.add_argument("formula", choices=["agree-prob", "chain", "chain-general", "gap", "read-k", "kl",
                                       "majority-mean"])
    p.add_argument("--q", type=float, default=0.1)
    p.add_argument("--L", type=int, default=5)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--t", type=int, default=5)
    p.add_argument("--q-dist", type=float, nargs="+", default=[0.8, 0.1, 0.1])
    p.add_argument("--r", type=int, default=1000)
    p.add_argument("--k-read", type=int, default=10)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--form", choices=[analysis.KL, analysis.MULT_UPPER, analysis.MULT_LOWER],
                   default=analysis.KL)
    p.add_argument("--tail", choices=["upper", "lower"], default="upper")
    p.add_argument("--a", type=float, default=0.4)
    p.add_argument("--b", type=float, default=0.3)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--c", type=float, default=0.4)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

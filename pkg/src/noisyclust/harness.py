"""Seeded experiments, sweeps and the closed-form verification run."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from . import analysis
from .decision import ANCHORED, clustering_error, recover_clusters
from .graph import BERNOULLI, FIXED, SamplingPlan, auto_plan, budget_details, pair_count, sample_query_graph
from .oracle import MODULAR_PM, NoiseSpec, SIGN_FLIP, balanced_sizes, make_labeling
from .paths import PathParams

log = logging.getLogger(__name__)

AUTO = "auto"
COMPLETE = "complete"
SWEEP_AXES = ("q", "n", "k", "budget_constant", "branch_first")


@dataclass
class ExperimentConfig:
    n: int
    k: int = 2
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec.sign_flip(0.1))
    sampling: SamplingPlan | str = AUTO
    sampling_mode: str = BERNOULLI
    path_params: PathParams | str = AUTO
    mode: str = ANCHORED
    trials: int = 1
    seed: int = 0
    balanced: bool = True
    budget_constant: float = 20.0
    first_level_constant: float = 4.0
    branch_first: int | None = None
    min_paths: int = 1
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.noise.variant == SIGN_FLIP and self.k != 2:
            raise ValueError("sign-flip noise is a two-cluster model (k=2)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise"] = self.noise.to_dict()
        d["sampling"] = self.sampling if isinstance(self.sampling, str) else self.sampling.to_dict()
        d["path_params"] = (self.path_params if isinstance(self.path_params, str)
                            else self.path_params.to_dict())
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        noise = data.pop("noise", None)
        if isinstance(noise, dict):
            data["noise"] = NoiseSpec.from_dict(noise)
        sampling = data.get("sampling", AUTO)
        if isinstance(sampling, dict):
            data["sampling"] = SamplingPlan(**sampling)
        params = data.get("path_params", AUTO)
        if isinstance(params, dict):
            data["path_params"] = PathParams.from_dict(params)
        return cls(**data)


RECORD_FIELDS = [
    "trial", "n", "k", "variant", "q", "mode", "seed", "trial_seed",
    "sampling_mode", "sampling_count", "sampling_p", "budget_constant", "edge_count",
    "depth1", "depth2", "branch_first", "branch_rest", "min_paths", "shrinkage",
    "exact_recovery", "misclassified", "pairs_failed", "ties",
    "mean_paths_per_pair", "mean_max_read", "error", "wall_time",
]


def trial_seed(master_seed: int, trial: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(trial,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def resolve_sampling(config: ExperimentConfig) -> SamplingPlan:
    n = config.n
    if isinstance(config.sampling, SamplingPlan):
        return config.sampling
    if config.sampling == COMPLETE:
        return SamplingPlan.complete(n)
    if config.sampling == AUTO:
        return auto_plan(n, max(config.noise.gap, 1e-12), config.budget_constant, config.sampling_mode)
    raise ValueError(f"unknown sampling {config.sampling!r}")


def run_trial(config: ExperimentConfig, trial: int) -> dict:
    t0 = time.perf_counter()
    seed = trial_seed(config.seed, trial)
    rec = {
        "trial": trial, "n": config.n, "k": config.k, "variant": config.noise.variant,
        "q": config.noise.q, "mode": config.mode, "seed": config.seed, "trial_seed": seed,
        "budget_constant": config.budget_constant,
    }
    try:
        lab_ss, graph_ss = np.random.SeedSequence(seed).spawn(2)
        sizes = balanced_sizes(config.n, config.k) if config.balanced else None
        labeling = make_labeling(config.n, config.k, sizes, seed=lab_ss)
        plan = resolve_sampling(config)
        rec.update(sampling_mode=plan.mode, sampling_count=plan.count, sampling_p=plan.p)
        graph = sample_query_graph(labeling, config.noise, plan, seed=graph_ss)
        rec["edge_count"] = graph.edge_count
        if isinstance(config.path_params, PathParams):
            params = config.path_params
        else:
            params = PathParams.auto(config.n, max(config.noise.gap, 1e-12), graph,
                                     config.first_level_constant, config.min_paths,
                                     branch_first=config.branch_first)
        rec.update(depth1=params.depth1, depth2=params.depth2, branch_first=params.branch_first,
                   branch_rest=params.branch_rest, min_paths=params.min_paths,
                   shrinkage="; ".join(params.shrinkage))
        clustering, diag = recover_clusters(graph, params, config.noise, config.mode)
        score = clustering_error(clustering, labeling)
        rec.update(
            exact_recovery=score["exact"], misclassified=score["misclassified"],
            pairs_failed=diag["pairs_failed"], ties=diag["ties"],
            mean_paths_per_pair=round(diag["mean_paths_per_pair"], 6),
            mean_max_read=round(diag["mean_max_read"], 6), error="",
        )
    except (ValueError, RuntimeError) as exc:
        log.warning("trial %d failed: %s", trial, exc)
        rec.update(exact_recovery=False, misclassified=None, pairs_failed=None,
                   error=f"{type(exc).__name__}: {exc}")
    rec["wall_time"] = round(time.perf_counter() - t0, 4)
    return {key: rec.get(key) for key in RECORD_FIELDS}


def _iter_trials(config: ExperimentConfig) -> Iterator[dict]:
    if config.workers > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            # map preserves trial order
            yield from pool.map(run_trial, [config] * config.trials, range(config.trials))
    else:
        for t in range(config.trials):
            yield run_trial(config, t)


class RecordWriter:
    """CSV records plus a JSON sidecar with the full config; the sidecar is
    replaced atomically after every record so a killed run leaves a valid
    prefix on disk."""

    def __init__(self, path: str | os.PathLike, config: dict, extra_fields: Iterable[str] = ()):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.sidecar = self.path.with_suffix(".json")
        self.fields = list(extra_fields) + RECORD_FIELDS
        self.meta = {"config": config, "records_written": 0, "complete": False}
        self._fh = open(self.path, "w", newline="")
        self._csv = csv.DictWriter(self._fh, fieldnames=self.fields)
        self._csv.writeheader()
        self._fh.flush()
        self._write_sidecar()

    def _write_sidecar(self):
        tmp = self.sidecar.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(self.meta, indent=2, default=str))
        os.replace(tmp, self.sidecar)

    def write(self, record: dict):
        self._csv.writerow(record)
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self.meta["records_written"] += 1
        self._write_sidecar()

    def close(self):
        self.meta["complete"] = True
        self._write_sidecar()
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if exc[0] is None:
            self.close()
        else:
            self._fh.close()


def run_experiment(config: ExperimentConfig) -> list[dict]:
    records = []
    writer = RecordWriter(config.output, config.to_dict()) if config.output else None
    try:
        for rec in _iter_trials(config):
            records.append(rec)
            if writer:
                writer.write(rec)
    finally:
        if writer:
            writer.close()
    return records


def _with_axis(base: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "q":
        if base.noise.variant not in (SIGN_FLIP, MODULAR_PM):
            raise ValueError("q sweeps need sign-flip or modular-pm noise")
        return replace(base, noise=NoiseSpec(base.noise.variant, float(value)), output=None)
    if axis == "n":
        return replace(base, n=int(value), output=None)
    if axis == "k":
        return replace(base, k=int(value), output=None)
    if axis == "budget_constant":
        return replace(base, budget_constant=float(value), output=None)
    if axis == "branch_first":
        return replace(base, branch_first=int(value), output=None)
    raise ValueError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")


def iter_sweep(base: ExperimentConfig, axis: str, values) -> Iterator[dict]:
    if axis not in SWEEP_AXES:
        raise ValueError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    for value in values:
        cfg = _with_axis(base, axis, value)
        for rec in _iter_trials(cfg):
            yield {"axis": axis, "value": value, **rec}


def run_sweep(base: ExperimentConfig, axis: str, values, output: str | None = None) -> list[dict]:
    """Trials x values, each record streamed to ``output`` as it completes."""
    output = output or base.output
    records = []
    writer = None
    if output:
        meta = {"base": base.to_dict(), "axis": axis, "values": list(values)}
        writer = RecordWriter(output, meta, extra_fields=("axis", "value"))
    try:
        for rec in iter_sweep(base, axis, values):
            records.append(rec)
            if writer:
                writer.write(rec)
    finally:
        if writer:
            writer.close()
    return records


def recovery_rate(records: list[dict]) -> float:
    return sum(bool(r["exact_recovery"]) for r in records) / len(records) if records else math.nan


# ---------------------------------------------------------------- verification

def _grid(lo: float, hi: float, step: float) -> list[float]:
    count = int(round((hi - lo) / step))
    return [round(lo + i * step, 10) for i in range(count + 1)]


def verify_oracles(agree_prob: Callable = analysis.path_agree_prob,
                   chain_form: Callable = analysis.chain_closed_form,
                   monte_carlo: bool = True, seed: int = 12345) -> dict:
    """Closed forms against brute-force twins, plus Monte Carlo dominance.

    The closed-form callables are injectable so a perturbed formula can be
    shown to fail.
    """
    checks = []

    def add(name, tol, worst, where):
        checks.append({"name": name, "tolerance": tol, "max_abs_error": worst,
                       "worst_point": where, "passed": worst <= tol})

    worst, where = 0.0, None
    for q in _grid(0.0, 0.5, 0.05):
        for L in range(51):
            err = abs(agree_prob(q, L) - analysis.parity_prob_oracle(q, L))
            if where is None or err > worst:
                worst, where = err, {"q": q, "L": L}
    add("agree_prob_vs_parity_dp", 1e-12, worst, where)

    worst, where = 0.0, None
    for k in range(3, 9):
        for q in _grid(0.0, 0.5, 0.1):
            step = analysis.pm_offset_dist(q, k)
            for t in range(61):
                a = np.asarray(chain_form(q, k, t).probs)
                b = analysis.chain_power_oracle(step, k, t).probs
                err = float(np.max(np.abs(a - b)))
                if where is None or err > worst:
                    worst, where = err, {"k": k, "q": q, "t": t}
    add("chain_closed_form_vs_powering", 1e-10, worst, where)

    worst, where = 0.0, None
    for q in _grid(0.0, 0.5, 0.1):
        for t in range(61):
            p00, p01 = analysis.k3_closed_form(q, t)
            probs = np.asarray(chain_form(q, 3, t).probs)
            err = max(abs(probs[0] - p00), abs(probs[1] - p01), abs(probs[2] - p01))
            if where is None or err > worst:
                worst, where = err, {"q": q, "t": t}
    add("chain_k3_explicit", 1e-12, worst, where)

    violations = []
    for k in range(3, 9):
        for q in _grid(0.0, 0.4, 0.1):
            for t in range(61):
                dom = analysis.chain_dominance(q, k, t)
                if not (dom["excess"] > 0 and np.all(dom["gaps"] > 0)):
                    violations.append({"k": k, "q": q, "t": t})
    checks.append({"name": "plurality_at_zero", "violations": len(violations),
                   "worst_point": violations[0] if violations else None,
                   "passed": not violations})

    if monte_carlo:
        rng = np.random.default_rng(seed)
        q, L, m = 0.2, 7, 100_000
        flips = (rng.random((m, L)) < q).sum(axis=1)
        freq = float(np.mean(flips % 2 == 0))
        p = agree_prob(q, L)
        sigma = math.sqrt(p * (1 - p) / m)
        checks.append({"name": "parity_monte_carlo", "empirical": freq, "expected": p,
                       "z": (freq - p) / sigma, "passed": abs(freq - p) <= 3 * sigma})
        for eps in (0.05, 0.1):
            bound = analysis.read_k_tail(1000, 10, 0.3, eps).bound
            for shape in ("blocks", "paths"):
                sums = analysis.simulate_read_k_family(1000, 10, 0.3, 10_000, seed=rng, shape=shape)
                tail = float(np.mean(sums >= (0.3 + eps) * 1000))
                checks.append({"name": f"read_k_dominance_{shape}_eps{eps}", "empirical": tail,
                               "bound": bound, "passed": tail <= bound})

    return {"passed": all(c["passed"] for c in checks), "checks": checks}


def default_modular_config(n: int, q: float, k: int = 3, **kw) -> ExperimentConfig:
    return ExperimentConfig(n=n, k=k, noise=NoiseSpec(MODULAR_PM, q), **kw)


def describe_budget(n: int, c: float, constant: float = 20.0) -> dict:
    d = budget_details(n, c, constant)
    d["pairs"] = pair_count(n)
    d["bernoulli_p"] = d["budget"] / d["pairs"]
    return d


__all__ = [
    "AUTO", "COMPLETE", "ExperimentConfig", "RecordWriter", "run_trial", "run_experiment",
    "run_sweep", "iter_sweep", "recovery_rate", "verify_oracles", "trial_seed",
    "default_modular_config", "describe_budget", "FIXED", "BERNOULLI",
]

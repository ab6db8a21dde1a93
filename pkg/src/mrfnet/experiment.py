"""Missing-node Monte Carlo study: truth generation, replications, aggregation.

Each setting ``r`` adds ``r`` hidden nodes to a common observed network.
For each ``beta`` the sample size is ``n = round(a log p / beta^2)`` with
``a`` the number of nonzero observed pairs; every replication samples the
full field, drops the hidden columns and fits the l1 (or SCAD) penalized
pseudo-likelihood with ``lambda = c sqrt(n log p)``.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MrfError
from .estimator import FitOptions, fit, lambda_default
from .metrics import PartitionedTruth, relative_errors, structure_stats, support_metrics
from .model import PenaltyConfig, SymmetricNetwork, auto_binomial_spec
from .rng import derive_seed
from .sampler import SamplerConfig, drop_nodes, sample_dataset

log = logging.getLogger(__name__)

DEFAULT_BETAS = (0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0)


@dataclass(frozen=True)
class ExperimentConfig:
    p: int = 20
    r_values: tuple = (0, 3, 8)
    edge_factor: float = 1.3
    # pilot choice: a visible hidden-node effect at the smallest n
    weight_range: tuple = (0.3, 0.9)
    cross_degree: int = 3
    max_degree: int = 8
    beta_grid: tuple = DEFAULT_BETAS
    replications: int = 20
    master_seed: int = 2011
    kappa: int = 1
    lambda_c: float = 0.5
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    max_iters: int = 5000
    tol_rel_obj: float = 1e-8
    zero_tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "r_values", tuple(int(r) for r in self.r_values))
        object.__setattr__(self, "beta_grid", tuple(float(b) for b in self.beta_grid))
        object.__setattr__(self, "weight_range", tuple(float(w) for w in self.weight_range))
        if self.p < 2:
            raise ConfigError("p must be >= 2")
        if not self.r_values or any(r < 0 for r in self.r_values):
            raise ConfigError("r_values must be a non-empty list of non-negative counts")
        if not self.beta_grid or any(b <= 0 for b in self.beta_grid):
            raise ConfigError("every beta must be > 0")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if len(self.weight_range) != 2 or not 0 <= self.weight_range[0] <= self.weight_range[1]:
            raise ConfigError("weight_range must be [w_lo, w_hi] with 0 <= w_lo <= w_hi")
        if self.cross_degree < 1 or self.max_degree < 1:
            raise ConfigError("cross_degree and max_degree must be >= 1")
        if self.lambda_c <= 0:
            raise ConfigError("lambda_c must be > 0")
        if self.kappa < 1:
            raise ConfigError("kappa must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        unknown = set(raw) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if isinstance(raw.get("penalty"), dict):
                raw["penalty"] = PenaltyConfig(**raw["penalty"])
            if isinstance(raw.get("sampler"), dict):
                raw["sampler"] = SamplerConfig(**raw["sampler"])
            return cls(**raw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def sample_size(a: int, p: int, beta: float) -> int:
    """``round(a log p / beta^2)`` (natural log), at least 1."""
    return max(1, int(round(a * math.log(p) / beta**2)))


def generate_truth(
    p: int,
    r: int,
    edge_factor: float = 1.3,
    weight_range=(0.4, 0.9),
    seed: int = 0,
    cross_degree: int = 2,
    max_degree: int = 8,
    max_attempts: int = 1000,
) -> PartitionedTruth:
    """Random attractive network over ``p`` observed plus ``r`` hidden nodes.

    Observed nodes are ``0..p-1`` and hidden nodes ``p..p+r-1``.  The observed
    block depends on ``seed`` only, and hidden node ``j`` only on ``seed`` and
    the nodes before it, so settings with more hidden nodes extend those with
    fewer.  Hidden nodes attach to ``cross_degree`` observed nodes, preferring
    nodes that have no hidden neighbour yet.
    """
    n_edges = int(round(edge_factor * p))
    pairs = [(s, l) for s in range(p) for l in range(s + 1, p)]
    if n_edges > len(pairs):
        raise ValueError(f"edge budget {n_edges} exceeds the {len(pairs)} available observed pairs")
    if cross_degree > p:
        raise ValueError("cross_degree exceeds the number of observed nodes")
    w_lo, w_hi = weight_range
    obs_rng = np.random.default_rng(derive_seed(seed, 0))
    for _ in range(max_attempts):
        pick = obs_rng.choice(len(pairs), size=n_edges, replace=False)
        chosen = [pairs[k] for k in sorted(pick)]
        deg = np.zeros(p, dtype=int)
        for s, l in chosen:
            deg[s] += 1
            deg[l] += 1
        if deg.max(initial=0) <= max_degree:
            break
    else:
        raise ValueError(f"no observed network with maximum degree <= {max_degree} after {max_attempts} draws")
    entries = {(s, l): obs_rng.uniform(w_lo, w_hi) for s, l in chosen}

    hid_rng = np.random.default_rng(derive_seed(seed, 1))
    touched = np.zeros(p, dtype=bool)
    for j in range(r):
        h = p + j
        eligible = np.flatnonzero(deg < max_degree)
        fresh = [v for v in eligible if not touched[v]]
        stale = [v for v in eligible if touched[v]]
        if len(fresh) + len(stale) < cross_degree:
            raise ValueError(f"hidden node {h} cannot attach without exceeding max_degree={max_degree}")
        take = list(hid_rng.permutation(fresh)[:cross_degree])
        if len(take) < cross_degree:
            take += list(hid_rng.permutation(stale)[: cross_degree - len(take)])
        for v in sorted(int(t) for t in take):
            entries[(v, h)] = hid_rng.uniform(w_lo, w_hi)
            deg[v] += 1
            touched[v] = True
    theta = SymmetricNetwork(p + r, entries)
    return PartitionedTruth(theta, tuple(range(p)), tuple(range(p, p + r)))


@dataclass(frozen=True)
class ReplicationResult:
    r: int
    beta_index: int
    k: int
    rel_error: float = float("nan")
    precision: float = float("nan")
    recall: float = float("nan")
    iterations: int = 0
    wall_ms: float = 0.0
    error: str | None = None


@dataclass
class ReportRow:
    setting_r: int
    beta: float
    n: int
    a_n: int
    b_n: float
    boundary_size: int
    rel_mse_mean: float
    rel_mse_sd: float
    precision_mean: float
    recall_mean: float
    iters_mean: float
    wall_ms: float
    n_failed: int = 0


@dataclass
class MetricsReport:
    rows: list
    config: ExperimentConfig
    failures: list = field(default_factory=list)
    replications: list = field(default_factory=list)

    def row(self, r: int, beta: float) -> ReportRow:
        for row in self.rows:
            if row.setting_r == r and math.isclose(row.beta, beta):
                return row
        raise KeyError((r, beta))

    def curve(self, r: int) -> np.ndarray:
        return np.array([row.rel_mse_mean for row in self.rows if row.setting_r == r])


def _run_one(cfg: ExperimentConfig, truth: PartitionedTruth, r: int, j: int, k: int) -> ReplicationResult:
    spec = auto_binomial_spec(cfg.kappa)
    stats = structure_stats(truth)
    n = sample_size(stats.a_n, cfg.p, cfg.beta_grid[j])
    # common random numbers across settings: the seed ignores r
    seed = derive_seed(cfg.master_seed, 1, j, k)
    t0 = time.perf_counter()
    try:
        full = sample_dataset(truth.theta_full, spec, n, dataclasses.replace(cfg.sampler, seed=seed))
        observed, _ = drop_nodes(full, truth.hidden)
        pen = dataclasses.replace(cfg.penalty, lam=lambda_default(n, cfg.p, cfg.lambda_c))
        res = fit(observed, spec, pen, FitOptions(max_iters=cfg.max_iters, tol_rel_obj=cfg.tol_rel_obj))
    except MrfError as exc:
        log.warning("replication (r=%d, beta=%g, k=%d) failed: %s", r, cfg.beta_grid[j], k, exc)
        return ReplicationResult(r, j, k, error=f"{type(exc).__name__}: {exc}")
    wall = (time.perf_counter() - t0) * 1000.0
    star = truth.observed_block()
    sup = support_metrics(res.theta_hat, star, cfg.zero_tol)
    return ReplicationResult(
        r,
        j,
        k,
        rel_error=float(relative_errors([res.theta_hat], star)[0]),
        precision=sup.precision,
        recall=sup.recall,
        iterations=res.iterations,
        wall_ms=wall,
    )


def _run_task(args):
    return _run_one(*args)


def truths_for(cfg: ExperimentConfig) -> dict:
    """Generated truth per setting; the observed block is shared across settings."""
    seed = derive_seed(cfg.master_seed, 0)
    return {
        r: generate_truth(
            cfg.p,
            r,
            cfg.edge_factor,
            cfg.weight_range,
            seed=seed,
            cross_degree=cfg.cross_degree,
            max_degree=cfg.max_degree,
        )
        for r in cfg.r_values
    }


def run_experiment(cfg: ExperimentConfig, workers: int = 1, strict: bool = False, on_result=None) -> MetricsReport:
    """Run every ``(r, beta, k)`` replication and aggregate per ``(r, beta)``.

    Results are keyed by ``(r, beta, k)`` so the report does not depend on
    ``workers`` or completion order.  Failed replications are recorded in
    ``report.failures`` and skipped in the aggregates; with ``strict`` the
    first failure raises after the partial report has been handed to
    ``on_result``.
    """
    truths = truths_for(cfg)
    tasks = [
        (cfg, truths[r], r, j, k)
        for r in cfg.r_values
        for j in range(len(cfg.beta_grid))
        for k in range(cfg.replications)
    ]
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))):
                results[(res.r, res.beta_index, res.k)] = res
    else:
        for task in tasks:
            res = _run_task(task)
            results[(res.r, res.beta_index, res.k)] = res
            if strict and res.error:
                break
    report = _aggregate(cfg, truths, results)
    if on_result is not None:
        on_result(report)
    if strict and report.failures:
        first = report.failures[0]
        raise _reraise_type(first.error)(
            f"replication (r={first.r}, beta={cfg.beta_grid[first.beta_index]}, k={first.k}) failed: {first.error}"
        )
    return report


def _reraise_type(message: str):
    from . import errors

    name = message.split(":", 1)[0]
    return getattr(errors, name, errors.MrfError)


def _aggregate(cfg, truths, results) -> MetricsReport:
    rows, failures = [], []
    ordered = [results[key] for key in sorted(results)]
    for r in cfg.r_values:
        stats = structure_stats(truths[r])
        for j, beta in enumerate(cfg.beta_grid):
            reps = [res for res in ordered if res.r == r and res.beta_index == j]
            ok = [res for res in reps if res.error is None]
            failures.extend(res for res in reps if res.error is not None)
            errs = np.array([res.rel_error for res in ok])
            rows.append(
                ReportRow(
                    setting_r=r,
                    beta=beta,
                    n=sample_size(stats.a_n, cfg.p, beta),
                    a_n=stats.a_n,
                    b_n=stats.b_n,
                    boundary_size=stats.boundary_size,
                    rel_mse_mean=float(errs.mean()) if ok else float("nan"),
                    rel_mse_sd=float(errs.std(ddof=1)) if len(ok) > 1 else 0.0,
                    precision_mean=float(np.mean([res.precision for res in ok])) if ok else float("nan"),
                    recall_mean=float(np.mean([res.recall for res in ok])) if ok else float("nan"),
                    iters_mean=float(np.mean([res.iterations for res in ok])) if ok else float("nan"),
                    wall_ms=float(sum(res.wall_ms for res in reps)),
                    n_failed=len(reps) - len(ok),
                )
            )
    return MetricsReport(rows=rows, config=cfg, failures=failures, replications=ordered)

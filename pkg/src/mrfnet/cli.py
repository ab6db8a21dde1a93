"""Command-line entry point: ``mrfnet <command> [options]``.

Exit codes: 0 success, 1 failed checks or other errors, 2 configuration
error, 3 numerical error, 4 sampler timeout.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, NumericalError, PreconditionError, SamplerTimeoutError
from .estimator import FitOptions, fit, lambda_default
from .experiment import ExperimentConfig, generate_truth, run_experiment, sample_size
from .io import read_dataset, read_estimate, read_truth, write_dataset, write_estimate, write_truth
from .metrics import a2_eigen_proxies, rate_r_n, relative_errors, structure_stats, support_metrics, tau_ratio
from .model import PenaltyConfig, auto_binomial_spec
from .report import emit_report
from .rng import derive_seed
from .sampler import drop_nodes, sample_dataset

log = logging.getLogger("mrfnet")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_TIMEOUT = 0, 1, 2, 3, 4


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, assignments) -> dict:
    """Apply ``key=value`` overrides; dotted keys reach nested sections."""
    raw = json.loads(json.dumps(raw))
    for item in assignments or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = raw
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"unknown config section {part!r} in {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node[parts[-1]] = _parse_value(value)
    return raw


def load_config(args) -> ExperimentConfig:
    raw = ExperimentConfig().to_dict()
    if getattr(args, "config", None):
        try:
            user = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in user.items():
            if isinstance(value, dict) and isinstance(raw.get(key), dict):
                raw[key].update(value)
            else:
                raw[key] = value
    raw = apply_overrides(raw, getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        raw["master_seed"] = args.seed
    return ExperimentConfig.from_dict(raw)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_sample(args) -> int:
    cfg = load_config(args)
    r = args.r if args.r is not None else cfg.r_values[0]
    truth = generate_truth(
        cfg.p, r, cfg.edge_factor, cfg.weight_range, derive_seed(cfg.master_seed, 0), cfg.cross_degree, cfg.max_degree
    )
    stats = structure_stats(truth)
    n = args.n if args.n is not None else sample_size(stats.a_n, cfg.p, args.beta)
    spec = auto_binomial_spec(cfg.kappa)
    sampler = dataclasses.replace(cfg.sampler, seed=derive_seed(cfg.master_seed, 2, r))
    full = sample_dataset(truth.theta_full, spec, n, sampler)
    data = full if args.include_hidden else drop_nodes(full, truth.hidden)[0]
    out = _out_dir(args)
    write_truth(truth, out / "truth.json")
    write_dataset(data, out / "data.csv")
    print(f"p={cfg.p} r={r} n={n} a_n={stats.a_n} b_n={stats.b_n:.6g} boundary={len(stats.boundary)}")
    print(f"wrote {out / 'truth.json'} and {out / 'data.csv'}")
    return EXIT_OK


def cmd_fit(args) -> int:
    data = read_dataset(args.data, args.kappa + 1)
    spec = auto_binomial_spec(args.kappa)
    if args.lam is not None:
        lam = args.lam
    else:
        lam = lambda_default(data.n, data.p, args.lambda_c)
    pen = PenaltyConfig(args.penalty, lam, penalize_diagonal=not args.free_diagonal)
    res = fit(data, spec, pen, FitOptions(max_iters=args.max_iters, tol_rel_obj=args.tol, tol_grad=args.tol_grad))
    out = _out_dir(args)
    write_estimate(res.theta_hat, out / "estimate.csv")
    summary = {
        "n": data.n,
        "p": data.p,
        "lambda": lam,
        "penalty": args.penalty,
        "iterations": res.iterations,
        "converged": res.converged,
        "objective": float(res.objective_trace[-1]),
        "final_grad_inf_norm": res.final_grad_inf_norm,
        "nonzeros": res.theta_hat.nnz,
    }
    (out / "fit.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(summary))
    return EXIT_OK


def cmd_metrics(args) -> int:
    truth = read_truth(args.truth)
    star = truth.observed_block()
    est = read_estimate(args.estimate, star.p)
    stats = structure_stats(truth)
    pos = {v: k for k, v in enumerate(truth.observed)}
    boundary = [pos[v] for v in stats.boundary]
    sup = support_metrics(est, star, args.zero_tol)
    result = {
        "a_n": stats.a_n,
        "boundary": list(stats.boundary),
        "b_n": stats.b_n,
        "tau_truth": tau_ratio(star, boundary) if star.nnz else None,
        "relative_error": float(relative_errors([est], star)[0]) if star.nnz else None,
        "precision": sup.precision,
        "recall": sup.recall,
        "f1": sup.f1,
    }
    if args.data:
        data = read_dataset(args.data, args.kappa + 1)
        prox = a2_eigen_proxies(data, star, auto_binomial_spec(args.kappa))
        result["alpha_n_proxy"] = prox.alpha_n
        result["alpha_n_prime_proxy"] = prox.alpha_n_prime
        result["n_reference"] = prox.n_reference
        if prox.alpha_n > 0 and star.nnz:
            result["r_n"] = rate_r_n(prox.alpha_n, data.n, stats.a_n, star.p, stats.b_n, result["tau_truth"])
    out = _out_dir(args)
    (out / "metrics.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(result))
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = load_config(args)
    out = _out_dir(args)

    def flush(report):
        emit_report(report, out, include_timing=args.timing)

    report = run_experiment(cfg, workers=args.workers, strict=args.strict, on_result=flush)
    for r in cfg.r_values:
        row = report.rows[[x.setting_r for x in report.rows].index(r)]
        print(f"r={r}: a_n={row.a_n} b_n={row.b_n:.4f} boundary={row.boundary_size}")
    if report.failures:
        print(f"{len(report.failures)} replication(s) failed; see {out / 'failures.csv'}", file=sys.stderr)
    print(f"wrote report to {out}")
    return EXIT_OK


def cmd_check(args) -> int:
    from .checks import run_checks

    results = run_checks(seed=args.seed or 0, names=args.only)
    for res in results:
        print(f"{'PASS' if res.passed else 'FAIL'} {res.name}: {res.detail} ({res.seconds:.2f}s)")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrfnet", description="Sparse auto-model networks with hidden nodes.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="JSON config file")
            p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field (repeatable)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out-dir", default=".", help="output directory (default: .)")

    p = sub.add_parser("sample", help="generate a truth and a dataset")
    common(p)
    p.add_argument("--r", type=int, help="hidden nodes (default: first of r_values)")
    size = p.add_mutually_exclusive_group()
    size.add_argument("--n", type=int, help="sample size")
    size.add_argument("--beta", type=float, default=1.0, help="derive n = round(a log p / beta^2)")
    p.add_argument("--include-hidden", action="store_true", help="keep hidden columns in data.csv")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", help="fit a network to a data CSV")
    common(p, config=False)
    p.add_argument("--data", required=True)
    p.add_argument("--kappa", type=int, default=1, help="alphabet {0..kappa} (default 1)")
    p.add_argument("--penalty", choices=("l1", "scad"), default="l1")
    p.add_argument("--lambda", dest="lam", type=float, help="penalty level (overrides --lambda-c)")
    p.add_argument("--lambda-c", type=float, default=0.5, help="lambda = c sqrt(n log p)")
    p.add_argument("--free-diagonal", action="store_true", help="leave self-potentials unpenalized")
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--tol", type=float, default=1e-8, help="relative objective-change tolerance")
    p.add_argument("--tol-grad", type=float, help="also require the prox-gradient residual below this")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("metrics", help="compare an estimate with a truth")
    common(p, config=False)
    p.add_argument("--truth", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--data", help="data CSV for the curvature proxies")
    p.add_argument("--kappa", type=int, default=1)
    p.add_argument("--zero-tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("experiment", help="run the hidden-node Monte Carlo study")
    common(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict", action="store_true", help="abort on the first failed replication")
    p.add_argument("--timing", action="store_true", help="fill wall_ms (report no longer reproducible bytewise)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("check", help="run the invariant suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", nargs="+", help="subset of checks")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SamplerTimeoutError as exc:
        print(f"error: sampler timeout: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except NumericalError as exc:
        print(f"error: numerical failure: {exc} {getattr(exc, 'diagnostics', '')}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, PreconditionError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Quick invariant suites run by ``mrfnet check``.

Each check returns a :class:`CheckResult`; sizes are small enough that the
whole suite finishes in well under a minute.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .estimator import fit, objective, pseudo_loglik, pseudo_loglik_grad
from .metrics import conditional_kl, shifted_objective
from .model import (
    Dataset,
    PenaltyConfig,
    SymmetricNetwork,
    auto_binomial_spec,
    auto_logistic_spec,
    conditional_distribution,
    enumerate_joint,
    joint_log_pmf,
    penalty_derivatives,
)
from .sampler import SamplerConfig, sample_dataset, update_node


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _random_network(rng, p, scale=0.6, attractive=False, density=0.6):
    entries = {}
    for s in range(p):
        for l in range(s, p):
            if l == s or rng.random() < density:
                w = rng.uniform(0, scale) if attractive and l != s else rng.uniform(-scale, scale)
                entries[(s, l)] = w
    return SymmetricNetwork(p, entries)


def check_conditional_normalization(rng, trials=1000):
    worst = 0.0
    for _ in range(trials):
        kappa = int(rng.integers(1, 4))
        spec = auto_binomial_spec(kappa)
        p = int(rng.integers(1, 7))
        theta = _random_network(rng, p)
        x = rng.integers(0, kappa + 1, size=p)
        s = int(rng.integers(p))
        worst = max(worst, abs(conditional_distribution(s, x, theta, spec).sum() - 1.0))
    return worst <= 1e-12, f"max |sum - 1| = {worst:.2e}"


def check_comparison_lemma(rng, trials=1000):
    bad = 0
    for _ in range(trials):
        m = int(rng.integers(2, 10))
        h1 = rng.uniform(-5, 5, m)
        h2 = h1 + rng.uniform(-2, 2, m)
        if abs(logsumexp(h2) - logsumexp(h1)) > np.abs(h2 - h1).max() + 1e-12:
            bad += 1
    return bad == 0, f"{bad} violations in {trials} draws"


def check_bayes_consistency(rng, trials=200):
    worst = 0.0
    for _ in range(trials):
        kappa = int(rng.integers(1, 3))
        spec = auto_binomial_spec(kappa)
        p = int(rng.integers(1, 5))
        theta = _random_network(rng, p)
        x = rng.integers(0, kappa + 1, size=p)
        s = int(rng.integers(p))
        logs = []
        for u in range(kappa + 1):
            y = x.copy()
            y[s] = u
            logs.append(joint_log_pmf(y, theta, spec))
        bayes = np.exp(np.array(logs) - logsumexp(logs))
        worst = max(worst, np.abs(bayes - conditional_distribution(s, x, theta, spec)).max())
    return worst <= 1e-10, f"max abs deviation = {worst:.2e}"


def check_penalty_a1(rng):
    xs = np.logspace(-6, 1, 200)
    ratios = []
    for lam in np.logspace(-2, 1, 20):
        l1 = penalty_derivatives(PenaltyConfig("l1", lam), xs).max() / lam
        sc = penalty_derivatives(PenaltyConfig("scad", lam), xs).max() / lam
        ratios.append((l1, sc))
    r = np.array(ratios)
    ok = np.allclose(r[:, 0], 1.0) and np.all(r[:, 1] <= 1.0 + 1e-15)
    return ok, f"l1 ratio in [{r[:, 0].min():.3f}, {r[:, 0].max():.3f}], scad max {r[:, 1].max():.3f}"


def check_gibbs_invariance(rng):
    spec = auto_logistic_spec()
    theta = _random_network(rng, 3, scale=1.0, density=1.0)
    states, log_pmf = enumerate_joint(theta, spec)
    pmf = np.exp(log_pmf)
    index = {tuple(st): i for i, st in enumerate(states.tolist())}
    worst = 0.0
    for s in range(3):
        out = np.zeros_like(pmf)
        for i, st in enumerate(states):
            cond = conditional_distribution(s, st, theta, spec)
            for u in range(spec.m):
                y = st.copy()
                y[s] = u
                out[index[tuple(y.tolist())]] += pmf[i] * cond[u]
        worst = max(worst, np.abs(out - pmf).max())
    return worst <= 1e-10, f"max |K pi - pi| = {worst:.2e}"


def check_monotone_coupling(rng, pairs=10_000):
    spec = auto_binomial_spec(2)
    p = 5
    theta = _random_network(rng, p, attractive=True, density=0.7)
    dense = theta.to_dense()
    lo = rng.integers(0, 3, size=(pairs, p))
    hi = np.maximum(lo, rng.integers(0, 3, size=(pairs, p)))
    s_all = rng.integers(p, size=pairs)
    bad = 0
    for s in range(p):
        rows = np.flatnonzero(s_all == s)
        u = rng.random(rows.size)
        a, b = lo[rows].copy(), hi[rows].copy()
        update_node(a, s, u, dense, spec)
        update_node(b, s, u, dense, spec)
        bad += int(np.any(a > b, axis=1).sum())
    return bad == 0, f"{bad} order violations in {pairs} coupled updates"


def check_cftp_small(rng, draws=100_000):
    spec = auto_logistic_spec()
    edges = {(0, 1): 0.3, (1, 2): 0.3, (2, 3): 0.3, (0, 3): 0.3}
    theta = SymmetricNetwork(4, edges)
    data = sample_dataset(theta, spec, draws, SamplerConfig(seed=int(rng.integers(1 << 31))))
    states, log_pmf = enumerate_joint(theta, spec)
    codes = data.data @ (2 ** np.arange(3, -1, -1))
    emp = np.bincount(codes, minlength=16) / draws
    tv = 0.5 * np.abs(emp - np.exp(log_pmf)).sum()
    return tv <= 0.01, f"TV = {tv:.4f} over {draws} draws"


def check_gradient(rng, trials=20):
    worst = 0.0
    h = 1e-5
    for _ in range(trials):
        kappa = int(rng.integers(1, 3))
        spec = auto_binomial_spec(kappa)
        p = int(rng.integers(1, 7))
        theta = _random_network(rng, p)
        data = Dataset(rng.integers(0, kappa + 1, size=(30, p)), kappa + 1)
        grad = pseudo_loglik_grad(theta, data, spec)
        up = theta.upper()
        rows, cols = np.triu_indices(p)
        for k in range(up.size):
            e = np.zeros_like(up)
            e[k] = h
            fd = (
                pseudo_loglik(SymmetricNetwork.from_upper(p, up + e), data, spec)
                - pseudo_loglik(SymmetricNetwork.from_upper(p, up - e), data, spec)
            ) / (2 * h)
            g = grad[rows[k], cols[k]]
            worst = max(worst, abs(g - fd) / max(1.0, abs(fd)))
    return worst <= 1e-6, f"max relative error = {worst:.2e}"


def check_shifted_objective(rng, trials=20):
    spec = auto_logistic_spec()
    worst = 0.0
    for _ in range(trials):
        p = int(rng.integers(2, 6))
        star = _random_network(rng, p)
        delta = _random_network(rng, p, scale=0.3)
        data = Dataset(rng.integers(0, 2, size=(40, p)), 2)
        pen = PenaltyConfig("l1", float(rng.uniform(0, 3)))
        direct = (objective(star, data, spec, pen) - objective(star + delta, data, spec, pen)) / data.n
        worst = max(worst, abs(direct - shifted_objective(delta, star, data, spec, pen)))
    return worst <= 1e-10, f"max |direct - term-wise| = {worst:.2e}"


def check_kl_nonnegative(rng, trials=1000):
    spec = auto_logistic_spec()
    star = _random_network(rng, 4)
    ref = Dataset(rng.integers(0, 2, size=(50, 4)), 2)
    zero = conditional_kl(star, SymmetricNetwork.zeros(4), ref, spec)
    low = min(conditional_kl(star, _random_network(rng, 4), ref, spec) for _ in range(trials))
    return zero == 0.0 and low >= 0.0, f"k(0) = {zero}, min over {trials} deltas = {low:.3e}"


def check_lambda_kills(rng):
    spec = auto_logistic_spec()
    data = Dataset(rng.integers(0, 2, size=(50, 4)), 2)
    res = fit(data, spec, PenaltyConfig("l1", 1e6))
    return res.theta_hat.nnz == 0, f"nonzeros at lambda=1e6: {res.theta_hat.nnz}"


SUITES = {
    "conditional_normalization": check_conditional_normalization,
    "comparison_lemma": check_comparison_lemma,
    "bayes_consistency": check_bayes_consistency,
    "penalty_a1": check_penalty_a1,
    "gibbs_invariance": check_gibbs_invariance,
    "monotone_coupling": check_monotone_coupling,
    "cftp_small": check_cftp_small,
    "gradient": check_gradient,
    "shifted_objective": check_shifted_objective,
    "kl_nonnegative": check_kl_nonnegative,
    "lambda_kills": check_lambda_kills,
}


def run_checks(seed: int = 0, names=None) -> list[CheckResult]:
    names = list(SUITES) if not names else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown checks {unknown}; available: {sorted(SUITES)}")
    out = []
    for k, name in enumerate(names):
        rng = np.random.default_rng([seed, k])
        t0 = time.perf_counter()
        ok, detail = SUITES[name](rng)
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out

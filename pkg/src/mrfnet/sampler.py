"""Drawing configurations from finite auto-models.

Three routes: monotone coupling from the past (exact, attractive models),
systematic-scan Gibbs chains, and inverse-CDF draws from the enumerated joint
(small ``p`` only).  Every row of a dataset owns its own counter-based stream,
so a single row can be regenerated without the others.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, SamplerTimeoutError
from .model import Dataset, InteractionSpec, SymmetricNetwork, enumerate_joint
from .rng import counter_uniforms, stream_keys

SAMPLER_METHODS = ("cftp", "gibbs", "enum")


@dataclass(frozen=True)
class SamplerConfig:
    method: str = "cftp"
    burn_in: int = 1000
    thinning: int = 10
    seed: int = 0
    max_cftp_epochs: int = 20

    def __post_init__(self):
        method = str(self.method).lower()
        if method not in SAMPLER_METHODS:
            raise ValueError(f"unknown sampler method {self.method!r}; expected one of {SAMPLER_METHODS}")
        object.__setattr__(self, "method", method)
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.max_cftp_epochs < 1:
            raise ValueError("max_cftp_epochs must be >= 1")


def update_node(states: np.ndarray, s: int, u: np.ndarray, theta_dense: np.ndarray, spec: InteractionSpec) -> None:
    """Resample node ``s`` of every row in place by inverse CDF with uniforms ``u``.

    With attractive weights and a supermodular ``B`` this update is monotone:
    ordered inputs stay ordered when they share ``u``.
    """
    row = theta_dense[s]
    nbrs = np.flatnonzero(row)
    nbrs = nbrs[nbrs != s]
    logits = np.broadcast_to(spec.a + row[s] * spec.b0, (states.shape[0], spec.m)).copy()
    if nbrs.size:
        logits += (spec.b[:, states[:, nbrs]] @ row[nbrs]).T
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    cdf = np.cumsum(w, axis=1)
    cdf /= cdf[:, -1:]
    states[:, s] = np.minimum((cdf < u[:, None]).sum(axis=1), spec.m - 1)


def _sweep(states, keys, t, theta_dense, spec):
    for s in range(states.shape[1]):
        update_node(states, s, counter_uniforms(keys, t, s), theta_dense, spec)


def gibbs_sweep(state, theta: SymmetricNetwork, spec: InteractionSpec, rng: np.random.Generator) -> np.ndarray:
    """One systematic scan over nodes ``0..p-1``; returns the updated configuration."""
    state = np.array(state, dtype=np.int64).reshape(1, -1)
    if state.shape[1] != theta.p:
        raise ValueError(f"configuration must have length {theta.p}")
    if state.min() < 0 or state.max() >= spec.m:
        raise ValueError(f"configuration contains codes outside 0..{spec.m - 1}")
    dense = theta.to_dense()
    u = rng.random(theta.p)
    for s in range(theta.p):
        update_node(state, s, u[s : s + 1], dense, spec)
    return state[0]


def gibbs_chain(
    theta: SymmetricNetwork,
    spec: InteractionSpec,
    n_draws: int,
    cfg: SamplerConfig,
    chains: int = 1,
) -> np.ndarray:
    """Retained states from ``chains`` independent Gibbs chains run in lockstep.

    Each chain starts at the all-minimum state, discards ``cfg.burn_in``
    sweeps and then keeps one state every ``cfg.thinning`` sweeps.  Rows are
    ordered chain-major within each retention step.
    """
    per_chain = -(-n_draws // chains)
    keys = stream_keys(cfg.seed, np.arange(chains))
    states = np.zeros((chains, theta.p), dtype=np.int64)
    dense = theta.to_dense()
    out = np.empty((per_chain, chains, theta.p), dtype=np.int64)
    t = 0
    for _ in range(cfg.burn_in):
        t += 1
        _sweep(states, keys, t, dense, spec)
    for k in range(per_chain):
        for _ in range(cfg.thinning):
            t += 1
            _sweep(states, keys, t, dense, spec)
        out[k] = states
    return out.reshape(-1, theta.p)[:n_draws]


def _check_monotone(theta: SymmetricNetwork, spec: InteractionSpec):
    if not theta.is_attractive():
        bad = [(s, l, w) for s, l, w in theta.edges() if w < 0][:3]
        raise PreconditionError(
            f"non-attractive network (negative weights e.g. {bad}); monotone CFTP needs "
            "theta(s,l) >= 0, use the gibbs sampler instead"
        )
    if not spec.is_supermodular():
        raise PreconditionError("B lacks increasing differences; monotone CFTP unavailable, use gibbs")


def _cftp_keys(theta, spec, keys, max_epochs):
    dense = theta.to_dense()
    n, p = keys.size, theta.p
    out = np.empty((n, p), dtype=np.int64)
    pending = np.arange(n)
    start = 1
    for _ in range(max_epochs):
        k = keys[pending]
        lo = np.zeros((pending.size, p), dtype=np.int64)
        hi = np.full((pending.size, p), spec.m - 1, dtype=np.int64)
        both = np.vstack([lo, hi])
        kk = np.concatenate([k, k])
        for t in range(start, 0, -1):
            _sweep(both, kk, t, dense, spec)
        lo, hi = both[: pending.size], both[pending.size :]
        done = np.all(lo == hi, axis=1)
        out[pending[done]] = lo[done]
        pending = pending[~done]
        if pending.size == 0:
            return out
        start *= 2
    raise SamplerTimeoutError(
        f"no coalescence for {pending.size} draw(s) within {max_epochs} epochs "
        f"(deepest start time -{start // 2})",
        deepest_start=-(start // 2),
    )


def sample_cftp(theta: SymmetricNetwork, spec: InteractionSpec, seed: int, max_epochs: int = 20) -> np.ndarray:
    """One exact draw by monotone coupling from the past.

    Start times double ``-1, -2, -4, ...``; the uniform used at time ``-t``
    for node ``s`` depends only on ``(seed, t, s)`` so restarts reuse it.
    """
    _check_monotone(theta, spec)
    keys = np.array([int(seed) & ((1 << 64) - 1)], dtype=np.uint64)
    return _cftp_keys(theta, spec, keys, max_epochs)[0]


def row_seed(seed: int, i: int) -> int:
    """Seed of row ``i``: ``sample_cftp(theta, spec, row_seed(seed, i))`` reproduces it."""
    return int(stream_keys(seed, i)[0])


def sample_dataset(theta: SymmetricNetwork, spec: InteractionSpec, n: int, cfg: SamplerConfig) -> Dataset:
    """``n`` independent draws; row ``i`` depends only on ``(cfg.seed, i)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    keys = stream_keys(cfg.seed, np.arange(n))
    if cfg.method == "cftp":
        _check_monotone(theta, spec)
        data = _cftp_keys(theta, spec, keys, cfg.max_cftp_epochs)
    elif cfg.method == "gibbs":
        data = np.zeros((n, theta.p), dtype=np.int64)
        dense = theta.to_dense()
        for t in range(1, cfg.burn_in + 1):
            _sweep(data, keys, t, dense, spec)
    else:
        states, log_pmf = enumerate_joint(theta, spec)
        cdf = np.cumsum(np.exp(log_pmf))
        u = counter_uniforms(keys, 0, 0) * cdf[-1]
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
        data = states[idx].astype(np.int64)
    return Dataset(data, spec.m)


def drop_nodes(data: Dataset, hidden) -> tuple[Dataset, np.ndarray]:
    """Remove the ``hidden`` columns; returns the reduced dataset and kept positions."""
    hidden = {int(h) for h in hidden}
    if any(h < 0 or h >= data.p for h in hidden):
        raise ValueError(f"hidden indices must lie in 0..{data.p - 1}")
    kept = np.array([j for j in range(data.p) if j not in hidden], dtype=np.int64)
    if kept.size == 0:
        raise ValueError("cannot hide every node")
    cols = tuple(data.columns[j] for j in kept)
    return Dataset(data.data[:, kept], data.n_codes, columns=cols), kept

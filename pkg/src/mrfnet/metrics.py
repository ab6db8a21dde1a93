"""Missing-node and accuracy diagnostics.

Norms over networks count each off-diagonal pair once (pairs ``l >= s``),
unlike the Frobenius norm of the full symmetric matrix.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NumericalError
from .model import Dataset, InteractionSpec, PenaltyConfig, SymmetricNetwork, log_softmax0, node_logits, penalty_values


@dataclass(frozen=True)
class PartitionedTruth:
    """Full network over ``p + r`` nodes split into observed and hidden nodes."""

    theta_full: SymmetricNetwork
    observed: tuple
    hidden: tuple

    def __post_init__(self):
        obs = tuple(int(v) for v in self.observed)
        hid = tuple(int(v) for v in self.hidden)
        object.__setattr__(self, "observed", obs)
        object.__setattr__(self, "hidden", hid)
        if set(obs) & set(hid):
            raise ValueError("observed and hidden nodes overlap")
        if sorted(obs + hid) != list(range(self.theta_full.p)):
            raise ValueError("observed and hidden must partition 0..p+r-1")
        if len(set(obs)) != len(obs) or not obs:
            raise ValueError("observed nodes must be distinct and non-empty")

    @property
    def p(self) -> int:
        return len(self.observed)

    @property
    def r(self) -> int:
        return len(self.hidden)

    def observed_block(self) -> SymmetricNetwork:
        """Truth restricted to observed nodes, relabelled in ``observed`` order."""
        return self.theta_full.subnetwork(self.observed)


@dataclass(frozen=True)
class StructureStats:
    a_n: int
    boundary: tuple
    b_n: float

    @property
    def boundary_size(self) -> int:
        return len(self.boundary)


def structure_stats(truth: PartitionedTruth) -> StructureStats:
    """Sparsity, boundary set and missing-edge strength of a partitioned truth.

    ``a_n`` counts nonzero observed pairs ``l >= s``; the boundary lists the
    observed nodes with at least one hidden neighbour; ``b_n`` is the l2 norm
    over observed nodes of their total absolute hidden-edge weight.
    """
    dense = truth.theta_full.to_dense()
    obs = np.array(truth.observed, dtype=int)
    hid = np.array(truth.hidden, dtype=int)
    block = dense[np.ix_(obs, obs)]
    a_n = int(np.count_nonzero(np.triu(block)))
    if hid.size:
        cross = np.abs(dense[np.ix_(obs, hid)]).sum(axis=1)
    else:
        cross = np.zeros(obs.size)
    boundary = tuple(int(obs[k]) for k in np.flatnonzero(cross > 0))
    return StructureStats(a_n=a_n, boundary=boundary, b_n=float(math.sqrt(np.sum(cross**2))))


def boundary_positions(truth: PartitionedTruth, stats: StructureStats | None = None) -> list[int]:
    """Boundary nodes as column positions of the observed block."""
    stats = stats or structure_stats(truth)
    pos = {v: k for k, v in enumerate(truth.observed)}
    return [pos[v] for v in stats.boundary]


def tau_ratio(theta: SymmetricNetwork, boundary) -> float:
    """Smallest ``tau`` with boundary-row mass ``<= tau * ||theta||_2``.

    Row sums include the diagonal entry.
    """
    norm = theta.norm2()
    if norm == 0:
        raise ValueError("tau ratio undefined for the zero matrix")
    rows = np.abs(theta.to_dense())[list(boundary)].sum(axis=1) if len(boundary) else np.zeros(0)
    return float(math.sqrt(np.sum(rows**2)) / norm)


def rate_r_n(alpha_n: float, n: float, a_n: float, p_n: float, b_n: float, tau_n: float) -> float:
    """``alpha_n sqrt(n) / (sqrt(a_n log p_n) + sqrt(n) b_n tau_n)``."""
    if alpha_n <= 0 or n <= 0 or p_n <= 0:
        raise ValueError("alpha_n, n and p_n must be positive")
    if a_n < 0 or b_n < 0 or tau_n < 0:
        raise ValueError("a_n, b_n and tau_n must be non-negative")
    denom = math.sqrt(a_n * math.log(p_n)) + math.sqrt(n) * b_n * tau_n
    if denom <= 0:
        raise ValueError("rate undefined: a_n log p_n = 0 and b_n tau_n = 0")
    return alpha_n * math.sqrt(n) / denom


@dataclass(frozen=True)
class A2Proxies:
    """Plug-in estimates of the curvature constants (not certified bounds)."""

    alpha_n: float
    alpha_n_prime: float
    node_min_eigenvalues: np.ndarray
    bar_spectrum: np.ndarray
    n_reference: int


def _features(spec, X, s):
    feats = np.array(spec.b[:, X], dtype=float)  # (m, n, p)
    feats[:, :, s] = spec.b0[:, None]
    return feats


def a2_eigen_proxies(data: Dataset, theta: SymmetricNetwork, spec: InteractionSpec) -> A2Proxies:
    """Empirical versions of the two eigenvalue constants.

    ``alpha_n`` is the minimum over nodes ``s`` of the smallest eigenvalue of
    ``n^-1 sum_i Cov_theta(F_s(X_s) | rest)`` with features
    ``F_s = (B(X_s, X_l))_l`` (``B0(X_s)`` at ``l = s``).  ``alpha_n_prime`` is
    the largest eigenvalue of the second-moment matrix of the centred features
    stacked over all ``(s, l)``.  ``bar_spectrum`` lists its leading
    eigenvalues in nonincreasing order.
    """
    if theta.p != data.p:
        raise ValueError(f"network has p={theta.p} but dataset has p={data.p}")
    X = data.data
    n, p = X.shape
    if n < p:
        warnings.warn(f"n={n} < p={p}: covariance proxies are ill-conditioned", RuntimeWarning, stacklevel=2)
    probs = np.exp(log_softmax0(node_logits(X, theta.to_dense(), spec)))  # (m, n, p)
    rows = np.arange(n)
    node_min = np.empty(p)
    resid = np.empty((n, p, p))
    for s in range(p):
        feats = _features(spec, X, s)
        w = probs[:, :, s]
        mean = np.einsum("ui,uil->il", w, feats)
        second = np.einsum("ui,uil,uik->lk", w, feats, feats)
        rho = (second - mean.T @ mean) / n
        if not np.all(np.isfinite(rho)):
            raise NumericalError("non-finite conditional covariance", {"node": s})
        node_min[s] = np.linalg.eigvalsh(rho)[0]
        resid[:, s, :] = feats[X[:, s], rows, :] - mean
    R = resid.reshape(n, p * p)
    gram = R @ R.T if n < p * p else R.T @ R
    spectrum = np.linalg.eigvalsh(gram / n)[::-1]
    if not np.all(np.isfinite(spectrum)):
        raise NumericalError("non-finite residual second moments")
    return A2Proxies(
        alpha_n=float(node_min.min()),
        alpha_n_prime=float(spectrum[0]),
        node_min_eigenvalues=node_min,
        bar_spectrum=spectrum,
        n_reference=n,
    )


def conditional_kl(
    theta_star: SymmetricNetwork, delta: SymmetricNetwork, reference_data: Dataset, spec: InteractionSpec
) -> float:
    """Monte Carlo estimate of the summed node-conditional KL divergence.

    For each reference row the inner sums over the alphabet are exact:
    ``sum_s KL(f_s(. | x; theta_star) || f_s(. | x; theta_star + delta))``,
    averaged over rows.
    """
    if theta_star.p != reference_data.p or delta.p != theta_star.p:
        raise ValueError("dimension mismatch between networks and reference data")
    X = reference_data.data
    star = theta_star.to_dense()
    lp_star = log_softmax0(node_logits(X, star, spec))
    lp_pert = log_softmax0(node_logits(X, star + delta.to_dense(), spec))
    per_node = np.sum(np.exp(lp_star) * (lp_star - lp_pert), axis=0)
    # each term is a KL divergence; clip rounding noise below zero
    return float(np.maximum(per_node, 0.0).sum(axis=1).mean())


def shifted_objective(
    delta: SymmetricNetwork,
    theta_star: SymmetricNetwork,
    data: Dataset,
    spec: InteractionSpec,
    pen: PenaltyConfig,
) -> float:
    """``n^-1 (Q(theta_star) - Q(theta_star + delta))`` assembled term by term.

    Sums per-row, per-node log ratios of the conditionals and the penalty
    increments; minimised at ``theta_hat - theta_star``.
    """
    X = data.data
    n = data.n
    star = theta_star.to_dense()
    lp_star = log_softmax0(node_logits(X, star, spec))
    lp_pert = log_softmax0(node_logits(X, star + delta.to_dense(), spec))
    pick = X[None, :, :]
    ratio = np.take_along_axis(lp_star, pick, 0) - np.take_along_axis(lp_pert, pick, 0)
    up_star = theta_star.upper()
    up_pert = up_star + delta.upper()
    rows, cols = np.triu_indices(theta_star.p)
    mask = np.ones(rows.size, bool) if pen.penalize_diagonal else rows != cols
    pen_inc = penalty_values(pen, np.abs(up_pert[mask])) - penalty_values(pen, np.abs(up_star[mask]))
    return float(ratio.sum() / n + pen_inc.sum() / n)


def relative_errors(estimates: Sequence[SymmetricNetwork], theta_star: SymmetricNetwork) -> np.ndarray:
    norm = theta_star.norm2()
    if norm == 0:
        raise ValueError("relative error undefined for a zero truth")
    if not estimates:
        raise ValueError("need at least one estimate")
    return np.array([(est - theta_star).norm2() / norm for est in estimates])


def relative_mse(estimates: Sequence[SymmetricNetwork], theta_star_observed_block: SymmetricNetwork) -> float:
    """Mean over replications of ``||theta_hat - theta_star||_2 / ||theta_star||_2``."""
    return float(relative_errors(estimates, theta_star_observed_block).mean())


class SupportMetrics(NamedTuple):
    precision: float
    recall: float
    f1: float


def _edge_set(theta: SymmetricNetwork, zero_tol: float):
    return {(s, l) for s, l, w in theta.edges() if abs(w) > zero_tol}


def support_metrics(theta_hat: SymmetricNetwork, theta_star: SymmetricNetwork, zero_tol: float = 1e-8) -> SupportMetrics:
    """Precision / recall / F1 of the estimated off-diagonal edge set.

    Precision is 1 when no edge is estimated; recall is 1 when the truth has
    no edge.
    """
    if theta_hat.p != theta_star.p:
        raise ValueError("dimension mismatch")
    if zero_tol < 0:
        raise ValueError("zero_tol must be >= 0")
    est, true = _edge_set(theta_hat, zero_tol), _edge_set(theta_star, zero_tol)
    tp = len(est & true)
    precision = tp / len(est) if est else 1.0
    recall = tp / len(true) if true else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return SupportMetrics(precision, recall, f1)

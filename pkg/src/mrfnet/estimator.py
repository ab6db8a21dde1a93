"""Penalized pseudo-likelihood estimation of a symmetric network.

The objective is ``Q(theta) = PL(theta) - sum_{l >= s} q_lambda(|theta[s,l]|)``
where ``PL`` sums the log node-conditionals of every observed row.  ``fit``
maximises it by proximal gradient ascent with Barzilai-Borwein trial steps and
backtracking.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .model import Dataset, InteractionSpec, PenaltyConfig, SymmetricNetwork, penalty_prox, penalty_values

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitOptions:
    max_iters: int = 5000
    tol_rel_obj: float = 1e-8
    step_init: float = 1.0
    backtrack_factor: float = 0.5
    theta_init: SymmetricNetwork | None = None
    # optional extra guard: also require the prox-gradient residual (raw units) below this
    tol_grad: float | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol_rel_obj > 0:
            raise ValueError("tol_rel_obj must be > 0")
        if not self.step_init > 0:
            raise ValueError("step_init must be > 0")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.tol_grad is not None and not self.tol_grad > 0:
            raise ValueError("tol_grad must be > 0")


@dataclass
class FitResult:
    theta_hat: SymmetricNetwork
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    final_grad_inf_norm: float
    lam: float = field(default=0.0)


class _Design:
    """Per-dataset arrays reused by every objective evaluation."""

    def __init__(self, data: Dataset, spec: InteractionSpec):
        X = data.data
        self.n, self.p = X.shape
        self.spec = spec
        self.bx = np.ascontiguousarray(spec.b[:, X])  # (m, n, p)
        self.onehot = (X[None, :, :] == np.arange(spec.m)[:, None, None]).astype(float)
        self.a = spec.a[:, None, None]
        self.b0 = spec.b0[:, None, None]

    def _logits(self, dense):
        diag = np.diag(dense)
        return self.bx @ (dense - np.diag(diag)) + self.a + self.b0 * diag

    @staticmethod
    def _normalise(logits):
        mx = logits.max(axis=0)
        e = np.exp(logits - mx)
        tot = e.sum(axis=0)
        return e, tot, mx + np.log(tot)

    def value(self, dense) -> float:
        logits = self._logits(dense)
        _, _, log_z = self._normalise(logits)
        return float(np.sum(self.onehot * logits) - log_z.sum())

    def value_grad(self, dense):
        logits = self._logits(dense)
        e, tot, log_z = self._normalise(logits)
        val = float(np.sum(self.onehot * logits) - log_z.sum())
        resid = self.onehot - e / tot
        g = np.matmul(resid.transpose(0, 2, 1), self.bx).sum(axis=0)
        grad = g + g.T
        np.fill_diagonal(grad, self.spec.b0 @ resid.sum(axis=1))
        return val, grad


def _check(theta: SymmetricNetwork, data: Dataset, spec: InteractionSpec):
    if theta.p != data.p:
        raise ValueError(f"network has p={theta.p} but dataset has p={data.p}")
    if data.n_codes != spec.m:
        raise ValueError(f"dataset uses {data.n_codes} codes but the alphabet has {spec.m}")


def pseudo_loglik(theta: SymmetricNetwork, data: Dataset, spec: InteractionSpec) -> float:
    """Sum over rows and nodes of the log node-conditional at the observed value."""
    _check(theta, data, spec)
    return _Design(data, spec).value(theta.to_dense())


def pseudo_loglik_grad(theta: SymmetricNetwork, data: Dataset, spec: InteractionSpec) -> np.ndarray:
    """Gradient of :func:`pseudo_loglik` as a symmetric ``p x p`` matrix.

    Entry ``[s, l]`` (``s != l``) is the derivative with respect to the shared
    coordinate ``theta[s,l] = theta[l,s]``, so it collects both conditionals
    that contain it; the diagonal holds the self-potential derivatives.
    """
    _check(theta, data, spec)
    return _Design(data, spec).value_grad(theta.to_dense())[1]


def _penalty_mask(p, pen):
    rows, cols = np.triu_indices(p)
    return np.ones(rows.size, bool) if pen.penalize_diagonal else rows != cols


def _penalty_total(upper, pen, mask) -> float:
    return float(np.sum(penalty_values(pen, np.abs(upper[mask]))))


def objective(theta: SymmetricNetwork, data: Dataset, spec: InteractionSpec, pen: PenaltyConfig) -> float:
    """Penalized pseudo-log-likelihood ``Q``."""
    _check(theta, data, spec)
    upper = theta.upper()
    return pseudo_loglik(theta, data, spec) - _penalty_total(upper, pen, _penalty_mask(theta.p, pen))


def lambda_default(n: int, p: int, c: float = 0.5) -> float:
    """``c * sqrt(n log p)`` with the natural logarithm."""
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    if not c > 0:
        raise ValueError("c must be > 0; pass an explicit PenaltyConfig for lambda = 0")
    return c * math.sqrt(n * math.log(p))


def _to_dense(upper, p, rows, cols):
    mat = np.zeros((p, p))
    mat[rows, cols] = upper
    mat[cols, rows] = upper
    return mat


def fit(data: Dataset, spec: InteractionSpec, pen: PenaltyConfig, opts: FitOptions | None = None) -> FitResult:
    """Maximise the penalized pseudo-likelihood by proximal gradient ascent.

    Steps are taken on ``Q / n``.  Each trial step is backtracked until the
    quadratic model of the smooth part majorises it and ``Q`` does not
    decrease.  With ``opts.tol_grad`` set, convergence additionally requires
    the proximal-gradient residual to fall below it.  For the l1 penalty the limit is a global maximiser; for SCAD it
    is a stationary point.
    """
    opts = opts or FitOptions()
    if data.n_codes != spec.m:
        raise ValueError(f"dataset uses {data.n_codes} codes but the alphabet has {spec.m}")
    p, n = data.p, data.n
    if pen.lam == 0.0:
        const = [j for j in range(p) if np.all(data.data[:, j] == data.data[0, j])]
        if const:
            warnings.warn(
                f"lambda = 0 with constant columns {const}: self-potentials may diverge",
                RuntimeWarning,
                stacklevel=2,
            )
    design = _Design(data, spec)
    rows, cols = np.triu_indices(p)
    mask = _penalty_mask(p, pen)

    theta0 = opts.theta_init
    if theta0 is not None and theta0.p != p:
        raise ValueError("theta_init has the wrong dimension")
    x = theta0.upper() if theta0 is not None else np.zeros(rows.size)

    def prox(z, step):
        out = z.copy()
        out[mask] = penalty_prox(pen, z[mask], step / n)
        return out

    def residual(x, g):
        # prox-gradient mapping at unit step, in units of the raw objective
        return float(np.abs(x - prox(x + g, 1.0)).max() * n) if x.size else 0.0

    def composite(ll, upper):
        return ll - _penalty_total(upper, pen, mask)

    ll, gmat = design.value_grad(_to_dense(x, p, rows, cols))
    g = gmat[rows, cols] / n  # ascent direction of PL / n
    q = composite(ll, x)
    if not math.isfinite(q):
        raise NumericalError("non-finite objective at the initial point", {"iteration": 0})
    trace = [q]
    step = opts.step_init
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        f0 = -ll / n
        while True:
            x_new = prox(x + step * g, step)
            d = x_new - x
            ll_new, gmat_new = design.value_grad(_to_dense(x_new, p, rows, cols))
            q_new = composite(ll_new, x_new)
            if not math.isfinite(q_new):
                if step < 1e-300:
                    raise NumericalError(
                        "non-finite objective during line search",
                        {"iteration": it, "step": step, "max_abs_theta": float(np.abs(x).max())},
                    )
                step *= opts.backtrack_factor
                continue
            model_ok = -ll_new / n <= f0 - g @ d + (d @ d) / (2 * step) + 1e-12 * max(1.0, abs(f0))
            if model_ok and q_new >= q - 1e-12 * max(1.0, abs(q)):
                break
            step *= opts.backtrack_factor
            if step < 1e-300:
                raise NumericalError("line search failed", {"iteration": it, "objective": q})
        g_new = gmat_new[rows, cols] / n
        rel = abs(q_new - q) / max(1.0, abs(q))
        trace.append(q_new)
        y = g - g_new  # gradient difference of -PL/n
        sy = d @ y
        x, ll, g, q = x_new, ll_new, g_new, q_new
        if rel < opts.tol_rel_obj and (opts.tol_grad is None or residual(x, g) <= opts.tol_grad):
            converged = True
            break
        step = float(np.clip((d @ d) / sy, 1e-10, 1e10)) if sy > 0 else min(step * 2.0, 1e10)

    theta_hat = SymmetricNetwork.from_upper(p, x)
    log.debug("fit finished after %d iterations (converged=%s)", it, converged)
    return FitResult(
        theta_hat=theta_hat,
        objective_trace=np.array(trace),
        iterations=it,
        converged=converged,
        final_grad_inf_norm=float(np.abs(g).max() * n) if g.size else 0.0,
        lam=pen.lam,
    )

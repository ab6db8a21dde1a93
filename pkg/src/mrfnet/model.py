"""Auto-model ingredients: alphabets, interaction tables, sparse symmetric
networks, node conditionals, penalties and the exhaustive-enumeration oracle.

Configurations are integer arrays of alphabet codes.  Node conditionals are
computed in log space with max subtraction throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np
from scipy.special import logsumexp

from .errors import CapacityError

MAX_ALPHABET = 64
# exhaustive enumeration cap (|X|^p states)
MAX_ENUM_STATES = 2**21


def _readonly(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Alphabet:
    """Finite ordered set of integer codes ``0..m-1``."""

    values: tuple

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) < 2 or len(vals) > MAX_ALPHABET:
            raise ValueError(f"alphabet size must be in [2, {MAX_ALPHABET}], got {len(vals)}")
        if vals != tuple(range(len(vals))):
            raise ValueError("alphabet values must be the distinct sorted codes 0..m-1")

    @classmethod
    def of_size(cls, m: int) -> "Alphabet":
        return cls(tuple(range(m)))

    @property
    def size(self) -> int:
        return len(self.values)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class InteractionSpec:
    """The functions A, B0 and B tabulated on an alphabet.

    Construction only checks table shapes; use :func:`validate_spec` for the
    symmetry / diagonal / finiteness invariants.
    """

    alphabet: Alphabet
    a: np.ndarray
    b0: np.ndarray
    b: np.ndarray
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        m = self.alphabet.size
        a, b0, b = _readonly(self.a), _readonly(self.b0), _readonly(self.b)
        if a.shape != (m,) or b0.shape != (m,) or b.shape != (m, m):
            raise ValueError(
                f"tables must have shapes ({m},), ({m},), ({m},{m}); "
                f"got {a.shape}, {b0.shape}, {b.shape}"
            )
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b0", b0)
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.alphabet.size

    def __eq__(self, other):
        if not isinstance(other, InteractionSpec):
            return NotImplemented
        return (
            self.alphabet == other.alphabet
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b0, other.b0)
            and np.array_equal(self.b, other.b)
        )

    def __hash__(self):
        return hash((self.alphabet, self.a.tobytes(), self.b0.tobytes(), self.b.tobytes()))

    def is_supermodular(self) -> bool:
        """True when B has increasing differences in the code order."""
        d = np.diff(np.diff(self.b, axis=0), axis=1)
        return bool(np.all(d >= -1e-12))


def validate_spec(spec: InteractionSpec, check_diagonal: bool = True) -> list[str]:
    """Return the list of violated invariants (empty when ``spec`` is valid).

    Never raises on an invalid spec.  ``check_diagonal=False`` skips the
    ``B(x, x) == B0(x)`` convention, which the auto-binomial model with
    ``kappa > 1`` does not satisfy.
    """
    violations = []
    for label, table in (("A", spec.a), ("B0", spec.b0), ("B", spec.b)):
        if not np.all(np.isfinite(table)):
            violations.append(f"non-finite entries in {label}")
    with np.errstate(invalid="ignore"):
        if not np.array_equal(spec.b, spec.b.T, equal_nan=True):
            violations.append("B not symmetric")
        if check_diagonal and not np.array_equal(np.diag(spec.b), spec.b0, equal_nan=True):
            violations.append("diag(B) ≠ B0")
    return violations


def auto_binomial_spec(kappa: int) -> InteractionSpec:
    """Auto-binomial interactions on ``{0, ..., kappa}``.

    ``A(u) = log C(kappa, u)``, ``B0(u) = u`` and ``B(u, v) = uv`` so that each
    node conditional is Binomial(kappa, logistic(natural parameter)).
    ``kappa = 1`` is the auto-logistic model.
    """
    if int(kappa) != kappa or kappa < 1:
        raise ValueError(f"kappa must be a positive integer, got {kappa!r}")
    kappa = int(kappa)
    if kappa + 1 > MAX_ALPHABET:
        raise ValueError(f"kappa must be at most {MAX_ALPHABET - 1}")
    u = np.arange(kappa + 1, dtype=float)
    a = np.array([math.log(math.comb(kappa, k)) for k in range(kappa + 1)])
    name = "auto-logistic" if kappa == 1 else f"auto-binomial(kappa={kappa})"
    return InteractionSpec(Alphabet.of_size(kappa + 1), a, u.copy(), np.outer(u, u), name=name)


def auto_logistic_spec() -> InteractionSpec:
    return auto_binomial_spec(1)


class SymmetricNetwork:
    """Sparse symmetric parameter matrix over ``p`` nodes.

    Entries are keyed by ``(s, l)`` with ``s <= l``; zeros are never stored.
    Instances are immutable.
    """

    __slots__ = ("_p", "_entries", "_dense")

    def __init__(self, p: int, entries: Mapping[tuple, float] | Iterable | None = None):
        p = int(p)
        if p < 1:
            raise ValueError("p must be >= 1")
        items = entries.items() if isinstance(entries, Mapping) else (entries or ())
        store = {}
        for key, w in items:
            s, l = (int(k) for k in key)
            if not (0 <= s < p and 0 <= l < p):
                raise ValueError(f"entry ({s}, {l}) out of range for p={p}")
            if s > l:
                s, l = l, s
            w = float(w)
            if not math.isfinite(w):
                raise ValueError(f"non-finite weight at ({s}, {l})")
            if (s, l) in store and store[(s, l)] != w:
                raise ValueError(f"conflicting values for ({s}, {l})")
            store[(s, l)] = w
        self._p = p
        self._entries = MappingProxyType({k: v for k, v in sorted(store.items()) if v != 0.0})
        self._dense = None

    def __reduce__(self):
        return (SymmetricNetwork, (self._p, dict(self._entries)))

    @classmethod
    def zeros(cls, p: int) -> "SymmetricNetwork":
        return cls(p)

    @classmethod
    def from_dense(cls, mat, atol: float = 0.0) -> "SymmetricNetwork":
        """Build from a square matrix, reading the upper triangle.

        Raises if the matrix is not symmetric to within ``atol``.
        """
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("expected a square matrix")
        if not np.allclose(mat, mat.T, rtol=0.0, atol=atol):
            raise ValueError("matrix is not symmetric")
        rows, cols = np.nonzero(np.triu(mat))
        return cls(mat.shape[0], {(int(s), int(l)): mat[s, l] for s, l in zip(rows, cols)})

    @classmethod
    def from_upper(cls, p: int, vec) -> "SymmetricNetwork":
        """Inverse of :meth:`upper`."""
        rows, cols = np.triu_indices(p)
        vec = np.asarray(vec, dtype=float)
        if vec.shape != rows.shape:
            raise ValueError(f"expected {rows.size} upper-triangle values, got {vec.shape}")
        nz = np.nonzero(vec)[0]
        return cls(p, {(int(rows[k]), int(cols[k])): vec[k] for k in nz})

    @property
    def p(self) -> int:
        return self._p

    @property
    def entries(self) -> Mapping[tuple, float]:
        return self._entries

    @property
    def nnz(self) -> int:
        return len(self._entries)

    def get(self, s: int, l: int) -> float:
        if s > l:
            s, l = l, s
        return self._entries.get((s, l), 0.0)

    __getitem__ = lambda self, key: self.get(*key)  # noqa: E731

    def to_dense(self) -> np.ndarray:
        if self._dense is None:
            mat = np.zeros((self._p, self._p))
            for (s, l), w in self._entries.items():
                mat[s, l] = w
                mat[l, s] = w
            mat.setflags(write=False)
            self._dense = mat
        return self._dense

    def upper(self) -> np.ndarray:
        """Upper-triangle values (diagonal included) in ``np.triu_indices`` order."""
        return self.to_dense()[np.triu_indices(self._p)].copy()

    def diagonal(self) -> np.ndarray:
        return np.diag(self.to_dense()).copy()

    def edges(self) -> list[tuple[int, int, float]]:
        """Off-diagonal nonzero entries as ``(s, l, w)`` with ``s < l``."""
        return [(s, l, w) for (s, l), w in self._entries.items() if s != l]

    def neighbors(self, s: int) -> list[int]:
        row = self.to_dense()[s]
        return [int(l) for l in np.nonzero(row)[0] if l != s]

    def degree(self, s: int) -> float:
        """Sum of absolute off-diagonal weights in row ``s``."""
        row = np.abs(self.to_dense()[s])
        return float(row.sum() - row[s])

    def max_neighbors(self) -> int:
        mat = self.to_dense() != 0
        return int((mat.sum(axis=1) - np.diag(mat)).max())

    def norm2(self) -> float:
        """l2 norm over ordered pairs ``l >= s`` (each off-diagonal pair once)."""
        return math.sqrt(sum(w * w for w in self._entries.values()))

    def norm1(self) -> float:
        return sum(abs(w) for w in self._entries.values())

    def is_attractive(self) -> bool:
        return all(w >= 0 for (s, l), w in self._entries.items() if s != l)

    def subnetwork(self, nodes) -> "SymmetricNetwork":
        """Restriction to ``nodes``, relabelled ``0..len(nodes)-1`` in the given order."""
        nodes = [int(v) for v in nodes]
        sub = self.to_dense()[np.ix_(nodes, nodes)]
        return SymmetricNetwork.from_dense(sub)

    def permute(self, perm) -> "SymmetricNetwork":
        """Relabel node ``i`` as ``perm[i]``."""
        perm = [int(v) for v in perm]
        if sorted(perm) != list(range(self._p)):
            raise ValueError("perm must be a permutation of 0..p-1")
        return SymmetricNetwork(self._p, {(perm[s], perm[l]): w for (s, l), w in self._entries.items()})

    def __add__(self, other):
        if not isinstance(other, SymmetricNetwork) or other.p != self.p:
            return NotImplemented
        return SymmetricNetwork.from_dense(self.to_dense() + other.to_dense())

    def __sub__(self, other):
        if not isinstance(other, SymmetricNetwork) or other.p != self.p:
            return NotImplemented
        return SymmetricNetwork.from_dense(self.to_dense() - other.to_dense())

    def __eq__(self, other):
        if not isinstance(other, SymmetricNetwork):
            return NotImplemented
        return self._p == other._p and dict(self._entries) == dict(other._entries)

    def __hash__(self):
        return hash((self._p, tuple(self._entries.items())))

    def __repr__(self):
        return f"SymmetricNetwork(p={self._p}, nnz={self.nnz})"


@dataclass(frozen=True)
class Dataset:
    """``n x p`` table of alphabet codes.

    ``columns`` records the original node index of every column (identity
    unless produced by :func:`mrfnet.sampler.drop_nodes`).
    """

    data: np.ndarray
    n_codes: int
    columns: tuple = None

    def __post_init__(self):
        arr = np.array(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"dataset must be a non-empty 2-d table, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(np.equal(np.mod(arr, 1), 0)):
                raise ValueError("dataset cells must be integer codes")
        arr = arr.astype(np.int64)
        if arr.min() < 0 or arr.max() >= self.n_codes:
            raise ValueError(f"dataset contains codes outside 0..{self.n_codes - 1}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        cols = tuple(range(arr.shape[1])) if self.columns is None else tuple(int(c) for c in self.columns)
        if len(cols) != arr.shape[1]:
            raise ValueError("columns must name every data column")
        object.__setattr__(self, "columns", cols)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.n_codes == other.n_codes
            and self.columns == other.columns
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None


def _check_config(x, p, m, skip=None):
    x = np.asarray(x)
    if x.shape != (p,):
        raise ValueError(f"configuration must have length {p}, got shape {x.shape}")
    check = np.delete(x, skip) if skip is not None else x
    if check.size and (np.any(check != np.floor(check)) or check.min() < 0 or check.max() >= m):
        raise ValueError(f"configuration contains codes outside 0..{m - 1}")
    return x.astype(np.int64) if skip is None else np.where(np.arange(p) == skip, 0, x).astype(np.int64)


def _conditional_logits(s, x, theta: SymmetricNetwork, spec: InteractionSpec):
    if not 0 <= s < theta.p:
        raise ValueError(f"node {s} out of range for p={theta.p}")
    x = _check_config(x, theta.p, spec.m, skip=s)
    row = theta.to_dense()[s].copy()
    diag = row[s]
    row[s] = 0.0
    return spec.a + diag * spec.b0 + spec.b[:, x] @ row


def conditional_distribution(s: int, x, theta: SymmetricNetwork, spec: InteractionSpec) -> np.ndarray:
    """Conditional pmf of node ``s`` over the alphabet given the other nodes.

    ``x`` is a full length-``p`` configuration; ``x[s]`` is ignored.
    """
    eta = _conditional_logits(s, x, theta, spec)
    eta = eta - eta.max()
    w = np.exp(eta)
    return w / w.sum()


def log_conditional_normalizer(s: int, x, theta: SymmetricNetwork, spec: InteractionSpec) -> float:
    """``log Z`` of the node-``s`` conditional (log-sum-exp stabilised)."""
    return float(logsumexp(_conditional_logits(s, x, theta, spec)))


def node_logits(X: np.ndarray, theta_dense: np.ndarray, spec: InteractionSpec) -> np.ndarray:
    """Unnormalised conditional log-weights for every row, node and value.

    Returns an array of shape ``(m, n, p)`` whose ``[u, i, s]`` entry is
    ``A(u) + theta[s,s] B0(u) + sum_{l != s} theta[s,l] B(u, X[i,l])``.
    """
    diag = np.diag(theta_dense)
    off = theta_dense - np.diag(diag)
    bx = spec.b[:, X]  # (m, n, p)
    return bx @ off + spec.a[:, None, None] + spec.b0[:, None, None] * diag[None, None, :]


def log_softmax0(logits: np.ndarray) -> np.ndarray:
    """Normalise log-weights along axis 0."""
    return logits - logsumexp(logits, axis=0, keepdims=True)


def enumerate_states(p: int, m: int) -> np.ndarray:
    """All ``m**p`` configurations, last node varying fastest."""
    count = m**p
    if count > MAX_ENUM_STATES:
        raise CapacityError(
            f"state space {m}^{p} = {count} exceeds the enumeration limit of {MAX_ENUM_STATES} states"
        )
    return np.indices((m,) * p, dtype=np.int8).reshape(p, -1).T


def joint_energies(states: np.ndarray, theta: SymmetricNetwork, spec: InteractionSpec) -> np.ndarray:
    """Unnormalised joint log-density of each configuration row."""
    states = np.asarray(states)
    energy = np.zeros(states.shape[0])
    diag = theta.diagonal()
    for s in range(theta.p):
        col = states[:, s]
        energy += spec.a[col] + diag[s] * spec.b0[col]
    for s, l, w in theta.edges():
        energy += w * spec.b[states[:, s], states[:, l]]
    return energy


def enumerate_joint(theta: SymmetricNetwork, spec: InteractionSpec) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive joint pmf: ``(states, log_pmf)``."""
    states = enumerate_states(theta.p, spec.m)
    energy = joint_energies(states, theta, spec)
    return states, energy - logsumexp(energy)


def log_partition(theta: SymmetricNetwork, spec: InteractionSpec) -> float:
    states = enumerate_states(theta.p, spec.m)
    return float(logsumexp(joint_energies(states, theta, spec)))


def joint_log_pmf(x, theta: SymmetricNetwork, spec: InteractionSpec) -> float:
    """Exact ``log f_theta(x)`` with the normaliser summed over all states."""
    x = _check_config(x, theta.p, spec.m)
    log_z = log_partition(theta, spec)
    return float(joint_energies(x[None, :], theta, spec)[0] - log_z)


# -- penalties -------------------------------------------------------------

PENALTY_FAMILIES = ("l1", "scad")


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty family and level.

    ``penalize_diagonal`` controls whether the self-potentials ``theta[s,s]``
    are penalised along with the off-diagonal weights.
    """

    family: str = "l1"
    lam: float = 0.0
    scad_a: float = 3.7
    penalize_diagonal: bool = True

    def __post_init__(self):
        fam = str(self.family).lower()
        if fam not in PENALTY_FAMILIES:
            raise ValueError(f"unknown penalty family {self.family!r}; expected one of {PENALTY_FAMILIES}")
        object.__setattr__(self, "family", fam)
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        if not self.scad_a > 2:
            raise ValueError(f"SCAD shape must exceed 2, got {self.scad_a}")


def penalty_values(pen: PenaltyConfig, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("penalty argument must be >= 0")
    lam = pen.lam
    if pen.family == "l1" or lam == 0.0:
        return lam * t
    a = pen.scad_a
    return np.where(
        t <= lam,
        lam * t,
        np.where(t <= a * lam, (2 * a * lam * t - t * t - lam * lam) / (2 * (a - 1)), lam * lam * (a + 1) / 2),
    )


def penalty_derivatives(pen: PenaltyConfig, t) -> np.ndarray:
    """``q'_lambda(t)``; at ``t = 0`` the right limit."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("penalty argument must be >= 0")
    lam = pen.lam
    if pen.family == "l1" or lam == 0.0:
        return np.full_like(t, lam)
    a = pen.scad_a
    return np.where(t <= lam, lam, np.maximum(a * lam - t, 0.0) / (a - 1))


def penalty(pen: PenaltyConfig, t: float) -> tuple[float, float]:
    """``(q_lambda(t), q'_lambda(t))`` for a scalar ``t >= 0``."""
    if t < 0:
        raise ValueError("penalty argument must be >= 0")
    return float(penalty_values(pen, t)), float(penalty_derivatives(pen, t))


def penalty_prox(pen: PenaltyConfig, z, step: float) -> np.ndarray:
    """Elementwise ``argmin_x 0.5 (x - z)^2 + step * q_lambda(|x|)``.

    Exact global minimiser for both families; the SCAD case compares the
    candidate minimisers of each quadratic piece.
    """
    z = np.asarray(z, dtype=float)
    tau = step * pen.lam
    if pen.family == "l1" or pen.lam == 0.0:
        return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)
    lam, a = pen.lam, pen.scad_a
    az = np.abs(z)
    denom = a - 1 - step
    mid = (az * (a - 1) - step * a * lam) / denom if denom > 0 else np.full_like(az, lam)
    cands = np.stack(
        [
            np.zeros_like(az),
            np.clip(az - tau, 0.0, lam),
            np.clip(mid, lam, a * lam),
            np.maximum(az, a * lam),
            np.full_like(az, lam),
            np.full_like(az, a * lam),
        ]
    )
    obj = 0.5 * (cands - az) ** 2 + step * penalty_values(pen, cands)
    best = np.take_along_axis(cands, np.argmin(obj, axis=0)[None], axis=0)[0]
    return np.sign(z) * best

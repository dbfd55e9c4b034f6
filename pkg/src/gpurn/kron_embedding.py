"""Interpolated Kronecker delta, scaled Lagrangian and the path embedding."""

import math
from dataclasses import dataclass

import numpy as np

NODE_SNAP = 1e-10


class _Indeterminate:
    """Marker for a ``+inf - inf`` combination of log terms."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INDETERMINATE"

    def __reduce__(self):
        return (_Indeterminate, ())


INDETERMINATE = _Indeterminate()


def as_extended(value):
    """Convert a float (nan meaning indeterminate) to the public convention."""
    value = float(value)
    return INDETERMINATE if math.isnan(value) else value


def kron_delta(K, k, alpha):
    """Lagrange basis polynomial on nodes ``0..K`` that is 1 at ``k``.

    ``prod_{z != k} (z - alpha) / (z - k)``; exact at the integer nodes.
    Accepts scalar or array ``alpha``.
    """
    if not 0 <= k <= K:
        raise ValueError("k=%r outside {0..%d}" % (k, K))
    alpha = np.asarray(alpha, dtype=float)
    out = np.ones_like(alpha)
    for z in range(K + 1):
        if z != k:
            out = out * ((z - alpha) / (z - k))
    return float(out) if out.ndim == 0 else out


def kron_matrix(K, alpha):
    """``(K+1, ...)`` stack of ``kron_delta(K, k, alpha)``."""
    alpha = np.asarray(alpha, dtype=float)
    return np.stack([np.asarray(kron_delta(K, k, alpha)) for k in range(K + 1)])


def kron_deriv_matrix(K, alpha):
    """``(K+1, ...)`` stack of ``d kron_delta(K, k, alpha) / d alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    rows = []
    for k in range(K + 1):
        others = [z for z in range(K + 1) if z != k]
        total = np.zeros_like(alpha)
        for z in others:
            term = np.full_like(alpha, -1.0 / (z - k))
            for w in others:
                if w != z:
                    term = term * ((w - alpha) / (w - k))
            total = total + term
        rows.append(total)
    return np.stack(rows)


def _lagrangian_terms(spec, alpha, beta, floor):
    """Per-k terms ``delta_k(alpha) * log max(pi_k(beta), floor)``.

    Terms with ``delta_k(alpha) == 0`` are exactly zero.
    """
    deltas = kron_matrix(spec.K, alpha)
    probs = spec.prob_matrix(beta)
    with np.errstate(divide="ignore"):
        logs = np.log(np.maximum(probs, floor))
    with np.errstate(invalid="ignore"):
        terms = np.where(deltas == 0.0, 0.0, deltas * logs)
    return terms, deltas, probs


def lagrangian_array(spec, alpha, beta, floor=0.0):
    """Vectorized scaled Lagrangian; ``nan`` marks an indeterminate value."""
    alpha, beta = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float))
    terms, _, _ = _lagrangian_terms(spec, alpha, beta, floor)
    with np.errstate(invalid="ignore"):
        return terms.sum(axis=0)


def scaled_lagrangian(spec, alpha, beta, floor=0.0):
    """``L(alpha, beta) = sum_k delta_k(alpha) log pi_k(beta)``.

    With ``floor = 0`` a vanishing ``pi_k`` gives ``-inf`` or ``+inf``
    depending on the sign of ``delta_k(alpha)``; opposite infinities yield
    :data:`INDETERMINATE`.
    """
    if floor < 0:
        raise ValueError("floor must be >= 0")
    return as_extended(lagrangian_array(spec, alpha, beta, floor))


def lagrangian_partials(spec, alpha, beta, floor=0.0):
    """``(dL/dalpha, dL/dbeta)`` for arrays; assumes finite log terms."""
    deltas = kron_matrix(spec.K, alpha)
    ddeltas = kron_deriv_matrix(spec.K, alpha)
    probs = spec.prob_matrix(beta)
    clipped = np.maximum(probs, floor)
    dprobs = np.where(probs > floor, spec.deriv_matrix(beta), 0.0)
    d_alpha = (ddeltas * np.log(clipped)).sum(axis=0)
    d_beta = (deltas * dprobs / clipped).sum(axis=0)
    return d_alpha, d_beta


@dataclass(frozen=True)
class DiscretePath:
    """Piecewise-linear path with ``phi(0) = 0`` on the grid ``tau_j = j/T``."""

    values: np.ndarray
    K: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("path needs at least two grid values")
        if values[0] != 0.0:
            raise ValueError("path must start at 0")
        vel = np.diff(values) * (values.size - 1)
        tol = 1e-9 * max(1, self.K)
        if (vel < -tol).any() or (vel > self.K + tol).any():
            raise ValueError("path is not %d-Lipschitz nondecreasing" % self.K)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_velocities(cls, velocities, K):
        v = np.asarray(velocities, dtype=float)
        T = len(v)
        return cls(np.concatenate([[0.0], np.cumsum(v) / T]), K)

    @classmethod
    def straight(cls, slope, T, K):
        return cls.from_velocities(np.full(T, float(slope)), K)

    @property
    def T(self):
        return len(self.values) - 1

    @property
    def tau(self):
        return np.arange(self.T + 1) / self.T

    @property
    def velocities(self):
        v = np.diff(self.values) * self.T
        # roundoff near an integer node would leave delta_k(v) ~ 1e-16 times log 0
        nodes = np.round(v)
        return np.where(np.abs(v - nodes) <= NODE_SNAP, nodes, v)

    @property
    def averages(self):
        """``psi_j = phi_j / tau_j`` for j >= 1; ``psi_0`` is the initial velocity."""
        psi = np.empty(self.T + 1)
        psi[0] = self.velocities[0]
        psi[1:] = self.values[1:] / self.tau[1:]
        return psi

    @property
    def midpoint_averages(self):
        """``psi`` at cell midpoints; the first cell gives ``v_0`` exactly."""
        return midpoint_averages(self.velocities)


def midpoint_averages(velocities):
    """Average ``phi/tau`` at cell midpoints for velocity arrays ``(..., T)``."""
    v = np.asarray(velocities, dtype=float)
    T = v.shape[-1]
    before = np.cumsum(v, axis=-1) - v
    return np.clip((before + 0.5 * v) / (np.arange(T) + 0.5), 0.0, None)


def embed_path(history):
    """Map a market history to ``phi_j = M_j / N`` on the grid ``j/N``."""
    return DiscretePath(history.totals / history.N, history.K)


def scaled_action(spec, path, floor=0.0):
    """Midpoint quadrature of ``L(phi'(tau), psi(tau))`` over ``[0, 1]``."""
    cells = lagrangian_array(spec, path.velocities,
                             np.minimum(path.midpoint_averages, spec.K), floor)
    return _extended_mean(cells)


def _extended_mean(cells):
    if np.isnan(cells).any():
        return INDETERMINATE
    pos, neg = np.isposinf(cells).any(), np.isneginf(cells).any()
    if pos and neg:
        return INDETERMINATE
    if neg:
        return -math.inf
    if pos:
        return math.inf
    return float(cells.sum() / len(cells))


def batch_scaled_action(spec, velocities, floor=0.0):
    """Scaled actions of a ``(runs, T)`` array of velocities (nan if indeterminate)."""
    v = np.atleast_2d(velocities)
    psi = np.minimum(midpoint_averages(v), spec.K)
    cells = lagrangian_array(spec, v, psi, floor)
    with np.errstate(invalid="ignore"):
        return cells.mean(axis=1)


def path_distance(p1, p2):
    """Sup distance between two paths on the same grid."""
    if p1.T != p2.T:
        raise ValueError("grid mismatch: T=%d vs T=%d" % (p1.T, p2.T))
    return float(np.max(np.abs(p1.values - p2.values)))

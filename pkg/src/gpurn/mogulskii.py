"""Rate function of i.i.d. steps uniform on {0, ..., K}.

``zeta0`` is the log moment-generating function of the uniform step,
``L0`` its Legendre transform. The tilt ``beta*`` solving
``dzeta0(beta*) = alpha`` is found in beta-space, where the removable
singularity at ``xi = exp(beta) = 1`` is handled by a series branch.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._roots import increasing_root

SERIES_RADIUS = 1e-4
# below this |beta| the closed forms cancel badly; sum over the K+1 atoms instead
DIRECT_RADIUS = 1.0


def _cumulants(K):
    # cumulants 2 and 4 of the uniform law on {0..K}; odd ones beyond the mean vanish
    n = K + 1
    return K / 2.0, (n * n - 1) / 12.0, -(n ** 4 - 1) / 120.0


def _log1mexp(x):
    """``log(1 - exp(x))`` for ``x < 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > -0.693, np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


def _direct(b, K):
    """``(zeta0, dzeta0, d2zeta0)`` by summing the tilted weights; for moderate ``|b|``."""
    k = np.arange(K + 1, dtype=float)
    w = np.exp(np.multiply.outer(b, k))
    s0 = w.sum(axis=-1)
    mean = (w * k).sum(axis=-1) / s0
    var = (w * k * k).sum(axis=-1) / s0 - mean ** 2
    return np.log(s0 / (K + 1)), mean, var


def zeta0(beta, K):
    """``log E0 exp(beta * sigma)`` for sigma uniform on ``{0..K}``."""
    b = np.asarray(beta, dtype=float)
    k1, k2, k4 = _cumulants(K)
    small = np.abs(b) < SERIES_RADIUS
    bs = np.where(small, 1.0, b)
    # the literal formula, rewritten for beta > 0 so nothing overflows
    neg = _log1mexp(np.minimum((K + 1) * bs, -1e-300)) - _log1mexp(np.minimum(bs, -1e-300))
    pos = (K * bs + _log1mexp(np.minimum(-(K + 1) * bs, -1e-300))
           - _log1mexp(np.minimum(-bs, -1e-300)))
    closed = np.where(bs < 0, neg, pos) - math.log(K + 1)
    series = k1 * b + k2 * b ** 2 / 2 + k4 * b ** 4 / 24
    mid = np.where(np.abs(b) < DIRECT_RADIUS, b, 0.0)
    out = np.where(np.abs(b) < DIRECT_RADIUS, _direct(mid, K)[0], closed)
    out = np.where(small, series, out)
    return float(out) if out.ndim == 0 else out


def dzeta0(beta, K):
    """``d zeta0 / d beta``, the mean of the exponentially tilted uniform step."""
    out = _dzeta0(np.asarray(beta, dtype=float), K)[0]
    return float(out) if out.ndim == 0 else out


def _dzeta0(b, K):
    """Return ``(dzeta0, d2zeta0)`` for an array ``b``."""
    k1, k2, k4 = _cumulants(K)
    small = np.abs(b) < SERIES_RADIUS
    bs = np.where(small, 1.0, b)
    with np.errstate(over="ignore", divide="ignore"):
        # e^x / (1 - e^x) == 1 / expm1(-x)
        d1 = 1.0 / np.expm1(-bs) - (K + 1) / np.expm1(-(K + 1) * bs)
        d2 = (0.25 / np.sinh(bs / 2) ** 2
              - (K + 1) ** 2 * 0.25 / np.sinh((K + 1) * bs / 2) ** 2)
    near = np.abs(b) < DIRECT_RADIUS
    _, m1, m2 = _direct(np.where(near, b, 0.0), K)
    d1 = np.where(near, m1, d1)
    d2 = np.where(near, m2, d2)
    d1 = np.where(small, k1 + k2 * b + k4 * b ** 3 / 6, d1)
    d2 = np.where(small, k2 + k4 * b ** 2 / 2, d2)
    return d1, d2


def beta_star(alpha, K):
    """Solve ``dzeta0(beta) = alpha`` for ``0 < alpha < K`` (array-friendly)."""
    a = np.asarray(alpha, dtype=float)
    if ((a <= 0) | (a >= K) | np.isnan(a)).any():
        raise ValueError("alpha must lie strictly inside (0, %d)" % K)
    # exact for K = 1 and asymptotically right at both ends for larger K
    guess = np.log(a) - np.log(K - a)
    out = increasing_root(lambda b: _dzeta0(b, K), a, scale=4.0, x0=guess, xtol=1e-12)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class XiSolution:
    alpha: float
    K: int
    xi: float
    beta_star: float
    residual: float


def xi_residual(xi, alpha, K):
    """``|xi/(1-xi) - (K+1) xi^(K+1)/(1-xi^(K+1)) - alpha|``, limit form at ``xi = 1``."""
    return abs(dzeta0(math.log(xi), K) - alpha)


def xi_invert(alpha, K):
    """Tilt ``xi = exp(beta*)`` solving the implicit stationarity equation."""
    if not 0.0 < alpha < K:
        raise ValueError("alpha must lie strictly inside (0, %d), got %r" % (K, alpha))
    b = beta_star(alpha, K)
    xi = math.exp(b)
    return XiSolution(float(alpha), K, xi, b, abs(dzeta0(b, K) - alpha))


def mogulskii_lagrangian(alpha, K, shifted=False):
    """``L0(alpha) = alpha beta* - zeta0(beta*)`` (minus ``log(K+1)`` if shifted).

    The endpoints take their limits ``L0(0) = L0(K) = log(K+1)``.
    """
    a = np.asarray(alpha, dtype=float)
    if ((a < 0) | (a > K) | np.isnan(a)).any():
        raise ValueError("alpha outside [0, %d]" % K)
    edge = (a <= 0) | (a >= K)
    inner = np.where(edge, K / 2.0, a)
    b = np.asarray(beta_star(inner, K))
    out = np.where(edge, math.log(K + 1), inner * b - zeta0(b, K))
    if shifted:
        out = out - math.log(K + 1)
    return float(out) if out.ndim == 0 else out


def mogulskii_slope(alpha, K, margin=1e-12):
    """``dL0/dalpha = beta*(alpha)``, with ``alpha`` clipped off the endpoints."""
    a = np.clip(np.asarray(alpha, dtype=float), K * margin, K * (1 - margin))
    return beta_star(a, K)


def iid_action(path, K, shifted=False):
    """Midpoint quadrature of ``L0(phi'(tau))`` over the cells of ``path``."""
    v = np.clip(path.velocities, 0.0, K)
    return float(np.mean(mogulskii_lagrangian(v, K, shifted)))


def mogulskii_table(K, grid=513):
    """Rows ``(alpha, xi, beta_star, L0_unshifted, L0_shifted)`` on the open grid."""
    rows = []
    for a in np.linspace(0.0, K, grid)[1:-1]:
        sol = xi_invert(float(a), K)
        L = mogulskii_lagrangian(float(a), K)
        rows.append((float(a), sol.xi, sol.beta_star, L, L - math.log(K + 1)))
    return rows

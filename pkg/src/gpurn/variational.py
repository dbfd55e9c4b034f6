"""Candidate rate functional and the endpoint-event variational solver.

The rate of a path is ``I(phi) = Phi0(phi) - Phi(phi)`` in the shifted
gauge, i.e. the integral of the local rate
``R(alpha, beta) = L0_shifted(alpha) - L(alpha, beta)``. The entropy
density of an endpoint event is ``-min I`` over paths ending in it.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._roots import bisect, increasing_root
from .kron_embedding import (
    INDETERMINATE,
    DiscretePath,
    as_extended,
    lagrangian_array,
    lagrangian_partials,
    midpoint_averages,
)
from .mogulskii import mogulskii_lagrangian, mogulskii_slope
from .urn_model import fixed_points, mean_step


class InfeasibleEventError(ValueError):
    """The endpoint interval does not meet ``[0, K]``."""


class DegenerateSpecError(ValueError):
    """The spec has urn functions below the optimizer's probability floor."""


@dataclass(frozen=True)
class EndpointEvent:
    """Final-average interval ``psi(1) in [lo, hi]``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError("event needs lo <= hi, got [%r, %r]" % (self.lo, self.hi))
        if self.lo < 0:
            raise ValueError("event lower end must be >= 0")

    def contains(self, psi, atol=0.0):
        return self.lo - atol <= psi <= self.hi + atol


# --- local rates -------------------------------------------------------------

def local_rate_array(spec, alpha, beta, floor=0.0):
    """Vectorized ``L0_shifted(alpha) - L(alpha, beta)`` (nan = indeterminate)."""
    alpha, beta = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float))
    lag = lagrangian_array(spec, alpha, beta, floor)
    return mogulskii_lagrangian(alpha, spec.K, shifted=True) - lag


def local_rate(spec, alpha, beta, floor=0.0):
    """Candidate local rate at velocity ``alpha`` and average ``beta``."""
    return as_extended(local_rate_array(spec, alpha, beta, floor))


def cramer_local_rate(spec, alpha, beta):
    """Cramer transform of the step law at fixed average ``beta``.

    ``sup_lambda {alpha*lambda - log sum_k pi_k(beta) e^(k*lambda)}``,
    computed independently of the candidate Lagrangian.
    """
    probs = spec.prob_matrix(beta)
    ks = np.arange(spec.K + 1)
    support = ks[probs > 0]
    kmin, kmax = support.min(), support.max()
    if alpha < kmin or alpha > kmax:
        return math.inf
    if kmin == kmax:
        return 0.0
    if alpha == kmin:
        return float(-math.log(probs[kmin]))
    if alpha == kmax:
        return float(-math.log(probs[kmax]))
    logp = np.log(probs[support])

    def tilted(lam):
        lam = np.asarray(lam, dtype=float)[..., None]
        w = logp + lam * support
        w = np.exp(w - w.max(axis=-1, keepdims=True))
        w = w / w.sum(axis=-1, keepdims=True)
        mean = (w * support).sum(axis=-1)
        var = (w * (support - mean[..., None]) ** 2).sum(axis=-1)
        return mean, var

    lam = float(increasing_root(tilted, alpha, scale=4.0, xtol=1e-12))
    w = logp + lam * support
    top = w.max()
    return float(max(alpha * lam - (top + math.log(np.exp(w - top).sum())), 0.0))


def _cells(path_or_velocities):
    if isinstance(path_or_velocities, DiscretePath):
        return path_or_velocities.velocities
    return np.asarray(path_or_velocities, dtype=float)


def rate_profile(spec, path, floor=0.0, shifted=True):
    """Per-cell ``(velocity, psi_mid, local_rate)`` arrays for a path.

    With ``shifted=False`` the cells hold ``L0_unshifted - L``, which exceeds
    the shifted rate by the constant ``log(K+1)``.
    """
    v = np.clip(_cells(path), 0.0, spec.K)
    psi = np.minimum(midpoint_averages(v), spec.K)
    rates = local_rate_array(spec, v, psi, floor)
    if not shifted:
        rates = rates + math.log(spec.K + 1)
    return v, psi, rates


def rate_functional(spec, path, floor=0.0):
    """``I(phi) = sum_j (1/T) R(v_j, psi_{j+1/2})``; may be infinite."""
    _, _, rates = rate_profile(spec, path, floor)
    if np.isnan(rates).any():
        return INDETERMINATE
    pos, neg = np.isposinf(rates).any(), np.isneginf(rates).any()
    if pos and neg:
        return INDETERMINATE
    if pos:
        return math.inf
    if neg:
        return -math.inf
    return float(rates.mean())


def cramer_profile(spec, path):
    """Per-cell Cramer local rates along a path."""
    v = np.clip(_cells(path), 0.0, spec.K)
    psi = np.minimum(midpoint_averages(v), spec.K)
    return np.array([cramer_local_rate(spec, float(a), float(b)) for a, b in zip(v, psi)])


# --- zero-cost flow ------------------------------------------------------------

@dataclass
class FlowResult:
    path: DiscretePath
    psi: np.ndarray
    local_rates: np.ndarray
    initial_velocities: list


def zero_cost_flow(spec, T, floor=0.0):
    """Integrate ``v_j = mean_step(psi_{j+1/2})`` forward from ``phi(0) = 0``.

    Each cell solves its own implicit midpoint equation by bisection; in the
    first cell this is ``v = mean_step(v)``, whose smallest root is used
    (all roots are returned in ``initial_velocities``).
    """
    K = spec.K
    report = fixed_points(spec)
    starts = sorted(report.roots + report.tangential
                    + [a for a, _ in report.isolation_violations])
    if not starts:
        raise ValueError("mean_step has no fixed point on [0, K]")
    v = np.empty(T)
    v[0] = starts[0]
    total = v[0]
    for j in range(1, T):
        tau_mid = j + 0.5

        def g(x, base=total, tm=tau_mid):
            return mean_step(spec, min((base + 0.5 * x) / tm, K)) - x

        v[j] = bisect(g, 0.0, float(K), xtol=1e-15)
        total += v[j]
    path = DiscretePath.from_velocities(v, K)
    _, psi, rates = rate_profile(spec, v, floor)
    return FlowResult(path, psi, rates, starts)


# --- endpoint optimizer --------------------------------------------------------

@dataclass
class OptimizerOptions:
    restarts: int = 8
    floor: float = 1e-9
    tol_obj: float = 1e-9
    tol_agree: float = 1e-4
    max_iter: int = 3000
    polish_sweeps: int = 1
    seed: int = 0
    threads: int = 1
    gradient: str = "analytic"
    shifted: bool = True
    allow_degenerate: bool = False


@dataclass
class RateResult:
    event: EndpointEvent
    entropy_density: float
    optimal_path: DiscretePath
    iterations: int
    converged: bool
    restarts_agreement: float
    oracle_gap: float = None
    restart_values: list = field(default_factory=list)

    def to_dict(self):
        p = self.optimal_path
        return {
            "event": [self.event.lo, self.event.hi],
            "entropy_density": self.entropy_density,
            "rate": -self.entropy_density,
            "iterations": self.iterations,
            "converged": self.converged,
            "restarts_agreement": self.restarts_agreement,
            "oracle_gap": self.oracle_gap,
            "restart_values": list(self.restart_values),
            "K": p.K,
            "T": p.T,
            "optimal_path": [float(x) for x in p.values],
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            event=EndpointEvent(*doc["event"]),
            entropy_density=doc["entropy_density"],
            optimal_path=DiscretePath(np.array(doc["optimal_path"]), doc["K"]),
            iterations=doc["iterations"],
            converged=doc["converged"],
            restarts_agreement=doc["restarts_agreement"],
            oracle_gap=doc.get("oracle_gap"),
            restart_values=doc.get("restart_values", []),
        )


class _Objective:
    """Gauge-free part of ``I``: mean of ``L0_unshifted(v) - L(v, psi)``.

    The constant ``log(K+1)`` never enters the search; it is booked once
    when the result is reported.
    """

    def __init__(self, spec, T, floor, gradient):
        self.spec = spec
        self.T = T
        self.floor = floor
        self.gradient = gradient
        self.h = 1e-6 * spec.K
        self.evals = 0

    def value(self, v):
        K = self.spec.K
        psi = np.minimum(midpoint_averages(v), K)
        cells = mogulskii_lagrangian(v, K) - lagrangian_array(self.spec, v, psi, self.floor)
        self.evals += 1
        return float(cells.mean())

    def batch_value(self, V):
        K = self.spec.K
        V = np.clip(V, 0.0, K)
        psi = np.minimum(midpoint_averages(V), K)
        cells = mogulskii_lagrangian(V, K) - lagrangian_array(self.spec, V, psi, self.floor)
        return cells.mean(axis=-1)

    def grad(self, v):
        if self.gradient == "fd":
            return self.fd_grad(v)
        K, T = self.spec.K, self.T
        psi = np.minimum(midpoint_averages(v), K)
        d_alpha, d_beta = lagrangian_partials(self.spec, v, psi, self.floor)
        G = d_beta / (np.arange(T) + 0.5)
        tail = np.cumsum(G[::-1])[::-1] - 0.5 * G
        return (mogulskii_slope(v, K) - d_alpha - tail) / T

    def fd_grad(self, v):
        """Central differences with step ``1e-6 * K``."""
        T, h = self.T, self.h
        eye = np.eye(T) * h
        up = self.batch_value(v[None, :] + eye)
        down = self.batch_value(v[None, :] - eye)
        return (up - down) / (2 * h)


def project(v, lo, hi, K):
    """Euclidean projection onto ``[0, K]^T`` intersected with ``lo <= mean <= hi``.

    The projection is ``clip(v - mu)`` for the scalar shift ``mu`` that
    restores the mean constraint (``mu = 0`` if the clip already satisfies it).
    """
    x = np.clip(v, 0.0, K)
    m = x.mean()
    if lo <= m <= hi:
        return x
    target = lo if m < lo else hi

    def excess(mu):
        return np.clip(v - mu, 0.0, K).mean() - target

    span = float(np.max(np.abs(v))) + K + 1.0
    mu = bisect(excess, -span, span, xtol=1e-15)
    x = np.clip(v - mu, 0.0, K)
    # clean up the last ulp so the constraint holds exactly
    m = x.mean()
    if m < lo or m > hi:
        free = (x > 0) & (x < K)
        if free.any():
            x[free] += (target - m) * len(x) / free.sum()
            x = np.clip(x, 0.0, K)
    return x


def _projected_gradient(obj, v0, lo, hi, opts):
    K = obj.spec.K
    v = project(v0, lo, hi, K)
    f = obj.value(v)
    g = obj.grad(v)
    step = obj.T / (K + 1.0)
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        a = step
        while True:
            v_new = project(v - a * g, lo, hi, K)
            d = v_new - v
            f_new = obj.value(v_new)
            if f_new <= f + 1e-4 * float(g @ d) or a < 1e-12:
                break
            a *= 0.5
        improvement = f - f_new
        if f_new > f:
            converged = True
            break
        g_new = obj.grad(v_new)
        s, y = d, g_new - g
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else obj.T * 10.0
        step = min(max(step, 1e-8), 1e6 * obj.T)
        v, f, g = v_new, f_new, g_new
        if improvement < opts.tol_obj:
            converged = True
            break
    return v, f, it, converged


def _polish(obj, v, f, lo, hi, sweeps):
    """Coordinate descent on single coordinates, or on adjacent pairs when
    the mean constraint is active."""
    K, T = obj.spec.K, obj.T
    for _ in range(sweeps):
        g = obj.grad(v)
        mean = v.mean()
        pinned = mean <= lo + 1e-14 or mean >= hi - 1e-14
        for i in range(T - 1 if pinned else T):
            if pinned:
                gd = g[i] - g[i + 1]
            else:
                gd = g[i]
            if abs(gd) * T < 1e-8:
                continue
            t = -gd * T
            for _ in range(8):
                trial = v.copy()
                trial[i] += t
                if pinned:
                    trial[i + 1] -= t
                if trial.min() >= 0 and trial.max() <= K and lo - 1e-15 <= trial.mean() <= hi + 1e-15:
                    ft = obj.value(trial)
                    if ft < f:
                        v, f = trial, ft
                        g = obj.grad(v)
                        break
                t *= 0.5
    return v, f


def _initial_velocities(spec, lo, hi, T, opts):
    n = max(opts.restarts, 1)
    starts = []
    slopes = np.linspace(lo, hi, max(n - 1, 1))
    for i in range(n - 1 if n > 1 else 1):
        v = np.full(T, slopes[i % len(slopes)])
        if i > 0:
            rng = np.random.default_rng([opts.seed, i])
            v = v + 0.1 * spec.K * rng.standard_normal(T)
        starts.append(v)
    if n > 1:
        try:
            starts.append(zero_cost_flow(spec, T, opts.floor).path.velocities)
        except ValueError:
            starts.append(np.full(T, 0.5 * (lo + hi)))
    return starts


def _check_smooth(spec, floor):
    probs = spec.prob_matrix(spec.grid())
    return floor > 0 and probs.min() >= floor


def optimize_endpoint(spec, event, T=200, options=None):
    """Minimize the rate over paths whose final average lies in ``event``.

    Velocities ``v in [0, K]^T`` with ``lo <= mean(v) <= hi`` are optimized
    by projected gradient (Barzilai-Borwein step, halved until Armijo
    decrease) from several restarts, each followed by a coordinate-descent
    polish. The best restart wins, ties broken by restart index.
    """
    opts = options or OptimizerOptions()
    K = spec.K
    if not opts.allow_degenerate and not _check_smooth(spec, opts.floor):
        raise DegenerateSpecError(
            "urn functions drop below floor=%g; pass allow_degenerate=True "
            "to accept infinite plateaus" % opts.floor)
    lo, hi = max(event.lo, 0.0), min(event.hi, float(K))
    if lo > hi:
        raise InfeasibleEventError("event [%g, %g] misses [0, %d]" % (event.lo, event.hi, K))
    if lo == hi:
        lo, hi = max(lo - 0.5 / T, 0.0), min(hi + 0.5 / T, float(K))

    starts = _initial_velocities(spec, lo, hi, T, opts)

    def run(v0):
        obj = _Objective(spec, T, opts.floor, opts.gradient)
        v, f, it, conv = _projected_gradient(obj, v0, lo, hi, opts)
        v, f = _polish(obj, v, f, lo, hi, opts.polish_sweeps)
        return v, f, it, conv

    if opts.threads > 1:
        with ThreadPoolExecutor(opts.threads) as pool:
            runs = list(pool.map(run, starts))
    else:
        runs = [run(v0) for v0 in starts]

    values = [r[1] for r in runs]
    best = int(np.argmin(values))
    v, f, it, conv = runs[best]
    spread = float(max(values) - min(values))

    c = math.log(K + 1)
    if opts.shifted:
        # L0 carries the -log(K+1) gauge
        entropy = -(f - c)
    else:
        # the change-of-measure constant sits on the entropy side
        entropy = c - f
    rate = -entropy
    path = DiscretePath.from_velocities(v, K)
    cramer = cramer_profile(spec, v)
    oracle_gap = float(rate - cramer.mean()) if np.isfinite(cramer).all() else None
    return RateResult(
        event=EndpointEvent(lo, hi),
        entropy_density=entropy,
        optimal_path=path,
        iterations=int(sum(r[2] for r in runs)),
        converged=bool(conv and spread <= opts.tol_agree),
        restarts_agreement=spread,
        oracle_gap=oracle_gap,
        restart_values=[float(x - c) for x in values],
    )

"""Generalized HLS urn with increments in {0, ..., K}.

At each step the increment ``k`` is drawn with probability ``pi_k(psi)``,
where ``psi`` is the running average of past increments. The urn vector is
given by ``K`` curves ``pi_1 .. pi_K`` on ``[0, K]``; ``pi_0`` is their
complement.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._roots import bisect

PROB_TOL = 1e-12


class SpecValidationError(ValueError):
    """Raised when an urn spec is structurally invalid or not stochastic."""


class PolyCurve:
    """Polynomial ``c0 + c1*a + c2*a**2 + ...`` (ascending coefficients)."""

    kind = "poly"

    def __init__(self, coeffs):
        coeffs = [float(c) for c in coeffs]
        if not coeffs:
            raise SpecValidationError("polynomial needs at least one coefficient")
        self.coeffs = tuple(coeffs)
        self._poly = np.polynomial.Polynomial(self.coeffs)
        self._deriv = self._poly.deriv()

    def __call__(self, alpha):
        return self._poly(np.asarray(alpha, dtype=float))

    def deriv(self, alpha):
        return self._deriv(np.asarray(alpha, dtype=float))

    def to_dict(self):
        return {"kind": "poly", "coeffs": list(self.coeffs)}

    def __repr__(self):
        return "PolyCurve(%r)" % (list(self.coeffs),)

    def __eq__(self, other):
        return isinstance(other, PolyCurve) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(("poly", self.coeffs))


class PwlCurve:
    """Piecewise-linear curve through ``(alpha, value)`` knots."""

    kind = "pwl"

    def __init__(self, knots):
        knots = [(float(a), float(v)) for a, v in knots]
        if len(knots) < 2:
            raise SpecValidationError("piecewise-linear curve needs >= 2 knots")
        xs = [a for a, _ in knots]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise SpecValidationError("knot abscissae must be strictly increasing")
        self.knots = tuple(knots)
        self._x = np.array(xs)
        self._y = np.array([v for _, v in knots])
        self._slopes = np.diff(self._y) / np.diff(self._x)

    def __call__(self, alpha):
        return np.interp(np.asarray(alpha, dtype=float), self._x, self._y)

    def deriv(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        idx = np.clip(np.searchsorted(self._x, alpha, side="right") - 1,
                      0, len(self._slopes) - 1)
        return self._slopes[idx]

    def to_dict(self):
        return {"kind": "pwl", "knots": [list(k) for k in self.knots]}

    def __repr__(self):
        return "PwlCurve(%r)" % (list(self.knots),)

    def __eq__(self, other):
        return isinstance(other, PwlCurve) and self.knots == other.knots

    def __hash__(self):
        return hash(("pwl", self.knots))


def make_curve(desc):
    """Build a curve from its JSON descriptor."""
    kind = desc.get("kind")
    if kind == "poly":
        return PolyCurve(desc["coeffs"])
    if kind == "pwl":
        return PwlCurve(desc["knots"])
    raise SpecValidationError("unknown curve kind %r" % (kind,))


@dataclass(frozen=True)
class UrnSpec:
    """Capacity ``K`` and the urn functions ``pi_1 .. pi_K``.

    ``components[k-1]`` is ``pi_k``. ``psi_init`` is the average used to draw
    the very first increment; it defaults to ``K/2``.
    """

    K: int
    components: tuple
    psi_init: float = None
    validation_grid_size: int = 1024

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise SpecValidationError("K must be a positive integer, got %r" % (self.K,))
        object.__setattr__(self, "K", int(self.K))
        comps = tuple(c if callable(c) else make_curve(c) for c in self.components)
        if len(comps) != self.K:
            raise SpecValidationError(
                "expected %d urn functions, got %d" % (self.K, len(comps)))
        object.__setattr__(self, "components", comps)
        psi = self.K / 2 if self.psi_init is None else float(self.psi_init)
        if not 0.0 <= psi <= self.K:
            raise SpecValidationError("psi_init=%r outside [0, %d]" % (psi, self.K))
        object.__setattr__(self, "psi_init", psi)
        if self.validation_grid_size < 2:
            raise SpecValidationError("validation_grid_size must be >= 2")

    @classmethod
    def constant(cls, probs, **kwargs):
        """Spec with constant ``pi_k = probs[k-1]`` for ``k = 1..K``."""
        return cls(len(probs), [PolyCurve([p]) for p in probs], **kwargs)

    @classmethod
    def uniform(cls, K, **kwargs):
        return cls.constant([1.0 / (K + 1)] * K, **kwargs)

    def grid(self, size=None):
        return np.linspace(0.0, self.K, size or self.validation_grid_size)

    def raw_matrix(self, alpha):
        """Unclamped ``(K+1, ...)`` array of ``pi_k(alpha)`` for k = 0..K."""
        alpha = np.asarray(alpha, dtype=float)
        rows = [np.broadcast_to(c(alpha), alpha.shape) for c in self.components]
        upper = np.stack(rows) if rows else np.zeros((0,) + alpha.shape)
        return np.concatenate([(1.0 - upper.sum(axis=0))[None], upper])

    def prob_matrix(self, alpha):
        """``(K+1, ...)`` array of probabilities, clamped within tolerance."""
        raw = self.raw_matrix(alpha)
        if (raw < -PROB_TOL).any() or (raw > 1.0 + PROB_TOL).any():
            raise SpecValidationError("urn function value outside [0, 1]")
        return np.clip(raw, 0.0, 1.0)

    def deriv_matrix(self, alpha):
        """``(K+1, ...)`` array of ``d pi_k / d alpha``."""
        alpha = np.asarray(alpha, dtype=float)
        rows = [np.broadcast_to(c.deriv(alpha), alpha.shape) for c in self.components]
        upper = np.stack(rows)
        return np.concatenate([-upper.sum(axis=0)[None], upper])

    def to_dict(self):
        return {
            "K": self.K,
            "psi_init": self.psi_init,
            "pi": [c.to_dict() for c in self.components],
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(doc["K"], [make_curve(d) for d in doc["pi"]],
                       psi_init=doc.get("psi_init"))
        except (KeyError, TypeError) as exc:
            raise SpecValidationError("malformed spec document: %s" % exc) from exc


@dataclass(frozen=True)
class Violation:
    k: int
    alpha: float
    value: float
    reason: str


def validate_spec(spec):
    """Check the stochasticity constraints on the validation grid.

    Returns a list of :class:`Violation`; empty means the spec is valid.
    """
    grid = spec.grid()
    raw = spec.raw_matrix(grid)
    report = []
    for k in range(1, spec.K + 1):
        for a, v in zip(grid, raw[k]):
            if v < -PROB_TOL:
                report.append(Violation(k, float(a), float(v), "negative"))
            elif v > 1.0 + PROB_TOL:
                report.append(Violation(k, float(a), float(v), "exceeds 1"))
    total = 1.0 - raw[0]
    for a, s in zip(grid, total):
        if s > 1.0 + PROB_TOL:
            report.append(Violation(0, float(a), float(s), "sum of pi_k exceeds 1"))
    return report


def _check_alpha(spec, alpha):
    a = np.asarray(alpha, dtype=float)
    if (a < 0).any() or (a > spec.K).any() or np.isnan(a).any():
        raise ValueError("alpha outside [0, %d]" % spec.K)


def eval_pi(spec, k, alpha):
    """``pi_k(alpha)``; ``k = 0`` gives the complement ``1 - sum pi_k``."""
    if not 0 <= k <= spec.K:
        raise ValueError("k=%r outside {0..%d}" % (k, spec.K))
    _check_alpha(spec, alpha)
    value = spec.prob_matrix(alpha)[k]
    return float(value) if np.ndim(value) == 0 else value


def mean_step(spec, alpha):
    """Expected increment ``sum_k k * pi_k(alpha)``."""
    _check_alpha(spec, alpha)
    ks = np.arange(spec.K + 1).reshape((-1,) + (1,) * np.ndim(alpha))
    value = (ks * spec.prob_matrix(alpha)).sum(axis=0)
    return float(value) if np.ndim(value) == 0 else value


@dataclass
class FixedPointReport:
    """Zeros of ``mean_step(alpha) - alpha`` on ``[0, K]``."""

    roots: list = field(default_factory=list)
    tangential: list = field(default_factory=list)
    isolation_violations: list = field(default_factory=list)

    @property
    def isolated(self):
        return not self.isolation_violations


def fixed_points(spec, grid_size=2049, tol=1e-10):
    """Locate the convergence set ``{alpha : mean_step(alpha) = alpha}``.

    Sign changes of ``mean_step - id`` on the grid are refined by bisection.
    Grid points with ``|mean_step - id| < tol`` and no sign change are
    reported as tangential (unverified); runs of three or more such points
    are reported as a violation of the isolated-roots assumption.
    """
    grid = np.linspace(0.0, spec.K, grid_size)
    g = mean_step(spec, grid) - grid
    near = np.abs(g) < tol
    report = FixedPointReport()

    def gfun(a):
        return mean_step(spec, a) - a

    i = 0
    n = len(grid)
    while i < n:
        if near[i]:
            j = i
            while j + 1 < n and near[j + 1]:
                j += 1
            if j - i + 1 >= 3:
                report.isolation_violations.append((float(grid[i]), float(grid[j])))
            else:
                left = g[i - 1] if i > 0 else None
                right = g[j + 1] if j + 1 < n else None
                center = float(grid[i + np.argmin(np.abs(g[i:j + 1]))])
                if left is None or right is None or np.sign(left) != np.sign(right):
                    report.roots.append(center)
                else:
                    report.tangential.append(center)
            i = j + 1
            continue
        if i + 1 < n and not near[i + 1] and np.sign(g[i]) != np.sign(g[i + 1]):
            report.roots.append(float(bisect(gfun, grid[i], grid[i + 1])))
        i += 1
    return report


@dataclass(frozen=True)
class MarketHistory:
    """Increment sequence ``sigma_1 .. sigma_N`` in ``{0..K}``."""

    steps: np.ndarray
    K: int
    psi_init: float
    seed: int = None

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.int64)
        if steps.ndim != 1 or steps.size == 0:
            raise ValueError("history must be a nonempty 1-d sequence")
        if (steps < 0).any() or (steps > self.K).any():
            raise ValueError("increments must lie in {0..%d}" % self.K)
        steps.setflags(write=False)
        object.__setattr__(self, "steps", steps)

    @property
    def N(self):
        return len(self.steps)

    @property
    def totals(self):
        """Running sums ``M_0 = 0, M_1, ..., M_N``."""
        return np.concatenate([[0], np.cumsum(self.steps)])

    @property
    def averages(self):
        """``psi_0 = psi_init, psi_1, ..., psi_N``."""
        n = np.arange(1, self.N + 1)
        return np.concatenate([[self.psi_init], self.totals[1:] / n])


def _prev_averages(steps, psi_init):
    """``psi_{n-1}`` for each step n of a (runs, N) array of histories."""
    steps = np.atleast_2d(steps)
    totals = np.cumsum(steps, axis=1)[:, :-1]
    n = np.arange(1, steps.shape[1])
    prev = np.empty(steps.shape, dtype=float)
    prev[:, 0] = psi_init
    prev[:, 1:] = totals / n
    return prev


def step_weight(spec, k, psi_prev):
    """Probability of increment ``k`` given the previous average."""
    return eval_pi(spec, k, psi_prev)


def path_weight(spec, history):
    """Probability of the whole history; step n is weighted by ``pi(psi_{n-1})``."""
    w = 1.0
    psi = history.psi_init
    total = 0
    for n, s in enumerate(history.steps, start=1):
        w *= step_weight(spec, int(s), psi)
        total += int(s)
        psi = total / n
    return w


def action(spec, history):
    """Log-probability of the history (``-inf`` if any step is impossible)."""
    return float(batch_action(spec, history.steps[None, :], history.psi_init)[0])


def batch_action(spec, steps, psi_init=None):
    """Actions of a ``(runs, N)`` array of histories."""
    psi_init = spec.psi_init if psi_init is None else psi_init
    steps = np.atleast_2d(steps)
    probs = spec.prob_matrix(_prev_averages(steps, psi_init))
    chosen = np.take_along_axis(probs, steps[None], axis=0)[0]
    with np.errstate(divide="ignore"):
        return np.log(chosen).sum(axis=1)


def _step_cdf(spec, psi):
    probs = spec.prob_matrix(psi)
    cdf = np.cumsum(probs, axis=0)
    cdf[-1] = 1.0
    return cdf


def simulate(spec, N, psi_init=None, seed=None):
    """Draw one market history of length ``N``."""
    steps = simulate_batch(spec, N, 1, psi_init=psi_init, seed=seed)[0]
    psi_init = spec.psi_init if psi_init is None else psi_init
    return MarketHistory(steps, spec.K, psi_init, seed)


def simulate_batch(spec, N, runs, psi_init=None, seed=None, batch_size=4096, threads=1):
    """Draw ``runs`` independent histories; returns an int array ``(runs, N)``.

    Runs are split into fixed batches whose seeds are spawned from ``seed``,
    so the output does not depend on ``threads``.
    """
    if N < 1 or runs < 1:
        raise ValueError("N and runs must be >= 1")
    psi_init = spec.psi_init if psi_init is None else float(psi_init)
    _check_alpha(spec, psi_init)
    sizes = [min(batch_size, runs - i) for i in range(0, runs, batch_size)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def one(args):
        size, ss = args
        rng = np.random.default_rng(ss)
        out = np.empty((size, N), dtype=np.int64)
        total = np.zeros(size)
        psi = np.full(size, psi_init)
        for n in range(N):
            u = rng.random(size)
            cdf = _step_cdf(spec, psi)
            # a zero-probability k has an empty cdf interval and is never chosen
            k = (u[None, :] >= cdf).sum(axis=0)
            k = np.minimum(k, spec.K)
            out[:, n] = k
            total += k
            psi = total / (n + 1)
        return out

    jobs = list(zip(sizes, seeds))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(one, jobs))
    else:
        parts = [one(j) for j in jobs]
    return np.concatenate(parts, axis=0)


def exact_log_distribution(spec, N, psi_init=None):
    """``log P(M_N = m)`` for ``m = 0..K*N`` by dynamic programming on ``(n, M_n)``.

    The step law depends on the past only through ``psi_n = M_n / n``, so the
    pair ``(n, M_n)`` is a Markov state. Work in log space so that rare
    totals far in the tails do not underflow.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    psi_init = spec.psi_init if psi_init is None else float(psi_init)
    _check_alpha(spec, psi_init)
    K = spec.K
    if (K * N + 1) * (K + 1) > 5e8:
        raise MemoryError("state table too large for N=%d, K=%d" % (N, K))
    logp = np.zeros(1)
    for n in range(N):
        m = np.arange(n * K + 1)
        psi = np.full(m.shape, psi_init) if n == 0 else m / n
        with np.errstate(divide="ignore"):
            logpi = np.log(spec.prob_matrix(psi))
        new = np.full((n + 1) * K + 1, -np.inf)
        for k in range(K + 1):
            contrib = logp + logpi[k]
            new[k:k + len(m)] = np.logaddexp(new[k:k + len(m)], contrib)
        logp = new
    return logp


def exact_distribution(spec, N, psi_init=None):
    """``P(M_N = m)`` for ``m = 0..K*N``."""
    return np.exp(exact_log_distribution(spec, N, psi_init))


def enumerate_distribution(spec, N, psi_init=None):
    """Brute-force ``P(M_N = m)`` by summing path weights of all histories.

    Exponential in ``N``; meant as an oracle for small cases.
    """
    psi_init = spec.psi_init if psi_init is None else float(psi_init)
    out = np.zeros(spec.K * N + 1)
    for steps in itertools.product(range(spec.K + 1), repeat=N):
        h = MarketHistory(np.array(steps), spec.K, psi_init)
        out[sum(steps)] += path_weight(spec, h)
    return out


def event_log_probability(log_dist, N, lo, hi, atol=1e-12):
    """``log P(psi_N in [lo, hi])`` from a log distribution over ``M_N``."""
    psi = np.arange(len(log_dist)) / N
    mask = (psi >= lo - atol) & (psi <= hi + atol)
    if not mask.any():
        return -math.inf
    vals = log_dist[mask]
    top = vals.max()
    if top == -np.inf:
        return -math.inf
    return float(top + np.log(np.exp(vals - top).sum()))

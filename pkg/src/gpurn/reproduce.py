"""End-to-end reproduction checks behind ``gpurn verify``.

The K = 1 block reproduces the binary-urn closed forms and checks the
optimizer against exact enumeration. The K = 2 block checks the Lagrange
basis, the cubic for the tilt, and the L0 table; candidate-vs-exact
comparisons for K = 2 are reported as INFO lines without a verdict.
"""

import math

import numpy as np

from .kron_embedding import kron_delta, scaled_lagrangian
from .mogulskii import dzeta0, mogulskii_lagrangian, xi_invert
from .probes import degenerate_spec
from .urn_model import PolyCurve, UrnSpec, event_log_probability, exact_log_distribution
from .variational import (
    EndpointEvent,
    OptimizerOptions,
    cramer_local_rate,
    local_rate,
    optimize_endpoint,
)


def binary_entropy_rate(a, p):
    """``a log(a/p) + (1-a) log((1-a)/(1-p))`` with ``0 log 0 = 0``."""
    out = 0.0
    if a > 0:
        out += a * math.log(a / p)
    if a < 1:
        out += (1 - a) * math.log((1 - a) / (1 - p))
    return out


def extrapolated_entropy(spec, lo, hi, Ns=(500, 1000, 2000)):
    """Intercept of the least-squares line of ``(1/N) log P(psi_N in [lo, hi])`` in ``1/N``."""
    ys = [event_log_probability(exact_log_distribution(spec, N), N, lo, hi) / N for N in Ns]
    if not np.isfinite(ys).all():
        return -math.inf, ys
    slope, intercept = np.polyfit(1.0 / np.array(Ns, dtype=float), ys, 1)
    return float(intercept), ys


def cubic_xi(alpha):
    """Positive root other than 1 of ``(2-a) x^3 - x^2 - x + a``, by companion matrix."""
    roots = np.roots([2.0 - alpha, -1.0, -1.0, alpha])
    real = sorted(r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0)
    if abs(alpha - 1.0) < 1e-14:
        return 1.0
    away = [r for r in real if abs(r - 1.0) > 1e-9]
    return away[0] if away else 1.0


def _line(ok, name, detail):
    return "%s  %s  %s" % ("PASS" if ok else "FAIL", name, detail)


def run_checks(seed=0, T=200):
    """Yield ``(ok, line)`` pairs; ``ok`` is None for informational lines."""
    grid = np.linspace(0.0, 1.0, 514)[1:-1]

    # --- K = 1 ---------------------------------------------------------------
    err = max(max(abs(kron_delta(1, 1, a) - a), abs(kron_delta(1, 0, a) - (1 - a)))
              for a in grid)
    yield err <= 1e-15, _line(err <= 1e-15, "K1.kron_delta", "max err %.3e" % err)

    err = max(abs(xi_invert(a, 1).xi - a / (1 - a)) / max(1.0, a / (1 - a)) for a in grid)
    yield err <= 1e-10, _line(err <= 1e-10, "K1.xi_closed_form", "max rel err %.3e" % err)

    closed = math.log(2) + grid * np.log(grid) + (1 - grid) * np.log(1 - grid)
    err = float(np.max(np.abs(mogulskii_lagrangian(grid, 1) - closed)))
    yield err <= 1e-10, _line(err <= 1e-10, "K1.mogulskii_closed_form", "max err %.3e" % err)

    spec = UrnSpec(1, [PolyCurve([0.2, 0.6])])
    err = 0.0
    for a in grid[::32]:
        for b in grid[::32]:
            p = 0.2 + 0.6 * b
            two_term = a * math.log(p) + (1 - a) * math.log(1 - p)
            err = max(err, abs(scaled_lagrangian(spec, a, b) - two_term))
            err = max(err, abs(local_rate(spec, a, b) - binary_entropy_rate(a, p)))
    yield err <= 1e-12, _line(err <= 1e-12, "K1.lagrangian_and_relative_entropy",
                              "max err %.3e" % err)

    opts = OptimizerOptions(seed=seed)
    for label, s in (("const0.5", UrnSpec.constant([0.5])), ("affine", spec)):
        for a in (0.25, 0.7):
            ev = EndpointEvent(a, a + 1.0 / T)
            res = optimize_endpoint(s, ev, T, opts)
            exact, _ = extrapolated_entropy(s, ev.lo, ev.hi)
            gap = abs(res.entropy_density - exact)
            ok = gap <= 5e-3 and res.converged
            yield ok, _line(ok, "K1.endpoint[%s,a=%.2f]" % (label, a),
                            "optimizer %.6f exact %.6f gap %.2e" % (res.entropy_density, exact, gap))

    # --- K = 2 ---------------------------------------------------------------
    alphas = np.linspace(-1.0, 3.0, 4001)
    total = sum(kron_delta(2, k, alphas) for k in range(3))
    err = float(np.max(np.abs(total - 1.0)))
    ok = err <= 1e-12 and kron_delta(2, 2, 2.0) == 1.0
    yield ok, _line(ok, "K2.partition_of_unity", "max err %.3e" % err)

    printed = 2.0 / 2 * (1 - 2.0)
    general = kron_delta(2, 2, 2.0)
    yield None, "INFO  K2.delta2_sign  (a/2)(1-a) at a=2 gives %.1f; product formula gives %.1f" % (
        printed, general)

    k2_grid = np.linspace(0.0, 2.0, 42)[1:-1]
    err = 0.0
    worst_resid = 0.0
    for a in k2_grid:
        sol = xi_invert(float(a), 2)
        err = max(err, abs(sol.xi - cubic_xi(float(a))) / max(1.0, sol.xi))
        worst_resid = max(worst_resid, sol.residual)
    ok = err <= 1e-9 and worst_resid <= 1e-10
    yield ok, _line(ok, "K2.cubic_root",
                    "max rel err vs companion %.3e, residual %.3e" % (err, worst_resid))

    table = [(a, mogulskii_lagrangian(a, 2)) for a in np.linspace(0.0, 2.0, 9)]
    sym = max(abs(L - mogulskii_lagrangian(2.0 - a, 2)) for a, L in table)
    ok = (sym <= 1e-9 and abs(mogulskii_lagrangian(1.0, 2)) <= 1e-12
          and abs(mogulskii_lagrangian(0.0, 2) - math.log(3)) <= 1e-12)
    yield ok, _line(ok, "K2.mogulskii_table", "symmetry err %.3e" % sym)
    for a, L in table:
        yield None, "INFO  K2.L0  alpha=%.3f  L0=%.12f  L0_shifted=%.12f" % (a, L, L - math.log(3))

    slopes = max(abs(dzeta0(math.log(xi_invert(float(a), 2).xi), 2) - a) for a in k2_grid)
    yield slopes <= 1e-8, _line(slopes <= 1e-8, "K2.legendre_consistency", "max err %.3e" % slopes)

    uni = UrnSpec.uniform(2)
    N = 2000
    logd = exact_log_distribution(uni, N)
    worst = 0.0
    for frac in (0.2, 0.35, 0.5):
        a = 2 * frac
        gap = -logd[int(round(a * N))] / N - mogulskii_lagrangian(a, 2)
        worst = max(worst, gap)
    bound = 2 * math.log(N * 2) / N
    yield 0 < worst < bound, _line(0 < worst < bound, "K2.mogulskii_enumeration",
                                   "max gap %.3e < %.3e" % (worst, bound))

    d = degenerate_spec()
    lr, cr = local_rate(d, 1.0, 1.0), cramer_local_rate(d, 1.0, 1.0)
    yield None, "INFO  K2.degenerate_cramer  local_rate=%s cramer_rate=%s" % (lr, cr)

    smooth = UrnSpec(2, [PolyCurve([0.25, 0.1]), PolyCurve([0.15, 0.15])])
    ev = EndpointEvent(0.6, 0.6 + 2.0 / 100)
    res = optimize_endpoint(smooth, ev, 100, opts)
    exact, _ = extrapolated_entropy(smooth, ev.lo, ev.hi)
    yield None, ("INFO  K2.candidate_vs_exact  event=[%.2f,%.2f] candidate %.6f exact %.6f "
                 "cramer_gap %.6f" % (ev.lo, ev.hi, res.entropy_density, exact, res.oracle_gap))


def verify(seed=0, out=print):
    """Run every check, print one line each, and return True if none failed."""
    ok_all = True
    for ok, line in run_checks(seed=seed):
        out(line)
        if ok is False:
            ok_all = False
    out("OVERALL %s" % ("PASS" if ok_all else "FAIL"))
    return ok_all

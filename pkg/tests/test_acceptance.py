"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (verdicts are repeated in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

import io as _io
import itertools
import math
import time

import numpy as np
import pytest

from gpurn.kron_embedding import kron_delta, kron_matrix
from gpurn.mogulskii import beta_star, dzeta0, mogulskii_lagrangian, xi_invert
from gpurn.probes import action_convergence, cramer_discrepancy, degenerate_spec
from gpurn.reproduce import extrapolated_entropy, verify
from gpurn.urn_model import (
    MarketHistory,
    PolyCurve,
    PwlCurve,
    UrnSpec,
    exact_distribution,
    exact_log_distribution,
    path_weight,
)
from gpurn.variational import EndpointEvent, OptimizerOptions, optimize_endpoint

T = 200
EVENT_STARTS = (0.1, 0.25, 0.4, 0.6, 0.8)


def brute_force(spec, N):
    """Distribution of M_N by summing path weights over all (K+1)^N histories."""
    out = np.zeros(spec.K * N + 1)
    for steps in itertools.product(range(spec.K + 1), repeat=N):
        out[sum(steps)] += path_weight(spec, MarketHistory(np.array(steps), spec.K, spec.psi_init))
    return out


def criterion_1():
    worst = 0.0
    exact = True
    for K in range(1, 9):
        a = np.linspace(-1, K + 1, 10 ** 4)
        worst = max(worst, float(np.max(np.abs(kron_matrix(K, a).sum(axis=0) - 1))))
        for k in range(K + 1):
            for z in range(K + 1):
                exact &= kron_delta(K, k, float(z)) == (1.0 if z == k else 0.0)
    ok = worst <= 1e-12 and exact
    return ok, "partition err %.2e, integer nodes exact=%s" % (worst, exact), 1.0


def criterion_2():
    a = np.linspace(0, 1, 514)[1:-1]
    xi = np.array([xi_invert(float(x), 1).xi for x in a])
    xi_err = float(np.max(np.abs(xi - a / (1 - a))))
    closed = math.log(2) + a * np.log(a) + (1 - a) * np.log(1 - a)
    L_err = float(np.max(np.abs(mogulskii_lagrangian(a, 1) - closed)))
    ok = xi_err <= 1e-10 and L_err <= 1e-10
    return ok, "xi err %.2e, L0 err %.2e" % (xi_err, L_err), 1.0


def criterion_3():
    bad = []
    for K in range(1, 7):
        grid = np.linspace(0, K, 514)
        inner = grid[1:-1]
        leg = float(np.max(np.abs(dzeta0(beta_star(inner, K), K) - inner)))
        L = mogulskii_lagrangian(grid, K)
        conv = float(np.min(L[2:] - 2 * L[1:-1] + L[:-2]))
        sym = float(np.max(np.abs(L - L[::-1])))
        checks = {
            "legendre": leg <= 1e-8,
            "nonneg": bool(np.all(L >= 0)),
            "convex": conv >= -1e-8,
            "symmetric": sym <= 1e-9,
            "centre": abs(mogulskii_lagrangian(K / 2, K)) <= 1e-12,
            "ends": abs(L[0] - math.log(K + 1)) <= 1e-12 and abs(L[-1] - math.log(K + 1)) <= 1e-12,
        }
        bad += ["K=%d %s" % (K, name) for name, ok in checks.items() if not ok]
    return not bad, "K=1..6 on 512 interior points; failures: %s" % (bad or "none"), 5.0


def criterion_4():
    detail, ok = [], True
    for K in (1, 2):
        spec = UrnSpec.uniform(K)
        logds = {N: exact_log_distribution(spec, N) for N in (500, 1000, 2000)}
        for f in (0.2, 0.35, 0.5):
            a = f * K
            g = [-logds[N][int(round(a * N))] / N - mogulskii_lagrangian(a, K)
                 for N in (500, 1000, 2000)]
            bound = 2 * math.log(2000 * K) / 2000
            this = g[0] > g[1] > g[2] > 0 and g[2] < bound
            ok &= this
            detail.append("K%d a/K=%.2f gap@2000=%.2e" % (K, f, g[2]))
    return ok, "; ".join(detail), 30.0


def criterion_5():
    specs = [UrnSpec(1, [PolyCurve([0.2, 0.6])], psi_init=0.3),
             UrnSpec(2, [PolyCurve([0.2, 0.1, -0.03]),
                         PwlCurve([(0.0, 0.1), (0.8, 0.4), (2.0, 0.25)])], psi_init=0.3)]
    norm, diff = 0.0, 0.0
    for spec, Nmax in zip(specs, (10, 8)):
        for N in range(1, Nmax + 1):
            dp = exact_distribution(spec, N)
            norm = max(norm, abs(dp.sum() - 1))
            diff = max(diff, float(np.max(np.abs(dp - brute_force(spec, N)))))
    ok = norm <= 1e-10 and diff <= 1e-12
    return ok, "max |sum-1| %.2e, max |DP-enumeration| %.2e" % (norm, diff), 60.0


def criterion_6():
    specs = {
        "pi1=0.5": (UrnSpec.constant([0.5]), OptimizerOptions(restarts=8)),
        # pi_1(alpha) = alpha breaks the optimizer's floor precondition; the
        # explicit override is the documented way to run it anyway
        "pi1=alpha": (UrnSpec(1, [PolyCurve([0.0, 1.0])], psi_init=0.5),
                      OptimizerOptions(restarts=8, allow_degenerate=True)),
    }
    ok, detail = True, []
    for label, (spec, opts) in specs.items():
        gaps, pairs = [], []
        for a in EVENT_STARTS:
            ev = EndpointEvent(a, a + 1.0 / T)
            res = optimize_endpoint(spec, ev, T, opts)
            exact, _ = extrapolated_entropy(spec, ev.lo, ev.hi)
            gaps.append(abs(res.entropy_density - exact))
            pairs.append("a=%.2f %.5f/%.5f" % (a, res.entropy_density, exact))
        ok &= max(gaps) <= 5e-3
        detail.append("%s max gap %.2e [optimizer/exact: %s]" % (label, max(gaps), ", ".join(pairs)))
    return ok, "; ".join(detail), 300.0


def criterion_7():
    spec = UrnSpec(2, [PolyCurve([0.25, 0.1]), PolyCurve([0.15, 0.15])])
    assert spec.prob_matrix(spec.grid()).min() >= 0.05
    rep = action_convergence(spec, Ns=(100, 1000, 10000), seeds=100, seed=0)
    gaps = ", ".join("%.3e" % g for g in rep.median_gaps)
    return rep.monotone, "median gaps at N=1e2,1e3,1e4: %s" % gaps, 120.0


def criterion_8():
    d = degenerate_spec()
    rep = cramer_discrepancy(d, grid=65)
    row = int(np.argmin(np.abs(rep.alphas - 1.0)))
    degenerate_ok = (rep.alphas[row] == 1.0 and bool(np.all(np.isposinf(rep.local[row])))
                     and bool(np.allclose(rep.cramer[row], 0.0, atol=1e-12)))
    smooth = UrnSpec(2, [PolyCurve([0.25, 0.1]), PolyCurve([0.15, 0.15])])
    srep = cramer_discrepancy(smooth, grid=64)
    generated = srep.local.shape == (64, 64) and np.isfinite(srep.cramer).all()
    below = int(np.sum(srep.local - srep.cramer < -1e-9))
    # the report is the pass condition; the inequality pattern is only recorded
    ok = degenerate_ok and generated
    return ok, ("degenerate alpha=1: local=+inf, cramer=0 -> %s; smooth 64x64: min(local-cramer)="
                "%.3f, cells below -1e-9: %d/4096 (recorded)" % (degenerate_ok, srep.min_excess, below)), 60.0


def criterion_9():
    outputs = []
    for _ in range(2):
        buf = _io.StringIO()
        verify(seed=0, out=lambda line: buf.write(line + "\n"))
        outputs.append(buf.getvalue().encode())
    same = outputs[0] == outputs[1]
    return same, "two verify runs byte-identical=%s (%d bytes)" % (same, len(outputs[0])), math.inf


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


def evaluate(fn):
    start = time.perf_counter()
    ok, detail, limit = fn()
    elapsed = time.perf_counter() - start
    in_time = elapsed < limit
    n = fn.__name__.split("_")[1]
    verdict = "PASS" if ok and in_time else "FAIL"
    timing = "%.1fs" % elapsed + ("" if math.isinf(limit) else " (limit %gs)" % limit)
    return ok and in_time, "CRITERION %s: %s  %s  [%s]" % (n, verdict, detail, timing)


@pytest.mark.slow
@pytest.mark.parametrize("fn", CRITERIA, ids=lambda f: f.__name__)
def test_criterion(fn, acceptance_log):
    ok, line = evaluate(fn)
    print(line)
    acceptance_log.append(line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(fn) for fn in CRITERIA]
    for _, line in results:
        print(line)
    print("ACCEPTANCE %s" % ("PASS" if all(ok for ok, _ in results) else "FAIL"))

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gpurn.urn_model import (
    MarketHistory,
    PolyCurve,
    PwlCurve,
    SpecValidationError,
    UrnSpec,
    action,
    enumerate_distribution,
    eval_pi,
    event_log_probability,
    exact_distribution,
    exact_log_distribution,
    fixed_points,
    mean_step,
    path_weight,
    simulate,
    simulate_batch,
    step_weight,
    validate_spec,
)


# --- validate_spec / eval_pi / mean_step ----------------------------------------

def test_identity_urn_is_valid():
    assert validate_spec(UrnSpec(1, [PolyCurve([0, 1])])) == []


def test_sum_exceeding_one_is_reported_everywhere():
    spec = UrnSpec.constant([0.6, 0.6])
    report = validate_spec(spec)
    sums = [v for v in report if v.k == 0]
    assert len(sums) == spec.validation_grid_size
    assert all(v.value == pytest.approx(1.2) for v in sums)


def test_negative_component_reported_below_half():
    spec = UrnSpec(2, [PolyCurve([-0.5, 1.0]), PolyCurve([0.0])])
    bad = [v for v in validate_spec(spec) if v.k == 1 and v.reason == "negative"]
    assert bad
    assert max(v.alpha for v in bad) < 0.5
    assert min(v.alpha for v in bad) == 0.0


def test_structural_errors():
    with pytest.raises(SpecValidationError):
        UrnSpec(0, [])
    with pytest.raises(SpecValidationError):
        UrnSpec(2, [PolyCurve([0.1])])
    with pytest.raises(SpecValidationError):
        UrnSpec(1, [PolyCurve([0.1])], psi_init=3.0)
    with pytest.raises(SpecValidationError):
        PwlCurve([(0.0, 0.1), (0.0, 0.2)])
    with pytest.raises(SpecValidationError):
        UrnSpec.from_dict({"K": 1, "pi": [{"kind": "spline"}]})


def test_eval_pi_examples(uniform2):
    assert eval_pi(uniform2, 0, 0.7) == pytest.approx(1 / 3, abs=1e-15)
    assert eval_pi(UrnSpec(1, [PolyCurve([0, 1])]), 1, 0.25) == 0.25
    assert eval_pi(UrnSpec.constant([0.5, 0.5]), 0, 1.3) == 0.0


def test_eval_pi_rejects_bad_inputs(uniform2):
    with pytest.raises(ValueError):
        eval_pi(uniform2, 1, 2.5)
    with pytest.raises(ValueError):
        eval_pi(uniform2, 3, 1.0)
    with pytest.raises(SpecValidationError):
        eval_pi(UrnSpec.constant([0.6, 0.6]), 0, 1.0)


def test_eval_pi_clamps_within_tolerance():
    spec = UrnSpec.constant([0.5, 0.5 + 1e-13])
    assert eval_pi(spec, 0, 0.0) == 0.0


def test_normalization_on_grid(curvy2, smooth2, uniform2):
    for spec in (curvy2, smooth2, uniform2):
        g = spec.grid()
        total = sum(eval_pi(spec, k, g) for k in range(spec.K + 1))
        assert np.max(np.abs(total - 1)) <= 1e-12


def test_mean_step_examples(uniform2):
    g = np.linspace(0, 2, 11)
    assert np.allclose(mean_step(uniform2, g), 1.0, atol=1e-15)
    assert mean_step(UrnSpec.constant([0.37]), 0.2) == pytest.approx(0.37)
    assert mean_step(UrnSpec.constant([0.0, 0.5]), 1.4) == pytest.approx(1.0)


# --- fixed_points -----------------------------------------------------------------

def test_fixed_point_uniform(uniform2):
    rep = fixed_points(uniform2)
    assert rep.roots == [pytest.approx(1.0, abs=1e-10)]
    assert rep.isolated


def test_fixed_point_identity_violates_isolation():
    rep = fixed_points(UrnSpec(1, [PolyCurve([0, 1])]))
    assert not rep.isolated
    assert rep.isolation_violations[0] == (0.0, 1.0)


def test_fixed_point_of_reflected_mean():
    # mean step 2 - alpha; by hand the only fixed point is alpha = 1
    spec = UrnSpec(2, [PolyCurve([0.0]), PolyCurve([1.0, -0.5])])
    rep = fixed_points(spec, grid_size=1000)  # grid avoids alpha = 1 exactly
    assert len(rep.roots) == 1
    assert abs(mean_step(spec, rep.roots[0]) - rep.roots[0]) <= 1e-10
    assert rep.roots[0] == pytest.approx(1.0, abs=1e-10)


def test_tangential_root_is_flagged():
    # mean step alpha + (alpha - 0.3)^2 (0.8 - alpha): touches at 0.3, crosses at 0.8
    spec = UrnSpec(1, [PolyCurve([0.072, 0.43, 1.4, -1.0])])
    rep = fixed_points(spec, grid_size=1025, tol=3e-7)
    assert rep.tangential == [pytest.approx(0.3, abs=1e-3)]
    assert rep.roots == [pytest.approx(0.8, abs=1e-10)]


def test_several_isolated_roots():
    # HLS-style S-shaped urn function with three crossings
    spec = UrnSpec(1, [PolyCurve([0.0, 0.0, 3.0, -2.0])])
    rep = fixed_points(spec, grid_size=1000)
    assert rep.roots == pytest.approx([0.0, 0.5, 1.0], abs=1e-10)


# --- simulate -------------------------------------------------------------------

def test_deterministic_urns():
    assert (simulate(UrnSpec.constant([1.0]), 50, seed=1).steps == 1).all()
    assert (simulate(UrnSpec.constant([0.0, 1.0]), 50, seed=1).steps == 2).all()


def test_simulation_is_reproducible(curvy2):
    a = simulate(curvy2, 200, seed=7)
    b = simulate(curvy2, 200, seed=7)
    assert (a.steps == b.steps).all()
    assert a.seed == 7
    c = simulate_batch(curvy2, 30, 5000, seed=3, batch_size=700, threads=1)
    d = simulate_batch(curvy2, 30, 5000, seed=3, batch_size=700, threads=4)
    assert (c == d).all()


def test_uniform_frequencies(uniform2):
    N = 10 ** 5
    h = simulate(uniform2, N, seed=11)
    sigma = math.sqrt(2 / 9 / N)
    freq = np.bincount(h.steps, minlength=3) / N
    assert np.all(np.abs(freq - 1 / 3) <= 3 * sigma)


def test_impossible_steps_never_drawn():
    spec = UrnSpec.constant([0.0, 0.5])
    steps = simulate_batch(spec, 40, 2000, seed=2)
    assert not (steps == 1).any()


def test_monte_carlo_matches_exact(curvy2):
    N, runs = 12, 200_000
    steps = simulate_batch(curvy2, N, runs, seed=2024)
    counts = np.bincount(steps.sum(axis=1), minlength=2 * N + 1)
    expected = exact_distribution(curvy2, N) * runs
    # pool sparse tail bins so every expected count is at least 5
    obs, exp = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(counts, expected):
        acc_o += o
        acc_e += e
        if acc_e >= 5:
            obs.append(acc_o)
            exp.append(acc_e)
            acc_o = acc_e = 0.0
    obs[-1] += acc_o
    exp[-1] += acc_e
    p = stats.chisquare(obs, exp).pvalue
    assert p > 1e-4


def test_stochastic_approximation_drift():
    spec = UrnSpec.constant([0.3, 0.25])
    steps = simulate_batch(spec, 60, 40_000, seed=5)
    totals = np.cumsum(steps, axis=1)
    n = np.arange(1, 61)
    psi = totals / n
    # (psi_{n+1} - psi_n)(n+1) = sigma_{n+1} - psi_n
    drift = ((psi[:, 1:] - psi[:, :-1]) * n[1:]).mean(axis=0)
    target = mean_step(spec, 0.0) - psi[:, :-1].mean(axis=0)
    se = 1.0 / math.sqrt(40_000)
    assert np.all(np.abs(drift - target) <= 5 * se)


# --- weights and action -----------------------------------------------------------

def test_weight_examples(uniform2):
    p = 0.3
    const = UrnSpec.constant([p])
    h = MarketHistory([1, 0], 1, 0.5)
    assert path_weight(const, h) == pytest.approx(p * (1 - p))

    h2 = MarketHistory([2, 0, 1, 1, 2], 2, 1.0)
    assert path_weight(uniform2, h2) == pytest.approx(3.0 ** -5)
    assert action(uniform2, h2) == pytest.approx(-5 * math.log(3))

    lin = UrnSpec(1, [PolyCurve([0, 1])], psi_init=0.5)
    assert path_weight(lin, MarketHistory([1, 1], 1, 0.5)) == 0.5
    assert step_weight(lin, 1, 0.25) == 0.25


def test_zero_weight_gives_minus_infinity(linear1):
    h = MarketHistory([1, 0], 1, 0.5)
    assert path_weight(linear1, h) == 0.0
    assert action(linear1, h) == -math.inf


@given(st.lists(st.integers(0, 2), min_size=1, max_size=12))
@settings(max_examples=50, deadline=None)
def test_constant_urn_is_iid(steps):
    spec = UrnSpec.constant([0.2, 0.5])
    probs = [0.3, 0.2, 0.5]
    h = MarketHistory(steps, 2, 1.0)
    assert path_weight(spec, h) == pytest.approx(math.prod(probs[s] for s in steps))
    rev = MarketHistory(steps[::-1], 2, 1.0)
    assert action(spec, rev) == pytest.approx(action(spec, h))


def test_path_weights_sum_to_one(curvy2):
    N = 6
    total = sum(path_weight(curvy2, MarketHistory(np.array(s), 2, curvy2.psi_init))
                for s in itertools.product(range(3), repeat=N))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_history_derived_quantities():
    h = MarketHistory([2, 0, 1], 2, 1.0)
    assert list(h.totals) == [0, 2, 2, 3]
    assert h.averages == pytest.approx([1.0, 2.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        MarketHistory([3], 2, 1.0)


# --- exact distribution --------------------------------------------------------------

def test_binomial_example():
    assert exact_distribution(UrnSpec.constant([0.5]), 4)[2] == pytest.approx(0.375, abs=1e-15)


def test_uniform_two_steps(uniform2):
    d = exact_distribution(uniform2, 2)
    assert d == pytest.approx([1 / 9, 2 / 9, 3 / 9, 2 / 9, 1 / 9], abs=1e-15)


def test_linear_urn_matches_enumeration(linear1):
    dp = exact_distribution(linear1, 3)
    assert dp == pytest.approx(enumerate_distribution(linear1, 3), abs=1e-15)
    # psi_1 is 0 or 1 and both are absorbing
    assert dp == pytest.approx([0.5, 0.0, 0.0, 0.5])


@pytest.mark.parametrize("N", [1, 3, 5, 7])
def test_dp_equals_enumeration(curvy2, N):
    assert np.max(np.abs(exact_distribution(curvy2, N) - enumerate_distribution(curvy2, N))) <= 1e-12


def test_log_distribution_survives_underflow():
    spec = UrnSpec.constant([0.5])
    N = 3000
    logd = exact_log_distribution(spec, N)
    assert logd[0] == pytest.approx(-N * math.log(2))
    assert np.exp(logd).sum() == pytest.approx(1.0, abs=1e-10)


def test_event_probability():
    spec = UrnSpec.constant([0.5])
    logd = exact_log_distribution(spec, 4)
    assert math.exp(event_log_probability(logd, 4, 0.5, 0.75)) == pytest.approx(10 / 16)
    assert event_log_probability(logd, 4, 0.3, 0.4) == -math.inf

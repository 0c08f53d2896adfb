import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from cidlab.measure import BINARY, ProbabilityMeasure
from cidlab.models import PriorSpec, WeightLaw, named_density, replication_rng
from cidlab.stats import (TestReport, as_convergence_diagnostic, cid_diagnostic, ks_statistic,
                          ks_two_sample, loglog_rate, normal_cdf, size_biased_limit_draws,
                          stable_convergence_probe, theorem2_gap, unconditional_limit_draws,
                          uniform_integrability_table, variance_ratio_check)

UNIFORM2 = ProbabilityMeasure.finite(BINARY, [0.5, 0.5])
uniform_cdf = lambda x: np.clip(x, 0.0, 1.0)


# -- reports ---------------------------------------------------------------------


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.sampled_from(["<", "<=", ">", ">="]))
def test_report_verdict_consistent(stat, thr, op):
    r = TestReport("x", stat, thr, op)
    expected = {"<": stat < thr, "<=": stat <= thr, ">": stat > thr, ">=": stat >= thr}[op]
    assert r.passed == expected
    assert r.to_dict()["passed"] == expected


def test_report_rejects_negative_se():
    with pytest.raises(ValueError):
        TestReport("x", 0.0, 1.0, "<", standard_errors={"a": -1.0})


# -- KS --------------------------------------------------------------------------------


def test_ks_quantile_grid():
    m = 200
    sample = (np.arange(1, m + 1) - 0.5) / m
    assert ks_statistic(sample, uniform_cdf) == pytest.approx(0.5 / m)


def test_ks_single_point():
    assert ks_statistic([0.5], uniform_cdf) == pytest.approx(0.5)


def test_ks_sample_from_cdf():
    x = replication_rng(0, 0).random(10_000)
    assert ks_statistic(x, uniform_cdf) < 0.02


def test_ks_empty():
    with pytest.raises(ValueError):
        ks_statistic([], uniform_cdf)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=80), st.floats(0.1, 10), st.floats(-5, 5))
def test_ks_bounded_and_affine_invariant(xs, a, b):
    x = np.asarray(xs)
    d = ks_statistic(x, normal_cdf)
    assert 0.0 <= d <= 1.0
    d2 = ks_statistic(a * x + b, lambda y: normal_cdf((y - b) / a))
    assert d2 == pytest.approx(d, abs=1e-9)


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=60),
       st.lists(st.integers(-5, 5), min_size=1, max_size=60))
def test_two_sample_matches_scipy(a, b):
    with np.errstate(divide="ignore"):  # scipy's p-value, unused here, divides by tiny n
        ref = sps.ks_2samp(a, b, method="asymp").statistic
    assert ks_two_sample(a, b) == pytest.approx(ref, abs=1e-12)


# -- stable probe ----------------------------------------------------------------------


def test_stable_probe_null_and_contrast():
    prior = PriorSpec.atomic([0.02, 0.5], [0.5, 0.5])
    g = replication_rng(1, 0)
    # values drawn from the exact conditional law on H and anything off H
    events = g.random(4000) < 0.5
    values = np.where(events, size_biased_limit_draws(prior, 4000, g),
                      unconditional_limit_draws(prior, 4000, g))
    cond = size_biased_limit_draws(prior, 4000, g)
    uncond = unconditional_limit_draws(prior, 4000, g)
    null = stable_convergence_probe(values, events, uncond, cond)
    assert null.passed and null.statistic < 0.06
    assert ks_two_sample(values[events], uncond) > 0.10


def test_stable_probe_needs_events():
    with pytest.raises(ValueError):
        stable_convergence_probe(np.zeros(500), np.zeros(500, bool), np.zeros(500))
    with pytest.raises(ValueError):
        stable_convergence_probe(np.zeros(500), np.arange(500) < 199, np.zeros(500))


def test_size_biased_draws_beta_are_zero():
    # the limit is degenerate for an atom-free prior
    assert np.all(size_biased_limit_draws(PriorSpec.beta_prior(2, 2), 100, replication_rng(0, 0)) == 0)


# -- uniform integrability -------------------------------------------------------------


def test_ui_threshold_above_support():
    t = uniform_integrability_table({1: np.full(10, 0.5), 2: np.linspace(0, 1, 10)}, [2.0])
    assert np.all(t.tail_means == 0)


def test_ui_zero_threshold_is_mean():
    x = np.abs(replication_rng(0, 1).standard_normal(1000))
    t = uniform_integrability_table({5: x}, [0.0])
    assert t.tail_means[0, 0] == pytest.approx(x.mean())


def test_ui_gaussian_tail_profile():
    g = replication_rng(0, 2)
    samples = {n: np.abs(g.standard_normal(200_000)) for n in (16, 64)}
    t = uniform_integrability_table(samples, [1, 2, 4])
    top = t.max_over_n()
    assert t.decreasing_in_c
    assert top[1] / top[0] < 0.25 and top[2] / top[1] < 0.25


# -- rates ---------------------------------------------------------------------------


def test_loglog_examples():
    ns = np.array([16, 64, 256, 1024])
    assert loglog_rate(ns, ns ** -0.5)[0] == pytest.approx(-0.5)
    assert loglog_rate(ns, np.full(4, 3.0))[0] == pytest.approx(0.0, abs=1e-12)
    assert loglog_rate(ns, 2.0 / ns)[0] == pytest.approx(-1.0)


@given(st.floats(-3, 3), st.floats(0.01, 100))
def test_loglog_recovers_planted_slope(slope, scale):
    ns = 2.0 ** np.arange(4, 13)
    assert abs(loglog_rate(ns, scale * ns ** slope)[0] - slope) < 0.02


def test_loglog_errors():
    with pytest.raises(ValueError):
        loglog_rate([1, 2, 3], [1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        loglog_rate([1, 2], [1.0, 1.0])


# -- a.s. diagnostic ----------------------------------------------------------------------


CPS = 2 ** np.arange(6, 13)


def test_as_constant_paths():
    r = as_convergence_diagnostic(np.ones((120, CPS.size)), CPS)
    assert r.statistic == 1.0 and r.passed


def test_as_convergent_synthetic():
    g = replication_rng(3, 0)
    v = 1.0 + CPS ** -0.5 * g.standard_normal((200, CPS.size))
    assert as_convergence_diagnostic(v, CPS).statistic >= 0.9


def test_as_divergent_control():
    v = np.tile(np.sqrt(CPS.astype(float)), (150, 1))
    r = as_convergence_diagnostic(v, CPS)
    assert r.statistic < 0.05 and not r.passed


def test_as_errors():
    with pytest.raises(ValueError):
        as_convergence_diagnostic(np.ones((50, CPS.size)), CPS)
    with pytest.raises(ValueError):
        as_convergence_diagnostic(np.ones((200, 4)), np.array([64, 128, 256, 512]))


# -- density gap ------------------------------------------------------------------------------


def test_gap_constant_density():
    e = theorem2_gap(lambda v: np.ones_like(v), 1.0, 1.0, 64, 2000, 0)
    assert abs(e.estimate) <= 3 * e.se + 1e-12


def test_gap_cor5_setup_bounded():
    h = named_density("beta", 2, 2)
    ng = [theorem2_gap(h, 1.0, 1.0, n, 10_000, 1).n_gap for n in (16, 64, 256, 1024)]
    assert max(ng) / min(ng) < 3


def test_gap_steep_contrast_grows():
    h = named_density("logistic-step", 0.5, 0.002)
    ng = [theorem2_gap(h, 1.0, 1.0, n, 10_000, 2).n_gap for n in (16, 1024)]
    assert ng[1] / ng[0] > 3


@settings(max_examples=15, deadline=None)
@given(st.floats(1.0, 5.0), st.floats(1.0, 5.0), st.sampled_from([8, 32, 128]), st.integers(0, 999))
def test_gap_nonnegative_random_h(a, b, n, seed):
    e = theorem2_gap(named_density("beta", a, b), 1.0, 1.0, n, 2000, seed)
    assert e.difference_estimate >= -3 * e.difference_se
    assert e.estimate >= 0


def test_gap_rejects_bad_h():
    with pytest.raises(ValueError):
        theorem2_gap(lambda v: np.full_like(v, np.nan), 1.0, 1.0, 16, 100, 0)
    with pytest.raises(ValueError):
        theorem2_gap(lambda v: np.zeros_like(v), 1.0, 1.0, 16, 100, 0)


# -- c.i.d. diagnostic ---------------------------------------------------------------------------


def test_cid_unit_weights():
    r = cid_diagnostic(1.0, UNIFORM2, WeightLaw.constant(), 1, 40_000, 0)
    assert r.passed


def test_cid_unconditional():
    r = cid_diagnostic(1.0, UNIFORM2, WeightLaw.discrete([1.0, 2.0]), 0, 40_000, 1)
    assert r.passed and list(r.details["buckets"]) == ["0"]


def test_cid_two_point_weights():
    r = cid_diagnostic(1.0, UNIFORM2, WeightLaw.discrete([1.0, 2.0]), 2, 100_000, 2)
    assert r.passed and len(r.details["buckets"]) == 4


def test_cid_skips_thin_buckets():
    base = ProbabilityMeasure.finite(BINARY, [0.995, 0.005])
    with pytest.warns(UserWarning):
        r = cid_diagnostic(50.0, base, WeightLaw.constant(), 1, 2000, 3)
    assert r.warnings


# -- variance ratio ----------------------------------------------------------------------------


def test_variance_ratio_constant_weights_target_zero():
    r = variance_ratio_check(np.full(100, 1e-3), np.full(100, 0.5), WeightLaw.constant(2.0))
    assert r.details["target"] == 0.0 and r.passed


def test_variance_ratio_synthetic_calibration():
    w = WeightLaw.discrete([1.0, 2.0])
    g = replication_rng(4, 0)
    mu = g.beta(2, 2, size=20_000)
    c = g.standard_normal(mu.size) * np.sqrt(mu * (1 - mu) / 9)
    r = variance_ratio_check(c, mu, w)
    assert abs(r.details["ratio"] * 9 - 1) < 0.10


def test_variance_ratio_degenerate_spread_warns():
    r = variance_ratio_check(np.ones(50), np.full(50, 0.3), WeightLaw.discrete([1.0, 2.0]))
    assert r.warnings and len(r.details["binned_ratios"]) == 1

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cidlab.measure import BINARY, ProbabilityMeasure, SetClass, StateSpace
from cidlab.models import (PathSample, PriorSpec, WeightLaw, named_density, replication_rng,
                           sample_exchangeable, sample_ferguson_dirichlet, sample_generalized_polya)
from cidlab.oracles import all_histories, brute_force_conditional_w
from cidlab.predictive import PredictiveKernel
from cidlab.processes import (LimitOracle, brownian_bridge_at, compute_trajectory,
                              sample_bridge_limit, sample_limit_cor4)

UNIFORM2 = ProbabilityMeasure.finite(BINARY, [0.5, 0.5])
CPS = (16, 64, 256)


def test_dirichlet_trajectory_identity():
    base = ProbabilityMeasure.finite(StateSpace.finite(3), [0.2, 0.3, 0.5])
    alpha = 2.0
    path = sample_ferguson_dirichlet(alpha, base, 256 * 16, replication_rng(0, 0))
    tr = compute_trajectory(path, PredictiveKernel.dirichlet(alpha, base),
                            LimitOracle.plug_in(256 * 16), SetClass.all_subsets(), CPS)
    n = tr.checkpoints.astype(float)
    dist = 0.5 * np.abs(tr.mu_n - base.masses).sum(axis=1)
    assert np.allclose(tr.c_norm, np.sqrt(n) * alpha * dist / (alpha + n), atol=1e-12, rtol=0)
    assert np.all(tr.c_norm <= alpha / np.sqrt(n) + 1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(0, 10_000))
def test_point_prior_collapses_c_and_w(theta, seed):
    prior = PriorSpec.point(theta)
    path = sample_exchangeable(prior, 256, replication_rng(seed, 0))
    tr = compute_trajectory(path, PredictiveKernel.mixture(prior), LimitOracle.exact(),
                            SetClass.all_subsets(), CPS)
    assert np.array_equal(tr.c_values, tr.w_values)


def test_w_one_observation():
    path = PathSample("exchangeable", BINARY, np.array([1]), theta=np.array([0.7, 0.3]))
    tr = compute_trajectory(path, PredictiveKernel.mixture(PriorSpec.point(0.3)),
                            LimitOracle.exact(), SetClass.singletons(), [1])
    assert tr.w_values[0, 1] == pytest.approx(0.7)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_d_is_root_n_c_and_sup_dominates(seed):
    prior = PriorSpec.beta_prior(2, 2)
    path = sample_exchangeable(prior, 256, replication_rng(seed, 1))
    tr = compute_trajectory(path, PredictiveKernel.mixture(prior), LimitOracle.exact(),
                            SetClass.all_subsets(), CPS)
    assert np.array_equal(tr.d_norm, np.sqrt(tr.checkpoints) * tr.c_norm)
    assert np.all(np.abs(tr.c_values).max(axis=1) <= tr.c_norm + 1e-12)
    assert np.all(np.abs(tr.w_values).max(axis=1) <= tr.w_norm + 1e-12)


def test_disjoint_family_trajectory():
    base = ProbabilityMeasure.finite(StateSpace.finite(4), [0.25] * 4)
    w = WeightLaw.discrete([1.0, 2.0])
    path = sample_generalized_polya(1.0, base, w, 16 * 256, replication_rng(2, 0))
    sc = SetClass.disjoint([[0], [1, 2]])
    tr = compute_trajectory(path, PredictiveKernel.urn(1.0, base), LimitOracle.plug_in(16 * 256),
                            sc, CPS)
    assert tr.c_values.shape == (3, 2)
    assert np.allclose(np.abs(tr.c_values).max(axis=1), tr.c_norm)


def test_plug_in_horizon_checked():
    path = sample_ferguson_dirichlet(1.0, UNIFORM2, 1000, replication_rng(0, 0))
    k = PredictiveKernel.dirichlet(1.0, UNIFORM2)
    with pytest.raises(ValueError):
        compute_trajectory(path, k, LimitOracle.plug_in(1000), SetClass.all_subsets(), [256])
    with pytest.raises(ValueError):
        compute_trajectory(path, k, LimitOracle.plug_in(4096), SetClass.all_subsets(), [256])
    with pytest.raises(ValueError):
        compute_trajectory(path, k, LimitOracle.exact(), SetClass.all_subsets(), [256])


def test_c_equals_enumerated_conditional_w():
    priors = [PriorSpec((0.5,), (0.5,), beta=(2, 2), continuous_mass=0.5),
              PriorSpec.from_density(named_density("logistic-step", 0.4, 0.1), label="ls",
                                     atoms=(0.2, 0.9), atom_masses=(0.2, 0.1))]
    for prior in priors:
        kernel = PredictiveKernel.mixture(prior)
        for n in range(1, 7):
            for h in all_histories(n):
                path = PathSample("exchangeable", BINARY, h)
                c = np.sqrt(n) * (h.mean() - kernel.predict(path, n).masses[1])
                assert c == pytest.approx(brute_force_conditional_w(h, prior), abs=1e-8)


def test_plug_in_bias_budget():
    # Dirichlet law through its mixture representation, so the exact theta is known
    horizon = 65536
    prior = PriorSpec.dirichlet_prior([0.5, 0.5])
    kernel = PredictiveKernel.mixture(prior)
    cps = (256, 1024)
    diffs = []
    for rep in range(500):
        path = sample_exchangeable(prior, horizon, replication_rng(99, rep))
        exact = compute_trajectory(path, kernel, LimitOracle.exact(), SetClass.all_subsets(), cps)
        plug = compute_trajectory(path, kernel, LimitOracle.plug_in(horizon),
                                  SetClass.all_subsets(), cps)
        diffs.append(plug.w_norm - exact.w_norm)
    assert np.all(np.abs(np.mean(diffs, axis=0)) < 2 / np.sqrt(horizon))


def test_d_norm_submartingale_almost_lipschitz():
    prior = PriorSpec.from_density(named_density("almost-lipschitz", 0.5, 0.5), label="al")
    kernel = PredictiveKernel.mixture(prior)
    cps = (32, 64, 128, 256, 512)
    d = np.stack([compute_trajectory(sample_exchangeable(prior, 512, replication_rng(3, r)), kernel,
                                     LimitOracle.exact(), SetClass.all_subsets(), cps).d_norm
                  for r in range(300)])
    for j in range(len(cps) - 1):
        diff = d[:, j + 1] - d[:, j]
        assert diff.mean() >= -3 * diff.std(ddof=1) / np.sqrt(diff.size)


# -- limit laws ---------------------------------------------------------------


def test_cor4_non_atom_is_zero():
    assert sample_limit_cor4(0.4, [0.3, 0.7], np.random.default_rng(0)) == 0.0
    assert sample_limit_cor4(0.4, [], np.random.default_rng(0)) == 0.0


def test_cor4_degenerate_variance():
    assert sample_limit_cor4(0.0, [0.0], np.random.default_rng(0)) == 0.0


def test_cor4_variance():
    g = replication_rng(0, 0)
    x = np.array([sample_limit_cor4(0.5, [0.5], g) for _ in range(100_000)])
    assert abs(x.var() - 0.25) < 0.005


def test_cor4_rejects_theta():
    with pytest.raises(ValueError):
        sample_limit_cor4(1.5, [0.5], np.random.default_rng(0))


def test_bridge_covariance():
    t = np.array([0.1, 0.3, 0.5, 0.9])
    g = brownian_bridge_at(t, replication_rng(1, 0), size=100_000)
    exact = np.minimum.outer(t, t) - np.outer(t, t)
    assert np.abs(np.cov(g, rowvar=False) - exact).max() < 0.01


def test_bridge_pinned_and_repeated_times():
    g = brownian_bridge_at([0.0, 0.4, 0.4, 1.0], replication_rng(1, 1), size=10)
    assert np.all(g[:, 0] == 0) and np.all(g[:, 3] == 0)
    assert np.array_equal(g[:, 1], g[:, 2])


def test_bridge_limit_single_set_variance():
    w = WeightLaw.discrete([1.0, 2.0])
    s = sample_bridge_limit([0.3], w, replication_rng(2, 0), size=100_000)
    assert s.values[:, 0].var() == pytest.approx(0.3 * 0.7 / 9, rel=0.03)


def test_bridge_limit_zero_mass():
    s = sample_bridge_limit([0.0, 0.5], WeightLaw.discrete([1.0, 2.0]), replication_rng(2, 1), 50)
    assert np.all(s.values[:, 0] == 0)


def test_bridge_limit_constant_weights():
    s = sample_bridge_limit([0.5, 0.5], WeightLaw.constant(3.0), replication_rng(2, 2), 50)
    assert np.all(s.values == 0) and np.all(s.sup == 0)


def test_bridge_limit_rejects_excess_mass():
    with pytest.raises(ValueError):
        sample_bridge_limit([0.6, 0.5], WeightLaw.constant(), replication_rng(2, 3))


def test_bridge_limit_increment_covariance():
    # Cov(L(B_j), L(B_k)) = scale^2 (mu_j 1[j=k] - mu_j mu_k)
    w = WeightLaw.discrete([1.0, 3.0])
    m = np.array([0.2, 0.3, 0.1])
    s = sample_bridge_limit(m, w, replication_rng(2, 4), size=200_000)
    exact = w.limit_scale ** 2 * (np.diag(m) - np.outer(m, m))
    assert np.abs(np.cov(s.values, rowvar=False) - exact).max() < 0.005
    assert np.allclose(s.sup, np.abs(s.values).max(axis=1))

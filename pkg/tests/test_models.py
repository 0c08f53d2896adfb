import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cidlab.measure import BINARY, ProbabilityMeasure, StateSpace
from cidlab.models import (PriorSpec, WeightLaw, named_density, replication_rng,
                           sample_exchangeable, sample_exchangeable_batch,
                           sample_ferguson_dirichlet, sample_generalized_polya, sample_urn_batch)
from cidlab.oracles import marginal_likelihood

UNIFORM2 = ProbabilityMeasure.finite(BINARY, [0.5, 0.5])


def rng(seed=0):
    return replication_rng(1234, seed)


# -- priors ------------------------------------------------------------------


def test_prior_mass_must_be_one():
    with pytest.raises(ValueError):
        PriorSpec.atomic([0.3, 0.7], [0.5, 0.4])


def test_prior_atoms_in_unit_interval():
    with pytest.raises(ValueError):
        PriorSpec.atomic([1.3], [1.0])


def test_prior_single_continuous_component():
    with pytest.raises(ValueError):
        PriorSpec(beta=(2, 2), density=named_density("beta", 2, 2), continuous_mass=1.0)


def test_prior_density_nonnegative():
    with pytest.raises(ValueError):
        PriorSpec.from_density(lambda t: t - 0.5)


def test_size_biased_beta():
    sb = PriorSpec.beta_prior(2, 2).size_biased()
    assert sb.beta == (3, 2)


def test_size_biased_atoms():
    sb = PriorSpec.atomic([0.02, 0.5], [0.5, 0.5]).size_biased()
    assert sb.atom_masses == pytest.approx((0.02 / 0.52, 0.5 / 0.52))


def test_density_prior_sampling_matches_moments():
    prior = PriorSpec.from_density(named_density("beta", 2, 5))
    g = rng()
    draws = np.array([prior.sample_theta(g) for _ in range(20000)])
    assert draws.mean() == pytest.approx(2 / 7, abs=0.01)


# -- exchangeable sampler ----------------------------------------------------------


def test_point_prior_frequency():
    path = sample_exchangeable(PriorSpec.point(0.3), 100_000, rng())
    assert path.theta[1] == 0.3
    assert abs(path.observations.mean() - 0.3) < 0.005


def test_first_draw_probability_under_uniform_prior():
    # brute-force integral oracle of int theta dtheta
    assert marginal_likelihood(PriorSpec.beta_prior(1, 1), 1, 1) == pytest.approx(0.5, abs=1e-12)
    x, _ = sample_exchangeable_batch(PriorSpec.beta_prior(1, 1), 1, 20000, rng())
    assert abs(x.mean() - 0.5) < 3 * 0.5 / np.sqrt(20000)


def test_theta_one_gives_all_ones():
    path = sample_exchangeable(PriorSpec.point(1.0), 500, rng())
    assert np.all(path.observations == 1)


def test_exchangeable_swap_symmetry():
    x, _ = sample_exchangeable_batch(PriorSpec.beta_prior(2, 2), 2, 100_000, rng(3))
    d = ((x[:, 0] == 1) & (x[:, 1] == 0)).astype(float) - ((x[:, 0] == 0) & (x[:, 1] == 1))
    assert abs(d.mean()) < 3 * d.std(ddof=1) / np.sqrt(d.size)


def test_exchangeable_conditionally_iid():
    # given theta, frequencies match theta
    prior = PriorSpec.atomic([0.2, 0.9], [0.5, 0.5])
    for seed in range(5):
        path = sample_exchangeable(prior, 20000, rng(seed))
        assert abs(path.observations.mean() - path.theta[1]) < 4 * 0.5 / np.sqrt(20000)


def test_dirichlet_prior_multilabel():
    prior = PriorSpec.dirichlet_prior([1.0, 2.0, 3.0])
    path = sample_exchangeable(prior, 1000, rng())
    assert path.space.size == 3 and set(np.unique(path.observations)) <= {0, 1, 2}
    assert path.theta.sum() == pytest.approx(1.0)


def test_sampler_rejects_bad_n():
    with pytest.raises(ValueError):
        sample_exchangeable(PriorSpec.point(0.5), 0, rng())


# -- Ferguson-Dirichlet sampler ----------------------------------------------------


def test_fd_first_draw_is_base():
    base = ProbabilityMeasure.finite(StateSpace.finite(3), [0.2, 0.3, 0.5])
    first = np.array([sample_ferguson_dirichlet(1.0, base, 1, rng(r)).observations[0]
                      for r in range(6000)])
    freq = np.bincount(first, minlength=3) / first.size
    assert np.all(np.abs(freq - base.masses) < 4 * np.sqrt(0.25 / first.size))


def test_fd_repeat_probability():
    # (alpha nu{x1} + 1) / (alpha + 1) = 0.75
    same = np.array([np.diff(sample_ferguson_dirichlet(1.0, UNIFORM2, 2, rng(r)).observations)[0] == 0
                     for r in range(20000)])
    assert abs(same.mean() - 0.75) < 3 * np.sqrt(0.75 * 0.25 / same.size)


def test_fd_large_alpha_follows_base():
    base = ProbabilityMeasure.finite(BINARY, [0.7, 0.3])
    freq = np.array([sample_ferguson_dirichlet(1e6, base, 100, rng(r)).observations.mean()
                     for r in range(1000)])
    assert abs(freq.mean() - 0.3) < 0.01


def test_fd_rejects_alpha():
    with pytest.raises(ValueError):
        sample_ferguson_dirichlet(0.0, UNIFORM2, 10, rng())


# -- urn sampler ---------------------------------------------------------------------


def test_urn_weights_in_bounds():
    w = WeightLaw.uniform(0.5, 2.0)
    path = sample_generalized_polya(1.0, UNIFORM2, w, 5000, rng())
    assert path.weights.min() >= 0.5 and path.weights.max() <= 2.0


def test_urn_first_draw_is_base():
    base = ProbabilityMeasure.finite(BINARY, [0.8, 0.2])
    w = WeightLaw.discrete([1.0, 2.0])
    y = np.array([sample_generalized_polya(1.0, base, w, 1, rng(r)).observations[0]
                  for r in range(10000)])
    assert abs(y.mean() - 0.2) < 3 * np.sqrt(0.16 / y.size)


def test_urn_batch_matches_single_path_law():
    w = WeightLaw.discrete([1.0, 2.0])
    y, z = sample_urn_batch(1.0, UNIFORM2, w, 3, 40000, rng(1))
    single = np.array([sample_generalized_polya(1.0, UNIFORM2, w, 3, rng(10 + r)).observations
                       for r in range(40000)])
    # P(Y_2 = Y_1) from both samplers
    a = (y[:, 0] == y[:, 1]).mean()
    b = (single[:, 0] == single[:, 1]).mean()
    assert abs(a - b) < 4 * np.sqrt(0.25 * 2 / 40000)


def test_urn_rejects_bad_weights():
    with pytest.raises(ValueError):
        WeightLaw.uniform(0.0, 1.0)
    with pytest.raises(ValueError):
        WeightLaw.discrete([1.0, -1.0])
    with pytest.raises(ValueError):
        sample_generalized_polya(1.0, UNIFORM2, "ones", 5, rng())


@given(st.lists(st.floats(0.1, 10.0), min_size=1, max_size=5), st.data())
def test_weight_law_moments(values, data):
    probs = data.draw(st.lists(st.floats(0.01, 1.0), min_size=len(values), max_size=len(values)))
    probs = np.asarray(probs) / sum(probs)
    w = WeightLaw.discrete(values, probs)
    mean = float(np.dot(values, probs))
    assert w.mean == pytest.approx(mean, abs=1e-12)
    assert w.variance == pytest.approx(float(np.dot((np.asarray(values) - mean) ** 2, probs)),
                                       abs=1e-12)
    assert w.low == min(values) and w.high == max(values)


def test_uniform_weight_law_moments():
    w = WeightLaw.uniform(1.0, 3.0)
    assert w.mean == 2.0 and w.variance == pytest.approx(1 / 3)


def test_z12_limit_scale():
    assert WeightLaw.discrete([1.0, 2.0]).limit_scale ** 2 == pytest.approx(1 / 9)


# -- determinism -----------------------------------------------------------------------


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 1000))
def test_same_seed_same_path(seed, rep):
    w = WeightLaw.discrete([1.0, 2.0])
    a = sample_generalized_polya(1.0, UNIFORM2, w, 300, replication_rng(seed, rep))
    b = sample_generalized_polya(1.0, UNIFORM2, w, 300, replication_rng(seed, rep))
    assert a.same_as(b)
    c = sample_exchangeable(PriorSpec.beta_prior(2, 2), 300, replication_rng(seed, rep))
    d = sample_exchangeable(PriorSpec.beta_prior(2, 2), 300, replication_rng(seed, rep))
    assert c.same_as(d)


def test_different_reps_differ():
    a = sample_ferguson_dirichlet(1.0, UNIFORM2, 500, replication_rng(7, 0))
    b = sample_ferguson_dirichlet(1.0, UNIFORM2, 500, replication_rng(7, 1))
    assert not a.same_as(b)

"""Exact samplers for the three sequence models.

* exchangeable: de Finetti mixture, theta ~ prior then i.i.d. draws;
* Ferguson-Dirichlet: sequential Blackwell-MacQueen sampling from the
  alpha-blend predictive;
* generalized Polya urn: i.i.d. bounded weights Z reinforce the predictive
  of Y.

Every sampler takes a ``numpy.random.Generator``. Experiments give
replication ``r`` the stream :func:`replication_rng` ``(master_seed, r)``,
so results do not depend on scheduling.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from numba import njit

from .measure import MASS_TOL, ProbabilityMeasure, StateSpace

PRIOR_GRID = 4096


def replication_rng(master_seed: int, rep: int) -> np.random.Generator:
    """Counter-based stream for replication ``rep``."""
    return substream(master_seed, rep)


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Counter-based stream addressed by an integer key path under the seed."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class PriorSpec:
    """Mixing distribution of the exchangeable model.

    For binary data theta is the probability of label 1 and the prior is a
    mixture of atoms and one continuous part: a named Beta family (sampled
    and updated in closed form) or an arbitrary density on (0, 1), which need
    not be normalized. A Dirichlet prior covers general finite alphabets and
    must be the only component.
    """

    atoms: tuple[float, ...] = ()
    atom_masses: tuple[float, ...] = ()
    beta: tuple[float, float] | None = None
    density: Callable | None = None
    density_label: str = ""
    continuous_mass: float = 0.0
    dirichlet: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(float(a) for a in self.atoms))
        object.__setattr__(self, "atom_masses", tuple(float(m) for m in self.atom_masses))
        if len(self.atoms) != len(self.atom_masses):
            raise ValueError("atoms and atom masses differ in length")
        if any(m < 0 for m in self.atom_masses) or self.continuous_mass < 0:
            raise ValueError("negative prior mass")
        n_cont = sum(x is not None for x in (self.beta, self.density, self.dirichlet))
        if n_cont > 1:
            raise ValueError("at most one continuous component")
        if n_cont == 0 and self.continuous_mass > 0:
            raise ValueError("continuous mass without a continuous component")
        if n_cont == 1 and self.continuous_mass <= 0:
            raise ValueError("continuous component with zero mass")
        total = sum(self.atom_masses) + self.continuous_mass
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"prior mass {total!r} is not 1")
        if self.dirichlet is not None:
            if self.atoms:
                raise ValueError("Dirichlet prior must be the only component")
            if len(self.dirichlet) < 2 or min(self.dirichlet) <= 0:
                raise ValueError("Dirichlet parameters must be positive, at least two")
        else:
            if any(not 0.0 <= a <= 1.0 for a in self.atoms):
                raise ValueError("atom outside [0, 1]")
        if self.beta is not None and min(self.beta) <= 0:
            raise ValueError("Beta parameters must be positive")
        if self.density is not None:
            vals = np.asarray(self.density(_grid_midpoints()), dtype=float)
            if not np.all(np.isfinite(vals)) or vals.min() < 0 or vals.sum() <= 0:
                raise ValueError("density must be finite, nonnegative and not a.e. zero on (0, 1)")

    # constructors -----------------------------------------------------------
    @classmethod
    def point(cls, theta: float) -> "PriorSpec":
        return cls(atoms=(theta,), atom_masses=(1.0,))

    @classmethod
    def atomic(cls, atoms, masses) -> "PriorSpec":
        return cls(atoms=tuple(atoms), atom_masses=tuple(masses))

    @classmethod
    def beta_prior(cls, u1: float, u2: float) -> "PriorSpec":
        return cls(beta=(float(u1), float(u2)), continuous_mass=1.0)

    @classmethod
    def from_density(cls, density: Callable, label: str = "density",
                     atoms=(), atom_masses=()) -> "PriorSpec":
        return cls(atoms=tuple(atoms), atom_masses=tuple(atom_masses), density=density,
                   density_label=label, continuous_mass=1.0 - float(sum(atom_masses)))

    @classmethod
    def dirichlet_prior(cls, params) -> "PriorSpec":
        return cls(dirichlet=tuple(float(p) for p in params), continuous_mass=1.0)

    # queries ----------------------------------------------------------------
    @property
    def alphabet_size(self) -> int:
        return len(self.dirichlet) if self.dirichlet is not None else 2

    @property
    def continuous_kind(self) -> str | None:
        if self.beta is not None:
            return "beta"
        if self.density is not None:
            return "density"
        if self.dirichlet is not None:
            return "dirichlet"
        return None

    @property
    def atom_set(self) -> np.ndarray:
        return np.array([a for a, m in zip(self.atoms, self.atom_masses) if m > 0])

    def theta_masses(self, theta) -> np.ndarray:
        """Observation law induced by a parameter value."""
        if self.dirichlet is not None:
            return np.asarray(theta, dtype=float)
        return np.array([1.0 - theta, theta])

    def size_biased(self) -> "PriorSpec":
        """Law of theta given X_1 = 1: the prior reweighted by theta."""
        if self.dirichlet is not None:
            raise ValueError("size-biasing is defined for binary priors")
        mean_atoms = [a * m for a, m in zip(self.atoms, self.atom_masses)]
        if self.beta is not None:
            u1, u2 = self.beta
            cont_mean = u1 / (u1 + u2)
        elif self.density is not None:
            mid = _grid_midpoints()
            g = self.density(mid)
            cont_mean = float((g * mid).sum() / g.sum())
        else:
            cont_mean = 0.0
        cont = self.continuous_mass * cont_mean
        total = sum(mean_atoms) + cont
        if total <= 0:
            raise ValueError("P(X_1 = 1) = 0 under this prior")
        masses = tuple(m / total for m in mean_atoms)
        if self.beta is not None:
            return PriorSpec(self.atoms, masses, beta=(self.beta[0] + 1, self.beta[1]),
                             continuous_mass=cont / total)
        if self.density is not None:
            dens = self.density
            return PriorSpec(self.atoms, masses, density=lambda t: dens(t) * t,
                             density_label=f"{self.density_label}*theta",
                             continuous_mass=cont / total)
        return PriorSpec(self.atoms, masses)

    # sampling ---------------------------------------------------------------
    @cached_property
    def _inverse_cdf_table(self) -> tuple[np.ndarray, np.ndarray]:
        edges = np.linspace(0.0, 1.0, PRIOR_GRID + 1)
        g = np.asarray(self.density(_grid_midpoints()), dtype=float)
        cdf = np.concatenate([[0.0], np.cumsum(g)])
        return cdf / cdf[-1], edges

    def sample_theta(self, rng: np.random.Generator):
        if self.dirichlet is not None:
            return rng.dirichlet(self.dirichlet)
        u = rng.random()
        acc = 0.0
        for a, m in zip(self.atoms, self.atom_masses):
            acc += m
            if u < acc:
                return a
        if self.beta is not None:
            return float(rng.beta(*self.beta))
        if self.density is not None:
            cdf, edges = self._inverse_cdf_table
            return float(np.interp(rng.random(), cdf, edges))
        # only reachable through rounding in the atom masses
        return self.atoms[-1]


def _grid_midpoints(size: int = PRIOR_GRID) -> np.ndarray:
    return (np.arange(size) + 0.5) / size


# named densities for JSON configs; all are unnormalized functions on (0, 1)
def _beta_density(a: float, b: float) -> Callable:
    return lambda t: np.power(t, a - 1.0) * np.power(1.0 - t, b - 1.0)


def _logistic_step(center: float, width: float) -> Callable:
    return lambda t: 0.05 + 1.0 / (1.0 + np.exp(-(np.asarray(t) - center) / width))


def _almost_lipschitz(a: float, b: float) -> Callable:
    # g(t) t^a (1-t)^b = 1 + t: Lipschitz with a, b < 1
    return lambda t: (1.0 + np.asarray(t)) * np.power(t, -a) * np.power(1.0 - t, -b)


DENSITIES: dict[str, Callable[..., Callable]] = {
    "beta": _beta_density,
    "logistic-step": _logistic_step,
    "almost-lipschitz": _almost_lipschitz,
}


def named_density(name: str, *args: float) -> Callable:
    if name not in DENSITIES:
        raise ValueError(f"unknown density {name!r}; known: {sorted(DENSITIES)}")
    return DENSITIES[name](*args)


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightLaw:
    """Law of the urn reinforcement Z, supported in [low, high] with low > 0."""

    kind: str
    values: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()
    low: float = 0.0
    high: float = 0.0

    def __post_init__(self):
        if self.kind == "discrete":
            vals = tuple(float(v) for v in self.values)
            probs = tuple(float(p) for p in self.probs)
            if not vals or len(vals) != len(probs):
                raise ValueError("discrete weight law needs matching values and probs")
            if min(probs) < 0 or abs(sum(probs) - 1.0) > MASS_TOL:
                raise ValueError("weight probabilities must be a probability vector")
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "probs", probs)
            support = [v for v, p in zip(vals, probs) if p > 0]
            object.__setattr__(self, "low", min(support))
            object.__setattr__(self, "high", max(support))
        elif self.kind != "uniform":
            raise ValueError(f"unknown weight law {self.kind!r}")
        if not 0 < self.low <= self.high or not np.isfinite(self.high):
            raise ValueError("weights need 0 < a <= b < inf")

    @classmethod
    def constant(cls, c: float = 1.0) -> "WeightLaw":
        return cls("discrete", (c,), (1.0,))

    @classmethod
    def discrete(cls, values, probs=None) -> "WeightLaw":
        values = tuple(values)
        if probs is None:
            probs = (1.0 / len(values),) * len(values)
        return cls("discrete", values, tuple(probs))

    @classmethod
    def uniform(cls, low: float, high: float) -> "WeightLaw":
        return cls("uniform", low=float(low), high=float(high))

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.low + self.high)
        return float(np.dot(self.values, self.probs))

    @property
    def variance(self) -> float:
        if self.kind == "uniform":
            return (self.high - self.low) ** 2 / 12.0
        v = np.asarray(self.values)
        return float(np.dot((v - self.mean) ** 2, self.probs))

    @property
    def limit_scale(self) -> float:
        """sqrt(var Z) / E Z, the scale of the urn's Brownian-bridge limit."""
        return float(np.sqrt(self.variance) / self.mean)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, size)
        if len(self.values) == 1:
            return np.full(size, self.values[0])
        return rng.choice(np.asarray(self.values), size=size, p=np.asarray(self.probs))


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True, eq=False)
class PathSample:
    model: str
    space: StateSpace
    observations: np.ndarray
    theta: np.ndarray | None = None
    weights: np.ndarray | None = None
    seed: tuple | None = None

    @property
    def horizon(self) -> int:
        return int(self.observations.size)

    def same_as(self, other: "PathSample") -> bool:
        """Byte-level equality of everything the sampler produced."""
        def b(a):
            return None if a is None else (a.dtype.str, a.tobytes())
        return (self.model == other.model and self.space == other.space
                and b(self.observations) == b(other.observations)
                and b(self.theta) == b(other.theta) and b(self.weights) == b(other.weights))


def _finite_base(base: ProbabilityMeasure, what: str) -> np.ndarray:
    if not isinstance(base, ProbabilityMeasure) or not base.space.is_finite:
        raise ValueError(f"{what} must be a probability on a finite alphabet")
    return np.asarray(base.masses, dtype=float)


def _check_count(n) -> int:
    if int(n) != n or n < 1:
        raise ValueError("path length must be a positive integer")
    return int(n)


def sample_exchangeable(prior: PriorSpec, n: int, rng: np.random.Generator,
                        seed: tuple | None = None) -> PathSample:
    """Draw theta from the prior, then n conditionally i.i.d. observations."""
    n = _check_count(n)
    if not isinstance(prior, PriorSpec):
        raise ValueError("prior must be a PriorSpec")
    space = StateSpace.finite(prior.alphabet_size)
    theta = prior.sample_theta(rng)
    masses = prior.theta_masses(theta)
    u = rng.random(n)
    if space.size == 2:
        x = (u < masses[1]).astype(np.int64)
    else:
        cum = np.cumsum(masses)
        x = np.minimum(np.searchsorted(cum, u, side="right"), space.size - 1)
    return PathSample("exchangeable", space, x, theta=np.asarray(masses), seed=seed)


def sample_ferguson_dirichlet(alpha: float, base: ProbabilityMeasure, n: int,
                              rng: np.random.Generator, seed: tuple | None = None) -> PathSample:
    """Blackwell-MacQueen sampling: with prob alpha/(alpha+m) a fresh draw from
    ``base``, otherwise a copy of a uniformly chosen earlier observation."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    n = _check_count(n)
    nu = _finite_base(base, "base")
    u = rng.random(n)
    v = rng.random(n)
    x = _blackwell_macqueen(u, v, float(alpha), np.cumsum(nu))
    return PathSample("ferguson-dirichlet", base.space, x, seed=seed)


def sample_generalized_polya(alpha: float, base: ProbabilityMeasure, weights: WeightLaw, n: int,
                             rng: np.random.Generator, seed: tuple | None = None) -> PathSample:
    """Y_{m+1} from the weighted-count predictive; Z_{m+1} i.i.d. from ``weights``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not isinstance(weights, WeightLaw):
        raise ValueError("weights must be a WeightLaw")
    n = _check_count(n)
    nu = _finite_base(base, "base")
    z = weights.sample(rng, n).astype(float)
    u = rng.random(n)
    y = _weighted_urn(u, z, float(alpha), nu)
    return PathSample("polya-urn", base.space, y, weights=z, seed=seed)


def sample_urn_batch(alpha: float, base: ProbabilityMeasure, weights: WeightLaw, n: int,
                     reps: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Many short urn paths at once from one stream; returns (Y, Z) of shape (reps, n)."""
    nu = _finite_base(base, "base")
    z = weights.sample(rng, (reps, n)).astype(float)
    u = rng.random((reps, n))
    k = nu.size
    s = np.zeros((reps, k))
    total = np.zeros(reps)
    y = np.empty((reps, n), dtype=np.int64)
    rows = np.arange(reps)
    for m in range(n):
        cum = np.cumsum(alpha * nu + s, axis=1)
        target = u[:, m] * (alpha + total)
        pick = np.minimum((cum <= target[:, None]).sum(axis=1), k - 1)
        y[:, m] = pick
        s[rows, pick] += z[:, m]
        total += z[:, m]
    return y, z


def sample_exchangeable_batch(prior: PriorSpec, n: int, reps: int,
                              rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Binary exchangeable paths from one stream; returns (X, theta)."""
    if prior.alphabet_size != 2:
        raise ValueError("batch sampler is binary only")
    theta = np.array([prior.sample_theta(rng) for _ in range(reps)])
    x = (rng.random((reps, n)) < theta[:, None]).astype(np.int64)
    return x, theta


# ---------------------------------------------------------------------------
# compiled kernels


@njit(cache=True, nogil=True)
def _weighted_urn(u, z, alpha, nu):
    k = nu.size
    n = u.size
    s = np.zeros(k)
    total = 0.0
    y = np.empty(n, dtype=np.int64)
    for m in range(n):
        target = u[m] * (alpha + total)
        acc = 0.0
        pick = -1
        for j in range(k):
            acc += alpha * nu[j] + s[j]
            if target < acc:
                pick = j
                break
        if pick < 0:
            # rounding at the top end: last label with positive weight
            pick = k - 1
            while alpha * nu[pick] + s[pick] <= 0.0:
                pick -= 1
        y[m] = pick
        s[pick] += z[m]
        total += z[m]
    return y


@njit(cache=True, nogil=True)
def _blackwell_macqueen(u, v, alpha, nu_cum):
    k = nu_cum.size
    n = u.size
    y = np.empty(n, dtype=np.int64)
    for m in range(n):
        if u[m] * (alpha + m) < alpha:
            pick = k - 1
            for j in range(k):
                if v[m] < nu_cum[j]:
                    pick = j
                    break
            while pick > 0 and nu_cum[pick] <= nu_cum[pick - 1]:
                pick -= 1
            y[m] = pick
        else:
            y[m] = y[int(v[m] * m)]
    return y

"""Exact predictive kernels a_n = P(X_{n+1} in . | X_1..X_n).

Three model-bound rules are implemented: the Dirichlet alpha-blend, the
posterior predictive of a binary mixture (conjugate, atomic and quadrature
paths, combined by posterior weights), and the weighted-count urn rule.

Mixture likelihoods theta^r (1-theta)^(n-r) are only ever handled on the log
scale. Continuous prior parts are integrated with a fixed Gauss-Legendre
rule on (0, 1) whose nodes stay off the endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import betaln, roots_legendre, xlogy

from .measure import BINARY, ProbabilityMeasure, StateSpace, empirical_measure, sup_distance
from .models import PathSample, PriorSpec

QUAD_NODES = 4096
ATOM_ATOL = 1e-12


def logsumexp(a) -> float:
    """log(sum(exp(a))) for a 1-d array; -inf for an empty or all -inf input."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return -np.inf
    m = a.max()
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.exp(a - m).sum()))


@lru_cache(maxsize=8)
def quadrature_rule(size: int = QUAD_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and log-weights on (0, 1)."""
    x, w = roots_legendre(size)
    nodes = 0.5 * (x + 1.0)
    logw = np.log(0.5 * w)
    nodes.setflags(write=False)
    logw.setflags(write=False)
    return nodes, logw


@lru_cache(maxsize=64)
def _log_prior_on_nodes(prior: PriorSpec, size: int) -> tuple[np.ndarray, float]:
    nodes, logw = quadrature_rule(size)
    with np.errstate(divide="ignore"):
        logg = np.log(np.asarray(prior.density(nodes), dtype=float))
    if not np.all(np.isfinite(logg) | (logg == -np.inf)):
        raise ValueError("prior density is not finite on the quadrature nodes")
    log_norm = float(logsumexp(logw + logg))
    if not np.isfinite(log_norm):
        raise ValueError("prior density is not integrable on the quadrature nodes")
    return logw + logg, log_norm


# ---------------------------------------------------------------------------
# Dirichlet and urn rules


def _history(history, space: StateSpace) -> np.ndarray:
    return space.check_points(np.asarray(history, dtype=np.int64).ravel()
                              if len(history) else np.zeros(0, dtype=np.int64))


def dirichlet_predictive(history, alpha: float, base: ProbabilityMeasure) -> ProbabilityMeasure:
    """(alpha * base + n * mu_n) / (alpha + n); the base itself when n = 0."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    x = _history(history, base.space)
    counts = np.bincount(x, minlength=base.space.size)
    return ProbabilityMeasure.finite(base.space, (alpha * base.masses + counts) / (alpha + x.size))


def urn_predictive(history_y, history_z, alpha: float, base: ProbabilityMeasure) -> ProbabilityMeasure:
    """Weighted-count rule: (alpha * base(B) + sum Z_i 1[Y_i in B]) / (alpha + sum Z_i)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    y = _history(history_y, base.space)
    z = np.asarray(history_z, dtype=float).ravel()
    if y.size != z.size:
        raise ValueError("Y and Z histories differ in length")
    if z.size and not z.min() > 0:
        raise ValueError("urn weights must be positive")
    s = np.bincount(y, weights=z, minlength=base.space.size)
    return ProbabilityMeasure.finite(base.space, (alpha * base.masses + s) / (alpha + z.sum()))


# ---------------------------------------------------------------------------
# binary mixtures


@dataclass(frozen=True)
class PosteriorState:
    """Posterior of theta after r ones in n binary trials.

    ``atom_log_weights`` and ``continuous_log_weight`` are unnormalized log
    posterior weights; ``continuous_mean`` is the posterior mean of theta
    within the continuous part.
    """

    r: int
    n: int
    atoms: np.ndarray
    atom_log_weights: np.ndarray
    continuous_log_weight: float
    continuous_mean: float

    @property
    def log_normalizer(self) -> float:
        return float(logsumexp(np.append(self.atom_log_weights, self.continuous_log_weight)))

    def weights(self) -> tuple[np.ndarray, float]:
        """Normalized posterior masses of the atoms and of the continuous part."""
        lz = self.log_normalizer
        if not np.isfinite(lz):
            raise ValueError("prior-inconsistent history: zero posterior normalizer")
        return np.exp(self.atom_log_weights - lz), float(np.exp(self.continuous_log_weight - lz))

    def mean(self) -> float:
        w_atoms, w_cont = self.weights()
        m = float(np.dot(w_atoms, self.atoms))
        if w_cont > 0:
            m += w_cont * self.continuous_mean
        return min(max(m, 0.0), 1.0)


def _binary_counts(history) -> tuple[int, int]:
    x = _history(history, BINARY)
    return int(x.sum()), int(x.size)


def posterior_state(prior: PriorSpec, r: int, n: int, grid: int = QUAD_NODES) -> PosteriorState:
    if prior.dirichlet is not None:
        raise ValueError("binary posterior needs a binary prior")
    if not 0 <= r <= n:
        raise ValueError("need 0 <= r <= n")
    atoms = np.asarray(prior.atoms, dtype=float)
    with np.errstate(divide="ignore"):
        lw_atoms = np.log(np.asarray(prior.atom_masses, dtype=float)) \
            + xlogy(r, atoms) + xlogy(n - r, 1.0 - atoms)
    lw_cont, cont_mean = -np.inf, 0.0
    if prior.beta is not None:
        u1, u2 = prior.beta
        lw_cont = np.log(prior.continuous_mass) + betaln(u1 + r, u2 + n - r) - betaln(u1, u2)
        cont_mean = (u1 + r) / (u1 + u2 + n)
    elif prior.density is not None:
        log_prior, log_norm = _log_prior_on_nodes(prior, grid)
        nodes, _ = quadrature_rule(grid)
        lw = log_prior + xlogy(r, nodes) + xlogy(n - r, 1.0 - nodes)
        lse = logsumexp(lw)
        if not np.isfinite(lse):
            raise ValueError("likelihood underflows on every quadrature node")
        lw_cont = np.log(prior.continuous_mass) + lse - log_norm
        cont_mean = float(np.dot(np.exp(lw - lse), nodes))
    return PosteriorState(r, n, atoms, lw_atoms, float(lw_cont), float(cont_mean))


def mixture_predictive(history, prior: PriorSpec, grid: int = QUAD_NODES) -> ProbabilityMeasure:
    """Posterior predictive of a mixture model; for binary data the mass of
    {1} is the posterior mean of theta."""
    if prior.dirichlet is not None:
        space = StateSpace.finite(prior.alphabet_size)
        x = _history(history, space)
        params = np.asarray(prior.dirichlet)
        counts = np.bincount(x, minlength=space.size)
        return ProbabilityMeasure.finite(space, (params + counts) / (params.sum() + x.size))
    r, n = _binary_counts(history)
    p1 = posterior_state(prior, r, n, grid).mean()
    return ProbabilityMeasure.finite(BINARY, [1.0 - p1, p1])


def posterior_atom_mass(history, prior: PriorSpec, atom: float) -> float:
    """Posterior probability that theta equals the prior atom ``atom``."""
    atoms = np.asarray(prior.atoms, dtype=float)
    hit = np.flatnonzero(np.isclose(atoms, atom, rtol=0.0, atol=ATOM_ATOL)
                         & (np.asarray(prior.atom_masses) > 0))
    if hit.size == 0:
        raise ValueError(f"{atom!r} is not an atom of the prior")
    r, n = _binary_counts(history)
    w_atoms, _ = posterior_state(prior, r, n).weights()
    return float(w_atoms[hit].sum())


# ---------------------------------------------------------------------------
# kernels bound to a model


@dataclass(frozen=True, eq=False)
class PredictiveKernel:
    """A history -> predictive rule bound to one model."""

    kind: str
    alpha: float | None = None
    base: ProbabilityMeasure | None = None
    prior: PriorSpec | None = None

    @classmethod
    def dirichlet(cls, alpha: float, base: ProbabilityMeasure) -> "PredictiveKernel":
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        return cls("dirichlet", alpha=float(alpha), base=base)

    @classmethod
    def mixture(cls, prior: PriorSpec) -> "PredictiveKernel":
        return cls("mixture", prior=prior)

    @classmethod
    def urn(cls, alpha: float, base: ProbabilityMeasure) -> "PredictiveKernel":
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        return cls("urn", alpha=float(alpha), base=base)

    @property
    def space(self) -> StateSpace:
        if self.kind == "mixture":
            return StateSpace.finite(self.prior.alphabet_size)
        return self.base.space

    @property
    def mode(self) -> str:
        if self.kind != "mixture":
            return "closed-form"
        kinds = []
        if self.prior.atoms:
            kinds.append("atoms")
        cont = self.prior.continuous_kind
        if cont in ("beta", "dirichlet"):
            kinds.append("conjugate")
        elif cont == "density":
            kinds.append("quadrature")
        return "+".join(kinds)

    def predict(self, path: PathSample, n: int) -> ProbabilityMeasure:
        """Predictive measure after the first ``n`` observations of ``path``."""
        if n > path.horizon:
            raise ValueError("prefix longer than the path")
        prefix = path.observations[:n]
        if self.kind == "dirichlet":
            return dirichlet_predictive(prefix, self.alpha, self.base)
        if self.kind == "urn":
            if path.weights is None:
                raise ValueError("urn kernel needs a path with weights")
            return urn_predictive(prefix, path.weights[:n], self.alpha, self.base)
        return mixture_predictive(prefix, self.prior)


def dirichlet_gap(history, alpha: float, base: ProbabilityMeasure, set_class) -> tuple[float, float]:
    """(||mu_n - a_n||, alpha ||mu_n - base|| / (alpha + n)) for a nonempty history."""
    emp = empirical_measure(history, base.space)
    a_n = dirichlet_predictive(history, alpha, base)
    lhs = sup_distance(emp, a_n, set_class)
    rhs = alpha * sup_distance(emp, base, set_class) / (alpha + emp.n)
    return lhs, rhs

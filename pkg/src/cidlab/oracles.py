"""Slow, independent reference computations used to check the fast paths.

Nothing here shares code with the production kernels: integrals are plain
midpoint Riemann sums with direct products, expectations are explicit
enumerations, and sups are grid scans or subset enumerations.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .models import PriorSpec

RIEMANN_POINTS = 1_000_000


def _riemann_grid(points: int = RIEMANN_POINTS) -> np.ndarray:
    return (np.arange(points) + 0.5) / points


def _continuous_density(prior: PriorSpec, t: np.ndarray) -> np.ndarray:
    if prior.beta is not None:
        a, b = prior.beta
        g = t ** (a - 1.0) * (1.0 - t) ** (b - 1.0)
    elif prior.density is not None:
        g = np.asarray(prior.density(t), dtype=float)
    else:
        return np.zeros_like(t)
    return g / g.mean()  # normalize on the same grid


@lru_cache(maxsize=4096)
def marginal_likelihood(prior: PriorSpec, r: int, n: int, points: int = RIEMANN_POINTS) -> float:
    """P(a given binary sequence with r ones in n), by direct summation."""
    total = sum(m * a ** r * (1.0 - a) ** (n - r) for a, m in zip(prior.atoms, prior.atom_masses))
    if prior.continuous_mass > 0:
        t = _riemann_grid(points)
        g = _continuous_density(prior, t)
        total += prior.continuous_mass * float(np.mean(g * t ** r * (1.0 - t) ** (n - r)))
    return float(total)


def brute_force_predictive(history, prior: PriorSpec, points: int = RIEMANN_POINTS) -> float:
    """Posterior mean of theta as a ratio of two Riemann-sum integrals."""
    x = np.asarray(history, dtype=np.int64)
    r, n = int(x.sum()), int(x.size)
    return marginal_likelihood(prior, r + 1, n + 1, points) / marginal_likelihood(prior, r, n, points)


def brute_force_conditional_w(history, prior: PriorSpec, horizon: int = 8,
                              points: int = RIEMANN_POINTS) -> float:
    """E(W_n{1} | X_1..X_n) computed by enumerating every binary continuation.

    The limit frequency is replaced by the frequency of the next ``horizon``
    observations; both have the same conditional mean, so the average of
    sqrt(n) (mu_n{1} - future frequency) over all 2^horizon continuations,
    weighted by their exact conditional probabilities, is E(W_n{1} | G_n).
    """
    x = np.asarray(history, dtype=np.int64)
    r, n = int(x.sum()), int(x.size)
    mu_n = r / n
    # the marginal likelihood depends on a sequence only through (ones, length)
    ahead = {k: marginal_likelihood(prior, r + k, n + horizon, points) for k in range(horizon + 1)}
    base = marginal_likelihood(prior, r, n, points)
    acc = 0.0
    weight = 0.0
    for cont in itertools.product((0, 1), repeat=horizon):
        k = sum(cont)
        p = ahead[k] / base
        acc += p * np.sqrt(n) * (mu_n - k / horizon)
        weight += p
    return acc / weight


def all_histories(n: int):
    """Every binary history of length n, as int64 arrays."""
    for h in itertools.product((0, 1), repeat=n):
        yield np.array(h, dtype=np.int64)


def grid_scan_half_line_sup(p_cdf, q_cdf, lo: float, hi: float, step: float = 1e-3,
                            atoms=()) -> float:
    """sup_t |P(-inf, t] - Q(-inf, t]| over a dense rational grid plus points
    just left of and at each atom."""
    t = np.arange(lo, hi + step / 2, step)
    extra = []
    for a in atoms:
        extra.extend([a, np.nextafter(a, -np.inf)])
    t = np.concatenate([t, np.asarray(extra, dtype=float)])
    return float(np.max(np.abs(np.asarray(p_cdf(t)) - np.asarray(q_cdf(t)))))


def enumerate_subset_sup(p, q) -> float:
    """sup over every subset of a finite alphabet of |p(B) - q(B)|, by enumeration."""
    d = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    best = 0.0
    for mask in itertools.product((False, True), repeat=d.size):
        best = max(best, abs(float(d[list(mask)].sum())))
    return best

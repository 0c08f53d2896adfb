"""Empirical processes along sample paths, and samplers for their limits.

For a set B and checkpoint n:

    W_n(B) = sqrt(n) (mu_n(B) - mu(B))      mu = limit of the empirical measure
    C_n(B) = sqrt(n) (mu_n(B) - a_n(B))     a_n = predictive
    D_n(B) = sqrt(n) C_n(B)

Sup-norms are taken over a :class:`~cidlab.measure.SetClass`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measure import MAX_ENUMERABLE_LABELS, SetClass, empirical_measure
from .models import PathSample, WeightLaw
from .predictive import PredictiveKernel

DEFAULT_CHECKPOINTS = tuple(2 ** k for k in range(4, 13))
PLUG_IN_FACTOR = 16


@dataclass(frozen=True)
class LimitOracle:
    """Where mu comes from: the latent theta, or the empirical measure at a
    long horizon (``plug-in``)."""

    mode: str
    horizon: int | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "plug-in"):
            raise ValueError(f"unknown oracle mode {self.mode!r}")
        if self.mode == "plug-in" and (self.horizon is None or self.horizon < 1):
            raise ValueError("plug-in oracle needs a positive horizon")

    @classmethod
    def exact(cls) -> "LimitOracle":
        return cls("exact")

    @classmethod
    def plug_in(cls, horizon: int) -> "LimitOracle":
        return cls("plug-in", int(horizon))

    def limit_masses(self, path: PathSample, checkpoints) -> np.ndarray:
        if self.mode == "exact":
            if path.theta is None:
                raise ValueError("exact oracle needs a latent theta on the path")
            return np.asarray(path.theta, dtype=float)
        n_max = int(max(checkpoints))
        if self.horizon < PLUG_IN_FACTOR * n_max:
            raise ValueError(f"plug-in horizon {self.horizon} < {PLUG_IN_FACTOR} x largest checkpoint {n_max}")
        if path.horizon < self.horizon:
            raise ValueError(f"path has {path.horizon} observations, oracle needs {self.horizon}")
        emp = empirical_measure(path.observations[: self.horizon], path.space)
        return emp.counts / emp.n


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Checkpointed empirical processes of one path.

    ``c_values``/``w_values`` hold one column per class member (None when the
    class is too large to enumerate). ``mu_n`` and ``a_n`` are the label
    masses at each checkpoint and ``mu`` the limit masses used for W_n.
    """

    checkpoints: np.ndarray
    c_values: np.ndarray | None
    w_values: np.ndarray | None
    c_norm: np.ndarray
    w_norm: np.ndarray
    d_norm: np.ndarray
    mu_n: np.ndarray
    a_n: np.ndarray
    mu: np.ndarray
    oracle_mode: str
    path_id: tuple | None = None

    @property
    def d_values(self) -> np.ndarray | None:
        if self.c_values is None:
            return None
        return np.sqrt(self.checkpoints)[:, None] * self.c_values


def compute_trajectory(path: PathSample, kernel: PredictiveKernel, oracle: LimitOracle,
                       set_class: SetClass, checkpoints=DEFAULT_CHECKPOINTS) -> Trajectory:
    cps = np.asarray(sorted(int(n) for n in checkpoints), dtype=np.int64)
    if cps.size == 0 or cps[0] < 1:
        raise ValueError("checkpoints must be positive")
    if cps[-1] > path.horizon:
        raise ValueError("checkpoint beyond the path length")
    if kernel.space != path.space:
        raise ValueError("kernel and path live on different spaces")
    set_class.check_space(path.space)
    mu = oracle.limit_masses(path, cps)

    k = path.space.size
    mu_n = np.empty((cps.size, k))
    a_n = np.empty((cps.size, k))
    for i, n in enumerate(cps):
        mu_n[i] = np.bincount(path.observations[:n], minlength=k) / n
        a_n[i] = kernel.predict(path, int(n)).masses
    root = np.sqrt(cps.astype(float))
    c_norm = root * np.array([set_class.signed_sup(d) for d in mu_n - a_n])
    w_norm = root * np.array([set_class.signed_sup(d) for d in mu_n - mu])
    c_values = w_values = None
    if set_class.kind != "all-subsets" or k <= MAX_ENUMERABLE_LABELS:
        mat = set_class.member_matrix(path.space)
        c_values = root[:, None] * ((mu_n - a_n) @ mat.T)
        w_values = root[:, None] * ((mu_n - mu) @ mat.T)
    return Trajectory(cps, c_values, w_values, c_norm, w_norm, root * c_norm,
                      mu_n, a_n, mu, oracle.mode, path.seed)


# ---------------------------------------------------------------------------
# limit laws


def sample_limit_cor4(theta: float, atoms, rng: np.random.Generator) -> float:
    """One draw from N(0, theta(1-theta)) if theta is a prior atom, else 0."""
    theta = float(theta)
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    atoms = np.asarray(atoms, dtype=float)
    if atoms.size == 0 or not np.any(np.isclose(atoms, theta, rtol=0.0, atol=1e-12)):
        return 0.0
    return float(rng.normal(0.0, np.sqrt(theta * (1.0 - theta))))


def brownian_bridge_at(times, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Exact draws of a standard Brownian bridge G at ``times`` in [0, 1].

    Uses the Cholesky factor of min(s,t) - st on the distinct interior
    times; G(0) = G(1) = 0 and repeated times share one value.
    """
    t = np.asarray(times, dtype=float)
    if t.size and (t.min() < 0 or t.max() > 1):
        raise ValueError("bridge times must lie in [0, 1]")
    shape = (1 if size is None else int(size), t.size)
    out = np.zeros(shape)
    inner = np.unique(t[(t > 0) & (t < 1)])
    if inner.size:
        cov = np.minimum.outer(inner, inner) - np.outer(inner, inner)
        chol = np.linalg.cholesky(cov)
        g = rng.standard_normal((shape[0], inner.size)) @ chol.T
        pos = np.searchsorted(inner, t)
        mask = (t > 0) & (t < 1)
        out[:, mask] = g[:, pos[mask]]
    return out[0] if size is None else out


@dataclass(frozen=True, eq=False)
class LimitLawSample:
    values: np.ndarray
    sup: np.ndarray | float


def sample_bridge_limit(mu_masses, weights: WeightLaw, rng: np.random.Generator,
                        size: int | None = None) -> LimitLawSample:
    """Scaled Brownian-bridge increments over consecutive masses of a disjoint
    family, and their largest absolute value."""
    m = np.asarray(mu_masses, dtype=float)
    if m.size == 0 or m.min() < 0:
        raise ValueError("masses must be nonnegative")
    if m.sum() > 1.0 + 1e-12:
        raise ValueError("masses of a disjoint family sum to more than 1")
    t = np.minimum(np.concatenate([[0.0], np.cumsum(m)]), 1.0)
    g = brownian_bridge_at(t, rng, size=1 if size is None else size)
    vals = weights.limit_scale * np.diff(g, axis=1)
    vals[:, m == 0] = 0.0
    sups = np.abs(vals).max(axis=1)
    if size is None:
        return LimitLawSample(vals[0], float(sups[0]))
    return LimitLawSample(vals, sups)

"""Statistical verification instruments.

Every check returns a :class:`TestReport` whose verdict is derived from one
primary statistic and a threshold, so a report can never disagree with its
own numbers.
"""
from __future__ import annotations

import math
import operator
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import xlogy

from .measure import ProbabilityMeasure
from .models import PriorSpec, WeightLaw, replication_rng, sample_urn_batch
from .predictive import quadrature_rule

_OPS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}


@dataclass
class TestReport:
    name: str
    statistic: float
    threshold: float
    direction: str = "<"
    sample_sizes: dict = field(default_factory=dict)
    standard_errors: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    context: str = ""
    warnings: list = field(default_factory=list)
    passed: bool = field(init=False)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.direction not in _OPS:
            raise ValueError(f"bad direction {self.direction!r}")
        if any(se < 0 for se in self.standard_errors.values()):
            raise ValueError("negative standard error")
        self.passed = bool(_OPS[self.direction](self.statistic, self.threshold))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "statistic": _jsonable(self.statistic),
            "direction": self.direction,
            "threshold": _jsonable(self.threshold),
            "sample_sizes": _jsonable(self.sample_sizes),
            "standard_errors": _jsonable(self.standard_errors),
            "details": _jsonable(self.details),
            "context": self.context,
            "warnings": list(self.warnings),
        }

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: {self.statistic:.6g} {self.direction} {self.threshold:.6g}"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov


def ks_statistic(sample, cdf: Callable) -> float:
    """One-sample KS distance between the sample's empirical CDF and ``cdf``."""
    x = np.sort(np.asarray(sample, dtype=float))
    m = x.size
    if m == 0:
        raise ValueError("KS statistic of an empty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, m + 1)
    d = np.maximum(np.abs(i / m - f), np.abs((i - 1) / m - f))
    return float(min(d.max(), 1.0))


def ks_two_sample(a, b) -> float:
    """Two-sample KS distance sup_t |F_a(t) - F_b(t)|; ties are handled exactly."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("KS statistic of an empty sample")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.abs(fa - fb).max())


def normal_cdf(x):
    from scipy.special import ndtr

    return ndtr(x)


# ---------------------------------------------------------------------------
# stable convergence


MIN_EVENT_REPS = 200


def stable_convergence_probe(values, events, limit_draws, conditional_limit_draws=None,
                             threshold: float = 0.06, name: str = "stable-probe") -> TestReport:
    """Compare the law of ``values`` given H with the limit law given H.

    ``limit_draws`` are per-replication draws from the random limit; the
    conditional comparison uses ``conditional_limit_draws`` when given (e.g.
    draws under the size-biased prior), else the limit draws of replications
    in H. The unconditional distance is reported alongside.
    """
    values = np.asarray(values, dtype=float)
    events = np.asarray(events, dtype=bool)
    limit_draws = np.asarray(limit_draws, dtype=float)
    if values.shape != events.shape:
        raise ValueError("values and events differ in shape")
    hits = int(events.sum())
    if hits < MIN_EVENT_REPS:
        raise ValueError(f"only {hits} replications in H, need {MIN_EVENT_REPS}")
    if conditional_limit_draws is None:
        if limit_draws.shape != values.shape:
            raise ValueError("per-replication limit draws must align with values")
        conditional_limit_draws = limit_draws[events]
    cond = ks_two_sample(values[events], conditional_limit_draws)
    uncond = ks_two_sample(values, limit_draws)
    return TestReport(
        name, cond, threshold, "<",
        sample_sizes={"replications": values.size, "in_event": hits,
                      "limit_draws": int(np.size(conditional_limit_draws))},
        details={"conditional_ks": cond, "unconditional_ks": uncond},
        context="two-sample KS of the statistic given H against the limit law given H",
    )


# ---------------------------------------------------------------------------
# uniform integrability


@dataclass
class UITable:
    ns: list
    thresholds: list
    tail_means: np.ndarray      # shape (len(ns), len(thresholds))
    standard_errors: np.ndarray
    decreasing_in_c: bool

    def max_over_n(self) -> np.ndarray:
        return self.tail_means.max(axis=0)


def uniform_integrability_table(samples_by_n: dict, thresholds) -> UITable:
    """Tail expectations E[X 1{X > c}] for each n and threshold c."""
    ns = sorted(samples_by_n)
    cs = [float(c) for c in thresholds]
    means = np.zeros((len(ns), len(cs)))
    ses = np.zeros_like(means)
    for i, n in enumerate(ns):
        x = np.asarray(samples_by_n[n], dtype=float)
        if x.size == 0:
            raise ValueError(f"empty sample at n={n}")
        for j, c in enumerate(cs):
            t = np.where(x > c, x, 0.0)
            means[i, j] = t.mean()
            ses[i, j] = t.std(ddof=1) / np.sqrt(x.size) if x.size > 1 else 0.0
    top = means.max(axis=0)
    order = np.argsort(cs)
    decreasing = bool(np.all(np.diff(top[order]) <= 0))
    return UITable(ns, cs, means, ses, decreasing)


# ---------------------------------------------------------------------------
# rates and a.s. convergence


def loglog_rate(ns, means) -> tuple[float, float]:
    """Least-squares slope and intercept of log(mean) against log(n)."""
    ns = np.asarray(ns, dtype=float)
    means = np.asarray(means, dtype=float)
    if ns.size < 3 or ns.size != means.size:
        raise ValueError("need at least 3 matching checkpoints")
    if np.any(means <= 0) or np.any(ns <= 0):
        raise ValueError("log-log regression needs positive values")
    slope, intercept = np.polyfit(np.log(ns), np.log(means), 1)
    return float(slope), float(intercept)


def oscillation(values: np.ndarray, checkpoints, n: int) -> np.ndarray:
    """max over checkpoints m in [n, 4n] of |v_m - v_n|, per path."""
    cps = np.asarray(checkpoints)
    i0 = int(np.flatnonzero(cps == n)[0])
    window = (cps >= n) & (cps <= 4 * n)
    return np.abs(values[:, window] - values[:, [i0]]).max(axis=1)


def as_convergence_diagnostic(norms, checkpoints, threshold: float = 0.85,
                              min_paths: int = 100, name: str = "as-convergence") -> TestReport:
    """Falsifier for a.s. convergence of per-path ||D_n|| trajectories.

    Compares the oscillation over [n, 4n] at the first checkpoint with the
    one at the last checkpoint whose window still fits; converging paths
    should mostly oscillate less late than early. Ties count as success.
    Simulation cannot prove a.s. convergence, only fail to refute it.
    """
    v = np.asarray(norms, dtype=float)
    cps = np.asarray(checkpoints, dtype=np.int64)
    if v.ndim != 2 or v.shape[1] != cps.size:
        raise ValueError("norms must be (paths, checkpoints)")
    if v.shape[0] < min_paths:
        raise ValueError(f"need at least {min_paths} paths")
    if cps.size < 4:
        raise ValueError("need at least 4 checkpoints")
    n_small = int(cps[0])
    fits = cps[4 * cps <= cps[-1]]
    if fits.size == 0 or fits[-1] < 4 * n_small:
        raise ValueError("checkpoint range too short for two disjoint [n, 4n] windows")
    n_large = int(fits[-1])
    early = oscillation(v, cps, n_small)
    late = oscillation(v, cps, n_large)
    success = late <= early
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(early > 0, late / early, np.where(late > 0, np.inf, 0.0))
    frac = float(success.mean())
    return TestReport(
        name, frac, threshold, ">=",
        sample_sizes={"paths": v.shape[0]},
        standard_errors={"fraction": float(np.sqrt(frac * (1 - frac) / v.shape[0]))},
        details={"n_small": n_small, "n_large": n_large,
                 "median_oscillation_ratio": float(np.median(ratio))},
        context="fraction of paths oscillating less over [n_large, 4 n_large] than over [n_small, 4 n_small]",
    )


# ---------------------------------------------------------------------------
# density-gap hypothesis


@dataclass(frozen=True)
class GapEstimate:
    """Monte Carlo estimate of E0(f^2) - E0(E0(f|G_n)^2).

    ``estimate`` averages the squared martingale residual (f - E0(f|G_n))^2,
    which has the same expectation; ``difference_estimate`` is the literal
    difference of the two second moments.
    """

    n: int
    estimate: float
    se: float
    difference_estimate: float
    difference_se: float
    reps: int

    @property
    def n_gap(self) -> float:
        return self.n * self.estimate

    @property
    def n_gap_se(self) -> float:
        return self.n * self.se


def posterior_expectation_table(h: Callable, u1: float, u2: float, n: int) -> np.ndarray:
    """E0(h(V) | r ones in n) for r = 0..n under a Beta(u1, u2) prior."""
    nodes, logw = quadrature_rule()
    hv = np.asarray(h(nodes), dtype=float)
    if not np.all(np.isfinite(hv)):
        raise ValueError("h is not finite on the quadrature nodes")
    base = logw + xlogy(u1 - 1.0, nodes) + xlogy(u2 - 1.0, 1.0 - nodes)
    r = np.arange(n + 1)[:, None]
    lw = base[None, :] + xlogy(r, nodes[None, :]) + xlogy(n - r, 1.0 - nodes[None, :])
    lw -= lw.max(axis=1, keepdims=True)
    w = np.exp(lw)
    return (w @ hv) / w.sum(axis=1)


def theorem2_gap(h: Callable, u1: float, u2: float, n: int, reps: int, seed: int) -> GapEstimate:
    """Residual variance of f = h(V) given n observations under the reference
    law where V ~ Beta(u1, u2) and the data are i.i.d. Bernoulli(V).

    ``h`` is normalized internally so that E0 h(V) = 1.
    """
    if n < 1 or reps < 2:
        raise ValueError("need n >= 1 and reps >= 2")
    prior_mean = posterior_expectation_table(h, u1, u2, 0)[0]
    if not np.isfinite(prior_mean) or prior_mean <= 0:
        raise ValueError("h is not integrable against the reference prior")
    table = posterior_expectation_table(h, u1, u2, n) / prior_mean
    rng = replication_rng(seed, n)
    v = rng.beta(u1, u2, size=reps)
    r = rng.binomial(n, v)
    f = np.asarray(h(v), dtype=float) / prior_mean
    m = table[r]
    resid = (f - m) ** 2
    diff = f ** 2 - m ** 2
    return GapEstimate(n, float(resid.mean()), float(resid.std(ddof=1) / np.sqrt(reps)),
                       float(diff.mean()), float(diff.std(ddof=1) / np.sqrt(reps)), reps)


# ---------------------------------------------------------------------------
# conditional identity in distribution


def cid_diagnostic(alpha: float, base: ProbabilityMeasure, weights: WeightLaw, n: int,
                   reps: int, seed: int, target_label: int = 1, min_hits: int = 100,
                   name: str = "cid") -> TestReport:
    """Compare P(Y_{n+1} in B | bucket) with P(Y_{n+2} in B | bucket), where
    buckets are the observed Y-prefixes of length n and B = {target_label}.

    The statistic is the largest |difference| / SE over buckets; it passes
    below 3.
    """
    rng = replication_rng(seed, n)
    y, _ = sample_urn_batch(alpha, base, weights, n + 2, reps, rng)
    if n == 0:
        keys = np.zeros(reps, dtype=np.int64)
    else:
        k = base.space.size
        keys = (y[:, :n] * (k ** np.arange(n))).sum(axis=1)
    d = (y[:, n] == target_label).astype(float) - (y[:, n + 1] == target_label).astype(float)
    worst = 0.0
    buckets = {}
    notes = []
    for key in np.unique(keys):
        sel = keys == key
        hits = int(sel.sum())
        if hits < min_hits:
            notes.append(f"bucket {int(key)} skipped: {hits} hits")
            continue
        diff = float(d[sel].mean())
        se = float(d[sel].std(ddof=1) / np.sqrt(hits))
        z = abs(diff) / se if se > 0 else (0.0 if diff == 0 else math.inf)
        buckets[str(int(key))] = {"hits": hits, "difference": diff, "se": se, "z": z}
        worst = max(worst, z)
    if not buckets:
        raise ValueError("every bucket had too few hits")
    for msg in notes:
        warnings.warn(msg)
    return TestReport(name, worst, 3.0, "<", sample_sizes={"replications": reps, "n": n},
                      details={"buckets": buckets}, warnings=notes,
                      context="max over prefix buckets of |P(Y_{n+1} in B) - P(Y_{n+2} in B)| / SE")


# ---------------------------------------------------------------------------
# urn variance


def variance_ratio_check(c_values, mu_hat, weights: WeightLaw, rel_tol: float = 0.30,
                         abs_tol: float = 0.01, bins: int = 5,
                         name: str = "variance-ratio") -> TestReport:
    """Fit E[C_n(B)^2] = ratio * mu(B)(1 - mu(B)) and compare with var Z / (E Z)^2.

    The pooled fit is sum C^2 / sum mu(1-mu); per-bin ratios over quantile
    bins of mu(1-mu) are reported as a shape check.
    """
    c = np.asarray(c_values, dtype=float)
    mu = np.asarray(mu_hat, dtype=float)
    if c.shape != mu.shape or c.size < 2:
        raise ValueError("need matching C_n and mu samples")
    x = mu * (1.0 - mu)
    if x.sum() <= 0:
        raise ValueError("all plug-in masses are degenerate")
    y = c ** 2
    ratio = float(y.sum() / x.sum())
    # delta-method SE of a ratio of sums
    resid = y - ratio * x
    se = float(np.sqrt(np.sum(resid ** 2)) / x.sum())
    target = weights.variance / weights.mean ** 2
    notes = []
    edges = np.quantile(x, np.linspace(0, 1, bins + 1))
    if np.unique(edges).size < bins + 1:
        notes.append("degenerate spread of mu(1-mu); single bin only")
        binned = [ratio]
    else:
        idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, bins - 1)
        binned = [float(y[idx == b].sum() / x[idx == b].sum()) for b in range(bins)]
    if target > 0:
        stat, thr = abs(ratio / target - 1.0), rel_tol
        ctx = "relative error of the fitted ratio"
    else:
        stat, thr = ratio, abs_tol
        ctx = "fitted ratio against a zero target"
    return TestReport(name, stat, thr, "<=", sample_sizes={"replications": c.size},
                      standard_errors={"ratio": se},
                      details={"ratio": ratio, "target": target, "binned_ratios": binned},
                      warnings=notes, context=ctx)


def paired_mean_difference(a, b) -> tuple[float, float]:
    """Mean of a - b and its standard error."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(d.mean()), float(d.std(ddof=1) / np.sqrt(d.size))


def mean_and_se(x, axis=0) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    m = x.mean(axis=axis)
    n = x.shape[axis]
    se = x.std(axis=axis, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(m)
    return m, se


def size_biased_limit_draws(prior: PriorSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draws from the mixed limit of C_n{1} given X_1 = 1 (binary mixtures)."""
    from .processes import sample_limit_cor4

    sb = prior.size_biased()
    atoms = prior.atom_set
    return np.array([sample_limit_cor4(sb.sample_theta(rng), atoms, rng) for _ in range(count)])


def unconditional_limit_draws(prior: PriorSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    from .processes import sample_limit_cor4

    atoms = prior.atom_set
    return np.array([sample_limit_cor4(prior.sample_theta(rng), atoms, rng) for _ in range(count)])


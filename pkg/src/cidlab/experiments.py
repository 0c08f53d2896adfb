"""Experiment runner, verification suites and the built-in catalog.

A run simulates ``replications`` paths of the configured model (replication
``r`` owns stream ``(seed, r)``), then hands them to each selected suite.
Suites emit long-format rows and :class:`~cidlab.stats.TestReport` objects.
Replications may run on several threads; results are always reduced in
replication order, so artifacts do not depend on the worker count.
"""
from __future__ import annotations

import json
import os
import tempfile
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .config import ExperimentConfig, build_base, build_prior, build_weights
from .measure import SetClass
from .models import (PriorSpec, named_density, replication_rng, sample_exchangeable,
                     sample_ferguson_dirichlet, sample_generalized_polya, substream)
from .oracles import brute_force_conditional_w
from .predictive import PredictiveKernel, dirichlet_gap, posterior_state
from .processes import brownian_bridge_at, compute_trajectory
from .stats import (TestReport, as_convergence_diagnostic, cid_diagnostic, ks_statistic,
                    ks_two_sample, loglog_rate, mean_and_se, normal_cdf, size_biased_limit_draws,
                    stable_convergence_probe, theorem2_gap, unconditional_limit_draws,
                    uniform_integrability_table, variance_ratio_check)

WORKERS_ENV = "CIDLAB_WORKERS"


def worker_count(requested: int | None = None) -> int:
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(WORKERS_ENV)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, int(n))


# ---------------------------------------------------------------------------
# run state


@dataclass
class TrajectoryBatch:
    """Per-replication trajectory arrays, indexed [rep, checkpoint(, member)]."""

    checkpoints: np.ndarray
    c_norm: np.ndarray
    w_norm: np.ndarray
    d_norm: np.ndarray
    c_values: np.ndarray | None
    w_values: np.ndarray | None
    mu_n: np.ndarray
    mu: np.ndarray
    first: np.ndarray

    @property
    def reps(self) -> int:
        return self.c_norm.shape[0]


class RunContext:
    def __init__(self, cfg: ExperimentConfig, workers: int):
        self.cfg = cfg
        self.workers = workers

    def map_reps(self, fn: Callable[[int], object], reps: int) -> list:
        """fn(rep) for rep = 0..reps-1, results in replication order."""
        if self.workers == 1 or reps == 1:
            return [fn(r) for r in range(reps)]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(fn, range(reps)))

    def stream(self, suite: str, *key: int) -> np.random.Generator:
        """Suite-private stream, disjoint from the replication streams."""
        tag = zlib.crc32(suite.encode()) & 0x7FFFFFFF
        return substream(self.cfg.seed, tag, *key)

    def simulate(self, rep: int, model: dict | None = None, horizon: int | None = None,
                 rng: np.random.Generator | None = None):
        model = self.cfg.model if model is None else model
        horizon = self.cfg.horizon if horizon is None else horizon
        rng = replication_rng(self.cfg.seed, rep) if rng is None else rng
        return simulate_path(model, horizon, rng, seed=(self.cfg.seed, rep))

    @cached_property
    def trajectories(self) -> TrajectoryBatch:
        cfg = self.cfg
        kernel = cfg.kernel_obj()
        oracle = cfg.oracle_obj()
        sc = cfg.set_class_obj()

        def one(rep):
            path = self.simulate(rep)
            return path.observations[0], compute_trajectory(path, kernel, oracle, sc, cfg.checkpoints)

        out = self.map_reps(one, cfg.replications)
        trs = [t for _, t in out]
        stack = lambda name: np.stack([getattr(t, name) for t in trs])
        has_values = trs[0].c_values is not None
        return TrajectoryBatch(
            trs[0].checkpoints, stack("c_norm"), stack("w_norm"), stack("d_norm"),
            stack("c_values") if has_values else None, stack("w_values") if has_values else None,
            stack("mu_n"), stack("mu"), np.array([x for x, _ in out]))


def simulate_path(model: dict, horizon: int, rng: np.random.Generator, seed=None):
    kind = model["kind"]
    if kind == "exchangeable":
        return sample_exchangeable(build_prior(model["prior"]), horizon, rng, seed)
    base = build_base(model["base"])
    if kind == "ferguson-dirichlet":
        return sample_ferguson_dirichlet(model["alpha"], base, horizon, rng, seed)
    return sample_generalized_polya(model["alpha"], base, build_weights(model["weights"]),
                                    horizon, rng, seed)


@dataclass
class SuiteOutput:
    replication_rows: list = field(default_factory=list)  # (rep, n, stat, value)
    summary_rows: list = field(default_factory=list)      # (n, stat, mean, se, reps)
    reports: list = field(default_factory=list)


@dataclass
class RunResult:
    config: ExperimentConfig
    summary_rows: list
    replication_rows: list
    reports: list
    provenance: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def report(self, name: str) -> TestReport:
        for r in self.reports:
            if r.name == name:
                return r
        raise KeyError(name)


def _member_index(cfg: ExperimentConfig, label_set) -> int:
    """Column of a class member in the trajectory value arrays."""
    members = cfg.set_class_obj().members(cfg.space())
    return members.index(tuple(sorted(label_set)))


def _summary(out: SuiteOutput, ns, name: str, values: np.ndarray, per_rep: bool = True):
    """Append mean/SE rows over axis 0, and optionally every raw value."""
    m, se = mean_and_se(values)
    for j, n in enumerate(ns):
        out.summary_rows.append((int(n), name, float(m[j]), float(se[j]), values.shape[0]))
    if per_rep:
        for rep in range(values.shape[0]):
            for j, n in enumerate(ns):
                out.replication_rows.append((rep, int(n), name, float(values[rep, j])))


# ---------------------------------------------------------------------------
# suites


def suite_trajectories(ctx: RunContext) -> SuiteOutput:
    b = ctx.trajectories
    out = SuiteOutput()
    for name in ("c_norm", "w_norm", "d_norm"):
        _summary(out, b.checkpoints, name, getattr(b, name))
    return out


def suite_dirichlet_bound(ctx: RunContext) -> SuiteOutput:
    cfg = ctx.cfg
    if cfg.model["kind"] != "ferguson-dirichlet":
        raise ValueError("dirichlet-bound needs the ferguson-dirichlet model")
    alpha, base, sc = float(cfg.model["alpha"]), cfg.base(), cfg.set_class_obj()
    b = ctx.trajectories
    out = SuiteOutput()
    ns = b.checkpoints.astype(float)
    scaled = b.d_norm  # n ||mu_n - a_n||
    _summary(out, b.checkpoints, "n_gap", scaled)
    dist_nu = np.array([[sc.signed_sup(m - base.masses) for m in row] for row in b.mu_n])
    identity = np.abs(b.c_norm / np.sqrt(ns) - alpha * dist_nu / (alpha + ns)).max()
    out.reports.append(TestReport("path-bound", float(scaled.max() - alpha), 1e-12, "<=",
                                  sample_sizes={"replications": b.reps},
                                  details={"max_n_gap": float(scaled.max()), "alpha": alpha},
                                  context="max over paths and checkpoints of n||mu_n - a_n|| - alpha"))
    out.reports.append(TestReport("path-identity", float(identity), 1e-12, "<=",
                                  sample_sizes={"replications": b.reps},
                                  context="max |  ||mu_n - a_n|| - alpha ||mu_n - nu|| / (alpha + n) |"))

    # random histories over random alphabets, weights and lengths
    count = int(cfg.params.get("histories", 10_000))
    n_max = int(cfg.params.get("history_max", 4096))
    rng = ctx.stream("dirichlet-bound")
    worst_identity, worst_bound = 0.0, -np.inf
    for _ in range(count):
        k = int(rng.integers(2, 9))
        n = int(rng.integers(1, n_max + 1))
        a = float(rng.uniform(0.01, 50.0))
        nu = rng.dirichlet(np.ones(k))
        base_r = build_base(nu)
        hist = rng.integers(0, k, n)
        for set_class in (SetClass.all_subsets(), SetClass.singletons()):
            lhs, rhs = dirichlet_gap(hist, a, base_r, set_class)
            worst_identity = max(worst_identity, abs(lhs - rhs))
            worst_bound = max(worst_bound, n * lhs - a)
    out.reports.append(TestReport("random-history-identity", worst_identity, 1e-12, "<=",
                                  sample_sizes={"histories": count}))
    out.reports.append(TestReport("random-history-bound", float(worst_bound), 1e-12, "<=",
                                  sample_sizes={"histories": count},
                                  context="max of n||mu_n - a_n|| - alpha"))
    return out


def _standardized_terminal(ctx: RunContext, which: str) -> tuple[np.ndarray, np.ndarray]:
    b = ctx.trajectories
    col = _member_index(ctx.cfg, (1,))
    vals = (b.c_values if which == "c" else b.w_values)[:, -1, col]
    theta = b.mu[:, 1]
    sd = np.sqrt(theta * (1.0 - theta))
    keep = sd > 0
    return vals[keep] / sd[keep], keep


def suite_gaussian_branch(ctx: RunContext) -> SuiteOutput:
    """Standardized C_n{1} and W_n{1} at the last checkpoint against N(0, 1)."""
    thr = float(ctx.cfg.params.get("ks_threshold", 0.05))
    out = SuiteOutput()
    n = int(ctx.trajectories.checkpoints[-1])
    for which, name in (("c", "c-standardized-ks"), ("w", "w-standardized-ks")):
        z, keep = _standardized_terminal(ctx, which)
        ks = ks_statistic(z, normal_cdf)
        out.reports.append(TestReport(
            name, ks, thr, "<", sample_sizes={"replications": int(keep.size), "used": int(keep.sum()),
                                              "n": n},
            details={"mean": float(z.mean()), "variance": float(z.var())},
            context=f"one-sample KS of {which.upper()}_n{{1}} / sqrt(theta(1-theta)) against N(0,1)"))
    return out


def suite_rate(ctx: RunContext) -> SuiteOutput:
    b = ctx.trajectories
    target = float(ctx.cfg.params.get("slope", -0.5))
    tol = float(ctx.cfg.params.get("slope_tol", 0.15))
    m, se = mean_and_se(b.c_norm)
    slope, intercept = loglog_rate(b.checkpoints, m)
    return SuiteOutput(reports=[TestReport(
        "c-norm-slope", abs(slope - target), tol, "<=", sample_sizes={"replications": b.reps},
        standard_errors={f"mean_c_norm_{int(n)}": float(s) for n, s in zip(b.checkpoints, se)},
        details={"slope": slope, "intercept": intercept, "target": target},
        context="|log-log slope of mean ||C_n|| - target|")])


def suite_stable_probe(ctx: RunContext) -> SuiteOutput:
    cfg = ctx.cfg
    b = ctx.trajectories
    prior = cfg.prior()
    col = _member_index(cfg, (1,))
    values = b.c_values[:, -1, col]
    events = b.first == 1
    count = int(cfg.params.get("limit_draws", b.reps))
    cond = size_biased_limit_draws(prior, count, ctx.stream("stable-probe", 0))
    uncond = unconditional_limit_draws(prior, count, ctx.stream("stable-probe", 1))
    null = stable_convergence_probe(values, events, uncond, cond,
                                    threshold=float(cfg.params.get("ks_threshold", 0.06)),
                                    name="conditional-ks")
    contrast_ks = ks_two_sample(values[events], uncond)
    contrast = TestReport("mismatch-contrast", contrast_ks,
                          float(cfg.params.get("contrast_threshold", 0.10)), ">",
                          sample_sizes=null.sample_sizes,
                          context="KS of C_n given H against unconditional limit draws (power check)")
    return SuiteOutput(reports=[null, contrast])


def suite_as_convergence(ctx: RunContext) -> SuiteOutput:
    b = ctx.trajectories
    thr = float(ctx.cfg.params.get("as_threshold", 0.85))
    rep = as_convergence_diagnostic(b.d_norm, b.checkpoints, threshold=thr, name="as-diagnostic")
    cps = b.checkpoints.astype(float)
    rng = ctx.stream("as-convergence")
    divergent = np.sqrt(cps)[None, :] * (1.0 + 0.1 * rng.standard_normal((b.reps, cps.size)))
    ctrl = as_convergence_diagnostic(divergent, b.checkpoints, threshold=thr)
    control = TestReport("divergent-control", ctrl.statistic,
                         float(ctx.cfg.params.get("control_threshold", 0.2)), "<",
                         sample_sizes=ctrl.sample_sizes, details=ctrl.details,
                         context="diagnostic fraction on planted divergent paths sqrt(n)(1 + noise)")
    return SuiteOutput(reports=[rep, control])


def suite_submartingale(ctx: RunContext) -> SuiteOutput:
    """mean ||D_m|| >= mean ||D_n|| - 3 SE for consecutive checkpoints n < m."""
    b = ctx.trajectories
    worst = -np.inf
    drops = {}
    for j in range(b.checkpoints.size - 1):
        d = b.d_norm[:, j] - b.d_norm[:, j + 1]
        se = d.std(ddof=1) / np.sqrt(d.size)
        z = float(d.mean() / se) if se > 0 else (0.0 if d.mean() <= 0 else np.inf)
        drops[int(b.checkpoints[j])] = z
        worst = max(worst, z)
    return SuiteOutput(reports=[TestReport(
        "d-norm-submartingale", worst, 3.0, "<=", sample_sizes={"replications": b.reps},
        details={"standardized_drop_by_n": drops},
        context="max over consecutive checkpoints of (mean D_n - mean D_next) / paired SE")])


def _h_from_params(spec: dict) -> Callable:
    return named_density(spec["name"], *spec.get("args", ()))


def suite_thm2_gap(ctx: RunContext) -> SuiteOutput:
    cfg = ctx.cfg
    prior = cfg.prior()
    if prior.beta is None or prior.atoms:
        raise ValueError("thm2-gap needs a pure Beta reference prior")
    u1, u2 = prior.beta
    ns = [int(n) for n in cfg.params.get("ns", [16, 64, 256, 1024])]
    reps = cfg.replications
    out = SuiteOutput()
    gaps = {}
    for label in ("h", "null_h", "contrast_h"):
        if label not in cfg.params:
            continue
        h = _h_from_params(cfg.params[label])
        tag = zlib.crc32(label.encode()) & 0xFFFF
        est = [theorem2_gap(h, u1, u2, n, reps, cfg.seed * 65536 + tag) for n in ns]
        gaps[label] = est
        for e in est:
            out.summary_rows.append((e.n, f"{label}.n_gap", e.n_gap, e.n_gap_se, e.reps))
            out.summary_rows.append((e.n, f"{label}.gap_difference", e.difference_estimate,
                                     e.difference_se, e.reps))
        worst = max(-e.difference_estimate / e.difference_se if e.difference_se > 0
                    else (0.0 if e.difference_estimate >= 0 else np.inf) for e in est)
        out.reports.append(TestReport(f"{label}-nonnegative", float(worst), 3.0, "<=",
                                      sample_sizes={"replications": reps},
                                      context="largest -estimate / SE of the difference-form gap"))
    if "h" in gaps:
        ng = np.array([e.n_gap for e in gaps["h"]])
        out.reports.append(TestReport(
            "n-gap-ratio", float(ng.max() / ng.min()), float(cfg.params.get("ratio_threshold", 3.0)),
            "<=", sample_sizes={"replications": reps},
            standard_errors={str(e.n): e.n_gap_se for e in gaps["h"]},
            details={"n_gap": {str(e.n): e.n_gap for e in gaps["h"]}},
            context="max / min of n * gap across n"))
    if "null_h" in gaps:
        worst = max(abs(e.estimate) - 3 * e.se for e in gaps["null_h"])
        out.reports.append(TestReport("null-gap-zero", float(worst), 1e-12, "<=",
                                      sample_sizes={"replications": reps},
                                      context="max of |gap| - 3 SE for the constant density"))
    if "contrast_h" in gaps:
        ng = [e.n_gap for e in gaps["contrast_h"]]
        out.reports.append(TestReport(
            "contrast-gap-grows", float(ng[-1] / ng[0]), 3.0, ">",
            details={"n_gap": {str(e.n): e.n_gap for e in gaps["contrast_h"]}},
            context="n * gap at the largest n over the smallest n, steep non-Lipschitz h"))
    return out


def suite_variance_ratio(ctx: RunContext) -> SuiteOutput:
    cfg = ctx.cfg
    b = ctx.trajectories
    label = int(cfg.params.get("label", 1))
    col = _member_index(cfg, (label,))
    c = b.c_values[:, -1, col]
    mu_hat = b.mu[:, label]
    out = SuiteOutput()
    out.reports.append(variance_ratio_check(c, mu_hat, cfg.weights(),
                                            rel_tol=float(cfg.params.get("rel_tol", 0.30)),
                                            name="variance-ratio"))
    reps = int(cfg.params.get("control_reps", 0))
    if reps:
        # constant weights: the limit is degenerate, so C_n^2 must shrink
        model = dict(cfg.model, weights={"kind": "discrete", "values": [1.0], "probs": [1.0]})
        kernel = PredictiveKernel.urn(cfg.model["alpha"], cfg.base())
        cps = cfg.checkpoints

        def one(rep):
            path = ctx.simulate(rep, model, cfg.n_max, ctx.stream("variance-control", rep))
            n = np.asarray(cps)
            mu_n = np.array([np.bincount(path.observations[:k], minlength=path.space.size)[label] / k
                             for k in n])
            a_n = np.array([kernel.predict(path, int(k)).masses[label] for k in n])
            return n * (mu_n - a_n) ** 2

        sq = np.stack(ctx.map_reps(one, reps))
        m, se = mean_and_se(sq)
        for j, n in enumerate(cps):
            out.summary_rows.append((int(n), "control.c_squared", float(m[j]), float(se[j]), reps))
        slope, _ = loglog_rate(cps, m)
        out.reports.append(TestReport("constant-weights-shrink", slope, -0.5, "<",
                                      sample_sizes={"replications": reps},
                                      details={"mean_c_squared": m.tolist()},
                                      context="log-log slope of mean C_n(B)^2 when Z is constant"))
    return out


def suite_inequality6(ctx: RunContext) -> SuiteOutput:
    """sup_n E||W_n||^2 over nested disjoint families of decreasing union mass."""
    cfg = ctx.cfg
    families = [SetClass.disjoint(f) for f in cfg.params["families"]]
    base = cfg.base()
    oracle = cfg.oracle_obj()
    cps = np.asarray(cfg.checkpoints)
    root = np.sqrt(cps.astype(float))

    def one(rep):
        path = ctx.simulate(rep)
        mu = oracle.limit_masses(path, cps)
        mu_n = np.stack([np.bincount(path.observations[:n], minlength=path.space.size) / n
                         for n in cps])
        return np.stack([(root * np.array([f.signed_sup(d) for d in mu_n - mu])) ** 2
                         for f in families])

    sq = np.stack(ctx.map_reps(one, cfg.replications))  # rep, family, checkpoint
    out = SuiteOutput()
    masses = [float(sum(base.masses[list(s)].sum() for s in f.sets)) for f in families]
    sup_e, sup_se, arg = [], [], []
    for i, p in enumerate(masses):
        m, se = mean_and_se(sq[:, i, :])
        for j, n in enumerate(cps):
            out.summary_rows.append((int(n), f"w_norm_sq.P={p:.6g}", float(m[j]), float(se[j]),
                                     cfg.replications))
        j = int(np.argmax(m))
        sup_e.append(float(m[j]))
        sup_se.append(float(se[j]))
        arg.append(j)
    order = np.argsort(masses)[::-1]
    # nonincreasing: a smaller union mass never has a significantly larger sup
    worst = -np.inf
    for hi, lo in zip(order[:-1], order[1:]):
        d = sq[:, lo, arg[lo]] - sq[:, hi, arg[lo]]
        se = d.std(ddof=1) / np.sqrt(d.size)
        worst = max(worst, float(d.mean() / se) if se > 0 else (0.0 if d.mean() <= 0 else np.inf))
    out.reports.append(TestReport(
        "sup-nonincreasing", worst, 3.0, "<=", sample_sizes={"replications": cfg.replications},
        details={"union_mass": masses, "sup_mean_sq": sup_e},
        standard_errors={f"P={p:.6g}": s for p, s in zip(masses, sup_se)},
        context="max standardized increase of sup_n E||W_n||^2 when the union mass shrinks"))
    # one constant for all runs: the ratio fitted on the widest family
    ratios = np.array(sup_e) / np.sqrt(masses)
    ratio_se = np.array(sup_se) / np.sqrt(masses)
    top = int(order[0])
    excess = [float((ratios[i] - ratios[top]) / np.hypot(ratio_se[i], ratio_se[top]))
              for i in order[1:]]
    out.reports.append(TestReport(
        "sqrt-mass-ratio-bounded", max(excess), 3.0, "<=",
        standard_errors={f"P={p:.6g}": float(s) for p, s in zip(masses, ratio_se)},
        details={"ratio_by_mass": {f"{p:.6g}": float(r) for p, r in zip(masses, ratios)},
                 "constant": float(ratios[top]),
                 "spread": float(ratios.max() / ratios.min())},
        context="max standardized excess of sup_n E||W_n||^2 / sqrt(P) over the full-family constant"))
    return out


def suite_cid(ctx: RunContext) -> SuiteOutput:
    cfg = ctx.cfg
    out = SuiteOutput()
    for n in cfg.params.get("ns", [0, 1, 2]):
        r = cid_diagnostic(cfg.model["alpha"], cfg.base(), cfg.weights(), int(n), cfg.replications,
                           cfg.seed * 1000 + int(n), target_label=int(cfg.params.get("label", 1)),
                           name=f"cid-n{int(n)}")
        out.reports.append(r)
    return out


def _terminal_frequency(ctx: RunContext, model: dict, suite: str, label: int, n: int) -> np.ndarray:
    def one(rep):
        path = ctx.simulate(rep, model, n, ctx.stream(suite, rep))
        x = path.observations
        return float(np.mean(x == label))
    return np.array(ctx.map_reps(one, ctx.cfg.replications))


def suite_degenerate_weights(ctx: RunContext) -> SuiteOutput:
    """Urn with Z = 1 against the Ferguson-Dirichlet sampler, mu_n{1} at n."""
    cfg = ctx.cfg
    n = int(cfg.params.get("n", 200))
    label = int(cfg.params.get("label", 1))
    urn = dict(cfg.model, weights={"kind": "discrete", "values": [1.0], "probs": [1.0]})
    fd = {"kind": "ferguson-dirichlet", "alpha": cfg.model["alpha"], "base": cfg.model["base"]}
    a = _terminal_frequency(ctx, urn, "degenerate-urn", label, n)
    b = _terminal_frequency(ctx, fd, "degenerate-fd", label, n)
    ks = ks_two_sample(a, b)
    return SuiteOutput(reports=[TestReport(
        "urn-vs-dirichlet-ks", ks, float(cfg.params.get("ks_threshold", 0.06)), "<",
        sample_sizes={"replications": cfg.replications, "n": n},
        details={"urn_mean": float(a.mean()), "dirichlet_mean": float(b.mean())},
        context="two-sample KS of mu_n{1}: urn with Z = 1 vs Ferguson-Dirichlet")])


def suite_definetti(ctx: RunContext) -> SuiteOutput:
    """Ferguson-Dirichlet sampler against the Dirichlet(alpha nu) mixture."""
    cfg = ctx.cfg
    if cfg.model["kind"] != "ferguson-dirichlet":
        raise ValueError("definetti suite needs the ferguson-dirichlet model")
    n = int(cfg.params.get("n", 200))
    label = int(cfg.params.get("label", 1))
    alpha = float(cfg.model["alpha"])
    mix = {"kind": "exchangeable",
           "prior": {"dirichlet": [alpha * m for m in cfg.model["base"]]}}
    a = _terminal_frequency(ctx, cfg.model, "definetti-fd", label, n)
    b = _terminal_frequency(ctx, mix, "definetti-mixture", label, n)
    ks = ks_two_sample(a, b)
    return SuiteOutput(reports=[TestReport(
        "dirichlet-vs-mixture-ks", ks, float(cfg.params.get("ks_threshold", 0.06)), "<",
        sample_sizes={"replications": cfg.replications, "n": n},
        context="two-sample KS of mu_n{1}: sequential sampler vs de Finetti mixture")])


def suite_oracles(ctx: RunContext) -> SuiteOutput:
    cfg = ctx.cfg
    out = SuiteOutput()
    # quadrature path against the conjugate path
    # (every r at the smallest and largest n, plus random (r, n) in between)
    n_max = int(cfg.params.get("quadrature_n", 200))
    draws = int(cfg.params.get("quadrature_draws", 3000))
    rng = ctx.stream("oracles-quadrature")
    pairs = [(r, n) for n in (0, 1, 2, n_max) for r in range(n + 1)]
    ns = rng.integers(0, n_max + 1, draws)
    pairs += [(int(rng.integers(0, n + 1)), int(n)) for n in ns]
    worst = 0.0
    for u1, u2 in cfg.params.get("betas", [[2, 2], [3, 5], [1, 1]]):
        conj = PriorSpec.beta_prior(u1, u2)
        quad = build_prior({"density": {"name": "beta", "args": [u1, u2]}})
        for r, n in pairs:
            worst = max(worst, abs(posterior_state(conj, r, n).mean()
                                   - posterior_state(quad, r, n).mean()))
    out.reports.append(TestReport("quadrature-vs-conjugate", worst, 1e-8, "<=",
                                  sample_sizes={"n_max": n_max, "pairs": len(pairs)},
                                  context="max |posterior mean| difference over all (r, n)"))

    # C_n against brute-force E(W_n | G_n) over every history
    prior = cfg.prior()
    kernel = PredictiveKernel.mixture(prior)
    worst = 0.0
    count = 0
    for n in range(1, int(cfg.params.get("enumeration_n", 6)) + 1):
        for h in _histories(n):
            c = np.sqrt(n) * (h.mean() - kernel.predict(_binary_path(h), n).masses[1])
            worst = max(worst, abs(c - brute_force_conditional_w(h, prior)))
            count += 1
    out.reports.append(TestReport("c-vs-conditional-w", worst, 1e-8, "<=",
                                  sample_sizes={"histories": count},
                                  context="max |C_n{1} - E(W_n{1} | G_n)| over all binary histories"))

    # bridge covariance
    times = np.asarray(cfg.params.get("bridge_times", [0.1, 0.25, 0.5, 0.8, 0.95]))
    draws = int(cfg.params.get("bridge_draws", 100_000))
    g = brownian_bridge_at(times, ctx.stream("oracles-bridge"), size=draws)
    emp = np.cov(g, rowvar=False)
    exact = np.minimum.outer(times, times) - np.outer(times, times)
    out.reports.append(TestReport("bridge-covariance", float(np.abs(emp - exact).max()), 0.01, "<=",
                                  sample_sizes={"draws": draws}))
    return out


def _histories(n: int):
    from .oracles import all_histories

    return all_histories(n)


def _binary_path(h):
    from .models import PathSample
    from .measure import BINARY

    return PathSample("exchangeable", BINARY, h)


def suite_ui_table(ctx: RunContext) -> SuiteOutput:
    b = ctx.trajectories
    cs = [float(c) for c in ctx.cfg.params.get("thresholds", [0.25, 0.5, 1, 2, 4, 8])]
    table = uniform_integrability_table({int(n): b.w_norm[:, j] for j, n in enumerate(b.checkpoints)},
                                        cs)
    out = SuiteOutput()
    for i, n in enumerate(table.ns):
        for j, c in enumerate(cs):
            out.summary_rows.append((n, f"tail_mean.c={c:g}", float(table.tail_means[i, j]),
                                     float(table.standard_errors[i, j]), b.reps))
    top = table.max_over_n()
    out.reports.append(TestReport("tail-decreasing", float(table.decreasing_in_c), 1.0, ">=",
                                  details={"max_over_n": top.tolist(), "thresholds": cs}))
    drops = [top[j + 1] / top[j] for j in range(len(cs) - 1)
             if cs[j] >= 1 and cs[j + 1] == 2 * cs[j] and top[j] > 0]
    out.reports.append(TestReport("tail-drop-per-doubling", float(max(drops, default=0.0)), 0.25, "<=",
                                  details={"ratios": drops},
                                  context="largest max_n tail(2c) / max_n tail(c) for c >= 1"))
    return out


SUITES: dict[str, Callable[[RunContext], SuiteOutput]] = {
    "as-convergence": suite_as_convergence,
    "cid": suite_cid,
    "definetti": suite_definetti,
    "degenerate-weights": suite_degenerate_weights,
    "dirichlet-bound": suite_dirichlet_bound,
    "gaussian-branch": suite_gaussian_branch,
    "inequality6": suite_inequality6,
    "oracles": suite_oracles,
    "rate": suite_rate,
    "stable-probe": suite_stable_probe,
    "submartingale": suite_submartingale,
    "thm2-gap": suite_thm2_gap,
    "trajectories": suite_trajectories,
    "ui-table": suite_ui_table,
    "variance-ratio": suite_variance_ratio,
}


# ---------------------------------------------------------------------------
# running and writing


def run_experiment(cfg: ExperimentConfig, workers: int | None = None, write: bool = True) -> RunResult:
    ctx = RunContext(cfg, worker_count(workers))
    summary, rows, reports = [], [], []
    for name in cfg.suite:
        res = SUITES[name](ctx)
        prefix = "" if name == "trajectories" else f"{name}."
        summary += [(n, prefix + s, m, se, r) for n, s, m, se, r in res.summary_rows]
        rows += [(rep, n, prefix + s, v) for rep, n, s, v in res.replication_rows]
        for r in res.reports:
            r.name = f"{name}/{r.name}"
        reports += res.reports
    provenance = {"config_sha256": cfg.config_hash(), "seed": cfg.seed, "version": __version__,
                  "config": json.loads(cfg.canonical_json())}
    result = RunResult(cfg, summary, rows, reports, provenance)
    if write:
        write_artifacts(result, cfg.out or os.path.join("runs", cfg.name))
    return result


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_artifacts(result: RunResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = result.config.name
    lines = ["experiment,n,stat_name,mean,se,reps"]
    lines += [",".join([name, _fmt(n), s, _fmt(m), _fmt(se), _fmt(r)])
              for n, s, m, se, r in result.summary_rows]
    _atomic_write(out / "summary.csv", "\n".join(lines) + "\n")
    lines = ["experiment,rep,n,stat_name,value"]
    lines += [",".join([name, _fmt(rep), _fmt(n), s, _fmt(v)])
              for rep, n, s, v in result.replication_rows]
    _atomic_write(out / "replications.csv", "\n".join(lines) + "\n")
    doc = {"experiment": name, "passed": result.passed, "provenance": result.provenance,
           "reports": [r.to_dict() for r in result.reports]}
    _atomic_write(out / "reports.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return out


# ---------------------------------------------------------------------------
# built-in catalog

_GEOM_64 = [64, 128, 256, 512, 1024, 2048, 4096]
_SINGLETONS = {"kind": "singletons"}
_UNIFORM2 = [0.5, 0.5]
_Z12 = {"kind": "discrete", "values": [1.0, 2.0], "probs": [0.5, 0.5]}

BUILTINS: dict[str, dict] = {
    "cor4-atomic-branch": {
        "description": "C_n{1} standardized by the realized atom is N(0,1) under a two-atom prior",
        "model": {"kind": "exchangeable", "prior": {"atoms": [0.3, 0.7], "atom_masses": [0.5, 0.5]}},
        "set_class": _SINGLETONS, "checkpoints": [1024, 4096], "replications": 2000, "seed": 4,
        "suite": ["trajectories", "gaussian-branch"], "params": {"ks_threshold": 0.06},
    },
    "cor4-gaussian-branch": {
        "description": "C_n{1} / sqrt(theta(1-theta)) against N(0,1) under a Beta(2,2) prior",
        "model": {"kind": "exchangeable", "prior": {"beta": [2, 2]}},
        "set_class": _SINGLETONS, "checkpoints": [1024, 4096], "replications": 2000, "seed": 2,
        "suite": ["trajectories", "gaussian-branch"], "params": {"ks_threshold": 0.05},
    },
    "cor4-rate": {
        "description": "log-log slope of mean ||C_n|| under an atom-free Beta(2,2) prior",
        "model": {"kind": "exchangeable", "prior": {"beta": [2, 2]}},
        "checkpoints": _GEOM_64, "replications": 500, "seed": 3,
        "suite": ["trajectories", "rate"], "params": {"slope": -0.5, "slope_tol": 0.15},
    },
    "cor5-as-rate": {
        "description": "a.s. convergence diagnostic of n||mu_n - a_n|| with a divergent control",
        "model": {"kind": "exchangeable", "prior": {"beta": [2, 2]}},
        "checkpoints": _GEOM_64, "replications": 200, "seed": 5,
        "suite": ["trajectories", "as-convergence", "submartingale"],
    },
    "cor5-submartingale": {
        "description": "mean ||D_n|| nondecreasing under an almost-Lipschitz prior density",
        "model": {"kind": "exchangeable",
                  "prior": {"density": {"name": "almost-lipschitz", "args": [0.5, 0.5]}}},
        "checkpoints": _GEOM_64, "replications": 400, "seed": 15,
        "suite": ["trajectories", "submartingale", "as-convergence"],
    },
    "definetti-crosscheck": {
        "description": "Ferguson-Dirichlet sampler against its Dirichlet(alpha nu) mixture",
        "model": {"kind": "ferguson-dirichlet", "alpha": 2.0, "base": [0.7, 0.3]},
        "checkpoints": [200], "replications": 2000, "seed": 8,
        "suite": ["definetti"], "params": {"n": 200},
    },
    "dirichlet-bound": {
        "description": "n||mu_n - a_n|| <= alpha and the exact distance identity for the Dirichlet rule",
        "model": {"kind": "ferguson-dirichlet", "alpha": 1.0, "base": _UNIFORM2},
        "checkpoints": [16, 32, 64, 128, 256, 512, 1024, 2048, 4096], "replications": 100, "seed": 1,
        "suite": ["trajectories", "dirichlet-bound"], "params": {"histories": 10000},
    },
    "lemma6-cid": {
        "description": "P(Y_{n+1} in B) = P(Y_{n+2} in B) given prefix buckets, urn with Z in {1,2}",
        "model": {"kind": "polya-urn", "alpha": 1.0, "base": _UNIFORM2, "weights": _Z12},
        "checkpoints": [2], "replications": 100000, "seed": 10,
        "suite": ["cid"], "params": {"ns": [0, 1, 2]},
    },
    "oracle-equivalences": {
        "description": "quadrature vs conjugate, C_n vs enumerated E(W_n|G_n), bridge covariance",
        "model": {"kind": "exchangeable",
                  "prior": {"atoms": [0.5], "atom_masses": [0.5], "beta": [2, 2]}},
        "checkpoints": [6], "replications": 1, "seed": 11,
        "suite": ["oracles"],
    },
    "stable-probe": {
        "description": "C_n{1} given X_1 = 1 against the size-biased limit, Beta(2,2) prior",
        "model": {"kind": "exchangeable", "prior": {"beta": [2, 2]}},
        "set_class": _SINGLETONS, "checkpoints": [1024, 4096], "replications": 2000, "seed": 6,
        "suite": ["stable-probe"],
    },
    "stable-probe-atomic": {
        "description": "stable-convergence probe with a non-degenerate limit (two-atom prior)",
        "model": {"kind": "exchangeable",
                  "prior": {"atoms": [0.02, 0.5], "atom_masses": [0.5, 0.5]}},
        "set_class": _SINGLETONS, "checkpoints": [1024, 4096], "replications": 4000, "seed": 16,
        "suite": ["stable-probe"],
    },
    "thm2-gap": {
        "description": "n times the density gap stays bounded for h = 6v(1-v) under a uniform Q0",
        "model": {"kind": "exchangeable", "prior": {"beta": [1, 1]}},
        "checkpoints": [16, 64, 256, 1024], "replications": 20000, "seed": 7,
        "suite": ["thm2-gap"],
        "params": {"ns": [16, 64, 256, 1024], "h": {"name": "beta", "args": [2, 2]},
                   "null_h": {"name": "beta", "args": [1, 1]},
                   "contrast_h": {"name": "logistic-step", "args": [0.5, 0.002]}},
    },
    "thm7-inequality6": {
        "description": "sup_n E||W_n||^2 over nested disjoint families of union mass 1, 1/4, 1/16",
        "model": {"kind": "polya-urn", "alpha": 1.0, "base": [1.0 / 16] * 16, "weights": _Z12},
        "checkpoints": [64, 256, 1024, 4096], "replications": 400, "seed": 9,
        "suite": ["inequality6"],
        "params": {"families": [[[i] for i in range(16)], [[i] for i in range(4)], [[0]]]},
    },
    "thm7-variance-ratio": {
        "description": "E C_n(B)^2 / mu(B)(1-mu(B)) against var Z / (E Z)^2 = 1/9 for Z uniform on {1,2}",
        "model": {"kind": "polya-urn", "alpha": 1.0, "base": _UNIFORM2, "weights": _Z12},
        "set_class": _SINGLETONS, "checkpoints": [256, 1024, 4096], "replications": 2000, "seed": 12,
        "suite": ["trajectories", "variance-ratio"], "params": {"control_reps": 300},
    },
    "ui-table": {
        "description": "tail expectations E||W_n|| 1{||W_n|| > c} for the exchangeable binary model",
        "model": {"kind": "exchangeable", "prior": {"beta": [2, 2]}},
        "checkpoints": _GEOM_64, "replications": 2000, "seed": 13,
        "suite": ["trajectories", "ui-table"],
    },
    "urn-degenerate-weights": {
        "description": "urn with Z = 1 reproduces the Ferguson-Dirichlet law of mu_n{1}",
        "model": {"kind": "polya-urn", "alpha": 1.0, "base": _UNIFORM2,
                  "weights": {"kind": "discrete", "values": [1.0], "probs": [1.0]}},
        "checkpoints": [200], "replications": 2000, "seed": 14,
        "suite": ["degenerate-weights"], "params": {"n": 200},
    },
}


def list_experiments() -> list[tuple[str, str]]:
    return [(name, BUILTINS[name]["description"]) for name in sorted(BUILTINS)]


def builtin_config(name: str) -> ExperimentConfig:
    if name not in BUILTINS:
        raise KeyError(f"unknown experiment {name!r}; see `cidlab list`")
    data = json.loads(json.dumps(BUILTINS[name]))
    data["name"] = name
    return ExperimentConfig.from_dict(data)

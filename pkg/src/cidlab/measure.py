"""Probability measures, empirical measures, set classes and sup-norm distances.

Two kinds of state space are supported: finite alphabets (observations are
label indices ``0..k``) and the real line. Set classes are always countably
determined by construction, so every supremum is evaluated on a finite,
data-driven family of sets.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

MASS_TOL = 1e-12
MAX_ENUMERABLE_LABELS = 10


@dataclass(frozen=True)
class StateSpace:
    kind: str
    labels: tuple = ()

    def __post_init__(self):
        if self.kind == "finite":
            if len(self.labels) < 2:
                raise ValueError("finite alphabet needs at least 2 labels")
            if len(set(self.labels)) != len(self.labels):
                raise ValueError("duplicate labels in finite alphabet")
        elif self.kind == "real":
            if self.labels:
                raise ValueError("the real line carries no labels")
        else:
            raise ValueError(f"unknown state space kind {self.kind!r}")

    @classmethod
    def finite(cls, size_or_labels: int | Sequence) -> "StateSpace":
        if isinstance(size_or_labels, (int, np.integer)):
            return cls("finite", tuple(range(int(size_or_labels))))
        return cls("finite", tuple(size_or_labels))

    @classmethod
    def real_line(cls) -> "StateSpace":
        return cls("real")

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def size(self) -> int:
        if not self.is_finite:
            raise ValueError("the real line has no finite size")
        return len(self.labels)

    def check_points(self, points) -> np.ndarray:
        """Validate observations and return them as an array.

        Finite-space observations are label indices.
        """
        arr = np.asarray(points)
        if self.is_finite:
            if arr.size and (not np.issubdtype(arr.dtype, np.integer)):
                if not np.all(np.equal(np.mod(arr, 1), 0)):
                    raise ValueError("finite-space observations must be label indices")
                arr = arr.astype(np.int64)
            if arr.size and (arr.min() < 0 or arr.max() >= self.size):
                raise ValueError("observation outside the finite alphabet")
            return arr.astype(np.int64, copy=False)
        arr = arr.astype(float, copy=False)
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("observation outside the real line")
        return arr


BINARY = StateSpace.finite(2)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _clean_masses(masses, what: str = "masses") -> np.ndarray:
    m = np.asarray(masses, dtype=float)
    if m.ndim != 1:
        raise ValueError(f"{what} must be a vector")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{what} must be finite")
    if m.size and m.min() < -MASS_TOL:
        raise ValueError(f"negative {what}")
    m = np.clip(m, 0.0, None)
    return m


@dataclass(frozen=True, eq=False)
class ProbabilityMeasure:
    """A probability on a finite alphabet, or a CDF on the real line.

    Real-line measures are an atomic part (sorted locations with masses)
    plus an optional continuous part given by ``continuous_cdf``, a
    nondecreasing continuous function with limits 0 and ``continuous_mass``.
    """

    space: StateSpace
    masses: np.ndarray | None = None
    atoms: np.ndarray | None = None
    atom_masses: np.ndarray | None = None
    continuous_cdf: Callable | None = None
    continuous_mass: float = 0.0

    @classmethod
    def finite(cls, space: StateSpace, masses) -> "ProbabilityMeasure":
        if not space.is_finite:
            raise ValueError("finite masses need a finite space")
        m = _clean_masses(masses)
        if m.size != space.size:
            raise ValueError(f"expected {space.size} masses, got {m.size}")
        total = m.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {total!r}, not 1")
        return cls(space, masses=_frozen(m / total))

    @classmethod
    def real(cls, atoms=(), atom_masses=(), continuous_cdf=None,
             continuous_mass: float = 0.0) -> "ProbabilityMeasure":
        loc = np.asarray(atoms, dtype=float)
        m = _clean_masses(atom_masses, "atom masses")
        if loc.shape != m.shape:
            raise ValueError("atoms and atom masses differ in length")
        if not np.all(np.isfinite(loc)):
            raise ValueError("atom locations must be finite")
        if continuous_cdf is None and continuous_mass:
            raise ValueError("continuous mass given without a CDF")
        if continuous_mass < 0:
            raise ValueError("negative continuous mass")
        total = m.sum() + continuous_mass
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {total!r}, not 1")
        order = np.argsort(loc, kind="stable")
        loc, m = loc[order], m[order]
        # merge repeated locations
        uniq, inv = np.unique(loc, return_inverse=True)
        merged = np.bincount(inv, weights=m, minlength=uniq.size) if uniq.size else m
        scale = 1.0 / total
        return cls(REAL_LINE, atoms=_frozen(uniq), atom_masses=_frozen(merged * scale),
                   continuous_cdf=continuous_cdf, continuous_mass=float(continuous_mass * scale))

    @classmethod
    def point_mass(cls, space: StateSpace, x) -> "ProbabilityMeasure":
        if space.is_finite:
            m = np.zeros(space.size)
            m[int(space.check_points([x])[0])] = 1.0
            return cls.finite(space, m)
        return cls.real([x], [1.0])

    @property
    def has_continuous_part(self) -> bool:
        return self.continuous_cdf is not None and self.continuous_mass > 0

    def mass(self, subset: Iterable[int]) -> float:
        """Mass of a set of labels (finite spaces only)."""
        if not self.space.is_finite:
            raise ValueError("use cdf() on the real line")
        idx = self.space.check_points(list(subset))
        return float(self.masses[np.unique(idx)].sum())

    def cdf(self, t) -> np.ndarray:
        """Right-continuous distribution function F(t) = P((-inf, t])."""
        self._require_real()
        t = np.asarray(t, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.atom_masses)])
        out = cum[np.searchsorted(self.atoms, t, side="right")]
        if self.has_continuous_part:
            out = out + np.asarray(self.continuous_cdf(t), dtype=float)
        return np.minimum(out, 1.0)

    def left_cdf(self, t) -> np.ndarray:
        """Left limit F(t-) = P((-inf, t))."""
        self._require_real()
        t = np.asarray(t, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.atom_masses)])
        out = cum[np.searchsorted(self.atoms, t, side="left")]
        if self.has_continuous_part:
            out = out + np.asarray(self.continuous_cdf(t), dtype=float)
        return np.minimum(out, 1.0)

    def _require_real(self):
        if self.space.is_finite:
            raise ValueError("cdf() is defined on the real line only")


REAL_LINE = StateSpace.real_line()


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    space: StateSpace
    n: int
    counts: np.ndarray | None = None
    sample: np.ndarray | None = None

    @property
    def measure(self) -> ProbabilityMeasure:
        if self.space.is_finite:
            return ProbabilityMeasure.finite(self.space, self.counts / self.n)
        vals, cnt = np.unique(self.sample, return_counts=True)
        return ProbabilityMeasure.real(vals, cnt / self.n)

    def mass(self, subset: Iterable[int]) -> float:
        return self.measure.mass(subset)

    def cdf(self, t) -> np.ndarray:
        if self.space.is_finite:
            raise ValueError("cdf() is defined on the real line only")
        return np.searchsorted(self.sample, np.asarray(t, dtype=float), side="right") / self.n


def empirical_measure(prefix, space: StateSpace) -> EmpiricalMeasure:
    """Empirical distribution of the observations in ``prefix``."""
    pts = space.check_points(prefix)
    if pts.size == 0:
        raise ValueError("empirical measure undefined for n=0")
    if space.is_finite:
        counts = np.bincount(pts, minlength=space.size).astype(float)
        counts.setflags(write=False)
        return EmpiricalMeasure(space, int(pts.size), counts=counts)
    srt = np.sort(pts)
    srt.setflags(write=False)
    return EmpiricalMeasure(space, int(pts.size), sample=srt)


@dataclass(frozen=True)
class SetClass:
    """A countably determined class of sets.

    kinds: ``all-subsets`` and ``singletons`` of a finite alphabet,
    ``half-lines`` (-inf, t] on the real line, and ``disjoint``, an explicit
    pairwise-disjoint family of label sets.
    """

    kind: str
    sets: tuple[frozenset, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in ("all-subsets", "singletons", "half-lines", "disjoint"):
            raise ValueError(f"unknown set class {self.kind!r}")
        if self.kind == "disjoint":
            if not self.sets:
                raise ValueError("disjoint family needs at least one set")
            seen: set = set()
            for s in self.sets:
                if seen & s:
                    raise ValueError("family is not pairwise disjoint")
                seen |= s
        elif self.sets:
            raise ValueError(f"{self.kind} takes no explicit sets")

    @classmethod
    def all_subsets(cls) -> "SetClass":
        return cls("all-subsets")

    @classmethod
    def singletons(cls) -> "SetClass":
        return cls("singletons")

    @classmethod
    def half_lines(cls) -> "SetClass":
        return cls("half-lines")

    @classmethod
    def disjoint(cls, sets: Iterable[Iterable[int]]) -> "SetClass":
        return cls("disjoint", tuple(frozenset(int(i) for i in s) for s in sets))

    def check_space(self, space: StateSpace) -> None:
        if self.kind == "half-lines":
            if space.is_finite:
                raise ValueError("half-line class needs the real line")
            return
        if not space.is_finite:
            raise ValueError(f"{self.kind} class needs a finite alphabet")
        if self.kind == "disjoint":
            for s in self.sets:
                if any(i < 0 or i >= space.size for i in s):
                    raise ValueError("family set outside the alphabet")

    def members(self, space: StateSpace) -> list[tuple[int, ...]]:
        """Canonical countable subclass as label tuples (finite spaces)."""
        self.check_space(space)
        if self.kind == "singletons":
            return [(i,) for i in range(space.size)]
        if self.kind == "disjoint":
            return [tuple(sorted(s)) for s in self.sets]
        if self.kind == "all-subsets":
            if space.size > MAX_ENUMERABLE_LABELS:
                raise ValueError("too many labels to enumerate all subsets")
            labels = range(space.size)
            return [c for r in range(space.size + 1) for c in itertools.combinations(labels, r)]
        raise ValueError("half-lines have no finite member list")

    def member_matrix(self, space: StateSpace) -> np.ndarray:
        """0/1 incidence matrix, shape (members, labels)."""
        mem = self.members(space)
        mat = np.zeros((len(mem), space.size))
        for j, s in enumerate(mem):
            mat[j, list(s)] = 1.0
        return mat

    def signed_sup(self, diff: np.ndarray) -> float:
        """sup_B |sum_{x in B} diff[x]| for a signed mass vector.

        ``diff`` must be the difference of two probability vectors, so the
        all-subsets supremum is half the L1 norm.
        """
        if self.kind == "all-subsets":
            return 0.5 * float(np.abs(diff).sum())
        if self.kind == "singletons":
            return float(np.abs(diff).max())
        if self.kind == "disjoint":
            return max(abs(float(diff[list(s)].sum())) for s in self.sets)
        raise ValueError("signed_sup needs a finite-alphabet class")


def _as_measure(p) -> ProbabilityMeasure:
    return p.measure if isinstance(p, EmpiricalMeasure) else p


def half_line_points(p: ProbabilityMeasure, q: ProbabilityMeasure) -> np.ndarray:
    """Evaluation points for the half-line supremum: all atoms of p and q."""
    return np.union1d(p.atoms, q.atoms)


def sup_distance(p, q, set_class: SetClass) -> float:
    """sup over the class of |p(B) - q(B)|."""
    p, q = _as_measure(p), _as_measure(q)
    if p.space != q.space:
        raise ValueError("measures live on different spaces")
    set_class.check_space(p.space)
    if p.space.is_finite:
        return set_class.signed_sup(p.masses - q.masses)
    if p.has_continuous_part and q.has_continuous_part:
        raise ValueError("exact half-line sup needs at least one purely atomic measure")
    pts = half_line_points(p, q)
    if pts.size == 0:
        return 0.0
    at = np.abs(p.cdf(pts) - q.cdf(pts))
    left = np.abs(p.left_cdf(pts) - q.left_cdf(pts))
    return float(max(at.max(), left.max()))

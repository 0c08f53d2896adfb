"""Declarative experiment configuration with a strict JSON schema.

Validation collects every problem before failing, so one run of a broken
config reports all of them.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .measure import ProbabilityMeasure, SetClass, StateSpace
from .models import PriorSpec, WeightLaw, named_density
from .predictive import PredictiveKernel
from .processes import DEFAULT_CHECKPOINTS, PLUG_IN_FACTOR, LimitOracle


class ConfigError(ValueError):
    """Raised with the full list of violations."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid config:\n" + "\n".join(f"  - {v}" for v in self.violations))


TOP_KEYS = {"name", "description", "model", "kernel", "set_class", "checkpoints",
            "replications", "seed", "horizon_factor", "oracle", "suite", "params", "out"}
REQUIRED = {"name", "model", "replications", "seed"}
MODEL_KEYS = {
    "exchangeable": {"kind", "prior"},
    "ferguson-dirichlet": {"kind", "alpha", "base"},
    "polya-urn": {"kind", "alpha", "base", "weights"},
}
PRIOR_KEYS = {"atoms", "atom_masses", "beta", "density", "dirichlet"}
WEIGHT_KEYS = {"discrete": {"kind", "values", "probs"}, "uniform": {"kind", "low", "high"}}
KERNELS = ("auto", "dirichlet", "mixture", "urn")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    model: dict
    replications: int
    seed: int
    description: str = ""
    kernel: str = "auto"
    set_class: dict = field(default_factory=lambda: {"kind": "all-subsets"})
    checkpoints: tuple[int, ...] = DEFAULT_CHECKPOINTS
    horizon_factor: int = PLUG_IN_FACTOR
    oracle: str = "auto"
    suite: tuple[str, ...] = ("trajectories",)
    params: dict = field(default_factory=dict)
    out: str | None = None

    # -- loading ---------------------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        errors = validate(data)
        if errors:
            raise ConfigError(errors)
        kw = dict(data)
        kw["checkpoints"] = tuple(int(n) for n in kw.get("checkpoints", DEFAULT_CHECKPOINTS))
        kw["suite"] = tuple(kw.get("suite", ("trajectories",)))
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"cannot read {path}: {exc}"]) from exc
        if not isinstance(data, dict):
            raise ConfigError(["top level must be a JSON object"])
        return cls.from_dict(data)

    def with_overrides(self, seed=None, reps=None, out=None) -> "ExperimentConfig":
        data = self.to_dict()
        if seed is not None:
            data["seed"] = seed
        if reps is not None:
            data["replications"] = reps
        if out is not None:
            data["out"] = str(out)
        return ExperimentConfig.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checkpoints"] = list(self.checkpoints)
        d["suite"] = list(self.suite)
        return d

    def canonical_json(self) -> str:
        """Everything that affects results; the output directory is excluded."""
        d = self.to_dict()
        d.pop("out")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    # -- built objects ---------------------------------------------------------
    @property
    def n_max(self) -> int:
        return max(self.checkpoints)

    def space(self) -> StateSpace:
        return self.kernel_obj().space

    def prior(self) -> PriorSpec:
        return build_prior(self.model["prior"])

    def base(self) -> ProbabilityMeasure:
        return build_base(self.model["base"])

    def weights(self) -> WeightLaw:
        return build_weights(self.model["weights"])

    def kernel_obj(self) -> PredictiveKernel:
        kind = self.model["kind"]
        if kind == "exchangeable":
            return PredictiveKernel.mixture(self.prior())
        if kind == "ferguson-dirichlet":
            return PredictiveKernel.dirichlet(self.model["alpha"], self.base())
        return PredictiveKernel.urn(self.model["alpha"], self.base())

    def set_class_obj(self) -> SetClass:
        return build_set_class(self.set_class)

    def oracle_obj(self) -> LimitOracle:
        mode = self.oracle
        if mode == "auto":
            mode = "exact" if self.model["kind"] == "exchangeable" else "plug-in"
        if mode == "exact":
            return LimitOracle.exact()
        return LimitOracle.plug_in(self.horizon_factor * self.n_max)

    @property
    def horizon(self) -> int:
        if self.oracle_obj().mode == "plug-in":
            return self.horizon_factor * self.n_max
        return self.n_max


# ---------------------------------------------------------------------------
# builders (also used by the experiment catalog)


def build_prior(d: dict) -> PriorSpec:
    atoms = tuple(d.get("atoms", ()))
    masses = tuple(d.get("atom_masses", ()))
    cont = 1.0 - float(sum(masses))
    if "dirichlet" in d:
        return PriorSpec.dirichlet_prior(d["dirichlet"])
    if "beta" in d:
        return PriorSpec(atoms, masses, beta=tuple(d["beta"]), continuous_mass=cont)
    if "density" in d:
        spec = d["density"]
        g = named_density(spec["name"], *spec.get("args", ()))
        label = f"{spec['name']}{tuple(spec.get('args', ()))}"
        return PriorSpec(atoms, masses, density=_LabelledDensity(g, label), density_label=label,
                         continuous_mass=cont)
    return PriorSpec(atoms, masses)


class _LabelledDensity:
    """A named density that compares and hashes by its label, so equal
    configs share quadrature caches."""

    def __init__(self, fn, label: str):
        self.fn = fn
        self.label = label

    def __call__(self, t):
        return self.fn(t)

    def __eq__(self, other):
        return isinstance(other, _LabelledDensity) and other.label == self.label

    def __hash__(self):
        return hash(self.label)

    def __repr__(self):
        return self.label


def build_base(masses) -> ProbabilityMeasure:
    m = np.asarray(masses, dtype=float)
    return ProbabilityMeasure.finite(StateSpace.finite(m.size), m)


def build_weights(d: dict) -> WeightLaw:
    if d["kind"] == "uniform":
        return WeightLaw.uniform(d["low"], d["high"])
    return WeightLaw.discrete(d["values"], d.get("probs"))


def build_set_class(d: dict) -> SetClass:
    if d["kind"] == "disjoint":
        return SetClass.disjoint(d["sets"])
    return SetClass(d["kind"])


# ---------------------------------------------------------------------------
# validation


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _try(errors: list, where: str, fn):
    try:
        return fn()
    except (ValueError, TypeError, KeyError) as exc:
        errors.append(f"{where}: {exc}")
        return None


def validate(data: dict) -> list[str]:
    errors: list[str] = []
    for k in sorted(set(data) - TOP_KEYS):
        errors.append(f"unknown key {k!r}")
    for k in sorted(REQUIRED - set(data)):
        errors.append(f"missing required key {k!r}")

    if "name" in data and (not isinstance(data["name"], str) or not data["name"]):
        errors.append("name: must be a nonempty string")
    if "description" in data and not isinstance(data["description"], str):
        errors.append("description: must be a string")
    if "replications" in data and (not _is_int(data["replications"]) or data["replications"] < 1):
        errors.append("replications: must be an integer >= 1")
    if "seed" in data and (not _is_int(data["seed"]) or data["seed"] < 0):
        errors.append("seed: must be a nonnegative integer")
    if "horizon_factor" in data and (not _is_int(data["horizon_factor"])
                                     or data["horizon_factor"] < PLUG_IN_FACTOR):
        errors.append(f"horizon_factor: must be an integer >= {PLUG_IN_FACTOR}")
    if "oracle" in data and data["oracle"] not in ("auto", "exact", "plug-in"):
        errors.append("oracle: must be one of auto, exact, plug-in")
    if "kernel" in data and data["kernel"] not in KERNELS:
        errors.append(f"kernel: must be one of {', '.join(KERNELS)}")
    if "checkpoints" in data:
        cps = data["checkpoints"]
        if (not isinstance(cps, list) or not cps or not all(_is_int(n) and n >= 1 for n in cps)
                or sorted(set(cps)) != cps):
            errors.append("checkpoints: must be a strictly increasing list of positive integers")
    if "suite" in data:
        from .experiments import SUITES

        s = data["suite"]
        if not isinstance(s, list) or not s:
            errors.append("suite: must be a nonempty list")
        else:
            for name in s:
                if name not in SUITES:
                    errors.append(f"suite: unknown suite {name!r}; known: {sorted(SUITES)}")
    if "params" in data and not isinstance(data["params"], dict):
        errors.append("params: must be an object")
    if data.get("out") is not None and not isinstance(data["out"], str):
        errors.append("out: must be a string path")

    space = None
    if "model" in data:
        space = _validate_model(data["model"], errors)
    if "set_class" in data:
        sc = data["set_class"]
        if not isinstance(sc, dict) or "kind" not in sc:
            errors.append("set_class: must be an object with a 'kind'")
        else:
            for k in sorted(set(sc) - {"kind", "sets"}):
                errors.append(f"set_class: unknown key {k!r}")
            obj = _try(errors, "set_class", lambda: build_set_class(sc))
            if obj is not None and space is not None:
                _try(errors, "set_class", lambda: obj.check_space(space))
    model = data.get("model") if isinstance(data.get("model"), dict) else {}
    if data.get("kernel", "auto") not in ("auto", None) and model.get("kind") in _KERNEL_FOR:
        if data["kernel"] != _KERNEL_FOR[model["kind"]]:
            errors.append(f"kernel: {data['kernel']!r} does not match model {model['kind']!r}")
    if data.get("oracle") == "exact" and model.get("kind") in ("ferguson-dirichlet", "polya-urn"):
        errors.append("oracle: exact oracle needs a latent theta (exchangeable model)")
    return errors


_KERNEL_FOR = {"exchangeable": "mixture", "ferguson-dirichlet": "dirichlet", "polya-urn": "urn"}


def _validate_model(m, errors: list) -> StateSpace | None:
    if not isinstance(m, dict) or m.get("kind") not in MODEL_KEYS:
        errors.append(f"model: must be an object with kind in {sorted(MODEL_KEYS)}")
        return None
    kind = m["kind"]
    for k in sorted(set(m) - MODEL_KEYS[kind]):
        errors.append(f"model: unknown key {k!r} for {kind}")
    for k in sorted(MODEL_KEYS[kind] - set(m)):
        errors.append(f"model: missing key {k!r} for {kind}")
    space = None
    if kind == "exchangeable" and isinstance(m.get("prior"), dict):
        p = m["prior"]
        for k in sorted(set(p) - PRIOR_KEYS):
            errors.append(f"model.prior: unknown key {k!r}")
        prior = _try(errors, "model.prior", lambda: build_prior(p))
        if prior is not None:
            space = StateSpace.finite(prior.alphabet_size)
    elif kind == "exchangeable" and "prior" in m:
        errors.append("model.prior: must be an object")
    if kind in ("ferguson-dirichlet", "polya-urn"):
        if "alpha" in m and (not _is_num(m["alpha"]) or not m["alpha"] > 0):
            errors.append("model.alpha: must be a positive number")
        if "base" in m:
            base = _try(errors, "model.base", lambda: build_base(m["base"]))
            if base is not None:
                space = base.space
    if kind == "polya-urn" and "weights" in m:
        w = m["weights"]
        if not isinstance(w, dict) or w.get("kind") not in WEIGHT_KEYS:
            errors.append("model.weights: must be an object with kind discrete or uniform")
        else:
            for k in sorted(set(w) - WEIGHT_KEYS[w["kind"]]):
                errors.append(f"model.weights: unknown key {k!r}")
            _try(errors, "model.weights", lambda: build_weights(w))
    return space

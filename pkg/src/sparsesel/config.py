"""YAML run configuration: scenario, constraint and solver sections."""
from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .constraints import AccuracySpec, Constraint, Kind, thresholds
from .errors import ConfigError
from .rounding import RoundingParams
from .scenario import MODEL_KINDS, DomainGrid, Scenario, build_grid, reference_layout
from .solvers import BarrierParams, ReweightParams, SubgradientParams
from .validation import ValidationConfig


class _Loader(yaml.SafeLoader):
    pass


# YAML 1.1 reads "1e-5" (no dot) as a string; accept it as a float
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)?(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789."),
)


def _section(raw, key, default=None):
    val = raw.get(key, default)
    if val is None:
        return {} if default is None else default
    if not isinstance(val, dict):
        raise ConfigError(f"section '{key}' must be a mapping")
    return val


def _make(cls, opts, what):
    names = {f.name for f in fields(cls) if f.init}
    unknown = set(opts) - names
    if unknown:
        raise ConfigError(f"{what}: unknown keys {sorted(unknown)}")
    try:
        return cls(**opts)
    except TypeError as exc:
        raise ConfigError(f"{what}: {exc}")


def parse_model(sec):
    sec = dict(sec)
    kind = sec.pop("kind", None)
    if kind not in MODEL_KINDS:
        raise ConfigError(f"model.kind must be one of {sorted(MODEL_KINDS)}, got {kind!r}")
    return _make(MODEL_KINDS[kind], sec, f"model ({kind})")


def parse_sensors(val):
    if isinstance(val, dict):
        opts = dict(val)
        layout = opts.pop("layout", None)
        if layout != "reference":
            raise ConfigError("sensors: expected a list of positions or layout: reference")
        try:
            return reference_layout(**opts)
        except TypeError as exc:
            raise ConfigError(f"sensors: {exc}")
    arr = np.asarray(val, dtype=float)
    if arr.ndim != 2:
        raise ConfigError("sensors must be a list of position vectors")
    return arr


def parse_grid(sec):
    if "points" in sec:
        return DomainGrid(np.asarray(sec["points"], dtype=float))
    if "bounds" in sec and "resolution" in sec:
        return build_grid(sec["bounds"], float(sec["resolution"]))
    raise ConfigError("grid needs either points or bounds + resolution")


def parse_scenario(raw) -> Scenario:
    for key in ("model", "sensors", "grid"):
        if key not in raw:
            raise ConfigError(f"missing section '{key}'")
    model = parse_model(_section(raw, "model"))
    return Scenario(parse_sensors(raw["sensors"]), model, parse_grid(_section(raw, "grid")))


@dataclass
class ConstraintConfig:
    kind: str = "mineig"
    radius: float | None = None
    prob: float | None = None
    mean_radius: float | None = None
    threshold: float | None = None
    prior: list | None = None

    def build(self, N) -> Constraint:
        kind = Kind(self.kind)
        if self.threshold is not None:
            lam = float(self.threshold)
        elif self.radius is not None and self.prob is not None:
            lam = thresholds(AccuracySpec(self.radius, self.prob, N, self.mean_radius), kind)
        else:
            raise ConfigError("constraint needs radius + prob or an explicit threshold")
        prior = None if self.prior is None else np.asarray(self.prior, dtype=float)
        if prior is not None and prior.shape != (N, N):
            raise ConfigError(f"prior must be {N}x{N}")
        return Constraint(kind, lam, prior)


@dataclass
class RunConfig:
    """Parsed configuration. ``raw`` keeps the document for the report echo."""

    scenario: Scenario
    constraint: ConstraintConfig
    solver: str = "barrier"
    subgradient: SubgradientParams = field(default_factory=SubgradientParams)
    barrier: BarrierParams = field(default_factory=BarrierParams)
    reweight: ReweightParams | None = None
    rounding: RoundingParams = field(default_factory=RoundingParams)
    soft: bool = False
    validation: ValidationConfig | None = None
    sweep_radii: list = field(default_factory=list)
    distributed: dict = field(default_factory=dict)
    seed: int = 0
    raw: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def build_constraint(self) -> Constraint:
        return self.constraint.build(self.scenario.N)


def parse_config(raw, base_dir=None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    scenario = parse_scenario(raw)
    cons = _make(ConstraintConfig, _section(raw, "constraint"), "constraint")

    sol = dict(_section(raw, "solver"))
    name = sol.pop("name", "barrier")
    if name not in ("barrier", "subgradient"):
        raise ConfigError(f"solver.name must be barrier or subgradient, got {name!r}")
    sub = _make(SubgradientParams, sol.pop("subgradient", None) or {}, "solver.subgradient")
    bar = _make(BarrierParams, sol.pop("barrier", None) or {}, "solver.barrier")
    if sol:
        raise ConfigError(f"solver: unknown keys {sorted(sol)}")

    rw = raw.get("reweight")
    reweight = None if rw in (None, False) else _make(ReweightParams, dict(rw) if isinstance(rw, dict) else {}, "reweight")
    seed = int(raw.get("seed", 0))
    rounding = _make(RoundingParams, {"seed": seed, **_section(raw, "rounding")}, "rounding")

    val = raw.get("validation")
    validation = None
    if isinstance(val, dict) and val.get("enabled", True):
        opts = {k: v for k, v in val.items() if k != "enabled"}
        validation = _make(ValidationConfig, {"seed": seed, **opts}, "validation")

    sweep = _section(raw, "sweep")
    radii = [float(r) for r in sweep.get("radii", [])]
    return RunConfig(scenario, cons, name, sub, bar, reweight, rounding, bool(raw.get("soft", False)),
                     validation, radii, dict(_section(raw, "distributed")), seed,
                     copy.deepcopy(raw), Path(base_dir) if base_dir else Path.cwd())


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.load(path.read_text(), Loader=_Loader)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}")
    return parse_config(raw, base_dir=path.parent)

"""Scenarios, measurement models and per-sensor Fisher information atoms.

The stacked block-diagonal FIM of a gridded domain is never formed. Atoms
live in an array of shape ``(M, D, N, N)``: ``atoms[m, d]`` is the
information sensor ``m`` carries about the parameter at grid point ``d``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, SingularityError

# rotation used by the bearing model
_P = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class RangeModel:
    """y = d + n, Var(n) = sigma2 * d**eta."""

    sigma2: float
    eta: float = 0.0
    kind: str = field(default="range", init=False)

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ConfigError("range model: sigma2 must be > 0")


@dataclass(frozen=True)
class RssModel:
    """Log-normal shadowing, received power in dBm.

    ``y0`` and ``d0`` only set the mean power and do not enter the FIM.
    """

    sigma_db: float
    eta: float
    y0: float = 0.0
    d0: float = 1.0
    kind: str = field(default="rss", init=False)

    def __post_init__(self):
        if not self.sigma_db > 0:
            raise ConfigError("rss model: sigma_db must be > 0")


@dataclass(frozen=True)
class BearingModel:
    """Bearing (arctan) measurements.

    ``sigma2`` is used in whatever unit the caller supplies; no
    degree/radian conversion is applied.
    """

    sigma2: float
    kind: str = field(default="bearing", init=False)

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ConfigError("bearing model: sigma2 must be > 0")


@dataclass(frozen=True)
class EnergyModel:
    """y = sqrt(e) * beta / (beta + d**2) + n, Var(n) = sigma2.

    The FIM coefficient uses the denominator ``(beta + d**2)**2``. Note that
    differentiating the attenuation exactly gives ``(beta + d**2)**4``; the
    squared form is kept so selections are comparable with published
    energy-model results.
    """

    energy: float
    beta: float
    sigma2: float
    kind: str = field(default="energy", init=False)

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ConfigError("energy model: sigma2 must be > 0")
        if not self.energy > 0:
            raise ConfigError("energy model: energy must be > 0")
        if self.beta < 0:
            raise ConfigError("energy model: beta must be >= 0")


@dataclass(frozen=True)
class LinearModel:
    """y_m = h_m^T theta + n_m; the FIM does not depend on theta."""

    regressors: tuple
    variances: tuple
    kind: str = field(default="linear", init=False)

    def __post_init__(self):
        h = np.asarray(self.regressors, dtype=float)
        v = np.asarray(self.variances, dtype=float)
        if h.ndim != 2 or v.shape != (h.shape[0],):
            raise ConfigError("linear model: need one variance per regressor")
        if np.any(v <= 0):
            raise ConfigError("linear model: variances must be > 0")
        object.__setattr__(self, "regressors", tuple(map(tuple, h)))
        object.__setattr__(self, "variances", tuple(v))


ModelParams = Union[RangeModel, RssModel, BearingModel, EnergyModel, LinearModel]
MODEL_KINDS = {
    "range": RangeModel,
    "rss": RssModel,
    "bearing": BearingModel,
    "energy": EnergyModel,
    "linear": LinearModel,
}


@dataclass(frozen=True)
class DomainGrid:
    points: np.ndarray  # (D, N)
    bounds: tuple | None = None
    resolution: float | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise ConfigError("grid must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ConfigError("grid points must be finite")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ConfigError("grid points must be pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class Scenario:
    sensors: np.ndarray  # (M, N)
    model: ModelParams
    grid: DomainGrid

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.sensors, dtype=float))
        if s.shape[0] < 1:
            raise ConfigError("scenario needs at least one sensor")
        if not np.all(np.isfinite(s)):
            raise ConfigError("sensor positions must be finite")
        if s.shape[1] != self.grid.points.shape[1]:
            raise ConfigError("sensor and grid dimensions differ")
        if isinstance(self.model, LinearModel) and len(self.model.regressors) != s.shape[0]:
            raise ConfigError("linear model: one regressor per sensor required")
        s.setflags(write=False)
        object.__setattr__(self, "sensors", s)

    @property
    def M(self):
        return self.sensors.shape[0]

    @property
    def D(self):
        return len(self.grid)

    @property
    def N(self):
        if isinstance(self.model, LinearModel):
            return len(self.model.regressors[0])
        return self.grid.points.shape[1]


def build_grid(area_bounds: Sequence[Sequence[float]], resolution: float) -> DomainGrid:
    """Regular lattice anchored at the lower corner of ``area_bounds``.

    ``area_bounds`` is ``[(lo, hi), ...]``, one pair per axis. The upper
    bound is included only when the resolution divides the extent.
    """
    if not resolution > 0:
        raise ConfigError("grid resolution must be > 0")
    axes = []
    for lo, hi in area_bounds:
        if not hi > lo:
            raise ConfigError(f"degenerate area bounds ({lo}, {hi})")
        n = int(math.floor((hi - lo) / resolution + 1e-9)) + 1
        axes.append(lo + resolution * np.arange(n))
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    bounds = tuple((float(lo), float(hi)) for lo, hi in area_bounds)
    return DomainGrid(points, bounds=bounds, resolution=float(resolution))


def fim_block(model: ModelParams, sensor, theta, index: int = 0) -> np.ndarray:
    """Fisher information of a single measurement about ``theta``.

    ``index`` selects the regressor for the linear model and is ignored
    otherwise.
    """
    if isinstance(model, LinearModel):
        h = np.asarray(model.regressors[index])
        return np.outer(h, h) / model.variances[index]

    diff = np.asarray(theta, dtype=float) - np.asarray(sensor, dtype=float)
    d2 = float(diff @ diff)
    if d2 == 0.0:
        raise SingularityError(index, None)
    outer = np.outer(diff, diff)
    if isinstance(model, RangeModel):
        var = model.sigma2 * d2 ** (model.eta / 2)
        return outer / (var * d2)
    if isinstance(model, RssModel):
        c = 50 * model.eta**2 / (model.sigma_db**2 * d2**2 * math.log(10))
        return c * outer
    if isinstance(model, BearingModel):
        u = _P @ diff
        return np.outer(u, u) / (model.sigma2 * d2**2)
    if isinstance(model, EnergyModel):
        c = 4 * model.energy * model.beta**2 / (model.sigma2 * (model.beta + d2) ** 2)
        return c * outer
    raise ConfigError(f"unknown model {model!r}")


def assemble_atoms(scenario: Scenario) -> np.ndarray:
    """All blocks F_m(theta_d) as an array of shape (M, D, N, N)."""
    model = scenario.model
    M, D = scenario.M, scenario.D

    if isinstance(model, LinearModel):
        h = np.asarray(model.regressors)
        blocks = np.einsum("mi,mj->mij", h, h) / np.asarray(model.variances)[:, None, None]
        return np.repeat(blocks[:, None], D, axis=1)

    diff = scenario.grid.points[None, :, :] - scenario.sensors[:, None, :]  # (M, D, N)
    d2 = np.einsum("mdi,mdi->md", diff, diff)
    hits = np.argwhere(d2 == 0.0)
    if len(hits):
        m, d = (int(x) for x in hits[0])
        raise SingularityError(m, d, f"sensor {m} coincides with grid point {d}")

    if isinstance(model, RangeModel):
        coef = 1.0 / (model.sigma2 * d2 ** (model.eta / 2) * d2)
    elif isinstance(model, RssModel):
        coef = 50 * model.eta**2 / (model.sigma_db**2 * d2**2 * math.log(10))
    elif isinstance(model, BearingModel):
        coef = 1.0 / (model.sigma2 * d2**2)
        diff = diff @ _P.T
    elif isinstance(model, EnergyModel):
        coef = 4 * model.energy * model.beta**2 / (model.sigma2 * (model.beta + d2) ** 2)
    else:
        raise ConfigError(f"unknown model {model!r}")
    atoms = coef[..., None, None] * np.einsum("mdi,mdj->mdij", diff, diff)
    return atoms


def weighted_fim(atoms: np.ndarray, w, prior=None) -> np.ndarray:
    """Per-grid-point information J_p + sum_m w_m F_m, shape (D, N, N)."""
    S = np.einsum("m,mdij->dij", np.asarray(w, dtype=float), atoms)
    if prior is not None:
        S = S + prior
    return S


def reference_layout(n_per_side: int = 20, target=(0.0, 15.0), offset: float = 27.5) -> np.ndarray:
    """Approximate candidate layout for the reference runs.

    Sensors sit on a square ring around the target area: ``n_per_side``
    evenly spaced candidates per side, ``offset`` meters outside the area.
    Published coordinates are not available; the default offset was chosen
    so the energy-model reference run selects a comparable number of
    sensors.
    """
    lo, hi = target
    side_lo = lo - offset
    side_hi = hi + offset
    t = np.linspace(side_lo, side_hi, n_per_side + 1)[:-1]
    bottom = np.stack([t, np.full_like(t, side_lo)], axis=1)
    right = np.stack([np.full_like(t, side_hi), t], axis=1)
    top = np.stack([side_hi + side_lo - t, np.full_like(t, side_hi)], axis=1)
    left = np.stack([np.full_like(t, side_lo), side_hi + side_lo - t], axis=1)
    return np.concatenate([bottom, right, top, left])

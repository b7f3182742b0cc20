"""Monte-Carlo validation of a selection under the range model.

Range measurements are simulated at every grid point, the target is
localized by Gauss-Newton, and the resulting RMSE is set against the
root-CRB of the selection.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GeometryError, InfeasibleError
from .scenario import RangeModel, Scenario, assemble_atoms

CSV_HEADER = ("theta_x", "theta_y", "root_crb", "rmse", "trials")


@dataclass
class ValidationConfig:
    trials: int = 200
    iters: int = 10  # Gauss-Newton iterations
    init: str = "centroid"  # initial guess rule
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("validation needs trials >= 1")
        if self.iters < 1:
            raise ConfigError("Gauss-Newton needs iters >= 1")
        if self.init != "centroid":
            raise ConfigError(f"unknown initial-guess rule {self.init!r}")


def range_measurements(sensors, theta, sigma2, eta, rng):
    """y_m = d_m + n_m with Var(n_m) = sigma2 * d_m**eta."""
    d = np.linalg.norm(np.asarray(theta, dtype=float) - np.asarray(sensors, dtype=float), axis=1)
    if sigma2 == 0:
        return d
    return d + np.sqrt(sigma2 * d**eta) * rng.standard_normal(len(d))


def simulate_ranges(scenario: Scenario, w, theta_true, seed=0):
    """Noisy ranges from the selected sensors (``w`` Boolean) to ``theta_true``."""
    model = scenario.model
    if not isinstance(model, RangeModel):
        raise ConfigError("measurement simulation is implemented for the range model only")
    sel = np.asarray(w) > 0.5
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return range_measurements(scenario.sensors[sel], theta_true, model.sigma2, model.eta, rng)


def gauss_newton_localize(y, sensors, theta_init, iters: int = 10):
    """Least-squares position fit to range measurements by Gauss-Newton."""
    a = np.asarray(sensors, dtype=float)
    y = np.asarray(y, dtype=float)
    theta = np.array(theta_init, dtype=float)
    for _ in range(iters):
        diff = theta - a
        d = np.linalg.norm(diff, axis=1)
        if np.any(d == 0):
            raise GeometryError("iterate coincides with a sensor", iterate=theta.copy())
        J = diff / d[:, None]
        JtJ = J.T @ J
        # rank-deficient geometry (e.g. collinear sensors with the target on the line)
        if np.linalg.cond(JtJ) > 1e12:
            raise GeometryError("singular Gauss-Newton normal matrix", iterate=theta.copy())
        theta = theta + np.linalg.solve(JtJ, J.T @ (y - d))
    return theta


def crb_stats(atoms, w, prior=None):
    """(max root-CRB, mean root-CRB, per-point map) with root-CRB = sqrt(tr F^-1)."""
    F = np.einsum("m,mdij->dij", np.asarray(w, dtype=float), atoms)
    if prior is not None:
        F = F + prior
    out = np.empty(len(F))
    for d, Fd in enumerate(F):
        try:
            L = np.linalg.cholesky(Fd)
        except np.linalg.LinAlgError:
            raise InfeasibleError(f"information matrix singular at grid point {d}", point=d)
        out[d] = math.sqrt(float(np.sum(np.linalg.inv(L) ** 2)))
    return float(out.max()), float(out.mean()), out


@dataclass
class PointResult:
    theta: np.ndarray
    root_crb: float
    rmse: float
    stderr: float  # standard error of the RMSE estimate
    trials: int


def monte_carlo_rmse(scenario: Scenario, w, config: ValidationConfig | None = None):
    """Gauss-Newton RMSE at every grid point, one RNG stream per (point, trial)."""
    cfg = config or ValidationConfig()
    model = scenario.model
    if not isinstance(model, RangeModel):
        raise ConfigError("validation is implemented for the range model only")
    sel = np.asarray(w) > 0.5
    sensors = scenario.sensors[sel]
    if len(sensors) < scenario.N:
        raise GeometryError(f"{len(sensors)} selected sensors cannot localize in {scenario.N} dimensions")
    _, _, crb = crb_stats(assemble_atoms(scenario), sel.astype(float))
    init = sensors.mean(axis=0)

    results = []
    for d, theta in enumerate(scenario.grid.points):
        sq = np.empty(cfg.trials)
        for i in range(cfg.trials):
            rng = np.random.default_rng([cfg.seed, d, i])
            y = range_measurements(sensors, theta, model.sigma2, model.eta, rng)
            est = gauss_newton_localize(y, sensors, init, cfg.iters)
            sq[i] = float(np.sum((est - theta) ** 2))
        mse = float(sq.mean())
        rmse = math.sqrt(mse)
        # delta method: se(sqrt(m)) = se(m) / (2 sqrt(m))
        se = float(sq.std(ddof=1)) / math.sqrt(cfg.trials) / (2 * rmse) if cfg.trials > 1 and rmse > 0 else 0.0
        results.append(PointResult(theta.copy(), float(crb[d]), rmse, se, cfg.trials))
    return results


def write_csv(results, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for r in results:
            wr.writerow([repr(float(r.theta[0])), repr(float(r.theta[1])),
                         repr(r.root_crb), repr(r.rmse), r.trials])

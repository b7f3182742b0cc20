"""End-to-end selection run and its file outputs."""
from __future__ import annotations

import contextlib
import csv
import json
import logging
from pathlib import Path

import numpy as np

from .config import RunConfig
from .constraints import Kind, point_margins
from .errors import ConfigError, SelectionError
from .rounding import randomized_round
from .scenario import RangeModel, assemble_atoms
from .solvers import ReweightParams, barrier_newton, projected_subgradient, reweighted_solve
from .validation import crb_stats, monte_carlo_rmse

log = logging.getLogger(__name__)

ZERO_TOL = 1e-6  # entries above this count towards the relaxed support
CSV_HEADER = ("sensor_index", "x", "y", "w_relaxed", "w_boolean")


@contextlib.contextmanager
def stage(name):
    """Tag any pipeline error escaping the block with the stage it came from."""
    try:
        yield
    except SelectionError as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise


def _floats(a):
    return [float(x) for x in np.asarray(a, dtype=float).ravel()]


def solve_relaxed(atoms, constraint, cfg: RunConfig):
    """Relaxed solve per the config; returns (w, certificate or None, trace)."""
    if cfg.solver == "barrier" and constraint.kind is not Kind.MIN_EIG:
        raise ConfigError("the barrier solver handles the min-eigenvalue constraint only; use subgradient")
    if cfg.reweight is not None:
        rw = ReweightParams(cfg.reweight.i_max, cfg.reweight.delta, cfg.solver)
        inner = cfg.barrier if cfg.solver == "barrier" else cfg.subgradient
        w, trace = reweighted_solve(atoms, constraint, rw, inner)
        return w, trace.certificate, trace
    if cfg.solver == "barrier":
        return barrier_newton(atoms, constraint, cfg.barrier)
    w, trace = projected_subgradient(atoms, constraint, cfg.subgradient)
    return w, None, trace


def run(cfg: RunConfig, echo=print) -> dict:
    """assemble -> thresholds -> solve -> round -> certify -> validate."""
    sc = cfg.scenario
    with stage("assemble"):
        atoms = assemble_atoms(sc)
    with stage("thresholds"):
        constraint = cfg.build_constraint()
    echo(f"{constraint.kind.value} threshold = {constraint.threshold:.10g}")

    with stage("solve"):
        w, cert, trace = solve_relaxed(atoms, constraint, cfg)

    report = {
        "seed": cfg.seed,
        "solver": cfg.solver,
        "reweight": None if cfg.reweight is None else cfg.reweight.i_max,
        "soft": cfg.soft,
        "constraint": {"kind": constraint.kind.value, "threshold": constraint.threshold},
        "w_relaxed": _floats(w),
        "relaxed_objective": float(np.sum(w)),
        "relaxed_support": int(np.sum(w > ZERO_TOL)),
    }
    if cfg.soft:
        final = w
    else:
        with stage("round"):
            final = randomized_round(w, atoms, constraint, cfg.rounding)
        report["w_boolean"] = [int(x) for x in final]
        report["selected"] = [int(i) for i in np.flatnonzero(final)]
        report["cardinality"] = int(final.sum())
    report["margins"] = _floats(point_margins(atoms, final, constraint))

    report["dual"] = None
    if cert is not None:
        u = np.ones(len(w)) if cert.weights is None else cert.weights
        bound = cert.bound
        report["dual"] = {"bound": bound, "gap": float(u @ w) - bound, "weighted": cert.weights is not None,
                          "t": cert.t}
    report["iterations"] = trace.summary()

    if cfg.validation is not None and not cfg.soft:
        with stage("validate"):
            report["validation"] = validate_selection(cfg, atoms, final)
    report["config"] = cfg.raw
    report["_final"] = final
    return report


def validate_selection(cfg: RunConfig, atoms, w_bool):
    sc = cfg.scenario
    mx, av, _ = crb_stats(atoms, w_bool)
    out = {"max_root_crb": mx, "mean_root_crb": av}
    if not isinstance(sc.model, RangeModel):
        log.info("Monte-Carlo validation skipped: range model only")
        return out
    res = monte_carlo_rmse(sc, w_bool, cfg.validation)
    out["points"] = res
    out["max_rmse"] = max(r.rmse for r in res)
    out["mean_rmse"] = float(np.mean([r.rmse for r in res]))
    out["below_crb_3se"] = int(sum(r.rmse < r.root_crb - 3 * r.stderr for r in res))
    return out


# ------------------------------------------------------------------- outputs

def write_selection_csv(report, scenario, path):
    wb = report.get("w_boolean")
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for m, pos in enumerate(scenario.sensors):
            x = repr(float(pos[0]))
            y = repr(float(pos[1])) if len(pos) > 1 else ""
            wr.writerow([m, x, y, repr(report["w_relaxed"][m]), "" if wb is None else wb[m]])


def _json_ready(report):
    out = {k: v for k, v in report.items() if not k.startswith("_")}
    val = out.get("validation")
    if val and "points" in val:
        val = dict(val)
        val["points"] = [{"theta": _floats(r.theta), "root_crb": r.root_crb, "rmse": r.rmse,
                          "stderr": r.stderr, "trials": r.trials} for r in val["points"]]
        out["validation"] = val
    return out


def write_report_json(report, path):
    Path(path).write_text(json.dumps(_json_ready(report), indent=2, sort_keys=True) + "\n")


def _star(x, y, r):
    pts = []
    for k in range(10):
        rad = r if k % 2 == 0 else 0.45 * r
        a = np.pi / 2 + k * np.pi / 5
        pts.append(f"{x + rad * np.cos(a):.3f},{y - rad * np.sin(a):.3f}")
    return " ".join(pts)


def write_placement_svg(report, scenario, path, size=480, pad=24):
    """Sensors as squares, selected sensors as stars, grid points as circles."""
    sens = scenario.sensors
    grid = scenario.grid.points
    if sens.shape[1] != 2:
        return False
    pts = np.vstack([sens, grid])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    scale = (size - 2 * pad) / max(float(np.max(hi - lo)), 1e-12)

    def tx(p):
        return pad + (p[0] - lo[0]) * scale, size - pad - (p[1] - lo[1]) * scale

    sel = set(report.get("selected", []))
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    for p in grid:
        x, y = tx(p)
        lines.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="3" fill="none" stroke="#1f77b4"/>')
    for m, p in enumerate(sens):
        x, y = tx(p)
        lines.append(f'<rect x="{x - 4:.3f}" y="{y - 4:.3f}" width="8" height="8" fill="none" stroke="black"/>')
        if m in sel:
            lines.append(f'<polygon points="{_star(x, y, 7)}" fill="#d62728"/>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")
    return True


def emit_outputs(report, scenario, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_selection_csv(report, scenario, out / "selection.csv")
    write_report_json(report, out / "report.json")
    write_placement_svg(report, scenario, out / "placement.svg")
    return out

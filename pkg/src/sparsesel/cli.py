"""Command-line entry point: ``sparsesel <command> --config run.yaml``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .constraints import AccuracySpec, Kind, thresholds
from .distributed import Topology, load_edges, run_distributed
from .errors import ConfigError, InfeasibleError, SelectionError
from .pipeline import emit_outputs, run, stage
from .rounding import brute_force_min_card
from .scenario import assemble_atoms
from .solvers import ReweightParams
from .validation import ValidationConfig, write_csv

log = logging.getLogger("sparsesel")


def _common(p):
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")
    p.add_argument("--soft", action="store_true", default=None,
                   help="keep the relaxed weights, skip rounding")
    p.add_argument("--solver", choices=("subgradient", "barrier"), default=None)
    p.add_argument("--reweight", type=int, metavar="I_MAX", default=None,
                   help="reweighting rounds (sparsity-enhancing outer loop)")
    p.add_argument("--out", default="out", help="output directory (default: out)")


def build_parser():
    ap = argparse.ArgumentParser(prog="sparsesel", description="Sparsity-promoting sensor selection.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("select", help="solve, round and write selection outputs"))

    sw = sub.add_parser("sweep", help="solution path over a list of accuracy radii")
    _common(sw)
    sw.add_argument("--radii", help="comma-separated radii (overrides sweep.radii)")
    sw.add_argument("--jobs", type=int, default=4)

    orc = sub.add_parser("oracle", help="exhaustive minimum-cardinality search")
    _common(orc)
    orc.add_argument("--m-cap", type=int, default=20)

    val = sub.add_parser("validate", help="select, then Monte-Carlo Gauss-Newton validation")
    _common(val)
    val.add_argument("--trials", type=int, default=None)

    dist = sub.add_parser("distributed", help="gossip-based subgradient simulation")
    _common(dist)
    dist.add_argument("--topology", default=None, help="complete, ring or an edge-list file")
    dist.add_argument("--rounds", type=int, default=None, help="gossip rounds per iteration")

    th = sub.add_parser("thresholds", help="print accuracy thresholds")
    th.add_argument("--radius", type=float, required=True)
    th.add_argument("--prob", type=float, required=True)
    th.add_argument("--dim", type=int, default=2)
    th.add_argument("--mean-radius", type=float, default=None)
    th.add_argument("--kind", choices=[k.value for k in Kind], default=None)
    return ap


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.rounding = dataclasses.replace(cfg.rounding, seed=args.seed)
        if cfg.validation is not None:
            cfg.validation = dataclasses.replace(cfg.validation, seed=args.seed)
    if args.soft:
        cfg.soft = True
    if args.solver is not None:
        cfg.solver = args.solver
    if args.reweight is not None:
        base = cfg.reweight or ReweightParams()
        cfg.reweight = dataclasses.replace(base, i_max=args.reweight)
    cfg.raw = dict(cfg.raw, seed=cfg.seed, soft=cfg.soft, solver_name=cfg.solver,
                   reweight_rounds=None if cfg.reweight is None else cfg.reweight.i_max)
    return cfg


def cmd_select(cfg, args):
    report = run(cfg)
    out = emit_outputs(report, cfg.scenario, args.out)
    if "validation" in report and "points" in report["validation"]:
        write_csv(report["validation"]["points"], out / "validation.csv")
    _print_summary(report)
    return 0


def _print_summary(report):
    print(f"relaxed objective {report['relaxed_objective']:.6f} (support {report['relaxed_support']})")
    if "cardinality" in report:
        print(f"selected {report['cardinality']} sensors: {report['selected']}")
    if report.get("dual"):
        print(f"dual bound {report['dual']['bound']:.6f}, gap {report['dual']['gap']:.3e}")


def cmd_validate(cfg, args):
    if cfg.soft:
        raise ConfigError("validation needs a Boolean selection; drop --soft")
    opts = {} if cfg.validation is None else dataclasses.asdict(cfg.validation)
    opts["seed"] = cfg.seed
    if args.trials is not None:
        opts["trials"] = args.trials
    cfg.validation = ValidationConfig(**opts)
    report = run(cfg)
    out = emit_outputs(report, cfg.scenario, args.out)
    v = report["validation"]
    if "points" in v:
        write_csv(v["points"], out / "validation.csv")
        print(f"max RMSE {v['max_rmse']:.4g}, max root-CRB {v['max_root_crb']:.4g}, "
              f"points below CRB - 3 SE: {v['below_crb_3se']}")
    else:
        print(f"max root-CRB {v['max_root_crb']:.4g} (Monte-Carlo only for the range model)")
    return 0


def cmd_sweep(cfg, args):
    radii = [float(r) for r in args.radii.split(",")] if args.radii else list(cfg.sweep_radii)
    if not radii:
        raise ConfigError("sweep needs radii (sweep.radii in the config or --radii)")
    if cfg.constraint.threshold is not None:
        raise ConfigError("sweep varies the radius; remove constraint.threshold")

    def one(r):
        c = dataclasses.replace(cfg, constraint=dataclasses.replace(cfg.constraint, radius=r), validation=None)
        return run(c, echo=lambda *_: None)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as ex:
        reports = list(ex.map(one, radii))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["radius", "threshold", "relaxed_objective", "cardinality", "selected"])
        for r, rep in zip(radii, reports):
            card = rep.get("cardinality", "")
            sel = " ".join(map(str, rep.get("selected", [])))
            wr.writerow([repr(r), repr(rep["constraint"]["threshold"]), repr(rep["relaxed_objective"]), card, sel])
            print(f"R_e={r:g}  threshold={rep['constraint']['threshold']:.6g}  "
                  f"l1={rep['relaxed_objective']:.4f}  selected={card}")
    return 0


def cmd_oracle(cfg, args):
    with stage("assemble"):
        atoms = assemble_atoms(cfg.scenario)
    with stage("thresholds"):
        c = cfg.build_constraint()
    print(f"{c.kind.value} threshold = {c.threshold:.10g}")
    with stage("oracle"):
        w, k = brute_force_min_card(atoms, c, args.m_cap)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = {"cardinality": k, "w": None if w is None else [int(x) for x in w],
           "selected": None if w is None else [int(i) for i in np.flatnonzero(w)]}
    (out / "oracle.json").write_text(json.dumps(res, indent=2) + "\n")
    if w is None:
        raise InfeasibleError("even the full sensor set violates the constraint")
    print(f"minimum cardinality {k}: {res['selected']}")
    return 0


def _topology(spec, M, base):
    if spec in (None, "complete"):
        return Topology.complete(M)
    if spec == "ring":
        return Topology.ring(M)
    path = Path(spec)
    if not path.is_absolute() and not path.exists():
        path = base / path
    return Topology.from_edges(load_edges(path), M)


def cmd_distributed(cfg, args):
    d = cfg.distributed
    with stage("assemble"):
        atoms = assemble_atoms(cfg.scenario)
    with stage("thresholds"):
        c = cfg.build_constraint()
    print(f"{c.kind.value} threshold = {c.threshold:.10g}")
    with stage("distributed"):
        top = _topology(args.topology or d.get("topology"), atoms.shape[0], cfg.base_dir)
        R = args.rounds if args.rounds is not None else int(d.get("rounds", 10))
        k_max = int(d.get("k_max", cfg.subgradient.k_max))
        params = dataclasses.replace(cfg.subgradient, k_max=k_max)
        res = run_distributed(atoms, c, top, R, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = res.summary()
    summary.update({"rounds": R, "k_max": k_max, "w_best": [float(x) for x in res.w_best],
                    "divergence_iterations": res.divergence_events})
    (out / "distributed.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"distributed 1^T w = {summary['objective']:.6f}, centralized {summary['centralized_objective']:.6f}, "
          f"branch divergences {summary['divergence_events']}")
    return 0


def cmd_thresholds(args):
    spec = AccuracySpec(args.radius, args.prob, args.dim, args.mean_radius)
    kinds = [Kind(args.kind)] if args.kind else list(Kind)
    for k in kinds:
        if k is Kind.LOG_DET and spec.mean_radius is None:
            if args.kind:
                raise ConfigError("log-det threshold needs --mean-radius")
            continue
        print(f"{k.value} {thresholds(spec, k):.10g}")
    return 0


COMMANDS = {
    "select": cmd_select,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
    "validate": cmd_validate,
    "distributed": cmd_distributed,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "thresholds":
            return cmd_thresholds(args)
        with stage("config"):
            cfg = apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except SelectionError as exc:
        where = getattr(exc, "stage", args.command)
        print(f"sparsesel: {where}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ``qlmaxwell <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .compat import CompatData, check_cc
from .errors import ConfigInvalid, QLMaxwellError
from .linear import energy_audit
from .localization import CHART_REGISTRY, verify_charts
from .norms import hk_norm, l2_norm, w1inf
from .quasilinear import QLParams, continue_maximal
from .scenarios import DATA_REGISTRY, Scenario, build_data, build_scenario, load_config
from .studies import (contraction_study, convergence_study, dependence_study, linear_coefficients_for,
                      solve_scenario)

EXIT_OK = 0
EXIT_MONITOR = 3
EXIT_COMPAT = 4
EXIT_NO_CONTRACTION = 5
EXIT_STUDY_FAILED = 8

CSV_COLUMNS = ("t", "L2", "Hm", "omega", "dist_boundaryU", "trace_sup", "energy_lhs", "energy_rhs")


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "as_dict"):
        return _clean(obj.as_dict())
    return str(obj)


def write_report(report: dict, path: str | None) -> None:
    text = json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def write_csv(rows: list[dict], path: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([repr(float(r[c])) for c in CSV_COLUMNS])


def _scenario(args) -> Scenario:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = int(args.seed)
    return build_scenario(cfg)


def _outputs(args, sc: Scenario) -> tuple[str | None, str | None]:
    out = sc.config.get("output", {})
    return args.report or out.get("report"), args.csv or out.get("csv")


def _summary(sc: Scenario) -> dict:
    c = sc.config
    return {"name": c.get("name", ""), "law": c["law"], "data": c["data"], "grid": c["grid"],
            "time": c["time"], "seed": c["seed"]}


# subcommands -----------------------------------------------------------------------
def cmd_simulate(args) -> int:
    sc = _scenario(args)
    report_path, csv_path = _outputs(args, sc)
    traj, rep = continue_maximal(sc.law, sc.data, sc.T, sc.params, sc.monitors)
    audit = energy_audit(traj)
    grid = sc.grid
    m = min(sc.params.m, 2)
    rows = []
    omega = 0.0
    idx = {round(float(t), 12): i for i, t in enumerate(traj.times)}
    for n, (t, u) in enumerate(zip(traj.state_times, traj.states)):
        omega = max(omega, w1inf(u, grid))
        i = idx.get(round(float(t), 12), n)
        rows.append({"t": t, "L2": l2_norm(u, grid), "Hm": hk_norm(u, grid, m), "omega": omega,
                     "dist_boundaryU": rep.dist[n] if n < len(rep.dist) else float("nan"),
                     "trace_sup": rep.trace_sup[n] if n < len(rep.trace_sup) else float("nan"),
                     "energy_lhs": audit.lhs_series[i], "energy_rhs": audit.rhs_series[i]})
    converged = bool(rep.converged) and all(rep.converged)
    first = rep.first_history
    report = {
        "command": "simulate", "scenario": _summary(sc), "status": "ok",
        "converged": converged,
        "iterations": max(rep.iterations) if rep.iterations else 0,
        "blowup": rep.as_dict(),
        "compat": first.compat if first else {},
        "smallness": first.smallness if first else {},
        "step_selection": first.step_selection if first else {},
        "picard": {"distances": first.distances, "ratios": first.ratios,
                   "bc_residual": first.bc_residual, "pde_residual": first.pde_residual} if first else {},
        "energy": {"lhs": audit.lhs, "rhs": audit.rhs, "residual": audit.residual},
        "final": {"t": float(traj.times[-1]), "L2": l2_norm(traj.final, grid), "omega": omega},
    }
    status = EXIT_OK
    if rep.criterion != "none":
        report["status"] = "monitor-triggered"
        status = EXIT_MONITOR
    elif not converged:
        report["status"] = "not-converged"
        status = EXIT_NO_CONTRACTION
    write_report(report, report_path)
    if csv_path:
        write_csv(rows, csv_path)
    return status


def cmd_check_compat(args) -> int:
    sc = _scenario(args)
    report_path, _ = _outputs(args, sc)
    m = args.order or sc.params.m
    data = sc.data
    cdata = CompatData(data.u0, data.f_jets(m - 1), data.g_jets(m), data.t0)
    tol = args.tol if args.tol is not None else (
        sc.params.compat_tol if sc.params.compat_tol is not None else 10.0 * float(np.max(sc.grid.spacing)) ** 2)
    if sc.law.is_linear and args.kind != "nonlinear":
        co = linear_coefficients_for(sc.law, sc.grid)
        coeffs = _LinearJets(co)
        rep = check_cc("linear", m, cdata, sc.grid, coeffs=coeffs, tol=tol)
    else:
        rep = check_cc("nonlinear", m, cdata, sc.grid, law=sc.law, tol=tol)
    write_report({"command": "check-compat", "scenario": _summary(sc), "compat": rep.as_dict(),
                  "status": "ok" if rep.passed else "compat-failure"}, report_path)
    return EXIT_OK if rep.passed else EXIT_COMPAT


class _LinearJets:
    """Time-constant coefficient jets of a state-independent law."""

    def __init__(self, co):
        self.A0_jet = [co.A0_fn(0.0)]
        self.D_jet = [co.D_fn(0.0)] if co.D_fn is not None else None
        self.b_jet = [co.b_fn(0.0)]


def cmd_energy_audit(args) -> int:
    sc = _scenario(args)
    report_path, csv_path = _outputs(args, sc)
    resolutions = sc.config["study"].get("resolutions") or [sc.grid.cells[0]]
    rows = []
    for n in resolutions:
        cfg = dict(sc.config)
        cfg["grid"] = dict(cfg["grid"], cells=[int(n)] * 3)
        sub = build_scenario(cfg)
        h = float(np.min(sub.grid.spacing))
        dt = sc.config["time"]["dt"]
        courant = sc.config["study"].get("courant")
        if dt is None and courant is not None:
            dt = sub.T / int(np.ceil(sub.T / (courant * h)))
        # dt None: the solver's CFL rule on each grid
        traj, info = solve_scenario(sub.law, sub.data, sub.T, sub.params, dt=dt)
        a = energy_audit(traj)
        rows.append({"n": int(n), "h": h, "dt": traj.dt, "lhs": a.lhs, "rhs": a.rhs, "residual": a.residual})
    for a, b in zip(rows, rows[1:]):
        b["factor"] = a["residual"] / b["residual"] if b["residual"] > 0 else float("inf")
        b["order"] = float(np.log(b["factor"]) / np.log(a["h"] / b["h"])) if 0 < b["factor"] < np.inf else float("nan")
    last = rows[-1]
    write_report({"command": "energy-audit", "scenario": _summary(sc), "rows": rows, "status": "ok",
                  "lhs": last["lhs"], "rhs": last["rhs"], "residual": last["residual"],
                  "order_estimate": last.get("order", float("nan"))}, report_path)
    return EXIT_OK


def _study_params(sc: Scenario) -> dict:
    return {"workers": int(sc.config["study"].get("workers", 1))}


def _finish_study(args, sc: Scenario, result) -> int:
    report_path, _ = _outputs(args, sc)
    write_report({"command": args.command, "scenario": _summary(sc), "study": result.as_dict(),
                  "status": "ok" if result.passed else "expectation-not-met"}, report_path)
    return EXIT_OK if result.passed else EXIT_STUDY_FAILED


def cmd_contraction(args) -> int:
    sc = _scenario(args)
    amps = sc.config["study"].get("amplitudes") or [1.0, 0.5, 0.25, 0.125, 0.0625]
    res = contraction_study(sc.data, sc.law, amps, sc.params, **_study_params(sc))
    return _finish_study(args, sc, res)


def cmd_convergence(args) -> int:
    sc = _scenario(args)
    if sc.data.exact is None:
        raise ConfigInvalid("convergence-study needs a data generator with an exact solution", key="data.kind")
    c = sc.config
    res_list = c["study"].get("resolutions") or [8, 16, 32]

    def make(grid):
        return build_data(c["data"]["kind"], grid, sc.law, c["data"]["params"], float(c["time"]["t0"]),
                          int(c["seed"]))

    res = convergence_study(make, sc.law, res_list, sc.T, lengths=tuple(c["grid"]["lengths"]),
                            courant=float(c["study"].get("courant", 0.25)), params=sc.params,
                            **_study_params(sc))
    return _finish_study(args, sc, res)


def cmd_dependence(args) -> int:
    sc = _scenario(args)
    deltas = sc.config["study"].get("deltas") or [1e-2, 1e-3, 1e-4]
    res = dependence_study(sc.data, sc.law, deltas, sc.T, sc.params, **_study_params(sc))
    return _finish_study(args, sc, res)


def cmd_localize(args) -> int:
    names = args.charts or list(CHART_REGISTRY)
    unknown = [n for n in names if n not in CHART_REGISTRY]
    if unknown:
        raise ConfigInvalid(f"unknown chart {unknown[0]!r}", key="charts")
    seed = args.seed if args.seed is not None else 0
    table = verify_charts(names, n_boundary=args.samples, n_interior=args.samples, seed=seed)
    write_report({"command": "localize-verify", **table, "status": "ok" if table["passed"] else "identity-violation"},
                 args.report)
    return EXIT_OK if table["passed"] else 7


# parser --------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qlmaxwell", description="Quasilinear Maxwell solver and diagnostics.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("config", help="scenario JSON file")
            sp.add_argument("--csv", help="CSV time-series output path")
        sp.add_argument("--report", help="JSON report path (default: stdout)")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        return sp

    common(sub.add_parser("simulate", help="run the Picard solver with continuation and monitors"))
    sp = common(sub.add_parser("check-compat", help="compatibility-condition residuals at t0"))
    sp.add_argument("--order", type=int, help="order m (default: solver.m)")
    sp.add_argument("--kind", choices=["linear", "nonlinear"], help="force the recursion kind")
    sp.add_argument("--tol", type=float, help="relative tolerance")
    common(sub.add_parser("energy-audit", help="energy identity residual on one or more grids"))
    common(sub.add_parser("contraction-study", help="Picard ratios over data amplitudes"))
    common(sub.add_parser("convergence-study", help="manufactured-solution error and order"))
    common(sub.add_parser("dependence-study", help="solution difference against data perturbation"))
    sp = common(sub.add_parser("localize-verify", help="structural identities on registry charts"), config=False)
    sp.add_argument("charts", nargs="*", help=f"chart names (default: all of {', '.join(CHART_REGISTRY)})")
    sp.add_argument("--samples", type=int, default=100, help="boundary and interior samples per chart")
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "check-compat": cmd_check_compat,
    "energy-audit": cmd_energy_audit,
    "contraction-study": cmd_contraction,
    "convergence-study": cmd_convergence,
    "dependence-study": cmd_dependence,
    "localize-verify": cmd_localize,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except QLMaxwellError as exc:
        err = {"status": "error", "code": exc.code, "message": str(exc), "details": exc.details}
        sys.stderr.write(json.dumps(_clean(err), sort_keys=True) + "\n")
        return exc.exit_status
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(json.dumps({"status": "error", "code": "unexpected", "message": repr(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

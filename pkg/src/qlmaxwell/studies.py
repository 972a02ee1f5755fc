"""Convergence, contraction and continuous-dependence studies."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .core import Grid
from .errors import QLMaxwellError
from .laws import MaterialLaw
from .linear import LinearCoefficients, Trajectory, solve_linear
from .norms import g_surrogate, l2_norm
from .quasilinear import QLParams, QuasilinearData, solve_quasilinear


@dataclass
class StudyResult:
    kind: str
    rows: list = field(default_factory=list)
    slope: float = float("nan")
    passed: bool = False
    expectation: str = ""
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "rows": self.rows, "slope": self.slope, "passed": self.passed,
                "expectation": self.expectation, "notes": self.notes}


def fit_slope(x, y) -> float:
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(x, y, 1)[0])


def _map(fn: Callable, items: list, workers: int) -> list:
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def linear_coefficients_for(law: MaterialLaw, grid: Grid) -> LinearCoefficients:
    """Constant coefficients of a state-independent law."""
    X = grid.coords()
    u = np.zeros(grid.shape + (6,))
    b = np.asarray(law.zeta(grid.boundary_coords("bottom"), np.zeros(grid.shape[:2] + (3,))))
    return LinearCoefficients(A0=np.asarray(law.chi(X, u)), D=np.asarray(law.sigma(X, u)), b=b,
                              eta=law.eta, constant_A0=True)


def solve_scenario(law: MaterialLaw, data: QuasilinearData, T: float, params: QLParams | None = None,
                   dt: float | None = None) -> tuple[Trajectory, dict]:
    """Linear laws go straight to the linear solver; others through the Picard iteration."""
    p = replace(params or QLParams(), T=T)
    if dt is not None:
        p = replace(p, dt=dt)
    if law.is_linear:
        traj = solve_linear(linear_coefficients_for(law, data.grid), data.u0, data.f, data.g, data.grid, T,
                            dt=p.dt, t0=data.t0, g_top=data.g_top, cfl=p.cfl, integrator=p.integrator)
        return traj, {"iterations": 0, "converged": True}
    traj, hist = solve_quasilinear(law, data, p)
    return traj, {"iterations": hist.iterations, "converged": hist.converged,
                  "ratios": hist.ratios, "distances": hist.distances}


# convergence ---------------------------------------------------------------------
def convergence_study(make_data: Callable[[Grid], QuasilinearData], law: MaterialLaw, resolutions,
                      T: float, lengths=(1.0, 1.0, 1.0), courant: float = 0.25,
                      params: QLParams | None = None, min_order: float = 1.9,
                      workers: int = 1) -> StudyResult:
    """L2 error at T against the exact solution on refined grids with dt proportional to h."""
    resolutions = sorted(int(n) for n in resolutions)
    if len(resolutions) < 3:
        raise ValueError("an order needs at least 3 resolutions")

    def one(n):
        grid = Grid((n, n, n), tuple(lengths))
        data = make_data(grid)
        h = float(np.min(grid.spacing))
        steps = int(np.ceil(T / (courant * h)))
        traj, info = solve_scenario(law, data, T, params, dt=T / steps)
        err = l2_norm(traj.final - data.exact(data.t0 + T), grid)
        return {"n": n, "h": h, "dt": T / steps, "error": err, **{k: info[k] for k in ("iterations", "converged")}}

    rows = _map(one, resolutions, workers)
    errs = [r["error"] for r in rows]
    hs = [r["h"] for r in rows]
    notes = []
    if any(e2 >= e1 for e1, e2 in zip(errs, errs[1:])):
        notes.append("non-monotone errors")
    for a, b in zip(rows, rows[1:]):
        b["order"] = float(np.log(a["error"] / b["error"]) / np.log(a["h"] / b["h"])) if b["error"] > 0 else float("inf")
    slope = fit_slope(hs, errs) if min(errs) > 0 else float("inf")
    return StudyResult("convergence", rows, slope, bool(slope >= min_order and not notes),
                       f"observed order >= {min_order}", notes)


# contraction ---------------------------------------------------------------------
def contraction_study(base: QuasilinearData, law: MaterialLaw, amplitudes, params: QLParams | None = None,
                      q_max: float = 0.75, max_iterations: int = 12, workers: int = 1) -> StudyResult:
    """Picard ratios for the data scaled to each amplitude (relative to the base data)."""
    p = params or QLParams()

    def one(a):
        try:
            _, hist = solve_quasilinear(law, base.scaled(a), p)
        except QLMaxwellError as exc:
            return {"amplitude": a, "error": exc.code, "message": str(exc)}
        q = hist.ratios
        return {"amplitude": a, "iterations": hist.iterations, "converged": hist.converged,
                "ratios": q, "median_ratio": float(np.median(q)) if q else 0.0,
                "final_ratio": float(q[-1]) if q else 0.0, "distances": hist.distances,
                "smallness_passed": bool(hist.smallness.get("passed", True))}

    rows = _map(one, list(amplitudes), workers)
    ok = all("error" not in r and r["converged"] and r["median_ratio"] < 1.0 and r["final_ratio"] <= q_max
             and r["iterations"] <= max_iterations for r in rows)
    ordered = sorted((r for r in rows if "error" not in r), key=lambda r: r["amplitude"])
    monotone = all(a["median_ratio"] <= b["median_ratio"] + 1e-12 for a, b in zip(ordered, ordered[1:]))
    notes = [] if monotone else ["median ratio not monotone in amplitude"]
    return StudyResult("contraction", rows, float("nan"), bool(ok and monotone),
                       f"median q < 1, final q <= {q_max}, at most {max_iterations} iterations", notes)


# continuous dependence ---------------------------------------------------------------
def dependence_study(base: QuasilinearData, law: MaterialLaw, deltas, T: float,
                     params: QLParams | None = None, slope_range=(0.9, 1.1), workers: int = 1) -> StudyResult:
    """Difference of solutions for data scaled by (1 + delta) against the base solution."""
    p = replace(params or QLParams(), T=T)
    ref, _ = solve_scenario(law, base, T, p)
    m = p.m

    def one(d):
        try:
            traj, _ = solve_scenario(law, base.scaled(1.0 + d), T, replace(p, dt=ref.dt))
        except QLMaxwellError as exc:
            return {"delta": d, "error": exc.code, "message": str(exc)}
        diff = g_surrogate(traj.state_array() - ref.state_array(), ref.times, ref.grid, max(m - 1, 0))
        return {"delta": d, "difference": diff}

    rows = _map(one, list(deltas), workers)
    good = [r for r in rows if "error" not in r and r["delta"] != 0 and r["difference"] > 0]
    slope = fit_slope([abs(r["delta"]) for r in good], [r["difference"] for r in good]) if len(good) >= 2 else float("nan")
    zero_ok = all(r["difference"] == 0.0 for r in rows if "error" not in r and r["delta"] == 0)
    passed = bool(np.isfinite(slope) and slope_range[0] <= slope <= slope_range[1] and zero_ok
                  and len(good) == len([r for r in rows if r["delta"] != 0]))
    return StudyResult("dependence", rows, slope, passed, f"slope in [{slope_range[0]}, {slope_range[1]}]")

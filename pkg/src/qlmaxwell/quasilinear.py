"""Frozen-coefficient Picard iteration, smallness quantities, continuation and blow-up monitors."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .compat import CompatData, TimeJet, check_cc, s_nl, time_jet_extension
from .core import BOTTOM_NORMAL, Grid, apply_B, matvec, spatial_operator
from .errors import (BallExit, CompatFailure, ConfigInvalid, DomainExit, NoContraction, PreconditionFailure,
                     ZetaDomainViolation)
from .jets import Taylor, time_derivatives
from .laws import MaterialLaw
from .linear import RECORD_KEYS, LinearCoefficients, Trajectory, solve_linear
from .norms import (boundary_hk_norm, boundary_hk_sq, face_l2, g_surrogate, grad_inf, hk_norm,
                    hk_sq, time_derivative, w1inf, weighted_spacetime_sq)


@dataclass
class QuasilinearData:
    """Initial state, source and boundary data. ``f``/``g``/``g_top`` take t (jet-aware)."""

    grid: Grid
    u0: np.ndarray
    f: Callable | None = None
    g: Callable | None = None
    g_top: Callable | None = None
    t0: float = 0.0
    exact: Callable | None = None

    def scaled(self, factor: float) -> "QuasilinearData":
        def sc(fn):
            return None if fn is None else (lambda t, fn=fn: fn(t) * factor)
        return replace(self, u0=self.u0 * factor, f=sc(self.f), g=sc(self.g), g_top=sc(self.g_top),
                       exact=None)

    def f_jets(self, order: int) -> list:
        if self.f is None or order <= 0:
            return []
        return time_derivatives(self.f, self.t0, order)

    def g_jets(self, order: int) -> list:
        if self.g is None:
            return []
        return time_derivatives(self.g, self.t0, order)


@dataclass
class QLParams:
    m: int = 3
    T: float = 0.25            # window length tau
    dt: float | None = None
    cfl: float = 0.4
    tol: float = 1e-10         # relative Picard tolerance
    n_max: int = 30
    R: float = math.inf
    kappa: float | None = None
    kappa_tilde: float | None = None
    gamma: float = 0.0
    check_compat: bool = True
    compat_tol: float | None = None  # None: 10 * max(dx)^2 (discretized data)
    integrator: str = "rk4"
    tail_tol: float = 0.05
    patience: int = 3
    smallness_constants: dict | None = None


# smallness ----------------------------------------------------------------------
@dataclass
class SmallnessReport:
    kappa_bar: float
    z0: float
    z: float
    thresholds: dict
    passed: bool
    advisory: bool = True
    argmax: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"kappa_bar": self.kappa_bar, "z0": self.z0, "z": self.z, "thresholds": self.thresholds,
                "passed": self.passed, "advisory": self.advisory, "argmax": self.argmax}


def _dzeta_norm(zeta: Callable, x, xi: np.ndarray, e: np.ndarray) -> np.ndarray:
    d = zeta(x, Taylor(np.stack([xi, e])))
    if not isinstance(d, Taylor):
        return np.zeros(xi.shape[:-1])
    M = d.derivatives()[1]
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    return np.max(np.abs(np.linalg.eigvalsh(M)), axis=-1)


def smallness(zeta: Callable, kappa_bar: float, constants: dict | None = None, x_samples=None,
              n_radii: int = 9, n_angles: int = 24) -> SmallnessReport:
    """z0 = sup of the spectral norm of d_xi zeta over tangential |xi| <= kappa_bar, z = z0 kappa_bar."""
    if kappa_bar < 0:
        raise ValueError("kappa_bar must be nonnegative")
    c = {"C_m0": 1.0, "C_bar": 1.0, "C0": 1.0}
    c.update(constants or {})
    xs = np.zeros((1, 3)) if x_samples is None else np.asarray(x_samples).reshape(-1, 3)
    radii = np.linspace(0.0, kappa_bar, n_radii)
    ang = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    R, A, P = np.meshgrid(radii, ang, ang, indexing="ij")
    R, A, P = R.ravel(), A.ravel(), P.ravel()

    def vecs(r, a, p):
        xi = np.stack([r * np.cos(a), r * np.sin(a), np.zeros_like(r)], axis=-1)
        e = np.stack([np.cos(p), np.sin(p), np.zeros_like(p)], axis=-1)
        return xi, e

    best, arg = 0.0, {}
    for x in xs:
        xi, e = vecs(R, A, P)
        vals = _dzeta_norm(zeta, np.broadcast_to(x, xi.shape), xi, e)
        order = np.argsort(vals)[::-1][:5]
        for i in order:
            if vals[i] > best:
                best, arg = float(vals[i]), {"x": x.tolist(), "xi": xi[i].tolist(), "e": e[i].tolist()}
        if kappa_bar > 0 and vals.max() > 0:
            for i in order:
                def neg(p, x=x):
                    r = np.clip(p[0], 0.0, kappa_bar)
                    xi_, e_ = vecs(np.array([r]), np.array([p[1]]), np.array([p[2]]))
                    return -float(_dzeta_norm(zeta, x[None], xi_, e_)[0])
                res = minimize(neg, [R[i], A[i], P[i]], method="Nelder-Mead",
                               options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400})
                if -res.fun > best:
                    r = float(np.clip(res.x[0], 0.0, kappa_bar))
                    xi_, e_ = vecs(np.array([r]), np.array([res.x[1]]), np.array([res.x[2]]))
                    best, arg = -float(res.fun), {"x": x.tolist(), "xi": xi_[0].tolist(), "e": e_[0].tolist()}
    z0 = best
    z = z0 * kappa_bar
    thr = {"first": 0.125 / math.sqrt(c["C_m0"] * c["C_bar"]), "second": 1.0 / math.sqrt(2.0 * c["C0"])}
    thr["min"] = min(thr["first"], thr["second"])
    return SmallnessReport(kappa_bar, z0, z, thr, z <= thr["min"], True, arg)


def step_selection(constants: dict, T: float, r: float, kappa: float, kappa_tilde: float, m: int,
                   z0: float = 0.0) -> dict:
    """Radius R, weight gamma and step tau from the local-existence min-formulas."""
    c = {"C_m0": 1.0, "C_m": 1.0, "C_1": 1.0, "C_S": 1.0, "C_bar": 1.0, "C_nonempty": 1.0,
         "C_prod": 1.0, "C_lip": 1.0, "gamma_m": 1.0}
    c.update(constants or {})
    R = max(math.sqrt(32 * c["C_m0"]) * r, c["C_nonempty"] * r + 1.0)
    gamma = max(c["gamma_m"], c["C_m"] / c["C_m0"])
    cands = {
        "T": T,
        "distance": kappa / (2 * c["C_S"] * R),
        "weight": math.log(2) / (2 * gamma + m * c["C_1"]),
        "constants": c["C_m0"] / c["C_m"],
        "boundary": 1.0 / (16 * c["C_m0"] * c["C_bar"] * (4 * kappa_tilde ** 2 + c["C_S"] ** 2 * T * (T + z0 ** 2))),
        "smallness": 1.0 / (16 * c["C_m0"] * c["C_bar"]),
        "lipschitz": 1.0 / (32 * R ** 2 * c["C_m0"] * c["C_prod"] ** 2 * c["C_lip"] ** 2),
    }
    tau = min(cands.values())
    return {"R": R, "gamma": gamma, "tau": tau, "candidates": cands, "constants": c, "advisory": True}


# Picard map ----------------------------------------------------------------------
class _FrozenCoefficients:
    """Coefficients chi(u^), sigma(u^), zeta(B1 u^) of a sampler u^(t), cached per time."""

    def __init__(self, uhat, law: MaterialLaw, grid: Grid, t0: float = 0.0):
        self.uhat = uhat
        self.t0 = t0
        self.law = law
        self.grid = grid
        self.X = grid.coords()
        self.Xb = grid.boundary_coords("bottom")
        self._cache: dict = {}

    def _state(self, t: float) -> np.ndarray:
        key = round(float(t), 13)
        if key in self._cache:
            return self._cache[key]
        u = np.asarray(self.uhat(t))
        inside = self.law.domain.contains(u)
        if not np.all(inside):
            idx = tuple(int(i) for i in np.argwhere(~inside)[0])
            raise DomainExit("frozen state leaves U", t=float(t), x=self.X[idx].tolist())
        if len(self._cache) > 16:
            self._cache.clear()
        self._cache[key] = u
        return u

    def A0(self, t):
        return self.law.chi(self.X, self._state(t))

    def D(self, t):
        return self.law.sigma(self.X, self._state(t))

    def b(self, t):
        u = self._state(t)
        xi = np.cross(u[:, :, 0, :3], np.broadcast_to(BOTTOM_NORMAL, u[:, :, 0, :3].shape))
        ok = self.law.domain.trace_admissible(xi)
        if not np.all(ok):
            idx = tuple(int(i) for i in np.argwhere(~ok)[0])
            raise DomainExit("boundary trace leaves the domain of zeta", t=float(t), x=self.Xb[idx].tolist())
        return self.law.zeta(self.Xb, xi)

    def dA0(self, t):
        u = self._state(t)
        ut = np.asarray(self.uhat.time_derivative(t))
        d = self.law.chi(self.X, Taylor(np.stack([u, ut])))
        return d.derivatives()[1] if isinstance(d, Taylor) else np.zeros((6, 6))

    def linear_coefficients(self) -> LinearCoefficients:
        law = self.law
        if law.is_linear:
            # state independent: one constant matrix per coefficient
            u0 = self._state(self.t0)
            A0 = np.asarray(law.chi(self.X, u0))
            D = np.asarray(law.sigma(self.X, u0))
            b = np.asarray(law.zeta(self.Xb, np.zeros(self.Xb.shape)))
            return LinearCoefficients(A0=A0, D=D, b=b, eta=law.eta, constant_A0=True)
        return LinearCoefficients(A0=self.A0, D=self.D, b=self.b, dA0=self.dA0, eta=law.eta,
                                  constant_A0=False)


def picard_step(uhat, law: MaterialLaw, data: QuasilinearData, T: float, dt: float | None = None,
                cfl: float = 0.4, integrator: str = "rk4") -> Trajectory:
    """Solve the linear problem with coefficients frozen at the sampler ``uhat``."""
    fc = _FrozenCoefficients(uhat, law, data.grid, data.t0)
    coeffs = fc.linear_coefficients()
    return solve_linear(coeffs, data.u0, data.f, data.g, data.grid, T, dt=dt, t0=data.t0,
                        g_top=data.g_top, cfl=cfl, integrator=integrator)


# distances and histories -----------------------------------------------------------
def picard_distance(a: Trajectory, b_states: np.ndarray, b_traces: np.ndarray, m: int) -> float:
    """G^{m-1} surrogate of the difference plus the boundary-trace H^{m-1} term."""
    diff_states = a.state_array() - b_states
    k = m - 1
    d = g_surrogate(diff_states, a.times, a.grid, k)
    if a.grid.has_boundary:
        d += boundary_hk_norm(a.traces_tau - b_traces, a.times, a.grid, k)
    return float(d)


def _sampled(sampler, traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    states = np.stack([np.asarray(sampler(t)) for t in traj.times])
    nu = BOTTOM_NORMAL
    bottom = states[:, :, :, 0, :]
    E, H = bottom[..., :3], bottom[..., 3:]
    nub = np.broadcast_to(nu, E.shape)
    tau = np.concatenate([np.cross(nub, np.cross(E, nub)), np.cross(nub, np.cross(H, nub))], axis=-1)
    return states, tau


def fd_jets(traj: Trajectory, p_max: int = 2) -> list:
    """One-sided second-order FD time derivatives at t0 (p <= 2)."""
    u = traj.states
    dt = traj.dt
    out = [u[0]]
    if p_max >= 1:
        out.append((-3 * u[0] + 4 * u[1] - u[2]) / (2 * dt))
    if p_max >= 2:
        out.append((2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / dt ** 2)
    return out


@dataclass
class IterationHistory:
    distances: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    in_ball: list = field(default_factory=list)
    near_u0: list = field(default_factory=list)
    jet_match: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    bc_residual: float = float("nan")
    pde_residual: float = float("nan")
    fixed_point_defect: float = float("nan")
    compat: dict = field(default_factory=dict)
    smallness: dict = field(default_factory=dict)
    kappa: float = float("nan")
    kappa_tilde: float = float("nan")
    dt: float = float("nan")
    tol_abs: float = float("nan")
    step_selection: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def _trace_sup(u: np.ndarray) -> float:
    E = u[:, :, 0, :3]
    return float(np.max(np.linalg.norm(np.cross(E, np.broadcast_to(BOTTOM_NORMAL, E.shape)), axis=-1)))


def _choose_window_dt(law: MaterialLaw, data: QuasilinearData, T: float, dt, cfl: float) -> float:
    if dt is not None:
        return float(dt)
    A0 = np.asarray(law.chi(data.grid.coords(), data.u0)).reshape(-1, 6, 6)
    normA0 = float(np.linalg.eigvalsh(A0).max())
    dt_max = cfl * float(np.min(data.grid.spacing)) * law.eta / normA0
    n = max(1, int(np.ceil(T / dt_max * (1 - 1e-12))))
    return T / n


def _residuals(traj: Trajectory, law: MaterialLaw, data: QuasilinearData) -> tuple[float, float]:
    grid = traj.grid
    X = grid.coords()
    bc = 0.0
    if grid.has_boundary:
        Xb = grid.boundary_coords("bottom")
        for t, u in zip(traj.state_times, traj.states):
            Bu = apply_B(law.zeta, u[:, :, 0, :], BOTTOM_NORMAL, x=Xb)
            g = data.g(t) if data.g is not None else 0.0
            bc = max(bc, face_l2(Bu - g, grid))
    pde = 0.0
    states = traj.states
    if len(states) >= 3:
        interior = (slice(None), slice(None), slice(1, -1)) if grid.has_boundary else (slice(None),) * 3
        w = grid.weights()[interior][..., None]
        for n in range(1, len(states) - 1):
            t = traj.state_times[n]
            u = states[n]
            ut = (states[n + 1] - states[n - 1]) / (traj.state_times[n + 1] - traj.state_times[n - 1])
            r = matvec(law.chi(X, u), ut) + spatial_operator(u, grid) + matvec(law.sigma(X, u), u)
            if data.f is not None:
                r = r - data.f(t)
            pde = max(pde, float(np.sqrt(np.sum(w * r[interior] ** 2))))
    return bc, pde


def solve_quasilinear(law: MaterialLaw, data: QuasilinearData, params: QLParams | None = None,
                      check_compat: bool | None = None) -> tuple[Trajectory, IterationHistory]:
    p = params or QLParams()
    grid = data.grid
    m = p.m
    hist = IterationHistory()
    u0 = np.asarray(data.u0, dtype=float)

    dist0 = float(np.min(law.domain.distance(u0)))
    kappa = p.kappa if p.kappa is not None else (0.5 * dist0 if np.isfinite(dist0) else 1.0)
    if not dist0 > kappa:
        raise PreconditionFailure(f"dist(ran u0, boundary of U)={dist0:.3g} is not above kappa={kappa:.3g}")
    hist.kappa = kappa

    f_jets = data.f_jets(m - 1)
    jet = s_nl(m, data.t0, law, u0, f_jets, grid)
    do_compat = p.check_compat if check_compat is None else check_compat
    if do_compat:
        tol = p.compat_tol if p.compat_tol is not None else 10.0 * float(np.max(grid.spacing)) ** 2
        rep = check_cc("nonlinear", m, CompatData(u0, f_jets, data.g_jets(m), data.t0), grid, law=law,
                       tol=tol, jet=jet)
        hist.compat = rep.as_dict()
        if not rep.passed:
            raise CompatFailure("compatibility conditions fail", report=rep.as_dict())

    if grid.has_boundary:
        ts = _trace_sup(u0)
        radius = law.domain.radius if np.isfinite(law.domain.radius) else math.inf
        kt = p.kappa_tilde if p.kappa_tilde is not None else min(2.0 * ts + 0.05, 0.95 * radius)
        hist.kappa_tilde = kt
        if law.zeta_state_dependent:
            if not ts < kt:
                raise PreconditionFailure(f"boundary trace sup {ts:.3g} is not below kappa_tilde={kt:.3g}")
            rep = smallness(law.zeta, kt, p.smallness_constants)
            hist.smallness = rep.as_dict()
        else:
            hist.smallness = SmallnessReport(kt, 0.0, 0.0, {}, True).as_dict()

    seed = time_jet_extension(jet.entries, grid, data.t0, p.tail_tol)
    dt = _choose_window_dt(law, data, p.T, p.dt, p.cfl)
    hist.dt = dt

    prev = seed
    prev_traj = None
    bad = 0
    traj = None
    for n in range(p.n_max + 1):
        traj = picard_step(prev, law, data, p.T, dt=dt, cfl=p.cfl, integrator=p.integrator)
        if len(traj.times) < 4:
            raise ConfigInvalid("window too short: need at least 3 time steps", key="solver.tau", steps=len(traj.times) - 1)
        if prev_traj is None:
            b_states, b_tau = _sampled(prev, traj)
        else:
            b_states, b_tau = prev_traj.state_array(), prev_traj.traces_tau
        d = picard_distance(traj, b_states, b_tau, m)
        hist.distances.append(d)
        if len(hist.distances) > 1:
            q = d / hist.distances[-2] if hist.distances[-2] > 0 else 0.0
            hist.ratios.append(q)
            bad = bad + 1 if q >= 1.0 else 0
        states = traj.state_array()
        size = g_surrogate(states, traj.times, grid, m)
        hist.in_ball.append(bool(size <= p.R))
        hist.near_u0.append(bool(np.max(np.linalg.norm(states - u0, axis=-1)) <= kappa / 2))
        jets = fd_jets(traj, min(2, m - 1))
        err = max(float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(b))))
                  for a, b in zip(jets[1:], jet.entries[1:])) if m > 1 else 0.0
        hist.jet_match.append(err)
        if not hist.in_ball[-1]:
            raise BallExit(f"iterate norm {size:.3g} exceeds R={p.R:.3g}", iteration=n)
        if n == 0:
            hist.tol_abs = p.tol * max(1.0, g_surrogate(states, traj.times, grid, m - 1))
        if d <= hist.tol_abs:
            hist.converged = True
            hist.iterations = n
            break
        if bad >= p.patience:
            raise NoContraction(f"ratio >= 1 for {p.patience} consecutive iterations", history=hist.as_dict())
        prev = traj
        prev_traj = traj
    hist.fixed_point_defect = hist.distances[-1]
    if not hist.converged:
        hist.iterations = p.n_max
    hist.bc_residual, hist.pde_residual = _residuals(traj, law, data)
    if p.smallness_constants is not None or grid.has_boundary:
        r = float(np.sqrt(hk_sq(u0, grid, min(m, 2))))
        hist.step_selection = step_selection(p.smallness_constants or {}, p.T, r, kappa,
                                             hist.kappa_tilde if grid.has_boundary else 0.0, m,
                                             hist.smallness.get("z0", 0.0))
    return traj, hist


# continuation and monitors -------------------------------------------------------------
@dataclass
class MonitorThresholds:
    dist_fraction: float = 0.25
    norm_growth: float = 1e3
    kappa_tilde: float | None = None


@dataclass
class BlowupReport:
    times: np.ndarray
    dist: np.ndarray
    hm: np.ndarray
    grad_inf: np.ndarray
    trace_sup: np.ndarray
    kappa: float
    kappa_tilde: float
    criterion: str
    t_stop: float
    reached_target: bool
    reason: str = ""
    windows: int = 0
    iterations: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    first_history: IterationHistory | None = None

    def as_dict(self) -> dict:
        return {"criterion": self.criterion, "t_stop": self.t_stop, "reached_target": self.reached_target,
                "reason": self.reason, "kappa": self.kappa, "kappa_tilde": self.kappa_tilde,
                "windows": self.windows, "iterations": self.iterations, "converged": self.converged,
                "min_dist": float(np.min(self.dist)) if len(self.dist) else None,
                "max_hm": float(np.max(self.hm)) if len(self.hm) else None}


def _concat(parts: list[Trajectory]) -> Trajectory:
    first = parts[0]
    times = [first.times]
    stimes = [first.state_times]
    states = list(first.states)
    recs = {k: [first.records[k]] for k in RECORD_KEYS}
    tt, tau = [first.traces_t], [first.traces_tau]
    for p in parts[1:]:
        times.append(p.times[1:])
        stimes.append(p.state_times[1:])
        states.extend(p.states[1:])
        for k in RECORD_KEYS:
            recs[k].append(p.records[k][1:])
        tt.append(p.traces_t[1:])
        tau.append(p.traces_tau[1:])
    return Trajectory(first.grid, np.concatenate(times), np.concatenate(stimes), states,
                      {k: np.concatenate(v) for k, v in recs.items()}, np.concatenate(tt),
                      np.concatenate(tau), dict(first.meta))


def _truncate(traj: Trajectory, n: int) -> Trajectory:
    return Trajectory(traj.grid, traj.times[: n + 1], traj.state_times[: n + 1], traj.states[: n + 1],
                      {k: v[: n + 1] for k, v in traj.records.items()}, traj.traces_t[: n + 1],
                      traj.traces_tau[: n + 1], dict(traj.meta))


def continue_maximal(law: MaterialLaw, data: QuasilinearData, T_target: float, params: QLParams | None = None,
                     monitors: MonitorThresholds | None = None) -> tuple[Trajectory, BlowupReport]:
    """Chain windows of length params.T from t0 until T_target or a monitor fires."""
    p = params or QLParams()
    mon = monitors or MonitorThresholds()
    grid = data.grid
    t_end = data.t0 + T_target
    parts: list[Trajectory] = []
    rows = {"t": [], "dist": [], "hm": [], "grad": [], "trace": []}
    criterion, reason, iters, conv, first = "none", "", [], [], None
    hm0 = None
    kappa = kt = None
    cur = data
    window = 0
    while cur.t0 < t_end - 1e-12:
        tau = min(p.T, t_end - cur.t0)
        # later windows derive their own kappa from the current state; monitors keep the initial ones
        wp = replace(p, T=tau) if window == 0 else replace(p, T=tau, kappa=None, kappa_tilde=None)
        try:
            traj, hist = solve_quasilinear(law, cur, wp, check_compat=p.check_compat if window == 0 else False)
        except (DomainExit, ZetaDomainViolation, PreconditionFailure) as exc:
            if window == 0:
                raise
            criterion, reason = "a", f"{exc.code}: {exc}"
            break
        except (NoContraction, BallExit) as exc:
            if window == 0:
                raise
            criterion, reason = "b", f"{exc.code}: {exc}"
            break
        window += 1
        iters.append(hist.iterations)
        conv.append(hist.converged)
        if first is None:
            first = hist
        if kappa is None:
            kappa = hist.kappa
            kt = mon.kappa_tilde if mon.kappa_tilde is not None else hist.kappa_tilde
        start = 0 if not parts else 1
        fired = None
        for i in range(start, len(traj.states)):
            u = traj.states[i]
            dist = float(np.min(law.domain.distance(u)))
            hm = hk_norm(u, grid, min(p.m, 2))
            if hm0 is None:
                hm0 = hm
            rows["t"].append(float(traj.state_times[i]))
            rows["dist"].append(dist)
            rows["hm"].append(hm)
            rows["grad"].append(grad_inf(u, grid))
            rows["trace"].append(_trace_sup(u) if grid.has_boundary else 0.0)
            if dist < mon.dist_fraction * kappa:
                fired = ("a", i)
            elif hm0 > 0 and hm > mon.norm_growth * hm0:
                fired = ("b", i)
            elif law.zeta_state_dependent and kt is not None and rows["trace"][-1] >= kt:
                fired = ("c", i)
            if fired:
                break
        if fired:
            criterion = fired[0]
            reason = "monitor-triggered"
            parts.append(_truncate(traj, fired[1]))
            break
        parts.append(traj)
        cur = replace(cur, u0=traj.final.copy(), t0=float(traj.times[-1]))
    full = _concat(parts) if parts else None
    t_stop = float(full.times[-1]) if full is not None else data.t0
    reached = criterion == "none" and t_stop >= t_end - 1e-9
    rep = BlowupReport(np.array(rows["t"]), np.array(rows["dist"]), np.array(rows["hm"]),
                       np.array(rows["grad"]), np.array(rows["trace"]),
                       float(kappa) if kappa is not None else float("nan"),
                       float(kt) if kt is not None else float("nan"),
                       criterion, t_stop, reached, reason, window, iters, conv, first)
    return full, rep


# data quantities ------------------------------------------------------------------
@dataclass
class DataQuantity:
    k: int
    initial: float
    source_jets: float
    source: float
    boundary: float

    @property
    def total(self) -> float:
        return self.initial + self.source_jets + self.source + self.boundary

    def as_dict(self) -> dict:
        return {"k": self.k, "initial": self.initial, "source_jets": self.source_jets,
                "source": self.source, "boundary": self.boundary, "total": self.total}


def data_quantity(data: QuasilinearData, J: tuple[float, float], k: int, n_times: int = 21) -> DataQuantity:
    grid = data.grid
    initial = hk_sq(data.u0, grid, k)
    times = np.linspace(J[0], J[1], n_times)
    jets = 0.0
    source = 0.0
    if data.f is not None:
        fj = time_derivatives(data.f, data.t0, k) if k > 0 else []
        jets = sum(hk_sq(np.asarray(fj[j]), grid, k - 1 - j) for j in range(k))
        fs = np.stack([np.broadcast_to(data.f(t), grid.shape + (6,)) for t in times])
        source = weighted_spacetime_sq(fs, times, grid, k)
    boundary = 0.0
    if data.g is not None and grid.has_boundary:
        gs = np.stack([np.broadcast_to(data.g(t), grid.shape[:2] + (3,)) for t in times])
        boundary = boundary_hk_sq(gs, times, grid, k)
    return DataQuantity(k, initial, jets, source, boundary)


def lipschitz_omega(traj: Trajectory) -> np.ndarray:
    vals = np.array([w1inf(u, traj.grid) for u in traj.states])
    return np.maximum.accumulate(vals)

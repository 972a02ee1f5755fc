"""Method-of-lines solver for the linear impedance problem and its energy audits.

The spatial operator is the SBP discretization from :mod:`qlmaxwell.core`; the
boundary condition B(t)u = g is imposed weakly by adding (B(t)u - g)/h00 to the
E-equation at each face node, h00 being the boundary quadrature weight in x3.
With this penalty the semi-discrete energy balance mirrors the continuous one
term by term, so the audit residual measures only time-quadrature error.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.sparse.linalg import LinearOperator, gmres

from .core import BOTTOM_NORMAL, TOP_NORMAL, Grid, matvec, spatial_operator
from .errors import CFLViolation, CoefficientInvariantFailure, NaNDetected, ShapeMismatch

RECORD_KEYS = ("energy", "interior_rate", "boundary_dissipation", "boundary_forcing",
               "l2sq", "trace_tau_sq", "f_sq", "g_sq", "r_sup")


def _as_fn(x) -> Callable | None:
    if x is None:
        return None
    if callable(x):
        return x
    arr = np.asarray(x, dtype=float)
    return lambda t: arr


@dataclass
class LinearCoefficients:
    """Coefficients of A0 u_t + sum Aco_j D_j u + D u = f, B(t)u = g.

    Each of ``A0``, ``D``, ``b`` is an array or a callable of t returning an
    array broadcastable to the grid (``b`` to the bottom face). ``b_top`` is
    the far-face impedance, the identity by default.
    """

    A0: object = None
    D: object = None
    b: object = None
    b_top: object = None
    dA0: Callable | None = None
    eta: float = 1.0
    constant_A0: bool | None = None

    def __post_init__(self):
        if self.constant_A0 is None:
            self.constant_A0 = not callable(self.A0)
        if self.A0 is None:
            self.A0 = np.eye(6)
        if self.b is None:
            self.b = np.eye(3)
        if self.b_top is None:
            self.b_top = np.eye(3)
        self.A0_fn = _as_fn(self.A0)
        self.D_fn = _as_fn(self.D)
        self.b_fn = _as_fn(self.b)
        self.b_top_fn = _as_fn(self.b_top)

    def A0_dot(self, t: float):
        if self.dA0 is not None:
            return self.dA0(t)
        if self.constant_A0:
            return None
        d = 1e-3
        f = self.A0_fn
        return (8 * (f(t + d) - f(t - d)) - (f(t + 2 * d) - f(t - 2 * d))) / (12 * d)


@dataclass
class Trajectory:
    grid: Grid
    times: np.ndarray
    state_times: np.ndarray
    states: list
    records: dict
    traces_t: np.ndarray      # bottom face, (nt, n1, n2, 6): (E x nu, H x nu)
    traces_tau: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def state_array(self) -> np.ndarray:
        return np.stack(self.states)

    def _stencil(self, t: float):
        ts = self.state_times
        n = len(ts) - 1
        if n == 0:
            return [0], np.array(ts[:1])
        i = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, n - 1))
        lo = max(0, min(i - 1, n - 3)) if n >= 3 else 0
        idx = list(range(lo, min(lo + 4, n + 1)))
        return idx, ts[idx]

    def __call__(self, t: float) -> np.ndarray:
        ts = self.state_times
        k = np.flatnonzero(np.abs(ts - t) <= 1e-12 * max(1.0, abs(t)))
        if k.size:
            return self.states[int(k[0])]
        idx, nodes = self._stencil(t)
        out = np.zeros_like(self.states[0])
        for a, ia in enumerate(idx):
            w = np.prod([(t - nodes[b]) / (nodes[a] - nodes[b]) for b in range(len(idx)) if b != a])
            out = out + w * self.states[ia]
        return out

    def time_derivative(self, t: float) -> np.ndarray:
        idx, nodes = self._stencil(t)
        out = np.zeros_like(self.states[0])
        m = len(idx)
        for a, ia in enumerate(idx):
            w = 0.0
            for c in range(m):
                if c == a:
                    continue
                w += np.prod([(t - nodes[b]) / (nodes[a] - nodes[b]) for b in range(m) if b not in (a, c)]) \
                    / (nodes[a] - nodes[c])
            out = out + w * self.states[ia]
        return out


def _tangential_check(b: np.ndarray, nu: np.ndarray, eta: float, what: str) -> None:
    b = np.asarray(b)
    if np.max(np.abs(b - np.swapaxes(b, -1, -2)), initial=0.0) > 1e-12 * max(1.0, np.abs(b).max()):
        raise CoefficientInvariantFailure(f"{what} is not symmetric")
    k = int(np.argmax(np.abs(nu)))
    t_axes = [a for a in range(3) if a != k]
    leak = np.abs(b[..., k, t_axes])
    if leak.size and leak.max() > 1e-12:
        raise CoefficientInvariantFailure(f"{what} is not tangential")
    sub = b[..., t_axes, :][..., :, t_axes]
    if np.linalg.eigvalsh(sub).min() < eta * (1 - 1e-10):
        raise CoefficientInvariantFailure(f"{what} is not bounded below by eta")


def _A0_check(A0: np.ndarray, eta: float) -> float:
    A0 = np.asarray(A0)
    if np.max(np.abs(A0 - np.swapaxes(A0, -1, -2))) > 1e-12 * max(1.0, np.abs(A0).max()):
        raise CoefficientInvariantFailure("A0 is not symmetric")
    eig = np.linalg.eigvalsh(A0.reshape(-1, 6, 6))
    if eig.min() < eta * (1 - 1e-10):
        raise CoefficientInvariantFailure("A0 is not bounded below by eta", min_eig=float(eig.min()))
    return float(eig.max())


class _System:
    """Right-hand side evaluation and energy integrands for one linear problem."""

    def __init__(self, coeffs: LinearCoefficients, f, g, g_top, grid: Grid):
        self.c = coeffs
        self.f = _as_fn(f)
        self.g = _as_fn(g)
        self.g_top = _as_fn(g_top)
        self.grid = grid
        self.h00 = 0.5 * grid.spacing[2]
        self.w = grid.weights()

    def faces(self):
        if not self.grid.has_boundary:
            return []
        return [(0, BOTTOM_NORMAL, self.c.b_fn, self.g), (-1, TOP_NORMAL, self.c.b_top_fn, self.g_top)]

    def boundary_terms(self, t, u):
        """Per face: (index, nu, E, a = E x nu, b a, w = B u - g, g)."""
        out = []
        for k, nu, bfn, gfn in self.faces():
            ub = u[:, :, k]
            nub = np.broadcast_to(nu, ub[..., :3].shape)
            a = np.cross(ub[..., :3], nub)
            c = np.cross(ub[..., 3:], nub)
            ba = matvec(np.broadcast_to(bfn(t), a.shape + (3,)), a)
            gv = gfn(t) if gfn is not None else np.zeros_like(a)
            w = c - np.cross(nub, ba) - gv
            out.append((k, nub, ub[..., :3], a, ba, w, gv))
        return out

    def residual(self, t, u, with_forcing: bool = True):
        r = -spatial_operator(u, self.grid)
        if self.c.D_fn is not None:
            r = r - matvec(self.c.D_fn(t), u)
        if with_forcing and self.f is not None:
            r = r + self.f(t)
        for k, nub, E, a, ba, w, gv in self.boundary_terms(t, u):
            if not with_forcing:
                w = w + gv
            r[:, :, k, :3] += w / self.h00
        return r

    def solve_A0(self, t, r):
        A0 = self.c.A0_fn(t)
        if A0.ndim == 2 and np.array_equal(A0, np.eye(6)):
            return r
        if A0.ndim == 2:
            return r @ np.linalg.inv(A0).T
        return np.linalg.solve(np.broadcast_to(A0, r.shape + (6,)), r[..., None])[..., 0]

    def rhs(self, t, u):
        return self.solve_A0(t, self.residual(t, u))

    def integrands(self, t, u) -> tuple[dict, np.ndarray, np.ndarray]:
        w = self.w[..., None]
        A0 = self.c.A0_fn(t)
        Au = matvec(A0, u)
        rec = {"energy": 0.5 * float(np.sum(w * u * Au)), "l2sq": float(np.sum(w * u * u))}
        M = np.zeros((6, 6))
        dA = self.c.A0_dot(t)
        if dA is not None:
            M = 0.5 * np.asarray(dA)
        if self.c.D_fn is not None:
            M = M - np.asarray(self.c.D_fn(t))
        rate = float(np.sum(w * u * matvec(M, u)))
        Ms = np.asarray(M).reshape(-1, 6, 6)
        Ms = 0.5 * (Ms + np.swapaxes(Ms, -1, -2))  # only the symmetric part enters u.Mu
        r_sup = float(np.max(np.abs(np.linalg.eigvalsh(Ms))))
        fv = self.f(t) if self.f is not None else None
        if fv is not None:
            rate += float(np.sum(w * u * fv))
        rec["interior_rate"] = rate
        rec["r_sup"] = r_sup
        rec["f_sq"] = float(np.sum(w * fv * fv)) if fv is not None else 0.0
        fw = self.grid.face_weight
        bd = bf = tt = gs = 0.0
        tr_t = tr_tau = None
        for k, nub, E, a, ba, wv, gv in self.boundary_terms(t, u):
            H = u[:, :, k, 3:]
            tE, tH = np.cross(nub, a), np.cross(nub, np.cross(H, nub))
            bd += fw * float(np.sum(ba * a))
            bf += fw * float(np.sum(gv * tE))
            tt += fw * float(np.sum(tE * tE + tH * tH))
            gs += fw * float(np.sum(gv * gv))
            if k == 0:
                tr_t = np.concatenate([a, np.cross(H, nub)], axis=-1)
                tr_tau = np.concatenate([tE, tH], axis=-1)
        rec.update(boundary_dissipation=bd, boundary_forcing=bf, trace_tau_sq=tt, g_sq=gs)
        if tr_t is None:
            n1, n2 = self.grid.shape[:2]
            tr_t = tr_tau = np.zeros((n1, n2, 6))
        return rec, tr_t, tr_tau


def _choose_dt(coeffs: LinearCoefficients, grid: Grid, T: float, dt, cfl: float, t0: float):
    A0 = np.asarray(coeffs.A0_fn(t0), dtype=float)
    normA0 = _A0_check(A0, coeffs.eta)
    dt_max = cfl * float(np.min(grid.spacing)) * coeffs.eta / normA0
    if T <= 0:
        return 0, 0.0, normA0
    if dt is None:
        n = int(np.ceil(T / dt_max * (1 - 1e-12)))
        return n, T / n, normA0
    if dt > dt_max * (1 + 1e-12):
        raise CFLViolation(f"dt={dt:.4g} exceeds the CFL bound {dt_max:.4g}", dt=dt, dt_max=dt_max)
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise CFLViolation("T must be an integer multiple of dt", dt=dt, T=T)
    return n, T / n, normA0


def solve_linear(coeffs: LinearCoefficients, u0: np.ndarray, f, g, grid: Grid, T: float,
                 dt: float | None = None, t0: float = 0.0, g_top=None, cfl: float = 0.4,
                 integrator: str = "rk4", store_every: int = 1, check_coefficients: bool = True,
                 step_callback: Callable | None = None) -> Trajectory:
    """Integrate from t0 to t0+T. ``f``/``g``/``g_top`` are arrays, callables of t, or None.

    ``step_callback(n, t, u)`` may return True to stop early after step n.
    """
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != grid.shape + (6,):
        raise ShapeMismatch(f"u0 has shape {u0.shape}, grid expects {grid.shape + (6,)}")
    sys_ = _System(coeffs, f, g, g_top, grid)
    if sys_.g is not None:
        gv = np.asarray(sys_.g(t0))
        if np.max(np.abs(gv[..., 2]), initial=0.0) > 1e-12 * max(1.0, np.abs(gv).max()):
            raise CoefficientInvariantFailure("boundary data g is not tangential")
    n, dt, normA0 = _choose_dt(coeffs, grid, T, dt, cfl, t0)
    if grid.has_boundary and check_coefficients:
        _tangential_check(np.broadcast_to(coeffs.b_fn(t0), grid.shape[:2] + (3, 3)), BOTTOM_NORMAL, coeffs.eta, "b")

    times = t0 + dt * np.arange(n + 1)
    recs = {k: [] for k in RECORD_KEYS}
    trs_t, trs_tau, states, stimes = [], [], [], []

    def record(k, t, u):
        rec, a, b = sys_.integrands(t, u)
        for key in RECORD_KEYS:
            recs[key].append(rec[key])
        trs_t.append(a)
        trs_tau.append(b)
        if k % store_every == 0 or k == n:
            states.append(u.copy())
            stimes.append(t)

    u = u0.copy()
    record(0, t0, u)
    stop_at = n
    for k in range(n):
        t = times[k]
        if integrator == "rk4":
            k1 = sys_.rhs(t, u)
            k2 = sys_.rhs(t + dt / 2, u + dt / 2 * k1)
            k3 = sys_.rhs(t + dt / 2, u + dt / 2 * k2)
            k4 = sys_.rhs(t + dt, u + dt * k3)
            u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        elif integrator == "midpoint":
            u = _midpoint_step(sys_, t, dt, u)
        else:
            raise ValueError(f"unknown integrator {integrator!r}")
        if not np.all(np.isfinite(u)):
            raise NaNDetected(f"non-finite state after step {k + 1}", step=k + 1)
        tn = times[k + 1]
        if check_coefficients and not coeffs.constant_A0:
            _A0_check(np.asarray(coeffs.A0_fn(tn)), coeffs.eta)
        if check_coefficients and grid.has_boundary and callable(coeffs.b):
            _tangential_check(np.broadcast_to(coeffs.b_fn(tn), grid.shape[:2] + (3, 3)),
                              BOTTOM_NORMAL, coeffs.eta, "b")
        record(k + 1, tn, u)
        if step_callback is not None and step_callback(k + 1, tn, u):
            stop_at = k + 1
            if (k + 1) % store_every != 0:
                states.append(u.copy())
                stimes.append(tn)
            break
    times = times[: stop_at + 1]
    return Trajectory(grid=grid, times=times, state_times=np.array(stimes), states=states,
                      records={k: np.array(v) for k, v in recs.items()},
                      traces_t=np.stack(trs_t), traces_tau=np.stack(trs_tau),
                      meta={"A0_norm0": normA0, "eta": coeffs.eta, "integrator": integrator,
                            "store_every": store_every, "stopped_early": stop_at < n})


def _midpoint_step(sys_: _System, t: float, dt: float, u: np.ndarray) -> np.ndarray:
    tm = t + dt / 2
    shape = u.shape
    affine = sys_.solve_A0(tm, sys_.residual(tm, np.zeros(shape)))

    def op(v):
        v = v.reshape(shape)
        lin = sys_.solve_A0(tm, sys_.residual(tm, v, with_forcing=False))
        return (v - dt / 2 * lin).ravel()

    A = LinearOperator((u.size, u.size), matvec=op, dtype=float)
    rhs = (u + dt / 2 * affine).ravel()
    v, info = gmres(A, rhs, x0=u.ravel(), rtol=1e-13, atol=0.0, restart=60, maxiter=200)
    if info != 0:
        raise NaNDetected("implicit midpoint solve did not converge", info=info)
    return 2 * v.reshape(shape) - u


# audits ---------------------------------------------------------------------------
@dataclass
class EnergyAudit:
    lhs: float
    rhs: float
    residual: float
    times: np.ndarray
    lhs_series: np.ndarray
    rhs_series: np.ndarray

    def as_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "residual": self.residual}


def _records(traj: Trajectory, coeffs, f, g, g_top) -> dict:
    if coeffs is None or len(traj.states) != len(traj.times):
        return traj.records
    sys_ = _System(coeffs, f, g, g_top, traj.grid)
    rows = [sys_.integrands(t, u)[0] for t, u in zip(traj.times, traj.states)]
    return {k: np.array([r[k] for r in rows]) for k in RECORD_KEYS}


def energy_audit(traj: Trajectory, coeffs: LinearCoefficients | None = None, f=None, g=None,
                 g_top=None) -> EnergyAudit:
    """Both sides of the energy equality, trapezoid in time, SBP quadrature in space.

    With ``coeffs`` and a fully stored trajectory the integrands are
    recomputed; otherwise the solver's per-step records are used.
    """
    r = _records(traj, coeffs, f, g, g_top)
    t = traj.times
    lhs = r["energy"] + cumulative_trapezoid(r["boundary_dissipation"], t, initial=0.0)
    rhs = r["energy"][0] + cumulative_trapezoid(r["interior_rate"] - r["boundary_forcing"], t, initial=0.0)
    return EnergyAudit(float(lhs[-1]), float(rhs[-1]), float(abs(lhs[-1] - rhs[-1])), t, lhs, rhs)


def apriori_monitor(traj: Trajectory, gamma: float, coeffs: LinearCoefficients | None = None,
                    f=None, g=None, g_top=None) -> dict:
    """Both sides of the gamma-weighted L2 estimate; the constant is the observed ratio."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    r = _records(traj, coeffs, f, g, g_top)
    t = traj.times
    s = t - t[0]
    wgt = np.exp(-2 * gamma * s)
    T = s[-1]
    integ = (lambda y: float(np.trapezoid(wgt * y, s))) if len(s) > 1 else (lambda y: 0.0)
    lhs = float(np.exp(-2 * gamma * T) * r["l2sq"][-1] + gamma * integ(r["l2sq"]) + integ(r["trace_tau_sq"]))
    fpart = integ(r["f_sq"])
    if fpart > 0 and gamma == 0:
        rhs = float("inf")
    else:
        rhs = float(traj.meta.get("A0_norm0", 1.0) * r["l2sq"][0] + (fpart / gamma if fpart > 0 else 0.0)
                    + integ(r["g_sq"]))
    eta = traj.meta.get("eta", 1.0)
    gamma0 = max(1.0, 4.0 * float(np.max(r["r_sup"])) / eta)
    ratio = 0.0 if rhs == 0 or not np.isfinite(rhs) else lhs / rhs
    return {"gamma": gamma, "lhs": lhs, "rhs": rhs, "ratio": ratio, "gamma0": gamma0,
            "above_gamma0": gamma >= gamma0}


def apriori_sweep(traj: Trajectory, gammas=None, **kw) -> dict:
    """Evaluate the monitor on gamma0, 2 gamma0, 4 gamma0 and flag a rising lhs."""
    g0 = apriori_monitor(traj, 1.0, **kw)["gamma0"]
    gammas = [g0, 2 * g0, 4 * g0] if gammas is None else list(gammas)
    rows = [apriori_monitor(traj, gm, **kw) for gm in gammas]
    lhs = [row["lhs"] for row in rows]
    monotone = all(b <= a * (1 + 1e-12) + 1e-300 for a, b in zip(lhs, lhs[1:]))
    return {"rows": rows, "monotone": monotone, "gamma0": g0,
            "fitted_c": max((row["ratio"] for row in rows), default=0.0)}

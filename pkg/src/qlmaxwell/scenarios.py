"""Scenario configuration and named data generators.

Every generator returns a :class:`~qlmaxwell.quasilinear.QuasilinearData` whose
``f``, ``g`` and ``g_top`` accept either a float or a Taylor time variable.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import jets
from .core import BOTTOM_NORMAL, TOP_NORMAL, Grid, constant_matrices, diff, skew
from .errors import ConfigInvalid
from .jets import Taylor
from .laws import LAW_REGISTRY, MaterialLaw, get_law
from .quasilinear import MonitorThresholds, QLParams, QuasilinearData


# jet-aware helpers ----------------------------------------------------------------
def _matvec(M, v):
    return (M @ v[..., None])[..., 0]


def boundary_value(zeta, x, u_face, nu) -> object:
    """B(u)u on a face for a constant normal; works for arrays and Taylor values."""
    S = skew(nu)
    a = u_face[..., :3] @ S        # E x nu
    c = u_face[..., 3:] @ S        # H x nu
    b = zeta(x, a)
    return c - _matvec(b, a) @ S.T


def bump(X: np.ndarray, center, radius: float) -> np.ndarray:
    r2 = np.sum((X - np.asarray(center)) ** 2, axis=-1) / radius ** 2
    out = np.zeros(r2.shape)
    inside = r2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


def _const_in_time(arr: np.ndarray):
    def fn(t):
        if isinstance(t, Taylor):
            return Taylor(np.concatenate([arr[None], np.zeros((t.order - 1,) + arr.shape)]))
        return arr
    return fn


def _identity_zeta(x, xi):
    return np.broadcast_to(np.eye(3), np.shape(xi)[:-1] + (3, 3))


# generators -----------------------------------------------------------------------
def zero_data(grid: Grid, law: MaterialLaw, t0: float = 0.0) -> QuasilinearData:
    return QuasilinearData(grid, np.zeros(grid.shape + (6,)), t0=t0)


@dataclass
class ExactField:
    """u(x,t) = s(t) * S(x) componentwise; S and its gradient are tabulated on the grid."""

    S: np.ndarray            # (..., 6)
    dS: np.ndarray           # (3, ..., 6)
    omega: np.ndarray        # (6,)
    phase: np.ndarray        # (6,)
    kind: str = "sin"        # sin(omega t + phase), or "affine": 1 + omega t

    def s(self, t):
        if self.kind == "affine":
            return t * self.omega + 1.0
        return jets.sin(t * self.omega + self.phase) if isinstance(t, Taylor) else np.sin(self.omega * t + self.phase)

    def ds(self, t):
        if self.kind == "affine":
            return _const_in_time(self.omega)(t)
        return (jets.cos(t * self.omega + self.phase) if isinstance(t, Taylor)
                else np.cos(self.omega * t + self.phase)) * self.omega

    def value(self, t):
        return self.s(t) * self.S

    def time_derivative(self, t):
        return self.ds(t) * self.S

    def spatial(self, t):
        """sum_j Aco_j d_j u evaluated exactly."""
        Aco = constant_matrices().Aco
        s = self.s(t)
        out = None
        for j in range(3):
            term = (s * self.dS[j]) @ Aco[j].T
            out = term if out is None else out + term
        return out


def _exact_data(grid: Grid, law: MaterialLaw, ex: ExactField, t0: float, x3_nodes=None) -> QuasilinearData:
    X = grid.coords()
    Xb = grid.boundary_coords("bottom")
    Xt = grid.boundary_coords("top") if grid.has_boundary else None

    def f(t):
        u = ex.value(t)
        ut = ex.time_derivative(t)
        return _matvec(law.chi(X, u), ut) + ex.spatial(t) + _matvec(law.sigma(X, u), u)

    g = g_top = None
    if grid.has_boundary:
        def g(t):
            return boundary_value(law.zeta, Xb, ex.value(t)[:, :, 0, :], BOTTOM_NORMAL)

        def g_top(t):
            return boundary_value(_identity_zeta, Xt, ex.value(t)[:, :, -1, :], TOP_NORMAL)

    def exact(t):
        return np.asarray(ex.value(float(t)))

    return QuasilinearData(grid, exact(t0), f=f, g=g, g_top=g_top, t0=t0, exact=exact)


def manufactured(grid: Grid, law: MaterialLaw, amplitude: float = 0.1, modes=(1, 1),
                 omega: float = 2.0 * np.pi, t0: float = 0.0, seed: int = 0) -> QuasilinearData:
    """Smooth exact solution, affine in x3 and trigonometric in (x1, x2)."""
    rng = np.random.default_rng(seed)
    X = grid.coords()
    L = np.asarray(grid.lengths, dtype=float)
    k = 2.0 * np.pi * np.asarray(modes, dtype=float) / L[:2]
    alpha = rng.uniform(0.5, 1.0, 6)
    beta = rng.uniform(-0.5, 0.5, 6) / L[2]
    theta = rng.uniform(0.0, 2.0 * np.pi, 6)
    arg = X[..., 0, None] * k[0] + X[..., 1, None] * k[1] + theta
    P = alpha + beta * X[..., 2, None]
    S = amplitude * P * np.cos(arg)
    dS = np.stack([
        -amplitude * P * np.sin(arg) * k[0],
        -amplitude * P * np.sin(arg) * k[1],
        amplitude * beta * np.cos(arg) * np.ones_like(P),
    ])
    ex = ExactField(S, dS, omega * rng.uniform(0.8, 1.2, 6), rng.uniform(0.2, 1.2, 6))
    return _exact_data(grid, law, ex, t0)


def affine_exact(grid: Grid, law: MaterialLaw, amplitude: float = 0.1, t0: float = 0.0,
                 seed: int = 0) -> QuasilinearData:
    """u = (1 + w t) (a + B x): reproduced exactly by the discretization."""
    rng = np.random.default_rng(seed)
    X = grid.coords()
    a = rng.uniform(-1, 1, 6)
    B = rng.uniform(-1, 1, (3, 6))
    B[list(grid.periodic_axes)] = 0.0  # periodic axes admit constants only
    S = amplitude * (a + X @ B)
    dS = amplitude * np.stack([np.broadcast_to(B[j], S.shape) for j in range(3)])
    ex = ExactField(S, dS, rng.uniform(-1, 1, 6), np.zeros(6), kind="affine")
    return _exact_data(grid, law, ex, t0)


def plane_wave(grid: Grid, law: MaterialLaw, amplitude: float = 0.1, mode: int = 1,
               t0: float = 0.0) -> QuasilinearData:
    """E2 = H3 = A sin(k (x1 - c t)) with c = 1/sqrt(eps mu) for the linear law."""
    p = law.params
    eps, mu = float(p.get("eps", 1.0)), float(p.get("mu", 1.0))
    c = 1.0 / np.sqrt(eps * mu)
    k = 2.0 * np.pi * mode / grid.lengths[0]
    X = grid.coords()
    S = np.zeros(grid.shape + (6,))
    Ssin = np.zeros_like(S)
    Ssin[..., 1] = amplitude * np.sin(k * X[..., 0])
    Ssin[..., 5] = amplitude * np.sqrt(eps / mu) * np.sin(k * X[..., 0])
    Scos = np.zeros_like(S)
    Scos[..., 1] = amplitude * np.cos(k * X[..., 0])
    Scos[..., 5] = amplitude * np.sqrt(eps / mu) * np.cos(k * X[..., 0])
    # sin(k x - k c t) = sin(kx) cos(kct) - cos(kx) sin(kct)
    dsin = np.zeros((3,) + S.shape)
    dsin[0] = k * Scos
    dcos = np.zeros((3,) + S.shape)
    dcos[0] = -k * Ssin
    w = k * c * np.ones(6)
    e1 = ExactField(Ssin, dsin, w, np.full(6, np.pi / 2))       # cos(w t) Ssin
    e2 = ExactField(-Scos, -dcos, w, np.zeros(6))               # -sin(w t) Scos
    return _exact_data(grid, law, _SumField(e1, e2), t0)


class _SumField:
    def __init__(self, a: ExactField, b: ExactField):
        self.a, self.b = a, b

    def value(self, t):
        return self.a.value(t) + self.b.value(t)

    def time_derivative(self, t):
        return self.a.time_derivative(t) + self.b.time_derivative(t)

    def spatial(self, t):
        return self.a.spatial(t) + self.b.spatial(t)


def bump_data(grid: Grid, law: MaterialLaw, amplitude: float = 1.0, center=(0.5, 0.5, 0.3),
              radius: float = 0.25, t0: float = 0.0) -> QuasilinearData:
    """Compact pulse E1 = b, H2 = -b with zero source and boundary data."""
    X = grid.coords()
    b = bump(X, np.asarray(center) * np.asarray(grid.lengths), radius)
    u0 = np.zeros(grid.shape + (6,))
    u0[..., 0] = amplitude * b
    u0[..., 4] = -amplitude * b
    return QuasilinearData(grid, u0, t0=t0)


def pumped_bump(grid: Grid, law: MaterialLaw, amplitude: float = 0.45, rate: float = 1.0,
                center=(0.5, 0.5, 0.5), radius: float = 0.35, t0: float = 0.0) -> QuasilinearData:
    """Curl-free E = amplitude * grad(psi)/max|grad psi| pumped by f = rate * E(0).

    The discrete curl of a discrete gradient vanishes, so the field grows in
    place until it leaves the state set; supports stay away from the faces.
    """
    X = grid.coords()
    psi = bump(X, np.asarray(center) * np.asarray(grid.lengths), radius)
    grad = np.stack([diff(psi, j, grid) for j in range(3)], axis=-1)
    peak = float(np.max(np.linalg.norm(grad, axis=-1)))
    E = amplitude * grad / peak if peak > 0 else grad
    u0 = np.zeros(grid.shape + (6,))
    u0[..., :3] = E
    F = rate * u0
    return QuasilinearData(grid, u0, f=_const_in_time(F), t0=t0)


def random_modes(grid: Grid, law: MaterialLaw, amplitude: float = 0.01, n_modes: int = 3,
                 seed: int = 0, t0: float = 0.0) -> QuasilinearData:
    """Random smooth interior state (cut off near the faces) with zero data."""
    rng = np.random.default_rng(seed)
    X = grid.coords()
    L = np.asarray(grid.lengths, dtype=float)
    env = bump(X, 0.5 * L, 0.45 * float(np.min(L)))
    u0 = np.zeros(grid.shape + (6,))
    for _ in range(n_modes):
        k = rng.integers(-2, 3, 3) * 2 * np.pi / L
        u0 += rng.normal(size=6) * np.cos(X @ k + rng.uniform(0, 2 * np.pi))[..., None]
    u0 *= env[..., None]
    u0 *= amplitude / max(float(np.max(np.abs(u0))), 1e-300)
    return QuasilinearData(grid, u0, t0=t0)


DATA_REGISTRY = {
    "zero": zero_data,
    "plane-wave": plane_wave,
    "bump": bump_data,
    "pumped-bump": pumped_bump,
    "manufactured": manufactured,
    "affine": affine_exact,
    "random-modes": random_modes,
}


# configuration ----------------------------------------------------------------------
def load_schema() -> dict:
    text = resources.files("qlmaxwell").joinpath("schema/scenario.schema.json").read_text()
    return json.loads(text)


DEFAULTS = {
    "grid": {"cells": [12, 12, 12], "lengths": [1.0, 1.0, 1.0], "periodic_normal": False},
    "law": {"name": "linear", "params": {}},
    "data": {"kind": "zero", "params": {}},
    "time": {"t0": 0.0, "T": 0.5, "dt": None, "cfl": 0.4},
    "solver": {"m": 3, "tau": None, "R": None, "gamma": 0.0, "tol": 1e-10, "n_max": 30,
               "integrator": "rk4", "check_compat": True, "compat_tol": None, "kappa": None,
               "kappa_tilde": None, "constants": None},
    "monitors": {"dist_fraction": 0.25, "norm_growth": 1000.0, "kappa_tilde": None},
    "study": {},
    "output": {"report": None, "csv": None},
    "seed": 0,
}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class Scenario:
    config: dict
    grid: Grid
    law: MaterialLaw
    data: QuasilinearData
    params: QLParams
    monitors: MonitorThresholds
    T: float


def validate_config(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        key = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigInvalid(f"{key}: {exc.message}", key=key) from None
    full = _merge(DEFAULTS, cfg)
    if full["law"]["name"] not in LAW_REGISTRY:
        raise ConfigInvalid(f"unknown law {full['law']['name']!r}", key="law.name")
    if full["data"]["kind"] not in DATA_REGISTRY:
        raise ConfigInvalid(f"unknown data generator {full['data']['kind']!r}", key="data.kind")
    return full


def load_config(path: str | Path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config: {exc}", key="<file>") from None
    return validate_config(cfg)


def build_data(kind: str, grid: Grid, law: MaterialLaw, params: dict | None = None, t0: float = 0.0,
               seed: int = 0) -> QuasilinearData:
    gen = DATA_REGISTRY[kind]
    kw = dict(params or {})
    if kind in ("manufactured", "affine", "random-modes"):
        kw.setdefault("seed", seed)
    try:
        return gen(grid, law, t0=t0, **kw)
    except TypeError as exc:
        raise ConfigInvalid(f"bad data parameters: {exc}", key="data.params") from None


def build_scenario(cfg: dict) -> Scenario:
    full = validate_config(cfg)
    g = full["grid"]
    try:
        grid = Grid(tuple(g["cells"]), tuple(float(x) for x in g["lengths"]), bool(g["periodic_normal"]))
    except Exception as exc:  # noqa: BLE001
        raise ConfigInvalid(f"grid: {exc}", key="grid") from None
    law = get_law(full["law"]["name"], full["law"]["params"])
    tm = full["time"]
    data = build_data(full["data"]["kind"], grid, law, full["data"]["params"], float(tm["t0"]), int(full["seed"]))
    s = full["solver"]
    T = float(tm["T"])
    params = QLParams(m=int(s["m"]), T=float(s["tau"]) if s["tau"] is not None else T, dt=tm["dt"],
                      cfl=float(tm["cfl"]), tol=float(s["tol"]), n_max=int(s["n_max"]),
                      R=float(s["R"]) if s["R"] is not None else float("inf"), kappa=s["kappa"],
                      kappa_tilde=s["kappa_tilde"], gamma=float(s["gamma"]),
                      check_compat=bool(s["check_compat"]), compat_tol=s["compat_tol"],
                      integrator=s["integrator"], smallness_constants=s["constants"])
    mo = full["monitors"]
    monitors = MonitorThresholds(float(mo["dist_fraction"]), float(mo["norm_growth"]), mo["kappa_tilde"])
    return Scenario(full, grid, law, data, params, monitors, T)

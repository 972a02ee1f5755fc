"""Boundary-flattening charts and the localized coefficients and boundary operators.

A chart maps a neighbourhood of a boundary patch onto a subset of the unit
ball so that the boundary lands on {y3 = 0} and the domain on {y3 > 0}.
Everything is evaluated pointwise at samples y; composition with the inverse
chart is explicit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .compat import cutoff_psi
from .core import constant_matrices, skew
from .errors import DegenerateChart, IdentityViolation, PositivityLost

IDENTITY_TOL = 1e-10


def _radial_cutoff(r_in: float, r_out: float) -> Callable:
    """1 on |y| <= r_in, 0 on |y| >= r_out, smooth in between."""
    def w(y):
        r = np.linalg.norm(np.asarray(y), axis=-1)
        s = 0.5 + 1.5 * (r - r_in) / (r_out - r_in)  # maps [r_in, r_out] onto [1/2, 2]
        return cutoff_psi(np.maximum(s, 0.0))
    return w


@dataclass(frozen=True)
class ChartSpec:
    name: str
    phi: Callable          # x -> y
    phi_inv: Callable      # y -> x
    jac: Callable          # x -> (..., 3, 3), jac[..., j, k] = d_k phi_j
    anchor: tuple = (0.0, 0.0, 0.0)
    omega_radii: tuple = (0.4, 0.8)
    omega_tilde_radii: tuple = (0.85, 0.95)
    tau: float = 0.1
    params: dict = field(default_factory=dict)


def _jac_const(M):
    M = np.asarray(M, dtype=float)
    return lambda x: np.broadcast_to(M, np.shape(x)[:-1] + (3, 3))


def _half_space() -> ChartSpec:
    return ChartSpec("half-space", lambda x: np.asarray(x, float), lambda y: np.asarray(y, float),
                     _jac_const(np.eye(3)))


def _scaling(c: float = 2.0) -> ChartSpec:
    S = np.diag([1.0, 1.0, c])
    return ChartSpec("scaling", lambda x: np.asarray(x) @ S, lambda y: np.asarray(y) @ np.linalg.inv(S),
                     _jac_const(S), params={"c": c})


def _tilted(a: float = 0.5) -> ChartSpec:
    """G = {x3 > a x1}; y = (x1, x2, x3 - a x1)."""
    M = np.array([[1.0, 0, 0], [0, 1.0, 0], [-a, 0, 1.0]])
    Minv = np.linalg.inv(M)
    return ChartSpec("tilted-plane", lambda x: np.asarray(x) @ M.T, lambda y: np.asarray(y) @ Minv.T,
                     _jac_const(M), params={"a": a})


def _hemisphere(radius: float = 1.0, scale: float = 0.5) -> ChartSpec:
    """Exterior of a sphere near its north pole, graph chart of the upper cap.

    y = (x1/s, x2/s, x3 - sqrt(r^2 - x1^2 - x2^2)) with s = ``scale``.
    """
    r2 = radius ** 2

    def cap(x1, x2):
        return np.sqrt(r2 - x1 ** 2 - x2 ** 2)

    def phi(x):
        x = np.asarray(x, float)
        return np.stack([x[..., 0] / scale, x[..., 1] / scale, x[..., 2] - cap(x[..., 0], x[..., 1])], -1)

    def phi_inv(y):
        y = np.asarray(y, float)
        x1, x2 = y[..., 0] * scale, y[..., 1] * scale
        return np.stack([x1, x2, y[..., 2] + cap(x1, x2)], -1)

    def jac(x):
        x = np.asarray(x, float)
        c = cap(x[..., 0], x[..., 1])
        J = np.zeros(x.shape[:-1] + (3, 3))
        J[..., 0, 0] = J[..., 1, 1] = 1.0 / scale
        J[..., 2, 0] = x[..., 0] / c
        J[..., 2, 1] = x[..., 1] / c
        J[..., 2, 2] = 1.0
        return J

    return ChartSpec("hemisphere", phi, phi_inv, jac, anchor=(0.0, 0.0, 0.0),
                     params={"radius": radius, "scale": scale})


CHART_REGISTRY = {
    "half-space": _half_space,
    "scaling": _scaling,
    "tilted-plane": _tilted,
    "hemisphere": _hemisphere,
}


@dataclass
class Chart:
    spec: ChartSpec
    omega: Callable
    omega_tilde: Callable
    sign: float
    min_beta: float

    @property
    def name(self) -> str:
        return self.spec.name

    # pointwise quantities at y ---------------------------------------------------
    def x(self, y):
        return self.spec.phi_inv(y)

    def grad3(self, y) -> np.ndarray:
        return self.spec.jac(self.x(y))[..., 2, :]

    def beta(self, y) -> np.ndarray:
        w = self.omega(y)
        return w * self.grad3(y)[..., 2] + (1.0 - w) * self.sign

    def kappa(self, y) -> np.ndarray:
        return np.linalg.norm(self.grad3(y), axis=-1)

    def normal(self, y) -> np.ndarray:
        g = self.grad3(y)
        return -g / np.linalg.norm(g, axis=-1)[..., None]

    def R_hat(self, y) -> np.ndarray:
        y = np.asarray(y, float)
        w = self.omega(y)
        g = self.grad3(y)
        b = self.beta(y)
        M = np.zeros(y.shape[:-1] + (3, 3))
        M[..., 0, 0] = M[..., 1, 1] = 1.0
        M[..., 2, 0] = -w * g[..., 0]
        M[..., 2, 1] = -w * g[..., 1]
        M[..., 2, 2] = -b
        return M / np.sqrt(b)[..., None, None]

    def R(self, y) -> np.ndarray:
        Rh = self.R_hat(y)
        out = np.zeros(Rh.shape[:-2] + (6, 6))
        out[..., :3, :3] = Rh
        out[..., 3:, 3:] = Rh
        return out

    def sample_interior(self, n: int, rng: np.random.Generator, radius: float = 0.9) -> np.ndarray:
        y = rng.uniform(-1, 1, (4 * n, 3))
        y[:, 2] = np.abs(y[:, 2])
        y = y[np.linalg.norm(y, axis=-1) < radius][:n]
        return y

    def sample_boundary(self, n: int, rng: np.random.Generator, radius: float = 0.9) -> np.ndarray:
        r = radius * np.sqrt(rng.uniform(0, 1, n))
        a = rng.uniform(0, 2 * np.pi, n)
        return np.stack([r * np.cos(a), r * np.sin(a), np.zeros(n)], -1)


def build_chart(name: str, params: dict | None = None, n_check: int = 2000, seed: int = 0) -> Chart:
    if name not in CHART_REGISTRY:
        raise KeyError(f"unknown chart {name!r}")
    spec = CHART_REGISTRY[name](**(params or {}))
    x_anchor = spec.phi_inv(np.asarray(spec.anchor, float))
    d3 = float(spec.jac(x_anchor)[..., 2, 2])
    chart = Chart(spec, _radial_cutoff(*spec.omega_radii), _radial_cutoff(*spec.omega_tilde_radii),
                  float(np.sign(d3)), float("nan"))
    rng = np.random.default_rng(seed)
    ys = np.concatenate([chart.sample_interior(n_check, rng), chart.sample_boundary(n_check // 4, rng)])
    beta = chart.beta(ys)
    chart.min_beta = float(np.min(beta))
    if chart.min_beta < spec.tau:
        raise DegenerateChart(f"beta drops to {chart.min_beta:.3g} below tau={spec.tau}", chart=name)
    kap = chart.kappa(chart.sample_boundary(n_check // 4, rng))
    if not np.all(kap > 0):
        raise DegenerateChart("kappa is not positive on the boundary patch", chart=name)
    return chart


# coefficients ---------------------------------------------------------------------
def _fd4(fn: Callable, y: np.ndarray, axis: int, h: float = 1e-3) -> np.ndarray:
    e = np.zeros(3)
    e[axis] = h
    return (8 * (fn(y + e) - fn(y - e)) - (fn(y + 2 * e) - fn(y - 2 * e))) / (12 * h)


@dataclass
class LocalizedCoefficients:
    y: np.ndarray
    A0: np.ndarray | None = None
    A: np.ndarray | None = None          # (3, n, 6, 6); A[2] is Aco[2] exactly
    D: np.ndarray | None = None
    b: np.ndarray | None = None
    B: np.ndarray | None = None          # long formula
    B_identity: np.ndarray | None = None  # B2co + B0co b_i B1co
    checks: dict = field(default_factory=dict)


def _at(fn_or_const, x, shape):
    if callable(fn_or_const):
        return np.asarray(fn_or_const(x), float)
    return np.broadcast_to(np.asarray(fn_or_const, float), x.shape[:-1] + shape)


def span_residual(A: np.ndarray) -> np.ndarray:
    """Least-squares residual of A = sum_j mu_j Aco_j with scalar mu_j."""
    basis = constant_matrices().Aco.reshape(3, 36).T
    flat = A.reshape(-1, 36).T
    mu, *_ = np.linalg.lstsq(basis, flat, rcond=None)
    res = np.abs(basis @ mu - flat).max(axis=0)
    return res.reshape(A.shape[:-2])


def transform_coeffs(chart: Chart, A0, D=None, eta: float = 1.0, y: np.ndarray | None = None,
                     n_samples: int = 200, seed: int = 0) -> LocalizedCoefficients:
    """Interior part: A0^i, A1^i, A2^i, A3^i = Aco[3] and D^i at samples y."""
    cm = constant_matrices()
    if y is None:
        y = chart.sample_interior(n_samples, np.random.default_rng(seed))
    x = chart.x(y)
    w = chart.omega(y)[..., None, None]
    R = chart.R(y)
    RT = np.swapaxes(R, -1, -2)
    A0x = _at(A0, x, (6, 6))
    A0i = R @ (w * A0x + (1 - w) * eta * np.eye(6)) @ RT
    J = chart.spec.jac(x)
    A = np.empty((3,) + A0i.shape)
    for j in range(2):
        S = np.einsum("kab,...k->...ab", cm.Aco, J[..., j, :])
        A[j] = R @ (w * S + (1 - w) * chart.sign * cm.Aco[2]) @ RT
    A[2] = np.broadcast_to(cm.Aco[2], A0i.shape)

    def RTinv(yy):
        return np.linalg.inv(np.swapaxes(chart.R(yy), -1, -2))

    corr = sum(A[j] @ _fd4(RTinv, y, j) @ RT for j in range(3))
    Dx = np.zeros(A0i.shape) if D is None else _at(D, x, (6, 6))
    Di = w * (R @ Dx @ RT) - corr

    S3 = np.einsum("kab,...k->...ab", cm.Aco, J[..., 2, :])
    A3_long = R @ (w * S3 + (1 - w) * chart.sign * cm.Aco[2]) @ RT
    min_eig = float(np.linalg.eigvalsh(A0i).min())
    floor = eta * np.linalg.eigvalsh(R @ RT).min(axis=-1)
    checks = {
        "symmetry_defect": float(np.abs(A0i - np.swapaxes(A0i, -1, -2)).max()),
        "A0_min_eig": min_eig,
        "congruence_margin": float(np.min(np.linalg.eigvalsh(A0i).min(axis=-1) - floor)),
        "span_residual": float(max(span_residual(A[0]).max(), span_residual(A[1]).max())),
        "A3_residual": float(np.abs(A3_long - cm.Aco[2]).max()),
    }
    if checks["congruence_margin"] < -1e-12 or min_eig <= 0:
        raise PositivityLost(f"localized A0 loses positivity (min eigenvalue {min_eig:.3g})", min_eig=min_eig)
    return LocalizedCoefficients(y=y, A0=A0i, A=A, D=Di, checks=checks)


def transform_boundary(chart: Chart, b, eta: float = 1.0, y: np.ndarray | None = None,
                       n_samples: int = 100, seed: int = 0, tol: float = IDENTITY_TOL,
                       raise_on_failure: bool = True) -> LocalizedCoefficients:
    """Boundary part: B^i by its long definition and by the reduced form, plus residuals."""
    cm = constant_matrices()
    B0co, B1co, B2co = cm.B0co, cm.B1co, cm.B2co
    if y is None:
        y = chart.sample_boundary(n_samples, np.random.default_rng(seed))
    x = chart.x(y)
    w = chart.omega(y)[..., None, None]
    wt = chart.omega_tilde(y)[..., None, None]
    kap = chart.kappa(y)[..., None, None]
    nu = chart.normal(y)
    B0 = -skew(nu)                         # B0 v = v x nu
    Z = np.zeros(B0.shape)
    B1 = np.concatenate([B0, Z], -1)
    bx = _at(b, x, (3, 3))
    Bmat = np.concatenate([B0 @ bx @ B0, B0], -1)   # B = B2 + B0 b B1
    bt = wt * bx / kap + (1 - wt) * eta * np.eye(3)
    C = B0co @ bt @ (kap * B1) + (kap * B0) @ bt @ B1co
    Omega = np.zeros(B0.shape[:-2] + (6, 6))
    Omega[..., :3, :3] = w * np.eye(3)
    Omega[..., 3:, 3:] = np.eye(3)
    Rh = chart.R_hat(y)
    RT = np.swapaxes(chart.R(y), -1, -2)
    s = chart.sign
    inner = (w * (kap * Bmat) @ Omega + (1 - w) * s * B2co + w * (1 - w) * s * C
             + (1 - w) ** 2 * (B0co @ bt @ B1co))
    B_long = Rh @ inner @ RT
    Rh_inv = np.linalg.inv(Rh)
    bi = np.swapaxes(Rh_inv, -1, -2) @ bt @ Rh_inv
    B_id = B2co + B0co @ bi @ B1co

    ones = chart.omega(y) == 1.0
    recon = (Rh @ (kap * Bmat) @ RT - B_long)[ones]
    B0_id = Rh @ (w * kap * B0 + (1 - w) * s * B0co) @ np.swapaxes(Rh, -1, -2) - B0co
    sym_b = 0.5 * (bi + np.swapaxes(bi, -1, -2))
    checks = {
        "identity_residual": float(np.abs(B_long - B_id).max()),
        "B0_residual": float(np.abs(B0_id).max()),
        "reconstruction_residual": float(np.abs(recon).max()) if recon.size else 0.0,
        "reconstruction_samples": int(np.sum(ones)),
        "b_symmetry_defect": float(np.abs(bi - np.swapaxes(bi, -1, -2)).max()),
        "b_min_eig": float(np.linalg.eigvalsh(sym_b[..., :2, :2]).min()),  # block seen by B0co b B1co
        "n_samples": int(len(y)),
    }
    if raise_on_failure and checks["identity_residual"] > tol:
        raise IdentityViolation(f"boundary identity residual {checks['identity_residual']:.3g} > {tol}",
                                chart=chart.name, residual=checks["identity_residual"])
    return LocalizedCoefficients(y=y, b=bi, B=B_long, B_identity=B_id, checks=checks)


def transform_data(chart: Chart, u0=None, f=None, g=None, h=None, v=None, theta: Callable | None = None,
                   dtheta: Callable | None = None, y: np.ndarray | None = None) -> dict:
    """u0^i = (R^T)^{-1} (theta u0), g^i = R_hat (theta kappa g), f^i = R (theta h + sum Aco_j d_j theta v).

    ``theta`` and ``dtheta`` (its gradient) are functions of x; fields are callables of x.
    """
    cm = constant_matrices()
    x = chart.x(y)
    th = np.ones(x.shape[:-1]) if theta is None else theta(x)
    R = chart.R(y)
    out = {}
    if u0 is not None:
        out["u0"] = np.linalg.solve(np.swapaxes(R, -1, -2), (th[..., None] * u0(x))[..., None])[..., 0]
    if g is not None:
        gv = th[..., None] * chart.kappa(y)[..., None] * g(x)
        out["g"] = (chart.R_hat(y) @ gv[..., None])[..., 0]
    if h is not None or v is not None:
        acc = np.zeros(x.shape[:-1] + (6,))
        if h is not None:
            acc = acc + th[..., None] * h(x)
        if v is not None and dtheta is not None:
            dth = dtheta(x)
            vv = v(x)
            for j in range(3):
                acc = acc + dth[..., j, None] * (vv @ cm.Aco[j].T)
        out["f"] = (R @ acc[..., None])[..., 0]
    return out


def pull_back_u0(chart: Chart, u0i: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Inverse of the u0 transform: R^T u0^i, as a field at x = phi^{-1}(y)."""
    return (np.swapaxes(chart.R(y), -1, -2) @ u0i[..., None])[..., 0]


def partition_reconstruction(u0: Callable, x: np.ndarray, charts: list[Chart], thetas: list[Callable]) -> float:
    """max |sum_i pull-back of the theta_i piece - u0| at points x."""
    total = np.zeros(x.shape[:-1] + (6,))
    for chart, th in zip(charts, thetas):
        y = chart.spec.phi(x)
        pieces = transform_data(chart, u0=u0, theta=th, y=y)["u0"]
        total = total + pull_back_u0(chart, pieces, y)
    return float(np.abs(total - u0(x)).max())


def verify_charts(names=None, n_boundary: int = 100, n_interior: int = 200, seed: int = 0,
                  b=None, eta: float = 1.0) -> dict:
    """Residual table for registry charts (localize-verify)."""
    names = list(CHART_REGISTRY) if names is None else list(names)
    rng = np.random.default_rng(seed)
    rows = {}
    for name in names:
        chart = build_chart(name, seed=seed)
        yb = chart.sample_boundary(n_boundary, rng)
        if b is None:
            nu = chart.normal(yb)
            P = np.eye(3) - nu[..., :, None] * nu[..., None, :]
            M = rng.normal(size=(len(yb), 3, 3))
            bmat = P @ (eta * np.eye(3) + 0.3 * (M @ np.swapaxes(M, -1, -2))) @ P
            bfield = bmat
        else:
            bfield = b
        bd = transform_boundary(chart, bfield, eta=eta, y=yb, raise_on_failure=False)
        yi = chart.sample_interior(n_interior, rng)
        Mi = rng.normal(size=(len(yi), 6, 6))
        A0 = eta * np.eye(6) + 0.2 * (Mi @ np.swapaxes(Mi, -1, -2))
        co = transform_coeffs(chart, A0, eta=eta, y=yi)
        rows[name] = {"min_beta": chart.min_beta, **bd.checks,
                      **{f"interior_{k}": v for k, v in co.checks.items()}}
    worst = max(r["identity_residual"] for r in rows.values())
    return {"charts": rows, "max_identity_residual": worst, "passed": bool(worst <= IDENTITY_TOL)}

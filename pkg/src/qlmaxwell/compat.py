"""Time-jet recursions, compatibility conditions and the jet-extension operator."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import BOTTOM_NORMAL, Grid, diff, matvec, spatial_operator
from .errors import DomainViolation, NonSmoothInput, OrderExceeded, SingularCoefficient
from .jets import Taylor, derivatives_of
from .laws import MaterialLaw


@dataclass(frozen=True)
class TimeJet:
    entries: tuple
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(np.asarray(e) for e in self.entries))
        if len(self.entries) < 1:
            raise ValueError("a time jet needs at least one entry")
        for p, e in enumerate(self.entries):
            if not np.all(np.isfinite(e)):
                raise ValueError(f"jet entry {p} has non-finite values")

    @property
    def order(self) -> int:
        return len(self.entries)

    def __getitem__(self, p: int) -> np.ndarray:
        return self.entries[p]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class CoefficientJet:
    entries: tuple

    def __getitem__(self, k: int) -> np.ndarray:
        return self.entries[k]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class CompatReport:
    kind: str
    order: int
    residuals: list
    tol: float
    data_norm: float
    passed_per_order: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.passed_per_order)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "order": self.order, "residuals": [float(r) for r in self.residuals],
                "tol": self.tol, "data_norm": self.data_norm,
                "passed_per_order": list(self.passed_per_order), "passed": self.passed}


def _entries(jet) -> list:
    return list(jet.entries) if isinstance(jet, TimeJet) else [np.asarray(e) for e in jet]


# composition ------------------------------------------------------------------
def jet_compose(component: Callable, state_jet, x=None, law: MaterialLaw | None = None,
                check_domain: bool = True) -> CoefficientJet:
    """Time-jet of ``component(x, u(t))`` at t0 given the jet of u.

    ``component`` is a jet-aware function of (x, state). When ``law`` is given,
    the base state is checked against its domain and the order against the
    derivative data the law provides.
    """
    entries = _entries(state_jet)
    order = len(entries)
    if law is not None:
        if order - 1 > law.max_order:
            raise OrderExceeded(f"jet order {order - 1} exceeds law derivative order {law.max_order}")
        if check_domain and entries[0].shape[-1] == 6:
            inside = law.domain.contains(entries[0])
            if not np.all(inside):
                idx = tuple(int(i) for i in np.argwhere(~np.asarray(inside))[0])
                raise DomainViolation("jet base state outside U", index=idx)
    result = component(x, Taylor.from_derivatives(entries))
    return CoefficientJet(tuple(derivatives_of(result, order)))


def trace_jet(state_jet, nu=BOTTOM_NORMAL) -> list:
    """B1 applied to bottom-face values of each entry (tr_t of the E part)."""
    return [np.cross(e[:, :, 0, :3], np.broadcast_to(nu, e[:, :, 0, :3].shape)) for e in _entries(state_jet)]


# recursions ------------------------------------------------------------------
def _full(M, grid: Grid) -> np.ndarray:
    return np.broadcast_to(np.asarray(M, dtype=float), grid.shape + (6, 6))


def _solve(A: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    try:
        out = np.linalg.solve(A, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularCoefficient(f"{what} is singular at some node") from exc
    if not np.all(np.isfinite(out)):
        raise SingularCoefficient(f"{what} is numerically singular")
    return out


def _spatial(S: np.ndarray, grid: Grid, A_j) -> np.ndarray:
    if A_j is None:
        return spatial_operator(S, grid)
    return sum(matvec(np.asarray(A_j[j]), diff(S, j, grid)) for j in range(3))


def _recursion(m: int, u0, f_jets, coef_fn, grid: Grid, A_j, what: str) -> list:
    S = [np.asarray(u0, dtype=float)]
    f_jets = list(f_jets) if f_jets is not None else []
    for p in range(1, m):
        A0j, Dj = coef_fn(S)
        A0j = [_full(a, grid) for a in A0j]
        Dj = [_full(d, grid) for d in Dj]
        fp = np.asarray(f_jets[p - 1], dtype=float) if p - 1 < len(f_jets) else np.zeros_like(S[0])
        rhs = fp - _spatial(S[p - 1], grid, A_j)
        for l in range(1, p):
            rhs = rhs - comb(p - 1, l) * matvec(A0j[l], S[p - l])
        for l in range(0, p):
            rhs = rhs - comb(p - 1, l) * matvec(Dj[l], S[p - 1 - l])
        S.append(_solve(A0j[0], rhs, what))
    return S


def _pad(jet, n: int, like) -> list:
    jet = [np.asarray(j, dtype=float) for j in (jet if jet is not None else [])]
    while len(jet) < n:
        jet.append(np.zeros_like(np.asarray(like, dtype=float)))
    return jet


def s_lin(m: int, t0: float, A0_jet, A_j, D_jet, u0: np.ndarray, f_jets, grid: Grid) -> TimeJet:
    """Time-jet (S_0, ..., S_{m-1}) of the linear system from its data.

    ``A0_jet``/``D_jet`` list time-derivatives of the coefficients at t0;
    missing higher entries count as zero. ``A_j=None`` means the constant
    Maxwell matrices.
    """
    zero6 = np.zeros((6, 6))
    A0 = _pad(A0_jet, m, zero6)
    D = _pad(D_jet, m, zero6)
    S = _recursion(m, u0, f_jets, lambda S: (A0[:len(S)], D[:len(S)]), grid, A_j, "A0(t0)")
    return TimeJet(tuple(S), t0)


def s_nl(m: int, t0: float, law: MaterialLaw, u0: np.ndarray, f_jets, grid: Grid, x=None) -> TimeJet:
    """Nonlinear time-jet; coefficient jets M1, M2 come from jet composition."""
    x = grid.coords() if x is None else x
    inside = law.domain.contains(u0)
    if not np.all(inside):
        idx = tuple(int(i) for i in np.argwhere(~np.asarray(inside))[0])
        raise DomainViolation("initial state outside U", index=idx)

    def coef(S):
        return (jet_compose(law.chi, S, x, law).entries, jet_compose(law.sigma, S, x, law).entries)

    return TimeJet(tuple(_recursion(m, u0, f_jets, coef, grid, None, "chi(u0)")), t0)


# compatibility -----------------------------------------------------------------
@dataclass
class CompatData:
    u0: np.ndarray
    f_jets: list
    g_jets: list
    t0: float = 0.0


def _boundary_l2(r: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(np.sum(np.abs(r) ** 2) * grid.face_weight))


def _data_norm(data: CompatData, grid: Grid) -> float:
    w = grid.weights()
    n = float(np.sqrt(np.sum(w[..., None] * np.asarray(data.u0) ** 2)))
    n += sum(float(np.sqrt(np.sum(w[..., None] * np.asarray(f) ** 2))) for f in data.f_jets)
    n += sum(_boundary_l2(np.asarray(g), grid) for g in data.g_jets)
    return n


def check_cc(kind: str, m: int, data: CompatData, grid: Grid, coeffs=None, law: MaterialLaw | None = None,
             tol: float = 1e-8, jet: TimeJet | None = None) -> CompatReport:
    """Residuals of the compatibility conditions of order m on the bottom face.

    ``kind='linear'`` needs ``coeffs`` with attributes ``A0_jet``, ``D_jet``,
    ``b_jet``; ``kind='nonlinear'`` needs ``law``.
    """
    if kind not in ("linear", "nonlinear"):
        raise ValueError("kind must be 'linear' or 'nonlinear'")
    if not grid.has_boundary:
        return CompatReport(kind, m, [0.0] * m, tol, _data_norm(data, grid), [True] * m)
    nu = BOTTOM_NORMAL
    if jet is None:
        if kind == "linear":
            jet = s_lin(m, data.t0, coeffs.A0_jet, None, coeffs.D_jet, data.u0, data.f_jets, grid)
        else:
            jet = s_nl(m, data.t0, law, data.u0, data.f_jets, grid)
    S = list(jet.entries)[:m]
    tr = trace_jet(S, nu)
    if kind == "linear":
        bj = _pad(coeffs.b_jet, m, np.zeros((3, 3)))
    else:
        xb = grid.boundary_coords("bottom")
        bj = list(jet_compose(law.zeta, tr, xb, law, check_domain=False).entries)
    bj = [np.broadcast_to(b, tr[0].shape + (3,)) for b in bj]
    g = _pad(data.g_jets, m, np.zeros(tr[0].shape))
    nub = np.broadcast_to(nu, tr[0].shape)
    residuals, flags = [], []
    dn = _data_norm(data, grid)
    for p in range(m):
        Hb = np.cross(S[p][:, :, 0, 3:], nub)
        lhs = Hb - np.cross(nub, matvec(bj[0], tr[p]))
        acc = np.zeros_like(lhs)
        for k in range(1, p + 1):
            acc = acc + comb(p, k) * matvec(bj[k], tr[p - k])
        r = _boundary_l2(lhs - g[p] - np.cross(nub, acc), grid)
        residuals.append(r)
        flags.append(r <= tol * (1.0 + dn))
    return CompatReport(kind, m, residuals, tol, dn, flags)


# jet extension -----------------------------------------------------------------
def _smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for x<=0, 1 for x>=1."""
    x = np.asarray(x, dtype=float)

    def f(y):
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-1.0 / y[pos])
        return out

    a, b = f(x), f(1.0 - x)
    return a / (a + b)


def cutoff_psi(s) -> np.ndarray:
    """Fixed bump: 1 on |s| <= 1/2, 0 on |s| >= 2, smooth in between."""
    s = np.abs(np.asarray(s, dtype=float))
    return _smooth_step((2.0 - s) / 1.5)


class JetExtension:
    """Space-time field with prescribed time-jet at t0, built mode by mode.

    u(t) = F^{-1}[ psi(<xi>(t - t0)) sum_k h_k^ (t - t0)^k / k! ] over the
    periodic axes of the grid, with <xi> = (1 + |xi|^2)^{1/2}.
    """

    def __init__(self, h: Sequence[np.ndarray], grid: Grid, t0: float = 0.0, tail_tol: float = 0.05):
        self.grid = grid
        self.t0 = float(t0)
        self.h = [np.asarray(x) for x in h]
        self.axes = grid.periodic_axes
        self.complex = any(np.iscomplexobj(x) for x in self.h)
        self.hhat = [np.fft.fftn(x, axes=self.axes) for x in self.h]
        freqs = [2 * np.pi * np.fft.fftfreq(grid.shape[a], d=grid.spacing[a]) for a in self.axes]
        mesh = np.meshgrid(*freqs, indexing="ij")
        xi2 = sum(k ** 2 for k in mesh)
        shape = [1] * self.h[0].ndim
        for a in self.axes:
            shape[a] = grid.shape[a]
        self.bracket = np.sqrt(1.0 + xi2).reshape(shape)
        self.xi = [k.reshape(shape) for k in mesh]
        self._tail_check(freqs, tail_tol)

    def _tail_check(self, freqs, tail_tol):
        high = np.zeros(self.bracket.shape, dtype=bool)
        for k, fr in zip(self.xi, freqs):
            high = high | (np.abs(k) > (2.0 / 3.0) * np.abs(fr).max())
        for p, hh in enumerate(self.hhat):
            # entry p scales like p spatial derivatives; compare on a common Sobolev scale
            wt = self.bracket ** (-2 * p)
            e = np.abs(hh) ** 2 * (wt[..., None] if hh.ndim > wt.ndim else wt)
            total = e.sum()
            if total == 0:
                continue
            frac = float((e * np.broadcast_to(high, e.shape)).sum() / total)
            if frac > tail_tol:
                raise NonSmoothInput(f"jet entry {p} has spectral tail fraction {frac:.3g}", entry=p, fraction=frac)

    @property
    def order(self) -> int:
        return len(self.h)

    def __call__(self, t: float) -> np.ndarray:
        s = float(t) - self.t0
        acc = sum(hh * (s ** k / factorial(k)) for k, hh in enumerate(self.hhat))
        if self.h[0].ndim > self.bracket.ndim:
            mult = cutoff_psi(self.bracket * s)[..., None]
        else:
            mult = cutoff_psi(self.bracket * s)
        out = np.fft.ifftn(mult * acc, axes=self.axes)
        return out if self.complex else out.real

    def time_derivative(self, t: float, delta: float = 1e-5) -> np.ndarray:
        return (self(t + delta) - self(t - delta)) / (2.0 * delta)

    def sobolev_report(self, m: int | None = None, n_times: int = 41) -> dict:
        """Spectral sizes of both sides of the extension bound."""
        m = self.order if m is None else m
        w = np.prod(self.grid.spacing[list(self.axes)]) / np.prod([self.grid.shape[a] for a in self.axes])

        def hnorm(hat, k):
            wt = self.bracket ** (2 * k)
            if hat.ndim > wt.ndim:
                wt = wt[..., None]
            return float(np.sqrt(np.sum(wt * np.abs(hat) ** 2) * w))

        rhs = sum(hnorm(hh, m - k) for k, hh in enumerate(self.hhat) if k < m)
        ts = self.t0 + np.linspace(-2.0, 2.0, n_times)
        dt = 1e-4
        lhs = 0.0
        for t in ts:
            vals = [np.fft.fftn(self(t + j * dt), axes=self.axes) for j in (-1, 0, 1)]
            lhs = max(lhs, hnorm(vals[1], m))
            if m >= 1:
                lhs = max(lhs, hnorm((vals[2] - vals[0]) / (2 * dt), m - 1))
        return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0}


def time_jet_extension(h, grid: Grid, t0: float = 0.0, tail_tol: float = 0.05) -> JetExtension:
    return JetExtension(_entries(h), grid, t0, tail_tol)


# serialization --------------------------------------------------------------------
def write_jet(path: str | Path, jet) -> None:
    rows = []
    for p, e in enumerate(_entries(jet)):
        flat = np.asarray(e, dtype=float).reshape(-1, 6)
        idx = np.arange(flat.shape[0])
        rows.append(np.column_stack([np.full(flat.shape[0], p), idx, flat]))
    header = "order,node_index,v0,v1,v2,v3,v4,v5"
    np.savetxt(path, np.vstack(rows), delimiter=",", header=header, comments="",
               fmt=["%d", "%d"] + ["%.17g"] * 6)


def read_jet(path: str | Path, grid: Grid, t0: float = 0.0) -> TimeJet:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    orders = data[:, 0].astype(int)
    entries = []
    for p in range(orders.max() + 1):
        block = data[orders == p]
        block = block[np.argsort(block[:, 1])]
        entries.append(block[:, 2:].reshape(grid.shape + (6,)))
    return TimeJet(tuple(entries), t0)

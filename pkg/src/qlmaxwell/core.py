"""Constant matrices, grid, difference operators, traces and boundary operator.

Fields are stored node-major: a 6-vector field on the grid is an array of shape
``(n1, n2, n3, 6)``; boundary fields drop the third spatial axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import GridTooSmall, ShapeMismatch, ZetaDomainViolation


def skew(a) -> np.ndarray:
    """Matrix of v -> a x v."""
    a = np.asarray(a, dtype=float)
    out = np.zeros(a.shape[:-1] + (3, 3))
    out[..., 0, 1], out[..., 0, 2] = -a[..., 2], a[..., 1]
    out[..., 1, 0], out[..., 1, 2] = a[..., 2], -a[..., 0]
    out[..., 2, 0], out[..., 2, 1] = -a[..., 1], a[..., 0]
    return out


@dataclass(frozen=True)
class ConstantMatrices:
    J: np.ndarray      # (3, 3, 3), J[j] v = e_j x v
    Aco: np.ndarray    # (3, 6, 6)
    B0co: np.ndarray   # (3, 3)
    B1co: np.ndarray   # (3, 6)
    B2co: np.ndarray   # (3, 6)

    @property
    def J1(self):
        return self.J[0]

    @property
    def J2(self):
        return self.J[1]

    @property
    def J3(self):
        return self.J[2]


@lru_cache(maxsize=1)
def constant_matrices() -> ConstantMatrices:
    J = np.zeros((3, 3, 3))
    J[0] = [[0, 0, 0], [0, 0, -1], [0, 1, 0]]
    J[1] = [[0, 0, 1], [0, 0, 0], [-1, 0, 0]]
    J[2] = [[0, -1, 0], [1, 0, 0], [0, 0, 0]]
    Aco = np.zeros((3, 6, 6))
    for j in range(3):
        Aco[j, :3, 3:] = -J[j]
        Aco[j, 3:, :3] = J[j]
    B0co = J[2].copy()
    B1co = np.hstack([B0co, np.zeros((3, 3))])
    B2co = np.hstack([np.zeros((3, 3)), B0co])
    for arr in (J, Aco, B0co, B1co, B2co):
        arr.setflags(write=False)
    return ConstantMatrices(J, Aco, B0co, B1co, B2co)


BOTTOM_NORMAL = np.array([0.0, 0.0, -1.0])
TOP_NORMAL = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class Grid:
    """Box [0,L1]x[0,L2]x[0,H]; tangential axes periodic, x3 has cells+1 nodes.

    With ``periodic_normal`` the x3 axis is periodic as well (no boundary).
    """

    cells: tuple[int, int, int]
    lengths: tuple[float, float, float] = (1.0, 1.0, 1.0)
    periodic_normal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(int(c) for c in self.cells))
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))
        if len(self.cells) != 3 or len(self.lengths) != 3:
            raise ShapeMismatch("grid needs three cell counts and three lengths")
        if min(self.cells) < 3:
            raise GridTooSmall("at least 3 cells per axis are required", cells=self.cells)

    @property
    def shape(self) -> tuple[int, int, int]:
        n1, n2, n3 = self.cells
        return (n1, n2, n3 if self.periodic_normal else n3 + 1)

    @property
    def spacing(self) -> np.ndarray:
        return np.array(self.lengths) / np.array(self.cells)

    @property
    def has_boundary(self) -> bool:
        return not self.periodic_normal

    @property
    def periodic_axes(self) -> tuple[int, ...]:
        return (0, 1, 2) if self.periodic_normal else (0, 1)

    def axis_coords(self, axis: int) -> np.ndarray:
        return np.arange(self.shape[axis]) * self.spacing[axis]

    def coords(self) -> np.ndarray:
        x = np.meshgrid(*(self.axis_coords(a) for a in range(3)), indexing="ij")
        return np.stack(x, axis=-1)

    def boundary_coords(self, face: str = "bottom") -> np.ndarray:
        x1, x2 = np.meshgrid(self.axis_coords(0), self.axis_coords(1), indexing="ij")
        x3 = np.full_like(x1, 0.0 if face == "bottom" else self.lengths[2])
        return np.stack([x1, x2, x3], axis=-1)

    def weights(self) -> np.ndarray:
        """Diagonal quadrature (SBP norm): trapezoid weights in x3."""
        h = self.spacing
        w3 = np.full(self.shape[2], h[2])
        if self.has_boundary:
            w3[0] = w3[-1] = 0.5 * h[2]
        return np.broadcast_to(h[0] * h[1] * w3, self.shape)

    @property
    def face_weight(self) -> float:
        h = self.spacing
        return float(h[0] * h[1])

    @property
    def boundary_area(self) -> float:
        return self.lengths[0] * self.lengths[1]


def diff(v: np.ndarray, axis: int, grid: Grid) -> np.ndarray:
    """First derivative along a spatial axis (0, 1, 2) of a node-major field.

    Periodic axes use the centered stencil. The bounded x3 axis uses the SBP
    operator with centered interior and one-sided closure at both faces.
    """
    h = grid.spacing[axis]
    if axis in grid.periodic_axes:
        return (np.roll(v, -1, axis=axis) - np.roll(v, 1, axis=axis)) / (2.0 * h)
    v = np.moveaxis(v, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = (v[1] - v[0]) / h
    out[-1] = (v[-1] - v[-2]) / h
    return np.moveaxis(out, 0, axis)


def _check_field(v: np.ndarray, grid: Grid, ncomp: int) -> None:
    if tuple(v.shape[:3]) != grid.shape or v.shape[-1] != ncomp:
        raise ShapeMismatch(f"field shape {v.shape} does not conform to grid {grid.shape}x{ncomp}")


def curl(v: np.ndarray, grid: Grid) -> np.ndarray:
    """Discrete curl as sum_j J_j D_j v."""
    if min(grid.shape) < 3:
        raise GridTooSmall("curl needs at least 3 nodes per axis")
    _check_field(v, grid, 3)
    J = constant_matrices().J
    out = np.zeros(v.shape)
    for j in range(3):
        out += diff(v, j, grid) @ J[j].T
    return out


def spatial_operator(u: np.ndarray, grid: Grid) -> np.ndarray:
    """sum_j Aco[j] D_j u = (-curl H, curl E)."""
    _check_field(u, grid, 6)
    return np.concatenate([-curl(u[..., 3:], grid), curl(u[..., :3], grid)], axis=-1)


def matvec(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", M, v)


def apply_L(A0, D, u: np.ndarray, ut: np.ndarray, grid: Grid) -> np.ndarray:
    """A0 u_t + sum_j Aco[j] D_j u + D u, pointwise."""
    for name, M in (("A0", A0), ("D", D)):
        M = np.asarray(M)
        if M.shape[-2:] != (6, 6):
            raise ShapeMismatch(f"{name} must end in (6, 6)")
        try:
            np.broadcast_shapes(M.shape[:-2], grid.shape)
        except ValueError as exc:
            raise ShapeMismatch(f"{name} does not conform to the grid") from exc
    if ut.shape != u.shape:
        raise ShapeMismatch("u and u_t differ in shape")
    return matvec(np.asarray(A0), ut) + spatial_operator(u, grid) + matvec(np.asarray(D), u)


# traces ---------------------------------------------------------------------
@dataclass(frozen=True)
class Traces:
    tr_t: np.ndarray
    tr_tau: np.ndarray
    tr_n: np.ndarray


def traces(v: np.ndarray, nu: np.ndarray) -> Traces:
    v = np.asarray(v, dtype=float)
    nu = np.broadcast_to(np.asarray(nu, dtype=float), v.shape)
    tt = np.cross(v, nu)
    return Traces(tr_t=tt, tr_tau=np.cross(nu, tt), tr_n=np.sum(v * nu, axis=-1))


def tr_t(v: np.ndarray, nu: np.ndarray) -> np.ndarray:
    return np.cross(v, np.broadcast_to(nu, v.shape))


def apply_B(zeta_or_b, u_boundary: np.ndarray, nu=BOTTOM_NORMAL, x=None, admissible=None) -> np.ndarray:
    """B(u)u = tr_t u2 - nu x (zeta(tr_t u1) tr_t u1).

    ``zeta_or_b`` is either a matrix field ``b`` (linear variant) or a callable
    ``zeta(x, xi)``. ``admissible(xi)`` optionally flags traces outside the set
    where zeta is defined.
    """
    u_boundary = np.asarray(u_boundary, dtype=float)
    nu = np.broadcast_to(np.asarray(nu, dtype=float), u_boundary.shape[:-1] + (3,))
    a = np.cross(u_boundary[..., :3], nu)
    c = np.cross(u_boundary[..., 3:], nu)
    if callable(zeta_or_b):
        if admissible is not None:
            ok = np.asarray(admissible(a))
            if not np.all(ok):
                idx = tuple(int(i) for i in np.argwhere(~ok)[0])
                raise ZetaDomainViolation("tangential trace outside the domain of zeta", index=idx)
        b = zeta_or_b(x, a)
    else:
        b = zeta_or_b
    return c - np.cross(nu, matvec(np.asarray(b), a))


@dataclass(frozen=True)
class BoundaryFrame:
    nu: np.ndarray = field(default_factory=lambda: BOTTOM_NORMAL.copy())

    def __post_init__(self):
        n = np.linalg.norm(self.nu, axis=-1)
        if not np.allclose(n, 1.0, atol=1e-14):
            raise ValueError("normal must have unit length")

    def tangential_projector(self) -> np.ndarray:
        nu = np.asarray(self.nu)
        return np.eye(3) - nu[..., :, None] * nu[..., None, :]


@dataclass(frozen=True)
class FieldState:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        _check_field(self.values, self.grid, 6)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite entries")

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qlmaxwell.core import (BOTTOM_NORMAL, BoundaryFrame, FieldState, Grid, apply_B, apply_L,
                            constant_matrices, curl, diff, skew, spatial_operator, tr_t, traces)
from qlmaxwell.errors import GridTooSmall, ShapeMismatch, ZetaDomainViolation

vec3 = arrays(np.float64, 3, elements=st.floats(-10, 10))


# frozen oracles ---------------------------------------------------------------
def test_constant_matrix_entries():
    cm = constant_matrices()
    assert cm.J1.tolist() == [[0, 0, 0], [0, 0, -1], [0, 1, 0]]
    assert cm.Aco[0][1, 5] == 1.0 and cm.Aco[0][2, 4] == -1.0
    assert cm.Aco[0][5, 1] == 1.0 and cm.Aco[0][4, 2] == -1.0
    assert cm.B0co @ np.array([1.0, 2.0, 3.0]) == pytest.approx([-2.0, 1.0, 0.0])
    assert np.array_equal(cm.B1co[:, :3], cm.B0co) and not cm.B1co[:, 3:].any()
    assert np.array_equal(cm.B2co[:, 3:], cm.B0co) and not cm.B2co[:, :3].any()


def test_constant_matrices_read_only():
    with pytest.raises(ValueError):
        constant_matrices().Aco[0, 0, 0] = 1.0


def test_trace_oracle():
    assert tr_t(np.array([1.0, 2.0, 3.0]), BOTTOM_NORMAL) == pytest.approx([-2.0, 1.0, 0.0])
    tr = traces(np.array([1.0, 2.0, 3.0]), BOTTOM_NORMAL)
    assert tr.tr_tau == pytest.approx([1.0, 2.0, 0.0])
    assert tr.tr_n == pytest.approx(-3.0)


def test_apply_B_oracle():
    u = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    assert apply_B(np.eye(3), u) == pytest.approx([-6.0, 2.0, 0.0])
    assert apply_B(2 * np.eye(3), u) == pytest.approx([-7.0, 0.0, 0.0])


def test_apply_B_callable_and_admissibility():
    u = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    out = apply_B(lambda x, xi: np.eye(3) + np.einsum("...i,...j->...ij", xi, xi), u)
    # b a = a + |a|^2 a with a = (-2, 1, 0)
    assert out == pytest.approx([-5.0 - 6.0, 4.0 - 12.0, 0.0])
    with pytest.raises(ZetaDomainViolation):
        apply_B(lambda x, xi: np.eye(3), u, admissible=lambda xi: np.linalg.norm(xi, axis=-1) < 1)


def test_grid_geometry():
    g = Grid((4, 5, 6), (2.0, 1.0, 3.0))
    assert g.shape == (4, 5, 7)
    assert g.spacing == pytest.approx([0.5, 0.2, 0.5])
    assert g.weights().sum() == pytest.approx(6.0)
    assert g.boundary_coords("top")[..., 2].max() == 3.0
    gp = Grid((4, 4, 4), periodic_normal=True)
    assert gp.shape == (4, 4, 4) and gp.periodic_axes == (0, 1, 2) and not gp.has_boundary
    assert gp.weights().sum() == pytest.approx(1.0)


def test_grid_errors():
    with pytest.raises(GridTooSmall):
        Grid((2, 4, 4))
    with pytest.raises(ShapeMismatch):
        Grid((4, 4))


# difference operators --------------------------------------------------------
def test_periodic_diff_single_mode():
    g = Grid((16, 8, 4))
    X = g.coords()
    h = g.spacing[0]
    u = np.sin(2 * np.pi * 3 * X[..., 0])
    expected = np.sin(2 * np.pi * 3 * h) / h * np.cos(2 * np.pi * 3 * X[..., 0])
    assert np.allclose(diff(u, 0, g), expected, atol=1e-12)


def test_sbp_exact_on_affine():
    g = Grid((4, 4, 9))
    X = g.coords()
    assert np.allclose(diff(3.0 * X[..., 2] - 1.0, 2, g), 3.0)


@given(arrays(np.float64, 9, elements=st.floats(-5, 5)), arrays(np.float64, 9, elements=st.floats(-5, 5)))
def test_sbp_summation_by_parts(u, v):
    g = Grid((3, 3, 8))
    U = np.broadcast_to(u, g.shape).copy()
    V = np.broadcast_to(v, g.shape).copy()
    w = g.weights()
    lhs = np.sum(w * (U * diff(V, 2, g) + V * diff(U, 2, g))) / g.face_weight / 9
    assert lhs == pytest.approx(u[-1] * v[-1] - u[0] * v[0], abs=1e-9)


def test_curl_of_gradient_vanishes(rng):
    g = Grid((6, 7, 8))
    phi = rng.normal(size=g.shape)
    grad = np.stack([diff(phi, j, g) for j in range(3)], axis=-1)
    assert np.max(np.abs(curl(grad, g))) < 1e-10


def test_spatial_operator_blocks(rng):
    g = Grid((5, 5, 5))
    u = rng.normal(size=g.shape + (6,))
    out = spatial_operator(u, g)
    assert np.allclose(out[..., :3], -curl(u[..., 3:], g))
    assert np.allclose(out[..., 3:], curl(u[..., :3], g))


def test_apply_L_shape_checks(rng):
    g = Grid((4, 4, 4))
    u = rng.normal(size=g.shape + (6,))
    assert apply_L(np.eye(6), np.zeros((6, 6)), u, u, g) == pytest.approx(u + spatial_operator(u, g))
    with pytest.raises(ShapeMismatch):
        apply_L(np.eye(5), np.zeros((6, 6)), u, u, g)
    with pytest.raises(ShapeMismatch):
        apply_L(np.eye(6), np.zeros((6, 6)), u, u[..., :3], g)
    with pytest.raises(ShapeMismatch):
        curl(u, g)


# properties -------------------------------------------------------------------
@given(vec3, vec3)
def test_J_is_cross_product(a, v):
    cm = constant_matrices()
    for j in range(3):
        assert np.allclose(cm.J[j] @ v, np.cross(np.eye(3)[j], v))
    assert np.allclose(skew(a) @ v, np.cross(a, v))


@given(vec3)
def test_Aco_symmetric_and_sum(xi):
    A = np.einsum("j,jab->ab", xi, constant_matrices().Aco)
    assert np.allclose(A, A.T)
    assert np.allclose(A[:3, 3:], -skew(xi))


@given(vec3, vec3)
def test_trace_invariants(v, n):
    if np.linalg.norm(n) < 1e-3:
        return
    nu = n / np.linalg.norm(n)
    tr = traces(v, nu)
    assert abs(np.linalg.norm(tr.tr_t) - np.linalg.norm(tr.tr_tau)) < 1e-12
    assert np.allclose(tr.tr_tau + tr.tr_n * nu, v, atol=1e-10)
    assert abs(tr.tr_t @ nu) < 1e-10


def test_boundary_frame_and_field_state():
    assert BoundaryFrame().tangential_projector() == pytest.approx(np.diag([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        BoundaryFrame(np.array([0.0, 0.0, 2.0]))
    g = Grid((3, 3, 3))
    with pytest.raises(ValueError):
        FieldState(g, np.full(g.shape + (6,), np.nan))
    with pytest.raises(ShapeMismatch):
        FieldState(g, np.zeros((3, 3, 3, 6)))

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qlmaxwell.core import constant_matrices
from qlmaxwell.errors import DegenerateChart, IdentityViolation, PositivityLost
from qlmaxwell.localization import (CHART_REGISTRY, build_chart, partition_reconstruction, span_residual,
                                    transform_boundary, transform_coeffs, transform_data, verify_charts)

ORIGIN = np.zeros((1, 3))


# frozen oracles at the anchor (omega = 1) --------------------------------------------
def test_R_hat_half_space():
    assert build_chart("half-space").R_hat(ORIGIN)[0] == pytest.approx(np.diag([1.0, 1.0, -1.0]))


def test_R_hat_scaling():
    Rh = build_chart("scaling", {"c": 2.0}).R_hat(ORIGIN)[0]
    assert Rh == pytest.approx(np.diag([1.0, 1.0, -2.0]) / np.sqrt(2.0))


def test_R_hat_tilted():
    ch = build_chart("tilted-plane", {"a": 0.5})
    assert ch.beta(ORIGIN)[0] == pytest.approx(1.0)
    assert np.allclose(ch.R_hat(ORIGIN)[0], [[1, 0, 0], [0, 1, 0], [0.5, 0, -1]])
    assert ch.normal(ORIGIN)[0] == pytest.approx(np.array([0.5, 0.0, -1.0]) / np.sqrt(1.25))


def test_hemisphere_normal_at_pole():
    ch = build_chart("hemisphere")
    assert ch.normal(ORIGIN)[0] == pytest.approx([0.0, 0.0, -1.0])
    assert ch.kappa(ORIGIN)[0] == pytest.approx(1.0)


def test_half_space_coefficients_unchanged(rng):
    ch = build_chart("half-space")
    y = ch.sample_interior(50, rng)
    co = transform_coeffs(ch, np.eye(6), y=y)
    assert np.allclose(co.A0, np.eye(6))
    assert np.allclose(co.D, 0.0, atol=1e-10)
    cm = constant_matrices()
    R = np.diag([1, 1, -1, 1, 1, -1.0])
    w = ch.omega(y)[:, None, None]
    for j in range(2):
        assert np.allclose(co.A[j], R @ (w * cm.Aco[j] + (1 - w) * cm.Aco[2]) @ R)
    assert co.checks["A3_residual"] == 0.0


def test_degenerate_and_unknown_charts():
    with pytest.raises(DegenerateChart):
        build_chart("scaling", {"c": -2.0})
    with pytest.raises(KeyError):
        build_chart("torus")


def test_positivity_lost(rng):
    ch = build_chart("tilted-plane")
    with pytest.raises(PositivityLost):
        transform_coeffs(ch, -np.eye(6), y=ch.sample_interior(20, rng))


def test_identity_violation_raised_on_tolerance():
    ch = build_chart("hemisphere")
    with pytest.raises(IdentityViolation):
        transform_boundary(ch, np.eye(3), y=ch.sample_boundary(5, np.random.default_rng(0)), tol=-1.0)


# properties ----------------------------------------------------------------------------
mat3 = arrays(np.float64, (3, 3), elements=st.floats(-2, 2))


@given(st.sampled_from(sorted(CHART_REGISTRY)), mat3, st.integers(0, 2 ** 31))
def test_boundary_identity_holds(name, M, seed):
    ch = build_chart(name)
    y = ch.sample_boundary(8, np.random.default_rng(seed))
    nu = ch.normal(y)
    P = np.eye(3) - nu[:, :, None] * nu[:, None, :]
    b = P @ (np.eye(3) + M @ M.T) @ P
    out = transform_boundary(ch, b, y=y)
    assert out.checks["identity_residual"] <= 1e-10
    assert out.checks["B0_residual"] <= 1e-12
    assert out.checks["reconstruction_residual"] <= 1e-10
    assert out.checks["b_symmetry_defect"] <= 1e-12


@given(st.sampled_from(sorted(CHART_REGISTRY)), st.integers(0, 2 ** 31))
def test_interior_structure(name, seed):
    rng = np.random.default_rng(seed)
    ch = build_chart(name)
    y = ch.sample_interior(10, rng)
    M = rng.normal(size=(len(y), 6, 6))
    co = transform_coeffs(ch, np.eye(6) + 0.2 * M @ np.swapaxes(M, 1, 2), y=y)
    assert co.checks["span_residual"] <= 1e-12
    assert co.checks["symmetry_defect"] <= 1e-12
    assert co.checks["congruence_margin"] >= -1e-12
    assert span_residual(co.A[2]).max() <= 1e-15


def test_transform_data_half_space():
    ch = build_chart("half-space")
    y = np.array([[0.1, 0.2, 0.0]])
    g = lambda x: np.tile([1.0, 2.0, 3.0], (len(x), 1))  # noqa: E731
    u0 = lambda x: np.tile(np.arange(6.0), (len(x), 1))  # noqa: E731
    out = transform_data(ch, u0=u0, g=g, y=y)
    assert out["g"][0] == pytest.approx([1.0, 2.0, -3.0])
    assert out["u0"][0] == pytest.approx([0.0, 1.0, -2.0, 3.0, 4.0, -5.0])


def test_partition_reconstruction():
    charts = [build_chart("half-space"), build_chart("tilted-plane"), build_chart("hemisphere")]
    thetas = [lambda x: 0.2 + 0 * x[..., 0], lambda x: 0.3 + 0.1 * np.sin(x[..., 0]),
              lambda x: 0.5 - 0.1 * np.sin(x[..., 0])]
    x = np.random.default_rng(1).uniform(-0.3, 0.3, (50, 3))
    x[:, 2] = np.abs(x[:, 2]) + 1.05
    u0 = lambda x: np.stack([np.cos(x[..., 0] + k) * x[..., 2] for k in range(6)], -1)  # noqa: E731
    assert partition_reconstruction(u0, x, charts, thetas) < 1e-13


def test_verify_charts_table():
    table = verify_charts(n_boundary=50, n_interior=50)
    assert set(table["charts"]) == set(CHART_REGISTRY)
    assert table["passed"] and table["max_identity_residual"] <= 1e-10

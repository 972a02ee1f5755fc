from __future__ import annotations

import numpy as np
import pytest
from conftest import bump_state

from qlmaxwell.core import Grid
from qlmaxwell.errors import CFLViolation, CoefficientInvariantFailure, ShapeMismatch
from qlmaxwell.laws import make_linear
from qlmaxwell.linear import LinearCoefficients, apriori_sweep, energy_audit, solve_linear
from qlmaxwell.scenarios import affine_exact
from qlmaxwell.studies import linear_coefficients_for

GRID = Grid((6, 6, 6))


@pytest.mark.parametrize("integrator", ["rk4", "midpoint"])
def test_affine_solution_reproduced(integrator):
    law = make_linear()
    data = affine_exact(GRID, law, amplitude=0.5)
    co = linear_coefficients_for(law, GRID)
    traj = solve_linear(co, data.u0, data.f, data.g, GRID, 0.2, g_top=data.g_top, integrator=integrator)
    assert np.max(np.abs(traj.final - data.exact(0.2))) < 1e-11
    # linear in time: the cubic interpolant and its derivative are exact between nodes
    t = 0.5 * (traj.times[1] + traj.times[2])
    assert np.allclose(traj(t), data.exact(t), atol=1e-11)


def test_zero_data_stays_zero():
    traj = solve_linear(LinearCoefficients(), np.zeros(GRID.shape + (6,)), None, None, GRID, 0.1)
    assert not traj.final.any()
    a = energy_audit(traj)
    assert a.lhs == a.rhs == a.residual == 0.0


def test_periodic_energy_conservation():
    g = Grid((8, 8, 8), periodic_normal=True)
    X = g.coords()
    u0 = np.stack([np.sin(2 * np.pi * (X[..., 0] + 2 * X[..., 2]) + k) for k in range(6)], -1)
    mid = solve_linear(LinearCoefficients(), u0, None, None, g, 0.25, integrator="midpoint")
    e = mid.records["energy"]
    assert np.max(np.abs(e - e[0])) < 1e-10 * e[0]
    rk = solve_linear(LinearCoefficients(), u0, None, None, g, 0.25)
    drift = rk.records["energy"][0] - rk.records["energy"][-1]
    assert 0 <= drift < 1e-2 * e[0]  # RK4 is weakly dissipative on skew operators


def test_absorption_energy_nonincreasing():
    g = Grid((12, 12, 12))
    traj = solve_linear(LinearCoefficients(), bump_state(g), None, None, g, 0.5)
    e = traj.records["energy"]
    assert np.all(np.diff(e) <= 1e-9)
    assert e[-1] < 0.8 * e[0]  # part of the pulse has left through the absorbing faces
    audit = energy_audit(traj)
    assert audit.residual < 1e-3 * e[0]


def test_energy_residual_frozen():
    g = Grid((12, 12, 12))
    traj = solve_linear(LinearCoefficients(), bump_state(g), None, None, g, 0.5)
    assert energy_audit(traj).residual == pytest.approx(4.0806e-6, rel=1e-3)


def test_recomputed_audit_matches_records():
    g = Grid((8, 8, 8))
    co = LinearCoefficients(b=2 * np.diag([1.0, 1.0, 0.0]))
    traj = solve_linear(co, bump_state(g), None, None, g, 0.2)
    a, b = energy_audit(traj), energy_audit(traj, coeffs=co)
    assert a.residual == pytest.approx(b.residual, rel=1e-12, abs=1e-18)


def test_apriori_sweep_monotone():
    g = Grid((8, 8, 8))
    traj = solve_linear(LinearCoefficients(D=0.1 * np.eye(6)), bump_state(g), None, None, g, 0.3)
    sweep = apriori_sweep(traj)
    assert sweep["monotone"]
    assert all(r["lhs"] <= r["rhs"] * (1 + 1e-9) for r in sweep["rows"])


def test_step_callback_stops_early():
    traj = solve_linear(LinearCoefficients(), bump_state(GRID), None, None, GRID, 0.5,
                        step_callback=lambda n, t, u: n == 2)
    assert len(traj.times) == 3 and traj.meta["stopped_early"]


def test_input_validation():
    u0 = np.zeros(GRID.shape + (6,))
    with pytest.raises(CFLViolation):
        solve_linear(LinearCoefficients(), u0, None, None, GRID, 0.5, dt=0.5)
    with pytest.raises(CFLViolation):
        solve_linear(LinearCoefficients(), u0, None, None, GRID, 0.5, dt=0.03)
    with pytest.raises(ShapeMismatch):
        solve_linear(LinearCoefficients(), u0[:-1], None, None, GRID, 0.1)
    with pytest.raises(CoefficientInvariantFailure):
        solve_linear(LinearCoefficients(), u0, None, np.ones(GRID.shape[:2] + (3,)), GRID, 0.1)
    with pytest.raises(CoefficientInvariantFailure):
        solve_linear(LinearCoefficients(b=0.5 * np.eye(3)), u0, None, None, GRID, 0.1)
    with pytest.raises(CoefficientInvariantFailure):
        solve_linear(LinearCoefficients(b=np.eye(3) + np.eye(3)[[2, 1, 0]]), u0, None, None, GRID, 0.1)
    with pytest.raises(CoefficientInvariantFailure):
        solve_linear(LinearCoefficients(A0=np.triu(np.ones((6, 6)))), u0, None, None, GRID, 0.1)
    with pytest.raises(ValueError):
        solve_linear(LinearCoefficients(), u0, None, None, GRID, 0.1, integrator="euler")


def test_time_dependent_A0_uses_derivative():
    g = Grid((6, 6, 6))
    co = LinearCoefficients(A0=lambda t: (1.0 + t) * np.eye(6), dA0=lambda t: np.eye(6))
    traj = solve_linear(co, bump_state(g), None, None, g, 0.2)
    assert energy_audit(traj).residual < 1e-4

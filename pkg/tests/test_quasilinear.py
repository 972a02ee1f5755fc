from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qlmaxwell.core import Grid
from qlmaxwell.errors import BallExit, CompatFailure, ConfigInvalid
from qlmaxwell.laws import make_aniso_demo, make_kerr, make_linear
from qlmaxwell.linear import solve_linear
from qlmaxwell.quasilinear import (QLParams, QuasilinearData, continue_maximal, data_quantity, lipschitz_omega,
                                   smallness, solve_quasilinear, step_selection)
from qlmaxwell.scenarios import bump_data, plane_wave, pumped_bump, zero_data
from qlmaxwell.studies import linear_coefficients_for

G8 = Grid((8, 8, 8))
KERR = make_kerr(alpha=1.0, beta=1.0, r_star=0.5)


# smallness and step selection ----------------------------------------------------
@pytest.mark.parametrize("beta, kb", [(1.0, 0.05), (1.0, 0.1), (2.5, 0.2)])
def test_smallness_closed_form(beta, kb):
    rep = smallness(make_kerr(beta=beta).zeta, kb)
    assert rep.z0 == pytest.approx(2 * beta * kb, rel=1e-6)
    assert rep.z == pytest.approx(rep.z0 * kb, rel=1e-12)


def test_smallness_zero_for_constant_zeta():
    assert smallness(make_linear().zeta, 0.3).z == 0.0
    with pytest.raises(ValueError):
        smallness(make_linear().zeta, -1.0)


def test_smallness_aniso_closed_form():
    # zeta = (1 + gamma |xi|^2) I: d zeta [e] = 2 gamma (xi . e) I, sup norm 2 gamma kb
    rep = smallness(make_aniso_demo(gamma=0.5).zeta, 0.2)
    assert rep.z0 == pytest.approx(0.2, rel=1e-6)


def test_step_selection_oracle():
    out = step_selection({}, T=1.0, r=1.0, kappa=1.0, kappa_tilde=0.5, m=3)
    assert out["R"] == pytest.approx(np.sqrt(32))
    assert out["gamma"] == 1.0
    c = out["candidates"]
    assert c["distance"] == pytest.approx(1 / (2 * np.sqrt(32)))
    assert c["weight"] == pytest.approx(np.log(2) / 5)
    assert c["boundary"] == pytest.approx(1 / 32)
    assert c["lipschitz"] == pytest.approx(1 / 1024)
    assert out["tau"] == pytest.approx(1 / 1024) and out["advisory"]


@given(st.floats(0.01, 10), st.floats(0.01, 10))
def test_step_selection_monotone_in_data_size(r1, r2):
    a = step_selection({}, 1.0, min(r1, r2), 0.5, 0.1, 3)["tau"]
    b = step_selection({}, 1.0, max(r1, r2), 0.5, 0.1, 3)["tau"]
    assert b <= a


# Picard iteration --------------------------------------------------------------
def test_zero_data_converges_immediately():
    traj, hist = solve_quasilinear(KERR, zero_data(G8, KERR), QLParams(T=0.2))
    assert hist.iterations == 0 and hist.converged and not traj.final.any()


def test_linear_law_is_one_step_and_bitwise():
    law = make_linear(eps=2.0, sigma=0.2)
    data = plane_wave(G8, law, amplitude=0.1)
    traj, hist = solve_quasilinear(law, data, QLParams(T=0.2))
    assert hist.iterations == 1 and hist.converged
    ref = solve_linear(linear_coefficients_for(law, G8), data.u0, data.f, data.g, G8, 0.2, dt=traj.dt,
                       g_top=data.g_top)
    assert np.array_equal(traj.final, ref.final)


def test_kerr_small_data_contracts():
    data = pumped_bump(G8, KERR, amplitude=1e-2)
    _, hist = solve_quasilinear(KERR, data, QLParams(T=0.1))
    assert hist.converged and hist.iterations <= 6
    assert max(hist.ratios) < 0.1
    assert hist.bc_residual < 1e-4


def test_ball_exit_and_compat_failure():
    with pytest.raises(BallExit):
        solve_quasilinear(KERR, pumped_bump(G8, KERR, amplitude=1e-2), QLParams(T=0.1, R=1e-6))
    bd = bump_data(G8, KERR, amplitude=0.1)
    bad = replace(bd, g=lambda t: np.broadcast_to(np.array([0.5, 0.0, 0.0]), (8, 8, 3)))
    with pytest.raises(CompatFailure):
        solve_quasilinear(KERR, bad, QLParams(T=0.1))


def test_window_too_short_is_config_error():
    with pytest.raises(ConfigInvalid):
        solve_quasilinear(KERR, pumped_bump(G8, KERR, amplitude=1e-2), QLParams(T=0.05))


# continuation ------------------------------------------------------------------
def test_restart_consistency():
    law = make_linear()
    data = plane_wave(G8, law, amplitude=0.1)
    traj, rep = continue_maximal(law, data, 0.4, QLParams(T=0.2))
    first, _ = solve_quasilinear(law, data, QLParams(T=0.2))
    second, _ = solve_quasilinear(law, replace(data, u0=first.final, t0=0.2), QLParams(T=0.2))
    assert rep.criterion == "none" and rep.reached_target and rep.windows == 2
    assert np.max(np.abs(traj.final - second.final)) <= 1e-12


def test_blowup_scenario_stops_on_domain_criterion():
    _, rep = continue_maximal(KERR, pumped_bump(G8, KERR, amplitude=0.45), 1.0, QLParams(T=0.1))
    assert rep.criterion == "a" and not rep.reached_target and rep.t_stop < 1.0


# data quantities ------------------------------------------------------------------
def _mode_data(amp: float) -> QuasilinearData:
    g = Grid((16, 16, 4))
    X = g.coords()
    u0 = np.zeros(g.shape + (6,))
    u0[..., 1] = amp * np.sin(2 * np.pi * 2 * X[..., 0])
    return QuasilinearData(g, u0)


def test_data_quantity_single_mode():
    lam = 16 * np.sin(2 * np.pi * 2 / 16)
    q = data_quantity(_mode_data(1.0), (0.0, 1.0), 2)
    assert q.initial == pytest.approx(0.5 * (1 + lam ** 2 + lam ** 4), rel=1e-12)
    assert q.total == q.initial and q.source == q.boundary == 0.0


@given(st.floats(0.1, 10))
def test_data_quantity_scales_quadratically(c):
    a = data_quantity(_mode_data(1.0), (0.0, 1.0), 1).total
    b = data_quantity(_mode_data(c), (0.0, 1.0), 1).total
    assert b == pytest.approx(c ** 2 * a, rel=1e-10)


def test_data_quantity_counts_source():
    data = pumped_bump(G8, KERR, amplitude=0.1)
    q = data_quantity(data, (0.0, 1.0), 1)
    # f is the time-constant rate * u0: the space-time part is |J| times its H^1 norm squared
    assert q.source == pytest.approx(q.initial, rel=1e-10)
    assert q.source_jets > 0


def test_lipschitz_omega_constant_field():
    g = Grid((6, 6, 6), periodic_normal=True)
    c = np.array([0.0, 3.0, 0.0, 0.0, 0.0, 4.0])
    u0 = np.broadcast_to(c, g.shape + (6,)).copy()
    traj = solve_linear(linear_coefficients_for(make_linear(), g), u0, None, None, g, 0.1)
    assert np.allclose(lipschitz_omega(traj), 5.0)

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qlmaxwell.compat import (CompatData, TimeJet, check_cc, cutoff_psi, read_jet, s_lin, s_nl,
                              time_jet_extension, write_jet)
from qlmaxwell.core import Grid, spatial_operator
from qlmaxwell.errors import DomainViolation, NonSmoothInput, SingularCoefficient
from qlmaxwell.laws import make_kerr, make_linear
from qlmaxwell.scenarios import manufactured


def test_s_lin_free_maxwell_oracle(rng):
    g = Grid((5, 5, 5))
    u0 = rng.normal(size=g.shape + (6,))
    jet = s_lin(3, 0.0, [np.eye(6)], None, None, u0, [], g)
    L = spatial_operator(u0, g)
    assert np.array_equal(jet[0], u0)
    assert np.allclose(jet[1], -L)
    assert np.allclose(jet[2], spatial_operator(L, g))


def test_s_lin_damping_and_source():
    g = Grid((3, 3, 3))
    u0 = np.ones(g.shape + (6,))
    D = np.diag([2.0] * 3 + [0.0] * 3)
    f = [np.full(g.shape + (6,), 1.0), np.full(g.shape + (6,), 4.0)]
    jet = s_lin(3, 0.0, [2 * np.eye(6)], None, [D], u0, f, g)
    # 2 S1 = f0 - D u0, 2 S2 = f1 - D S1
    assert jet[1][0, 0, 0] == pytest.approx([-0.5] * 3 + [0.5] * 3)
    assert jet[2][0, 0, 0] == pytest.approx([2.5] * 3 + [2.0] * 3)


def test_s_lin_singular():
    g = Grid((3, 3, 3))
    with pytest.raises(SingularCoefficient):
        s_lin(2, 0.0, [np.zeros((6, 6))], None, None, np.zeros(g.shape + (6,)), [], g)


def test_s_nl_domain():
    g = Grid((3, 3, 3))
    u0 = np.zeros(g.shape + (6,))
    u0[1, 1, 1, 0] = 2.0
    with pytest.raises(DomainViolation):
        s_nl(2, 0.0, make_kerr(), u0, [], g)


def test_manufactured_data_compatible():
    g = Grid((8, 8, 8))
    law = make_kerr(r_star=1.0)
    data = manufactured(g, law, amplitude=0.1)
    rep = check_cc("nonlinear", 3, CompatData(data.u0, data.f_jets(2), data.g_jets(3)), g, law=law,
                   tol=10 * (1 / 8) ** 2)
    assert rep.passed
    bad = CompatData(data.u0, data.f_jets(2), [gj + np.array([5.0, 0.0, 0.0]) for gj in data.g_jets(3)])
    rep_bad = check_cc("nonlinear", 3, bad, g, law=law, tol=10 * (1 / 8) ** 2)
    assert not rep_bad.passed and not rep_bad.passed_per_order[0]


def test_zero_data_residuals_vanish():
    g = Grid((4, 4, 4))
    z = np.zeros(g.shape + (6,))
    rep = check_cc("nonlinear", 3, CompatData(z, [], []), g, law=make_kerr())
    assert rep.residuals == [0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        check_cc("other", 1, CompatData(z, [], []), g)


def test_cutoff_values():
    assert cutoff_psi(np.array([0.0, 0.5, -0.5]))[:] == pytest.approx([1.0, 1.0, 1.0])
    assert not cutoff_psi(np.array([2.0, -2.5, 10.0])).any()


@given(st.floats(0, 3), st.floats(0, 3))
def test_cutoff_monotone_and_bounded(a, b):
    lo, hi = sorted((a, b))
    pa, pb = cutoff_psi(lo), cutoff_psi(hi)
    assert 0.0 <= pb <= pa <= 1.0


def test_extension_constant_mode():
    g = Grid((8, 8, 3))
    h0 = np.full(g.shape + (6,), 2.0)
    h1 = np.full(g.shape + (6,), -1.0)
    ext = time_jet_extension([h0, h1], g)
    # zero frequency: u(t) = psi(t) (h0 + t h1)
    for t in (0.3, 1.2, 1.9, 2.1):
        assert np.allclose(ext(t), cutoff_psi(t) * (2.0 - t))


def test_extension_rejects_rough_input(rng):
    g = Grid((16, 16, 3))
    with pytest.raises(NonSmoothInput):
        time_jet_extension([rng.normal(size=g.shape + (6,))], g)


def test_jet_io_roundtrip(tmp_path, rng):
    g = Grid((3, 4, 3))
    jet = TimeJet(tuple(rng.normal(size=g.shape + (6,)) for _ in range(3)))
    write_jet(tmp_path / "j.csv", jet)
    back = read_jet(tmp_path / "j.csv", g)
    assert all(np.array_equal(a, b) for a, b in zip(jet.entries, back.entries))
    assert (tmp_path / "j.csv").read_text().splitlines()[0] == "order,node_index,v0,v1,v2,v3,v4,v5"


def test_time_jet_rejects_nan():
    with pytest.raises(ValueError):
        TimeJet((np.array([np.nan]),))
    with pytest.raises(ValueError):
        TimeJet(())


def test_s_nl_equals_s_lin_for_linear_law(rng):
    g = Grid((4, 4, 4))
    law = make_linear(eps=2.0, sigma=0.3)
    u0 = rng.normal(size=g.shape + (6,))
    a = s_nl(3, 0.0, law, u0, [], g)
    b = s_lin(3, 0.0, [law.chi(None, np.zeros(6))], None, [law.sigma(None, np.zeros(6))], u0, [], g)
    assert all(np.array_equal(x, y) for x, y in zip(a.entries, b.entries))

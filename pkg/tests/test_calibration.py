import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vpcal.calibration import (Calibration, CutoffProfile, construct_calibration, export_fields,
                               sphere_calibration, transport_coefficient)
from vpcal.errors import IncompatibleData, TubeTooWide
from vpcal.geometry import Balls, FourierCurve, Grid, Sphere


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 4 / 3), st.floats(-2.0, 2.0))
def test_profile_bounds(delta, q):
    pr = CutoffProfile(delta)
    z = q * delta
    assert pr.zeta(z) <= 1 - pr.c_zeta * z * z + 1e-12 or abs(z) >= delta
    assert 0 <= pr.zeta(z) <= 1
    assert min(abs(z), pr.c_theta) <= abs(pr.tau(z)) + 1e-12
    assert abs(pr.tau(z)) <= 1
    assert pr.dtau(z) >= -1e-12
    assert np.sign(pr.tau(z)) == np.sign(z)


def test_profile_derivatives_match_differences():
    pr = CutoffProfile(0.3)
    z = np.linspace(-0.35, 0.35, 141)
    h = 1e-6
    assert np.allclose(pr.dzeta(z), (pr.zeta(z + h) - pr.zeta(z - h)) / (2 * h), atol=1e-5)
    assert np.allclose(pr.dtau(z), (pr.tau(z + h) - pr.tau(z - h)) / (2 * h), atol=1e-5)
    assert np.allclose(pr.deta(z), (pr.eta(z + h) - pr.eta(z - h)) / (2 * h), atol=1e-5)


def test_profile_width_limits():
    with pytest.raises(ValueError):
        CutoffProfile(0.0)
    with pytest.raises(ValueError):
        CutoffProfile(1.5)


def test_sphere_calibration_fields(rng):
    cal = sphere_calibration(1.0, 2, CutoffProfile(0.3))
    assert cal.lam(0.3) == 1.0
    x = rng.uniform(-1.5, 1.5, (500, 2))
    ev = cal.evaluate(x)
    r = np.linalg.norm(x, axis=-1)
    assert np.all(np.linalg.norm(ev["xi"], axis=-1) <= 1 + 1e-15)
    on = np.abs(r - 1) < 1e-3
    assert np.allclose(ev["div_xi"][np.abs(r - 1) < 1e-12], 1.0)
    assert np.all(ev["B"] == 0)
    assert np.all(np.sign(ev["theta"][~on]) == np.sign(r[~on] - 1))


def test_sphere_too_wide_profile():
    with pytest.raises(TubeTooWide):
        sphere_calibration(0.2, 2, CutoffProfile(0.15))


def test_unequal_balls_have_no_harmonic_calibration():
    b = Balls([[0.3, 0.5], [0.75, 0.5]], [0.2, 0.1], T=0.001)
    with pytest.raises(IncompatibleData):
        construct_calibration(b, CutoffProfile(0.04))


def test_equal_balls_are_static():
    b = Balls([[0.3, 0.5], [0.75, 0.5]], [0.1, 0.1])
    cal = construct_calibration(b, CutoffProfile(0.05))
    assert np.isclose(cal.lam(0.0), 10.0)


def test_fourier_calibration_normal_velocity_and_multiplier():
    sh = FourierCurve(1.0, a=[0, 0, 0.05], velocity="vpmcf")
    cal = construct_calibration(sh, CutoffProfile(0.3))
    t = sh.t_ref
    p, w, n = sh.quadrature(t, 512)
    B = cal.evaluate(p, t)["B"]
    # B . nu reproduces the prescribed normal velocity -H + mean(H)
    ev = cal.evaluate(p, t, need_B=False)
    H = ev["div_xi"]
    mean_H = np.sum(H * w) / np.sum(w)
    assert np.allclose(np.sum(B * n, axis=-1), -H + mean_H, atol=1e-8)
    assert np.isclose(cal.lam(t), mean_H, rtol=1e-10)
    # f vanishes outside the tube
    assert np.all(transport_coefficient(cal, np.array([[3.0, 0.0]]), t) == 0)


def test_export_fields_layout():
    cal = sphere_calibration(0.25, 2, CutoffProfile(0.1), center=[0.5, 0.5])
    g = Grid(16)
    vals, lam = export_fields(cal, g)
    assert vals.shape == (256, 5) and lam == 4.0
    ev = cal.evaluate(g.points().reshape(-1, 2))
    assert np.array_equal(vals[:, :2], ev["xi"])
    assert np.array_equal(vals[:, 4], ev["theta"])

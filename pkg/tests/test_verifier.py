import numpy as np
import pytest

from vpcal.calibration import Calibration, CutoffProfile, sphere_calibration
from vpcal.geometry import Sphere
from vpcal.verifier import SampleSpec, band_scaling, sample_points, verify_calibration


class Tilted:
    """Wrong velocity extension ``B = 0.1 x``."""

    diagnostics = {"method": "corrupted"}

    def evaluate(self, x, frame, profile):
        d = x.shape[-1]
        return 0.1 * x, np.broadcast_to(0.1 * np.eye(d), x.shape + (d,)).copy()


SMALL = SampleSpec(count=2000, interface=128, bulk=400)


def test_sphere_certificate():
    rep = verify_calibration(sphere_calibration(1.0, 2, CutoffProfile(0.3)), samples=SMALL)
    assert rep.passed
    assert rep.interface_residual < 1e-12
    assert rep.lam_star == 1.0
    assert [r[0] for r in rep.table()][:2] == ["i", "ii"]


def test_corrupted_velocity_field_fails():
    good = sphere_calibration(1.0, 2, CutoffProfile(0.3))
    bad = Calibration(good.shape, good.profile, "corrupted", builder=lambda sh, t: Tilted(),
                      lam_fn=good.lam_fn)
    rep = verify_calibration(bad, samples=SMALL)
    assert not rep.passed
    assert not rep.condition_passed("ii")


def test_wrong_multiplier_fails():
    good = sphere_calibration(1.0, 2, CutoffProfile(0.3))
    bad = Calibration(good.shape, good.profile, "wrong-lambda", builder=good.builder,
                      lam_fn=lambda t: 1.5)
    assert not verify_calibration(bad, samples=SMALL).passed


def test_samples_are_stratified_and_seeded():
    sh = Sphere(1.0)
    spec = SampleSpec(count=1000, interface=64, bulk=100)
    x1, k1 = sample_points(sh, 0.3, 0.0, spec)
    x2, k2 = sample_points(sh, 0.3, 0.0, spec)
    assert np.array_equal(x1, x2)
    s = sh.signed_distance(x1)
    tube = np.abs(s) < 0.3
    assert tube.sum() >= 1000
    # both sides of the interface are sampled in every band
    for lo, hi in zip(spec.bands[:-1], spec.bands[1:]):
        assert np.any((s > lo * 0.3) & (s < hi * 0.3)) and np.any((-s > lo * 0.3) & (-s < hi * 0.3))


def test_three_dimensional_sphere_certificate():
    cal = sphere_calibration(1.0, 3, CutoffProfile(0.25))
    rep = verify_calibration(cal, samples=SMALL)
    assert rep.passed and rep.lam_star == 2.0


def test_band_scaling_shape():
    rep = verify_calibration(sphere_calibration(1.0, 2, CutoffProfile(0.3)), samples=SMALL)
    sups, ratios = band_scaling(rep, "v", (1 / 2, 1 / 4, 1 / 8))
    assert len(sups) == 3 and len(ratios) == 2

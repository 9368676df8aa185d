import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from translator_lab import closed_forms as cf


def test_grim_reaper_zero_on_axis():
    xs = np.linspace(-100, 100, 11)
    assert np.all(cf.evaluate(cf.GrimReaper(), xs, 0.0) == 0.0)


def test_tilted_at_half_pi_is_grim_reaper():
    fam = cf.TiltedGrimReaper(math.pi / 2)
    for x, y in [(0.3, 0.2), (-5.0, 1.1), (2.0, -1.4)]:
        assert cf.evaluate(fam, x, y) == pytest.approx(math.log(math.cos(y)), abs=1e-15)


def test_shifted_values():
    fam = cf.ShiftedGrimReaper(math.pi / 4)
    assert cf.evaluate(fam, 0.0, math.pi / 4) == pytest.approx(0.0, abs=1e-15)
    assert cf.evaluate(fam, 0.0, 0.0) == pytest.approx(0.5 * math.log(2), rel=1e-15)
    assert cf.evaluate(fam, 0.0, 0.0) == pytest.approx(0.34657, abs=1e-5)


def test_tilt_slope_values():
    assert cf.tilt_slope(math.pi / 2) == 0.0
    assert cf.tilt_slope(math.pi) == pytest.approx(1.7320508, abs=1e-7)
    with pytest.raises(cf.StripDomainError):
        cf.tilt_slope(1.0)


def test_family_parameter_checks():
    with pytest.raises(cf.StripDomainError):
        cf.ShiftedGrimReaper(math.pi / 2)
    with pytest.raises(cf.StripDomainError):
        cf.ShiftedGrimReaper(0.0)
    with pytest.raises(cf.StripDomainError):
        cf.TiltedGrimReaper(1.5)
    with pytest.raises(ValueError):
        cf.TiltedGrimReaper(4.0, sign=0)


@pytest.mark.parametrize("fam,y", [
    (cf.GrimReaper(), math.pi / 2),
    (cf.GrimReaper(), -2.0),
    (cf.ShiftedGrimReaper(0.5), math.pi / 2 - 1e-13),
    (cf.TiltedGrimReaper(math.pi), math.pi),
])
def test_outside_strip_rejected(fam, y):
    with pytest.raises(cf.StripDomainError):
        cf.evaluate(fam, 0.0, y)


@settings(max_examples=60)
@given(x=st.floats(-50, 50), y=st.floats(-1.5, 1.5), b=st.floats(0.05, 1.5))
def test_even_in_y(x, y, b):
    for fam in (cf.GrimReaper(), cf.ShiftedGrimReaper(b)):
        assert cf.evaluate(fam, x, y) == cf.evaluate(fam, x, -y)


@settings(max_examples=60)
@given(x=st.floats(-50, 50), t=st.floats(-0.95, 0.95), b=st.floats(math.pi / 2, 20), sign=st.sampled_from([1, -1]))
def test_tilted_even_in_y_affine_in_x(x, t, b, sign):
    fam = cf.TiltedGrimReaper(b, sign)
    y = t * b
    assert cf.evaluate(fam, x, y) == cf.evaluate(fam, x, -y)
    slope = cf.evaluate(fam, x + 1.0, y) - cf.evaluate(fam, x, y)
    assert slope == pytest.approx(sign * cf.tilt_slope(b), abs=1e-9 * (1 + abs(x)))


@settings(max_examples=40)
@given(b=st.floats(0.01, 1.57), x=st.floats(-10, 10))
def test_shifted_vanishes_on_strip_edges(b, x):
    fam = cf.ShiftedGrimReaper(b)
    assert abs(cf.evaluate(fam, x, b)) < 1e-12
    assert abs(cf.evaluate(fam, x, -b)) < 1e-12


@pytest.mark.parametrize("fam", [cf.GrimReaper(), cf.ShiftedGrimReaper(1.0),
                                 cf.TiltedGrimReaper(2.5, -1), cf.TiltedGrimReaper(7.0)])
def test_gradient_matches_finite_differences(fam):
    rng = np.random.default_rng(3)
    x = rng.uniform(-3, 3, 20)
    y = rng.uniform(-0.9, 0.9, 20) * fam.half_width * 0.9
    h = 1e-6
    gx, gy = cf.gradient(fam, x, y)
    fx = (cf.evaluate(fam, x + h, y) - cf.evaluate(fam, x - h, y)) / (2 * h)
    fy = (cf.evaluate(fam, x, y + h) - cf.evaluate(fam, x, y - h)) / (2 * h)
    assert np.allclose(gx, fx, atol=1e-7)
    assert np.allclose(gy, fy, atol=1e-6)


def test_rotated_family():
    base = cf.GrimReaper()
    r = cf.Rotated(base, angle=math.pi / 2, shift=0.5)
    # rotating by 90 degrees swaps the roles of x and y
    assert r.evaluate(0.3, 5.0) == pytest.approx(math.log(math.cos(0.3)) + 0.5)
    assert r.inside(1.0, 100.0) and not r.inside(1.6, 0.0)
    gx, gy = r.gradient(0.3, 5.0)
    assert gx == pytest.approx(-math.tan(0.3)) and gy == pytest.approx(0.0, abs=1e-15)

import math

import numpy as np
import pytest

from translator_lab import ode_solitons as ode
from translator_lab.geometry import HeightField, make_rectangle_domain, translator_residual
from translator_lab.ode_solitons import (
    ProfileError,
    bowl_ode_defect,
    bowl_profile,
    catenoid_curvature_defect,
    catenoid_profile,
    necksize_rotational,
)


@pytest.fixture(scope="module")
def bowl():
    return bowl_profile(3.0, 1e-4)


@pytest.fixture(scope="module")
def cat1():
    return catenoid_profile(1.0, 5.0, 1e-4)


def test_bowl_initial_conditions(bowl):
    assert bowl.r[0] == 0.0 and bowl.u[0] == 0.0 and bowl.du[0] == 0.0


def test_bowl_quadratic_near_origin():
    p = bowl_profile(0.01, 1e-5)
    k = int(np.argmin(np.abs(p.r - 1e-3)))
    assert p.r[k] == pytest.approx(1e-3)
    assert abs(p.u[k] / p.r[k] ** 2 - 0.25) < 1e-6


def test_bowl_ode_defect_at_one(bowl):
    d = bowl_ode_defect(bowl, stride=1, r_min=0.05)
    r = bowl.r[1:-1][bowl.r[1:-1] >= 0.05]
    k = int(np.argmin(np.abs(r - 1.0)))
    assert abs(d[k]) < 1e-8
    assert np.max(np.abs(d)) < 1e-7


def test_bowl_monotone_and_entire():
    p = bowl_profile(50.0, 0.02)
    assert np.all(p.du[1:] > 0)
    assert np.all(np.isfinite(p.u))
    # slope grows like r/(something) without blowing up at finite r
    assert p.du[-1] < 60


def test_bowl_step_too_large_rejected():
    with pytest.raises(ProfileError, match="too large"):
        bowl_profile(50.0, 0.1)
    with pytest.raises(ValueError):
        bowl_profile(-1.0, 0.01)


def test_bowl_two_step_sizes_agree_to_fourth_order():
    hs = (0.05, 0.025, 0.0125)
    vals = [bowl_profile(2.0, h).u[-1] for h in hs]
    order = math.log2(abs(vals[0] - vals[1]) / abs(vals[1] - vals[2]))
    assert 2.5 <= order <= 4.5
    assert abs(vals[1] - vals[2]) < 1e-7


def test_bowl_as_surface_of_revolution_is_a_translator(bowl):
    z = bowl.height()
    errs, hs = [], []
    for n in (17, 33, 65):
        d = make_rectangle_domain(1.0, 1.0, n, n)
        f = HeightField.from_function(d, z)
        errs.append(np.max(np.abs(translator_residual(f, 1.0))))
        hs.append(d.dx)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.7 <= slope <= 2.3
    assert errs[-1] < 1e-3


def test_bowl_height_outside_range(bowl):
    with pytest.raises(ValueError):
        bowl.height()(np.array([4.0]), np.array([0.0]))


def test_catenoid_shooting_data(cat1):
    k = cat1.neck_index
    assert cat1.s[k] == 0.0
    assert cat1.r[k] == 1.0 and cat1.theta[k] == math.pi / 2 and cat1.z[k] == 0.0


def test_catenoid_curvature_oracle(cat1):
    assert np.max(np.abs(catenoid_curvature_defect(cat1, 1))) < 1e-6


def test_catenoid_oracle_detects_wrong_equation():
    c = catenoid_profile(1.0, 3.0, 1e-3)
    bad = ode.ProfileCurve(s=c.s, r=c.r, z=-c.z, theta=c.theta, lam=1.0)
    assert np.max(np.abs(catenoid_curvature_defect(bad, 1))) > 0.1


def test_catenoid_minimum_radius_at_neck(cat1):
    assert int(np.argmin(cat1.r)) == cat1.neck_index
    others = np.delete(cat1.r, cat1.neck_index)
    assert np.all(others > 1.0)


def test_catenoid_wings_are_not_mirror_images(cat1):
    # z -> -z is not a symmetry of the equation: r(s) - r(-s) = s^3/(3 lam) + ...
    k = cat1.neck_index
    for s in (0.01, 0.02, 0.04):
        j = int(round(s / 1e-4))
        diff = cat1.r[k + j] - cat1.r[k - j]
        assert diff == pytest.approx(s ** 3 / 3, rel=0.05)


def test_catenoid_wings_monotone_outward(cat1):
    for which in ("upper", "lower"):
        r, _ = cat1.wing(which)
        assert np.all(np.diff(r) > 0)


def test_catenoid_refinement_order():
    hs = (0.05, 0.025, 0.0125)
    vals = [catenoid_profile(1.0, 3.0, h).r[-1] for h in hs]
    order = math.log2(abs(vals[0] - vals[1]) / abs(vals[1] - vals[2]))
    assert 2.5 <= order <= 4.5


def test_catenoid_axis_hit_is_reported(monkeypatch):
    # flip the sign of the curvature term: the profile then runs into the axis
    monkeypatch.setattr(ode, "_catenoid_rhs", lambda s, y: [math.cos(y[2]), math.sin(y[2]),
                                                            math.sin(y[2]) / y[0] - math.cos(y[2])])
    with pytest.raises(ProfileError, match="axis"):
        ode.catenoid_profile(1.0, 10.0, 1e-3)


@pytest.mark.parametrize("lam", [1.0, 0.25])
def test_necksize(lam):
    assert necksize_rotational(catenoid_profile(lam, 3.0, 1e-3)) == lam


def test_necksize_of_bowl_is_zero():
    assert necksize_rotational(bowl_profile(1.0, 1e-2)) == 0.0


def test_neck_collapse_to_bowl():
    from translator_lab.acceptance import neck_collapse_deviation

    up, lo = neck_collapse_deviation(0.01)
    assert up < 5e-2 and lo < 5e-2


def test_profile_csv_round_trip(tmp_path):
    c = catenoid_profile(0.5, 1.0, 1e-2)
    ode.write_profile_csv(c, tmp_path / "p.csv")
    text = (tmp_path / "p.csv").read_text()
    assert text.splitlines()[0] == "s,r,z,theta"
    back = ode.read_profile_csv(tmp_path / "p.csv", 0.5)
    for name in ("s", "r", "z", "theta"):
        assert np.array_equal(getattr(back, name), getattr(c, name))


def test_bowl_csv(tmp_path):
    p = bowl_profile(1.0, 0.1)
    ode.write_bowl_csv(p, tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "r,u,du" and len(lines) == len(p.r) + 1

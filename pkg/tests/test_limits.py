import math

import numpy as np
import pytest

from translator_lab import closed_forms as cf
from translator_lab.geometry import DomainError, HeightField, make_rectangle_domain
from translator_lab.limits import (
    SWEEP_COLUMNS,
    Window,
    bowl_profile_error,
    default_window,
    extract_delta_wing,
    grim_reaper_error,
    linear_height_check,
    max_gradient,
    measure_tilt,
    run_sweep,
    sweep_plots,
    write_sweep_csv,
)
from translator_lab.solver import SolverConfig

SQRT3 = math.sqrt(3.0)
HALF_LN2 = 0.5 * math.log(2)


@pytest.fixture(scope="module")
def pi4_sweep():
    return run_sweep(math.pi / 4, (2.0, 4.0, 8.0), dx=0.125, ny=17)


@pytest.fixture(scope="module")
def half_pi_sweep():
    return run_sweep(math.pi / 2, (2.0, 4.0, 8.0, 16.0, 32.0), Window(1.0, math.pi / 2 - 0.1), dx=0.125, ny=51)


@pytest.fixture(scope="module")
def pi_sweep():
    # window [-4, 4] x [-2.6, 2.6]
    return run_sweep(math.pi, (4.0, 8.0, 16.0, 32.0), Window(4.0, 2.6), dx=0.125, ny=65)


def tilted_field(W=4.0, Y=3.0, nx=65, ny=25):
    d = make_rectangle_domain(W, Y, nx, ny)
    return HeightField.from_function(d, lambda x, y: cf.evaluate(cf.TiltedGrimReaper(math.pi), x, y))


def test_schedule_and_window_validation():
    with pytest.raises(ValueError):
        run_sweep(1.0, (4.0, 2.0))
    with pytest.raises(DomainError):
        run_sweep(1.0, (2.0, 4.0), Window(3.0, 0.5))
    with pytest.raises(DomainError):
        run_sweep(1.0, (2.0, 4.0), Window(1.0, 1.0))
    assert default_window(1.0, (2.0, 4.0)) == Window(1.0, 0.9)


def test_pi4_sweep_increases_towards_barrier(pi4_sweep):
    s = pi4_sweep
    assert s.complete and s.strictly_increasing()
    assert all(c < HALF_LN2 for c in s.center_heights)
    assert not s.center_unbounded()


def test_renormalized_fields_share_window(pi4_sweep):
    r = pi4_sweep.renormalized
    assert all(f.domain.same_grid(r[0].domain) for f in r)
    j, i = r[0].domain.origin_index
    assert all(f.values[j, i] == 0.0 for f in r)


def test_barrier_gap_shrinks(pi4_sweep):
    b = math.pi / 4
    gaps = []
    for sol in pi4_sweep.solutions:
        d = sol.domain
        X, Y = d.meshgrid()
        diff = sol.field.values - (np.log(np.cos(Y)) - math.log(math.cos(b)))
        assert np.max(diff[d.active]) <= 10 * d.dy ** 2
        gaps.append(-np.max(diff[d.interior]))
    assert gaps == sorted(gaps, reverse=True)


def test_gradient_bounded_across_schedule(pi4_sweep):
    g = [max_gradient(f) for f in pi4_sweep.renormalized]
    assert all(v <= g[-1] + 1e-3 for v in g)
    assert math.isfinite(g[-1])


def test_half_pi_converges_to_grim_reaper(half_pi_sweep):
    s = half_pi_sweep
    assert s.complete
    errs = [grim_reaper_error(f) for f in s.renormalized]
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] < 5e-2


def test_half_pi_tilt_vanishes():
    s = run_sweep(math.pi / 2, (8.0, 16.0, 32.0), Window(4.0, math.pi / 2 - 0.1), dx=0.125, ny=51)
    tilt, _ = measure_tilt(s)
    assert tilt < 5e-2


def test_pi_center_unbounded(pi_sweep):
    s = pi_sweep
    assert s.complete and s.strictly_increasing()
    assert all(d >= 0.05 for d in s.increments)
    assert s.center_unbounded()


def test_delta_wing_symmetric(pi_sweep):
    w = extract_delta_wing(pi_sweep)
    f = w.limit_field
    j, i = f.domain.origin_index
    assert f.values[j, i] == 0.0
    assert np.nanmax(np.abs(f.values - f.values[:, ::-1])) <= 1e-10
    assert np.nanmax(np.abs(f.values - f.values[::-1, :])) <= 1e-10
    assert w.center_unbounded


def test_delta_wing_cauchy_gaps_decrease(pi_sweep):
    w = extract_delta_wing(pi_sweep)
    gaps = pi_sweep.cauchy_gaps
    assert gaps == sorted(gaps, reverse=True)
    assert not w.non_convergent
    # roughly O(1/L): each doubling at least shrinks the gap by a factor 1.5
    assert all(gaps[k + 1] < gaps[k] / 1.5 for k in range(len(gaps) - 1))


@pytest.mark.xfail(strict=True, reason="Cauchy gap decays like 1/L; 5e-3 is out of reach by L=32")
def test_delta_wing_cauchy_gap_target(pi_sweep):
    assert extract_delta_wing(pi_sweep).cauchy_gap < 5e-3


def test_delta_wing_preconditions(pi4_sweep, pi_sweep):
    with pytest.raises(ValueError):
        extract_delta_wing(pi4_sweep)
    short = run_sweep(math.pi, (2.0, 4.0), dx=0.25, ny=17)
    with pytest.raises(ValueError):
        extract_delta_wing(short)


def test_truncated_sweep_has_diagnostic():
    s = run_sweep(math.pi / 4, (2.0, 4.0), dx=0.25, ny=9, cfg=SolverConfig(divergence_height=0.1))
    assert not s.complete and "L=2" in s.diagnostic
    assert s.solutions == []


@pytest.mark.slow
def test_b16_close_to_grim_reaper():
    s = run_sweep(1.6, (4.0, 8.0, 16.0, 32.0, 64.0), Window(2.0, 1.4), dx=0.05, ny=65)
    assert s.complete
    assert grim_reaper_error(s.renormalized[-1]) < 5e-2


@pytest.fixture(scope="module")
def bowl_errors():
    out = {}
    for b in (8.0, 12.0):
        s = run_sweep(b, (4 * b,), Window(2.0, b - 0.1), dx=0.125, ny=int(16 * b) + 1)
        out[b] = bowl_profile_error(s.renormalized[-1], r_max=2.0)
    return out


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="the b=8 wing differs from the bowl by about 0.07 on r <= 2")
def test_b8_bowl_target(bowl_errors):
    assert bowl_errors[8.0] < 5e-2


@pytest.mark.slow
def test_bowl_error_shrinks_with_b(bowl_errors):
    # the wing approaches the bowl as b grows; b=12 already meets the 5e-2 target
    assert bowl_errors[12.0] < bowl_errors[8.0]
    assert bowl_errors[12.0] < 5e-2


def test_tilt_of_sampled_tilted_grim_reaper():
    tilt, unreliable = measure_tilt(tilted_field())
    assert abs(tilt - SQRT3) < 1e-10 and not unreliable


def test_tilt_flags_narrow_window():
    tilt, unreliable = measure_tilt(tilted_field(W=0.25, nx=5))
    assert unreliable and abs(tilt - SQRT3) < 1e-10


def test_tilt_of_flat_field():
    d = make_rectangle_domain(2.0, 1.0, 33, 5)
    assert measure_tilt(HeightField.zeros(d)) == (0.0, False)


def test_linear_height_examples(pi4_L8):
    d = make_rectangle_domain(4.0, 3.0, 65, 25)
    assert linear_height_check(HeightField.zeros(d)) == 0.0
    lam = linear_height_check(tilted_field(), "right")
    assert abs(lam - SQRT3) < 1e-8
    assert abs(linear_height_check(tilted_field(), "left") - SQRT3) < 1e-8
    with pytest.raises(ValueError):
        linear_height_check(HeightField.zeros(d), "up")
    assert math.isfinite(linear_height_check(pi4_L8))


def test_sweep_reports(pi4_sweep, tmp_path):
    write_sweep_csv(pi4_sweep, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS) and len(lines) == 4
    plots = sweep_plots(pi4_sweep)
    assert set(plots) == {"center_heights.svg", "midline_x.svg", "midline_y.svg"}
    assert "log cos y" in plots["midline_y.svg"]


def test_grim_reaper_error_rejects_wide_window():
    d = make_rectangle_domain(1.0, 1.6, 9, 9)
    with pytest.raises(DomainError):
        grim_reaper_error(HeightField.zeros(d))

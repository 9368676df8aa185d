"""Renormalized limits of rectangle solutions as L grows.

Every rectangle in a sweep shares the same spacing, so all grids are nested
and the renormalized fields ``u_L - u_L(0, 0)`` live on one common window.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .geometry import DomainError, GridDomain, HeightField, make_rectangle_domain, window_domain
from .solver import Solution, SolverConfig, rectangle_grid, solve

log = logging.getLogger(__name__)

UNBOUNDED_FLOOR = 0.05
MONOTONE_SLACK = 1e-12
TILT_FIT_FRACTION = 0.2


@dataclass(frozen=True)
class Window:
    W: float
    Y: float


@dataclass(eq=False)
class LimitSweep:
    b: float
    L_schedule: tuple
    window: Window
    solutions: list = dc_field(default_factory=list)
    renormalized: list = dc_field(default_factory=list)
    center_heights: list = dc_field(default_factory=list)
    diagnostic: str | None = None

    @property
    def complete(self) -> bool:
        return self.diagnostic is None and len(self.solutions) == len(self.L_schedule)

    @property
    def increments(self) -> list[float]:
        c = self.center_heights
        return [c[k + 1] - c[k] for k in range(len(c) - 1)]

    def monotone(self, slack: float = MONOTONE_SLACK) -> bool:
        return all(d > -slack for d in self.increments)

    def strictly_increasing(self, slack: float = MONOTONE_SLACK) -> bool:
        return all(d > slack for d in self.increments)

    @property
    def cauchy_gaps(self) -> list[float]:
        r = self.renormalized
        return [float(np.nanmax(np.abs(r[k + 1].values - r[k].values))) for k in range(len(r) - 1)]

    def center_unbounded(self, floor: float = UNBOUNDED_FLOOR) -> bool:
        """Heuristic: the last two increments (doublings of L) both reach ``floor``."""
        inc = self.increments
        return len(inc) >= 2 and inc[-1] >= floor and inc[-2] >= floor


def default_window(b: float, L_schedule) -> Window:
    return Window(W=min(L_schedule) / 2, Y=b - 0.1)


def run_sweep(b: float, L_schedule, window: Window | None = None,
              dx: float = 0.125, ny: int = 65, cfg: SolverConfig | None = None) -> LimitSweep:
    """Solve on Rectangle(L, b) for each L at fixed spacing and renormalize."""
    Ls = tuple(float(L) for L in L_schedule)
    if not Ls or any(Ls[k + 1] <= Ls[k] for k in range(len(Ls) - 1)):
        raise ValueError("L schedule must be non-empty and strictly increasing")
    window = window or default_window(b, Ls)
    if window.W > Ls[0] or window.Y >= b:
        raise DomainError("window must lie inside the smallest rectangle")
    cfg = cfg or SolverConfig()
    sweep = LimitSweep(b=b, L_schedule=Ls, window=window)
    win_grid = None
    for L in Ls:
        nx, _ = rectangle_grid(L, b, dx, ny)
        dom = make_rectangle_domain(L, b, nx, ny)
        sol = solve(dom, cfg)
        if not sol.converged:
            sweep.diagnostic = (f"solve failed at L={L:g}: {sol.failure or 'not converged'} "
                                f"(t_reached={sol.t_reached:.6g})")
            log.warning(sweep.diagnostic)
            break
        win, sl = window_domain(dom, window.W, window.Y)
        if win_grid is None:
            win_grid = win
        elif not win.same_grid(win_grid):
            raise DomainError("window grids differ across the sweep")
        vals = sol.field.values[sl] - sol.center_height
        sweep.solutions.append(sol)
        sweep.renormalized.append(HeightField(win_grid, vals))
        sweep.center_heights.append(sol.center_height)
        log.info("L=%g center=%.10g iterations=%d", L, sol.center_height, sol.iterations)
    if not sweep.monotone() and sweep.diagnostic is None:
        sweep.diagnostic = "center heights are not monotone in L"
    return sweep


# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DeltaWingResult:
    b: float
    limit_field: HeightField
    cauchy_gap: float
    measured_tilt: float
    center_unbounded: bool
    non_convergent: bool
    tilt_unreliable: bool


def extract_delta_wing(sweep: LimitSweep) -> DeltaWingResult:
    if not sweep.b > math.pi / 2:
        raise ValueError("a Delta-wing needs b > pi/2")
    if len(sweep.renormalized) < 3:
        raise ValueError("need at least 3 converged sweep entries")
    gaps = sweep.cauchy_gaps
    tilt, unreliable = measure_tilt(sweep.renormalized[-1])
    return DeltaWingResult(
        b=sweep.b,
        limit_field=sweep.renormalized[-1],
        cauchy_gap=gaps[-1],
        measured_tilt=tilt,
        center_unbounded=sweep.center_unbounded(),
        non_convergent=not gaps[-1] < gaps[-2],
        tilt_unreliable=unreliable,
    )


def _slope(x, z):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, z, rcond=None)
    return float(coef[0])


def measure_tilt(source, fraction: float = TILT_FIT_FRACTION) -> tuple[float, bool]:
    """Asymptotic slope magnitude of x -> u(x, 0) near the window's x-ends.

    Slopes are fitted on the outer ``fraction`` of each side; the result is
    the mean of their magnitudes.  The fit is flagged unreliable when the
    slopes over the inner and outer halves of a fit interval differ by more
    than 10% of the slope (the profile has not straightened out yet), or
    when the window has too few nodes for that comparison.
    """
    if isinstance(source, LimitSweep):
        f = source.renormalized[-1]
    elif isinstance(source, DeltaWingResult):
        f = source.limit_field
    elif isinstance(source, Solution):
        f = source.field
    else:
        f = source
    d = f.domain
    org = d.origin_index
    if org is None:
        raise DomainError("tilt needs the row y = 0")
    row = f.values[org[0]]
    x = d.x
    ok = np.isfinite(row)
    xr, zr = x[ok], row[ok]
    xmin, xmax = xr.min(), xr.max()
    cut = fraction * (xmax - xmin) / 2
    left = xr <= xmin + cut + 1e-12
    right = xr >= xmax - cut - 1e-12
    if left.sum() < 4 or right.sum() < 4:
        # too few nodes to judge straightness; fit the outermost pair
        if len(xr) < 2:
            return math.nan, True
        sl = (zr[1] - zr[0]) / (xr[1] - xr[0])
        sr = (zr[-1] - zr[-2]) / (xr[-1] - xr[-2])
        return 0.5 * (abs(sl) + abs(sr)), True
    sl = _slope(xr[left], zr[left])
    sr = _slope(xr[right], zr[right])
    tilt = 0.5 * (abs(sl) + abs(sr))
    unreliable = False
    for sel in (left, right):
        xs, zs = xr[sel], zr[sel]
        h = len(xs) // 2
        s_in, s_out = _slope(xs[:h + 1], zs[:h + 1]), _slope(xs[h:], zs[h:])
        if abs(s_in - s_out) > 0.1 * max(abs(tilt), 1e-300):
            unreliable = True
    return tilt, unreliable


def linear_height_check(sol, half: str = "right") -> float:
    """Smallest lambda with z*(x') <= z*(x) + lambda |x' - x| on one half.

    z*(x) is the column maximum of u.  Over a sampled set of columns the
    smallest such lambda is the largest adjacent difference quotient.
    """
    f = sol.field if isinstance(sol, Solution) else sol
    d = f.domain
    cols = np.where(d.active, f.values, -np.inf).max(axis=0)
    x = d.x
    if half == "right":
        sel = x >= -1e-12 * d.dx
    elif half == "left":
        sel = x <= 1e-12 * d.dx
    else:
        raise ValueError("half must be 'right' or 'left'")
    sel &= np.isfinite(cols)
    xs, zs = x[sel], cols[sel]
    if len(xs) < 2:
        return 0.0
    zs = zs - zs[np.argmin(np.abs(xs))]
    lam = float(np.max(np.abs(np.diff(zs)) / np.diff(xs)))
    if not math.isfinite(lam):
        raise ArithmeticError("column maxima are not finite")
    return lam


def max_gradient(f: HeightField) -> float:
    U = f.values
    d = f.domain
    gx = (U[1:-1, 2:] - U[1:-1, :-2]) / (2 * d.dx)
    gy = (U[2:, 1:-1] - U[:-2, 1:-1]) / (2 * d.dy)
    return float(np.nanmax(np.hypot(gx, gy)))


def grim_reaper_error(f: HeightField) -> float:
    """sup over the field's active nodes of |f - log cos y| (f renormalized)."""
    d = f.domain
    X, Y = d.meshgrid()
    if np.any(np.abs(Y[d.active]) >= math.pi / 2):
        raise DomainError("window reaches the edge of the grim reaper strip")
    err = np.abs(f.values - np.log(np.cos(Y)))
    return float(np.max(err[d.active]))


def bowl_profile_error(f: HeightField, r_max: float = 2.0, h: float = 0.01) -> float:
    """sup over |x| <= r_max on y = 0 of |f(x, 0) + u_bowl(|x|)|, values matched at 0."""
    from .ode_solitons import bowl_profile

    d = f.domain
    org = d.origin_index
    if org is None:
        raise DomainError("bowl comparison needs the row y = 0")
    sel = np.abs(d.x) <= r_max + 1e-12 * d.dx
    row = f.values[org[0], sel] - f.values[org]
    prof = bowl_profile(r_max + h, h)
    target = prof.height()(d.x[sel], np.zeros(sel.sum()))
    return float(np.max(np.abs(row - target)))


# ---------------------------------------------------------------------------
# reports

def sweep_rows(sweep: LimitSweep) -> list[tuple]:
    gaps = [math.nan] + sweep.cauchy_gaps
    rows = []
    for k, sol in enumerate(sweep.solutions):
        try:
            tilt = measure_tilt(sweep.renormalized[k])[0] if sweep.b > math.pi / 2 else math.nan
        except DomainError:
            tilt = math.nan
        rows.append((sweep.L_schedule[k], sweep.center_heights[k], gaps[k], tilt,
                     linear_height_check(sol, "right")))
    return rows


SWEEP_COLUMNS = ("L", "center_height", "cauchy_gap", "measured_tilt", "lambda_est")


def write_sweep_csv(sweep: LimitSweep, path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in sweep_rows(sweep):
            w.writerow(["%.17g" % v for v in row])


def midline_targets(sweep: LimitSweep, x: np.ndarray):
    """Closed-form comparison curves for the y = 0 and x = 0 midlines."""
    from .closed_forms import tilt_slope

    b = sweep.b
    if b < math.pi / 2:
        return None, None
    k = 2 * b / math.pi
    along_x = -tilt_slope(b) * np.abs(x)
    y = sweep.renormalized[-1].domain.y
    along_y = k * k * np.log(np.cos(y / k))
    return along_x, along_y


def sweep_plots(sweep: LimitSweep) -> dict[str, str]:
    from .svg import line_plot

    out = {}
    out["center_heights.svg"] = line_plot(
        [("u_L(0,0)", sweep.L_schedule[:len(sweep.center_heights)], sweep.center_heights)],
        title=f"center height vs L (b={sweep.b:.6g})", xlabel="L", ylabel="u(0,0)")
    if sweep.renormalized:
        last = sweep.renormalized[-1]
        d = last.domain
        j0, i0 = d.origin_index
        series_x = [(f"L={L:g}", d.x, f.values[j0]) for L, f in zip(sweep.L_schedule, sweep.renormalized)]
        series_y = [(f"L={L:g}", d.y, f.values[:, i0]) for L, f in zip(sweep.L_schedule, sweep.renormalized)]
        tx, ty = midline_targets(sweep, d.x)
        if tx is not None:
            series_x.append(("tilted grim reaper slope", d.x, tx, True))
            series_y.append(("dilated grim reaper", d.y, ty, True))
        elif sweep.b < math.pi / 2:
            series_y.append(("log cos y", d.y, np.log(np.cos(d.y)), True))
        out["midline_x.svg"] = line_plot(series_x, title="renormalized profile along y=0",
                                         xlabel="x", ylabel="u - u(0,0)")
        out["midline_y.svg"] = line_plot(series_y, title="renormalized profile along x=0",
                                         xlabel="y", ylabel="u - u(0,0)")
    return out

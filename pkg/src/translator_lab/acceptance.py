"""Acceptance criteria, runnable from the CLI (``verify``) and from pytest.

``desk`` runs every criterion at its stated scale and tolerance; ``quick``
shrinks the grids for smoke testing and is not an acceptance gate.
Everything written to disk is deterministic; timings are printed only.
"""
from __future__ import annotations

import csv
import filecmp
import math
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import closed_forms as cf
from .geometry import (
    HeightField,
    make_rectangle_domain,
    residual_field,
    write_field,
)
from .limits import Window, extract_delta_wing, linear_height_check, run_sweep, write_sweep_csv
from .morse_rado import (
    GraphFamily,
    VerticalPlane,
    count_critical_points_graph,
    count_critical_points_rotational,
    write_report_csv,
)
from .ode_solitons import (
    bowl_profile,
    catenoid_curvature_defect,
    catenoid_profile,
    write_bowl_csv,
    write_profile_csv,
)
from .solver import compare_fields, rectangle_grid, solve, solve_annulus_family, write_solution

LEVELS = ("desk", "quick")


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    values: dict = dc_field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.name} -- {self.detail}"


@dataclass(frozen=True)
class Scale:
    pi4_dx: float
    pi4_ny: int
    pi4_Ls: tuple
    wing_dx: float
    wing_ny: int
    wing_Ls: tuple
    wing_W: float
    barrier_Ls: tuple
    barrier_dx: float
    barrier_ny: int
    annulus_h: float


SCALES = {
    "desk": Scale(pi4_dx=1 / 32, pi4_ny=65, pi4_Ls=(2, 4, 8, 16),
                  wing_dx=0.125, wing_ny=129, wing_Ls=(8, 16, 32, 64), wing_W=8.0,
                  barrier_Ls=(2, 4), barrier_dx=1 / 16, barrier_ny=33, annulus_h=1 / 16),
    "quick": Scale(pi4_dx=1 / 8, pi4_ny=17, pi4_Ls=(2, 4, 8),
                   wing_dx=0.25, wing_ny=33, wing_Ls=(4, 8, 16), wing_W=4.0,
                   barrier_Ls=(2, 4), barrier_dx=1 / 8, barrier_ny=17, annulus_h=1 / 8),
}


def _g(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def loglog_slope(h, err) -> float:
    h, err = np.log(np.asarray(h, float)), np.log(np.asarray(err, float))
    return float(np.polyfit(h, err, 1)[0])


class _Context:
    """Shared solves, so each expensive sweep runs once per verification pass."""

    def __init__(self, level: str, out: Path | None):
        self.level = level
        self.scale = SCALES[level]
        self.out = out
        self.solutions = []
        self._cache = {}

    def path(self, name: str) -> Path | None:
        if self.out is None:
            return None
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def cached(self, key, fn):
        if key not in self._cache:
            t0 = time.perf_counter()
            self._cache[key] = (fn(), time.perf_counter() - t0)
        return self._cache[key]

    def sweep_pi4(self):
        s = self.scale
        return self.cached("pi4", lambda: run_sweep(math.pi / 4, s.pi4_Ls, dx=s.pi4_dx, ny=s.pi4_ny))

    def sweep_pi(self):
        s = self.scale
        win = Window(s.wing_W, math.pi - 0.1)
        return self.cached("pi", lambda: run_sweep(math.pi, s.wing_Ls, window=win,
                                                   dx=s.wing_dx, ny=s.wing_ny))

    def annulus(self):
        return self.cached("annulus", lambda: solve_annulus_family(2, 2, 2.5, 2.5, h=self.scale.annulus_h))


def crit_grim_reaper_constant(ctx: _Context) -> CriterionResult:
    sweep, secs = ctx.sweep_pi4()
    target = -math.log(math.cos(math.pi / 4))
    c = sweep.center_heights
    final = c[-1] if c else math.nan
    ok = (sweep.complete and sweep.strictly_increasing() and abs(final - target) < 2e-2
          and final < target and secs < 120)
    if ctx.out is not None and sweep.solutions:
        write_sweep_csv(sweep, ctx.path("c1/sweep.csv"))
    return CriterionResult(1, "grim-reaper limit constant", ok,
                           f"centers={[round(v, 6) for v in c]} target={target:.6f} "
                           f"gap={target - final:.3g} time={secs:.0f}s",
                           {"final_center": final, "gap": target - final})


def crit_tilt(ctx: _Context) -> CriterionResult:
    sweep, secs = ctx.sweep_pi()
    if not sweep.complete:
        return CriterionResult(2, "tilt asymptotics", False, sweep.diagnostic or "sweep incomplete")
    wing = extract_delta_wing(sweep)
    target = math.sqrt(3)
    rel = abs(wing.measured_tilt - target) / target
    ok = rel < 0.05 and secs < 600
    if ctx.out is not None:
        write_sweep_csv(sweep, ctx.path("c2/sweep.csv"))
        write_field(wing.limit_field, ctx.path("c2/limit_field.txt"))
    return CriterionResult(2, "tilt asymptotics", ok,
                           f"tilt={wing.measured_tilt:.5f} sqrt3={target:.5f} rel.err={rel:.3%} "
                           f"time={secs:.0f}s", {"tilt": wing.measured_tilt, "rel_err": rel})


def crit_dichotomy(ctx: _Context) -> CriterionResult:
    s4, _ = ctx.sweep_pi4()
    sp, _ = ctx.sweep_pi()
    b4, bp = s4.center_unbounded(), sp.center_unbounded()
    ok = (not b4) and bp and s4.complete and sp.complete
    inc4 = [f"{v:.3g}" for v in s4.increments]
    incp = [f"{v:.3g}" for v in sp.increments]
    return CriterionResult(3, "dichotomy proxy", ok,
                           f"b=pi/4 unbounded={b4} increments={inc4}; "
                           f"b=pi unbounded={bp} increments={incp}",
                           {"pi4_unbounded": b4, "pi_unbounded": bp})


def crit_barriers(ctx: _Context) -> CriterionResult:
    s = ctx.scale
    violations = 0
    worst = -math.inf
    parts = []
    for b in (0.5, math.pi / 4, 1.2):
        sols = []
        for L in s.barrier_Ls:
            nx, ny = rectangle_grid(L, b, s.barrier_dx, s.barrier_ny)
            dom = make_rectangle_domain(L, b, nx, ny)
            sol = solve(dom)
            if not sol.converged:
                return CriterionResult(4, "barrier ordering", False, f"solve failed b={b} L={L}")
            ctx.solutions.append(sol)
            sols.append(sol)
            tol = 10 * (dom.dx ** 2 + dom.dy ** 2)
            barrier = HeightField.from_function(dom, lambda x, y: cf.evaluate(cf.ShiftedGrimReaper(b), x, y))
            excess = sol.field.values - barrier.values - tol
            v = int(np.sum(excess[dom.active] > 0))
            violations += v
            worst = max(worst, float(np.max(sol.field.values[dom.active] - barrier.values[dom.active])))
        for lo, hi in zip(sols, sols[1:]):
            tol = 10 * (lo.domain.dx ** 2 + lo.domain.dy ** 2)
            rep = compare_fields(lo, hi, tol=tol)
            violations += len(rep.violations)
            parts.append(f"b={b:.4g}: min(u_2L-u_L)={rep.min_gap:.3g}")
    ok = violations == 0
    return CriterionResult(4, "barrier ordering", ok,
                           f"violations={violations} max(u-barrier)={worst:.3g}; " + "; ".join(parts),
                           {"violations": violations, "max_excess": worst})


def _nested_residual_slope(fn, half: float) -> float:
    """Order of the residual of a sampled exact surface on [-half, half]^2.

    The max is taken over the nodes of the coarsest grid, which all finer
    grids contain; otherwise the nearest-to-edge node drifts under refinement.
    """
    hs, errs = [], []
    for n in (16, 32, 64, 128):
        dom = make_rectangle_domain(half, half, n + 1, n + 1)
        f = HeightField.from_function(dom, fn)
        r = residual_field(f, 1.0, "strong")
        k = n // 16
        hs.append(dom.dy)
        errs.append(float(np.nanmax(np.abs(r[::k, ::k]))))
    return loglog_slope(hs, errs)


def _closed_form_slope(fam, half: float) -> float:
    return _nested_residual_slope(lambda x, y: cf.evaluate(fam, x, y), half)


def _bowl_surface_slope() -> float:
    return _nested_residual_slope(bowl_profile(2.0, 1e-4).height(), 1.0)


def _catenoid_fd_slope() -> float:
    c = catenoid_profile(1.0, 5.0, 1e-4)
    strides = (400, 200, 100)
    errs = [float(np.max(np.abs(catenoid_curvature_defect(c, k)))) for k in strides]
    return loglog_slope([k * 1e-4 for k in strides], errs)


def _richardson_order(values) -> float:
    e1 = abs(values[0] - values[1])
    e2 = abs(values[1] - values[2])
    return math.log2(e1 / e2)


def ode_orders() -> tuple[float, float]:
    hs = (0.05, 0.025, 0.0125)
    bowl = [bowl_profile(2.0, h).u[-1] for h in hs]
    cat = [catenoid_profile(1.0, 3.0, h).r[-1] for h in hs]
    return _richardson_order(bowl), _richardson_order(cat)


def crit_residual_orders(ctx: _Context) -> CriterionResult:
    slopes = {
        "grim_reaper": _closed_form_slope(cf.GrimReaper(), 1.2),
        "tilted_pi/2": _closed_form_slope(cf.TiltedGrimReaper(math.pi / 2), 1.2),
        "tilted_pi": _closed_form_slope(cf.TiltedGrimReaper(math.pi), 0.75 * math.pi),
        "tilted_2pi": _closed_form_slope(cf.TiltedGrimReaper(2 * math.pi), 0.75 * 2 * math.pi),
        "bowl_revolution": _bowl_surface_slope(),
        "catenoid_profile": _catenoid_fd_slope(),
    }
    ob, oc = ode_orders()
    ok = all(1.7 <= v <= 2.3 for v in slopes.values()) and 2.5 <= ob <= 4.5 and 2.5 <= oc <= 4.5
    detail = " ".join(f"{k}={v:.3f}" for k, v in slopes.items())
    detail += f" ode_bowl={ob:.3f} ode_catenoid={oc:.3f}"
    vals = dict(slopes, ode_bowl=ob, ode_catenoid=oc)
    return CriterionResult(5, "residual oracle orders", ok, detail, vals)


def neck_collapse_deviation(lam: float = 0.01) -> tuple[float, float]:
    """Max deviation of each catenoid wing from the bowl on r in [1, 3] after the best offset."""
    bowl = bowl_profile(4.0, 1e-3)
    cat = catenoid_profile(lam, 8.0, 1e-4)
    rr = np.linspace(1.0, 3.0, 201)
    out = []
    for which in ("upper", "lower"):
        r, z = cat.wing(which)
        k = int(np.argmax(np.diff(r) > 0))
        r, z = r[k:], z[k:]
        if not np.all(np.diff(r) > 0) or r[-1] < 3.0:
            out.append(math.inf)
            continue
        d = np.interp(rr, r, z) + bowl.depth(rr)
        off = 0.5 * (d.max() + d.min())
        out.append(float(np.max(np.abs(d - off))))
    return out[0], out[1]


def crit_neck_collapse(ctx: _Context) -> CriterionResult:
    up, lo = neck_collapse_deviation()
    if ctx.out is not None:
        write_bowl_csv(bowl_profile(4.0, 1e-2), ctx.path("c6/bowl.csv"))
    ok = up < 5e-2 and lo < 5e-2
    return CriterionResult(6, "catenoid neck collapse", ok,
                           f"upper wing dev={up:.4g} lower wing dev={lo:.4g} (bound 5e-2)",
                           {"upper": up, "lower": lo})


def crit_morse_rado(ctx: _Context) -> CriterionResult:
    ann, _ = ctx.annulus()
    sweep, _ = ctx.sweep_pi()
    s4, _ = ctx.sweep_pi4()
    graphs = list(ctx.solutions) + list(s4.solutions) + list(sweep.solutions)
    if ann.converged:
        graphs.append(ann)
    plane_total = 0
    for g in graphs:
        for ang in (0.0, 37.0, 90.0):
            plane_total += count_critical_points_graph(g, VerticalPlane.at_angle(ang)).total
    cat1 = count_critical_points_rotational(catenoid_profile(1.0, 5.0, 1e-3), VerticalPlane((1.0, 0.0)))
    cat2 = count_critical_points_rotational(catenoid_profile(0.25, 5.0, 1e-3), VerticalPlane((0.0, 1.0)))
    apex_ok = False
    apex_total = -1
    if sweep.renormalized:
        rep = count_critical_points_graph(sweep.renormalized[-1], GraphFamily(cf.GrimReaper()))
        apex_total = rep.total
        apex_ok = rep.total >= 1 and rep.cluster_containing(0.0, 0.0) is not None
        if ctx.out is not None:
            write_report_csv(rep, ctx.path("c7/deltawing_grimreaper.csv"))
    ann_counts = []
    if ann.converged:
        for ang in (0.3, 0.7, 1.1):
            fol = GraphFamily(cf.Rotated(cf.GrimReaper(), angle=ang))
            ann_counts.append(count_critical_points_graph(ann, fol).total)
    ok = (plane_total == 0 and cat1.total == 2 and cat2.total == 2 and apex_ok
          and ann.converged and all(n <= 8 for n in ann_counts))
    return CriterionResult(7, "Morse-Rado suite", ok,
                           f"plane counts on {len(graphs)} graphs={plane_total} catenoid={cat1.total},"
                           f"{cat2.total} wing-apex total={apex_total} contains origin={apex_ok} "
                           f"annulus counts={ann_counts}",
                           {"plane_total": plane_total, "apex_total": apex_total})


def _refinement_pair(L: float, b: float, dx: float, ny: int) -> tuple[float, float]:
    vals = []
    for h, n in ((dx, ny), (dx / 2, 2 * ny - 1)):
        nx, _ = rectangle_grid(L, b, h, n)
        sol = solve(make_rectangle_domain(L, b, nx, n))
        vals.append(linear_height_check(sol, "right") if sol.converged else math.nan)
    return vals[0], vals[1]


def crit_linear_height(ctx: _Context) -> CriterionResult:
    s = ctx.scale
    lams = [linear_height_check(g, "right") for g in ctx.solutions]
    cases = [(L, b, s.barrier_dx, s.barrier_ny) for b in (0.5, math.pi / 4, 1.2) for L in s.barrier_Ls]
    cases.append((8.0, math.pi / 4, s.barrier_dx, s.barrier_ny))
    # the wall next to x = L is steep for b > pi/2 and needs the finer pair
    cases.append((8.0, math.pi, s.barrier_dx / 2, 2 * s.barrier_ny - 1))
    pairs = [(L, b, _refinement_pair(L, b, dx, ny)) for L, b, dx, ny in cases]
    lams += [x for _, _, v in pairs for x in v]
    finite = all(math.isfinite(v) for v in lams)
    stable = all(abs(v[1] - v[0]) <= 0.1 * abs(v[1]) for _, _, v in pairs)
    dom = make_rectangle_domain(4.0, 2.0, 129, 65)
    tilted = HeightField.from_function(dom, lambda x, y: cf.evaluate(cf.TiltedGrimReaper(math.pi), x, y))
    lam_t = linear_height_check(tilted, "right")
    exact = abs(lam_t - math.sqrt(3)) <= 1e-8
    ok = finite and stable and exact
    worst = max(abs(v[1] - v[0]) / abs(v[1]) for _, _, v in pairs)
    detail = "; ".join(f"L={L:g},b={b:.4g}: {v[0]:.4f}->{v[1]:.4f}" for L, b, v in pairs)
    return CriterionResult(8, "linear height bound", ok,
                           f"{len(lams)} solves finite={finite}; worst refinement change={worst:.2%} "
                           f"({detail}); tilted={lam_t:.12f}",
                           {"tilted_lambda": lam_t, "worst_change": worst})


CRITERIA = (
    crit_grim_reaper_constant,
    crit_tilt,
    crit_dichotomy,
    crit_barriers,
    crit_residual_orders,
    crit_neck_collapse,
    crit_morse_rado,
    crit_linear_height,
)


def _write_summary(results, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["criterion", "name", "passed", "key", "value"])
        for r in results:
            for k in sorted(r.values):
                w.writerow([r.number, r.name, _g(r.passed), k, _g(r.values[k])])


def _write_artifacts(ctx: _Context) -> None:
    """Representative field and profile files, for the determinism check."""
    s4, _ = ctx.sweep_pi4()
    if s4.solutions:
        write_solution(s4.solutions[0], ctx.path("fields/pi4_L2"))
    ann, _ = ctx.annulus()
    write_solution(ann, ctx.path("fields/annulus"))
    write_profile_csv(catenoid_profile(1.0, 5.0, 1e-2), ctx.path("profiles/catenoid_1.csv"))


def run_all(level: str = "desk", out_dir=None, log=print) -> list[CriterionResult]:
    """Run criteria 1-8 once; artifacts go under ``out_dir`` when given."""
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    out = Path(out_dir) if out_dir is not None else None
    ctx = _Context(level, out)
    results = []
    for fn in CRITERIA:
        t0 = time.perf_counter()
        res = fn(ctx)
        res.seconds = time.perf_counter() - t0
        results.append(res)
        if log:
            log(res.line())
    if out is not None:
        _write_artifacts(ctx)
        _write_summary(results, out / "acceptance.csv")
    return results


def _tree(root: Path) -> list[str]:
    return sorted(str(p.relative_to(root)) for p in root.rglob("*") if p.is_file())


def compare_trees(a: Path, b: Path) -> list[str]:
    """Relative paths that differ (or exist on one side only)."""
    ta, tb = _tree(a), _tree(b)
    diffs = sorted(set(ta) ^ set(tb))
    for rel in sorted(set(ta) & set(tb)):
        if not filecmp.cmp(a / rel, b / rel, shallow=False):
            diffs.append(rel)
    return diffs


def verify(level: str = "desk", out_dir="verify", repeat: int = 2, log=print) -> list[CriterionResult]:
    """Criteria 1-8, repeated ``repeat`` times; criterion 9 compares the outputs byte for byte."""
    out = Path(out_dir)
    runs = []
    for k in range(max(repeat, 1)):
        run_dir = out / f"run{k + 1}"
        if log and k:
            log(f"-- repeat {k + 1} (determinism check)")
        res = run_all(level, run_dir, log=log if k == 0 else None)
        runs.append((run_dir, res))
    results = runs[0][1]
    if repeat >= 2:
        diffs = []
        for run_dir, res in runs[1:]:
            diffs += compare_trees(runs[0][0], run_dir)
            # verdicts must agree too, not just the files
            if [r.passed for r in res] != [r.passed for r in results]:
                diffs.append("verdicts")
        n_files = len(_tree(runs[0][0]))
        det = CriterionResult(9, "determinism", not diffs,
                              f"{repeat} runs, {n_files} files, differing={diffs or 'none'}")
    else:
        det = CriterionResult(9, "determinism", False, "needs repeat >= 2")
    if log:
        log(det.line())
    return results + [det]


def format_table(results) -> str:
    lines = [f"{'#':>2}  {'criterion':<30} {'result':<6} detail"]
    for r in results:
        lines.append(f"{r.number:>2}  {r.name:<30} {'PASS' if r.passed else 'FAIL':<6} {r.detail}")
    return "\n".join(lines)

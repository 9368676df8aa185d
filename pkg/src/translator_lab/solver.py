"""Zero-boundary Dirichlet problems for translating graphs.

The metric family ``e^{-t z} delta`` is followed from t = 0 (minimal
surface equation, exact solution u = 0) to t = 1 (translator equation) by
continuation; each step is a damped Newton solve with an exact Jacobian
obtained by complex-step differentiation over a 3x3 colouring of the 9-point
stencil.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import (
    DomainError,
    GridDomain,
    HeightField,
    Rectangle,
    divergence_residual_block,
    make_annular_domain,
    read_field,
    strong_residual_block,
    write_field,
)

log = logging.getLogger(__name__)

_SCHEMES = {
    "divergence": divergence_residual_block,
    "strong": strong_residual_block,
}
_CSTEP = 1e-30


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    max_newton_iters: int = 30
    damping: float = 1.0
    continuation_steps: int = 10
    linear_tol: float = 1e-10
    divergence_height: float = 1e6
    scheme: str = "divergence"
    linear_solver: str = "direct"
    max_bisections: int = 10

    def __post_init__(self):
        if not self.newton_tol >= 1e-13:
            raise ValueError("newton_tol must be >= 1e-13")
        if self.max_newton_iters < 1 or self.continuation_steps < 1:
            raise ValueError("iteration counts must be positive")
        if not (0 < self.damping <= 1):
            raise ValueError("damping must lie in (0, 1]")
        if not (self.linear_tol > 0 and self.divergence_height > 0):
            raise ValueError("tolerances must be positive")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.linear_solver not in ("direct", "gmres"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")


@dataclass(frozen=True, eq=False)
class Solution:
    field: HeightField
    converged: bool
    residual_norm: float
    t_reached: float
    iterations: int
    center_height: float
    failure: str | None = None
    step_log: tuple = dc_field(default_factory=tuple)

    @property
    def domain(self) -> GridDomain:
        return self.field.domain


class _Layout:
    """Unknown numbering (row-major over Interior nodes) and colour stencils."""

    def __init__(self, dom: GridDomain):
        self.dom = dom
        interior = dom.interior
        self.J, self.I = np.nonzero(interior)
        self.n = len(self.J)
        self.index = np.full(interior.shape, -1, dtype=np.int64)
        self.index[self.J, self.I] = np.arange(self.n)
        self.colour_masks = []
        self.colour_entries = []
        jj, ii = np.indices(interior.shape)
        rows = np.arange(self.n)
        for cj in range(3):
            for ci in range(3):
                self.colour_masks.append(interior & (jj % 3 == cj) & (ii % 3 == ci))
                # the unique neighbour of each row node carrying this colour
                dj = (cj - self.J + 1) % 3 - 1
                di = (ci - self.I + 1) % 3 - 1
                cols = self.index[self.J + dj, self.I + di]
                ok = cols >= 0
                self.colour_entries.append((rows[ok], cols[ok]))

    def residual(self, block_fn, U, t):
        d = self.dom
        R = block_fn(U, d.dx, d.dy, t)
        return R[self.J - 1, self.I - 1]

    def jacobian(self, block_fn, U, t) -> sp.csc_matrix:
        d = self.dom
        rows, cols, vals = [], [], []
        Uc = U.astype(complex)
        for cmask, (r, c) in zip(self.colour_masks, self.colour_entries):
            P = Uc.copy()
            P[cmask] += 1j * _CSTEP
            R = block_fn(P, d.dx, d.dy, t)
            col_vals = R.imag[self.J - 1, self.I - 1] / _CSTEP
            rows.append(r)
            cols.append(c)
            vals.append(col_vals[r])
        return sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n, self.n),
        )


def _linear_solve(A, rhs, cfg: SolverConfig):
    if cfg.linear_solver == "direct":
        return spla.splu(A).solve(rhs)
    ilu = spla.spilu(A, drop_tol=1e-6, fill_factor=20)
    M = spla.LinearOperator(A.shape, ilu.solve)
    x, info = spla.gmres(A, rhs, M=M, rtol=cfg.linear_tol, atol=0.0, restart=100, maxiter=200)
    if info != 0:
        raise np.linalg.LinAlgError(f"GMRES did not reach linear_tol (info={info})")
    return x


class _NewtonFailure(Exception):
    def __init__(self, reason, residual):
        super().__init__(reason)
        self.reason = reason
        self.residual = residual


def _newton(layout: _Layout, block_fn, U, t, cfg: SolverConfig):
    """Damped Newton at fixed t.  Returns (U, residual_norm, iterations)."""
    R = layout.residual(block_fn, U, t)
    rn = float(np.max(np.abs(R))) if layout.n else 0.0
    for it in range(cfg.max_newton_iters + 1):
        if not math.isfinite(rn):
            raise _NewtonFailure("newton", rn)
        if rn <= cfg.newton_tol:
            return U, rn, it
        if it == cfg.max_newton_iters:
            break
        A = layout.jacobian(block_fn, U, t)
        try:
            step = _linear_solve(A, -R, cfg)
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            log.debug("linear solve failed at t=%g: %s", t, exc)
            raise _NewtonFailure("newton", rn) from exc
        lam = cfg.damping
        for _ in range(30):
            V = U.copy()
            V[layout.J, layout.I] += lam * step
            Rv = layout.residual(block_fn, V, t)
            rv = float(np.max(np.abs(Rv)))
            if rv < rn:
                break
            lam *= 0.5
        else:
            raise _NewtonFailure("newton", rn)
        U, R, rn = V, Rv, rv
        if float(np.nanmax(np.abs(U))) > cfg.divergence_height:
            raise _NewtonFailure("height_blowup", rn)
    raise _NewtonFailure("newton", rn)


def _center(U, dom: GridDomain) -> float:
    org = dom.origin_index
    if org is None or not dom.active[org]:
        return math.nan
    return float(U[org])


def solve(domain: GridDomain, cfg: SolverConfig | None = None,
          initial: HeightField | None = None) -> Solution:
    """Solve the translator equation with zero boundary values on ``domain``."""
    cfg = cfg or SolverConfig()
    domain.check_invariants()
    layout = _Layout(domain)
    block_fn = _SCHEMES[cfg.scheme]

    # exterior nodes never enter an Interior stencil; keep them at 0 while
    # iterating and let HeightField restore the NaN sentinel
    U = np.zeros((domain.ny, domain.nx))
    if initial is not None:
        if not initial.domain.same_grid(domain):
            raise DomainError("initial guess lives on a different grid")
        U[domain.interior] = initial.values[domain.interior]

    log_steps = []
    total = 0
    t_done = 0.0
    nominal = 1.0 / cfg.continuation_steps
    dt = nominal
    halvings = 0
    residual = math.nan
    failure = None
    t_next = 0.0
    while True:
        try:
            U_new, residual, its = _newton(layout, block_fn, U, t_next, cfg)
        except _NewtonFailure as exc:
            residual = exc.residual
            total += cfg.max_newton_iters
            if exc.reason == "height_blowup" or t_next == 0.0:
                failure = exc.reason
                break
            halvings += 1
            if halvings > cfg.max_bisections:
                failure = exc.reason
                break
            dt *= 0.5
            t_next = t_done + dt
            log.debug("bisecting continuation step: t=%g dt=%g", t_next, dt)
            continue
        U = U_new
        total += its
        log_steps.append((t_next, its))
        t_done = t_next
        halvings = 0
        if t_done >= 1.0:
            break
        dt = min(2 * dt, nominal)
        t_next = min(t_done + dt, 1.0)
        # land exactly on 1 rather than a hair short of it
        if 1.0 - t_next < 1e-12:
            t_next = 1.0

    converged = failure is None and t_done == 1.0 and residual <= cfg.newton_tol
    return Solution(
        field=HeightField(domain, U),
        converged=converged,
        residual_norm=float(residual),
        t_reached=float(t_done),
        iterations=int(total),
        center_height=_center(U, domain),
        failure=failure,
        step_log=tuple(log_steps),
    )


# ---------------------------------------------------------------------------
# comparison and diagnostics

@dataclass(frozen=True)
class ComparisonReport:
    min_gap: float
    argmin: tuple[float, float]
    violations: tuple
    shared_nodes: int
    tolerance: float

    @property
    def ordered(self) -> bool:
        return not self.violations


def _as_field(obj) -> HeightField:
    return obj.field if isinstance(obj, Solution) else obj


def _offset(lo: GridDomain, hi: GridDomain) -> tuple[int, int]:
    if not (math.isclose(lo.dx, hi.dx, rel_tol=1e-12) and math.isclose(lo.dy, hi.dy, rel_tol=1e-12)):
        raise DomainError("grids are not nested: spacings differ")
    fi = (lo.x0 - hi.x0) / hi.dx
    fj = (lo.y0 - hi.y0) / hi.dy
    oi, oj = int(round(fi)), int(round(fj))
    if abs(fi - oi) > 1e-7 or abs(fj - oj) > 1e-7:
        raise DomainError("grids are not nested: nodes are not aligned")
    if oi < 0 or oj < 0 or oi + lo.nx > hi.nx or oj + lo.ny > hi.ny:
        raise DomainError("grids are not nested: lower grid extends outside the upper grid")
    return oj, oi


def compare_fields(lo, hi, tol: float = 0.0) -> ComparisonReport:
    """min over shared Interior nodes of hi - lo; nodes below -tol are violations."""
    flo, fhi = _as_field(lo), _as_field(hi)
    for obj in (lo, hi):
        if isinstance(obj, Solution) and not obj.converged:
            raise ValueError("compare_fields needs converged solutions")
    dlo, dhi = flo.domain, fhi.domain
    oj, oi = _offset(dlo, dhi)
    sl = (slice(oj, oj + dlo.ny), slice(oi, oi + dlo.nx))
    if (dhi.mask[sl][dlo.active] == 0).any():
        raise DomainError("lower region is not contained in the upper region")
    shared = dlo.interior & dhi.interior[sl]
    gap = fhi.values[sl] - flo.values
    g = np.where(shared, gap, np.inf)
    k = int(np.argmin(g))
    j, i = divmod(k, dlo.nx)
    bad_j, bad_i = np.nonzero(shared & (gap < -tol))
    xs, ys = dlo.x, dlo.y
    return ComparisonReport(
        min_gap=float(g[j, i]),
        argmin=(float(xs[i]), float(ys[j])),
        violations=tuple((float(xs[b]), float(ys[a])) for a, b in zip(bad_j, bad_i)),
        shared_nodes=int(shared.sum()),
        tolerance=tol,
    )


@dataclass(frozen=True)
class NodeIndex:
    i: int
    j: int
    x: float
    y: float


def argmax_node(sol) -> NodeIndex:
    """Discrete argmax; ties go to the node nearest the axes, then smallest (x, y)."""
    f = _as_field(sol)
    d = f.domain
    vals = np.where(d.active, f.values, -np.inf)
    top = np.max(vals)
    jj, ii = np.nonzero(vals == top)
    xs, ys = d.x[ii], d.y[jj]
    order = np.lexsort((ys, xs, np.abs(ys), np.abs(xs)))
    k = order[0]
    return NodeIndex(i=int(ii[k]), j=int(jj[k]), x=float(xs[k]), y=float(ys[k]))


def _require_symmetric(d: GridDomain) -> None:
    x_last = d.x0 + d.dx * (d.nx - 1)
    y_last = d.y0 + d.dy * (d.ny - 1)
    if not (math.isclose(d.x0, -x_last, abs_tol=1e-9 * d.dx) and math.isclose(d.y0, -y_last, abs_tol=1e-9 * d.dy)):
        raise DomainError("grid is not symmetric about the origin")


def asymmetry(sol) -> tuple[float, float]:
    """(max |u(x,y) - u(-x,y)|, max |u(x,y) - u(x,-y)|) over active node pairs."""
    f = _as_field(sol)
    d = f.domain
    _require_symmetric(d)
    U = f.values
    ax = np.abs(U - U[:, ::-1])
    ay = np.abs(U - U[::-1, :])
    return float(np.nanmax(ax)), float(np.nanmax(ay))


def symmetrize_check(sol) -> float:
    return max(asymmetry(sol))


def solve_annulus_family(a: float, b: float, A: float, B: float,
                         cfg: SolverConfig | None = None,
                         nx: int | None = None, ny: int | None = None,
                         h: float | None = None) -> Solution:
    """Zero-boundary graph over the region between the rectangles (a, b) and (A, B).

    Give either ``nx, ny`` or a spacing ``h`` dividing a, b, A and B.
    """
    if nx is None or ny is None:
        if h is None:
            raise ValueError("give nx and ny or a spacing h")
        nx = int(round(2 * A / h)) + 1
        ny = int(round(2 * B / h)) + 1
    dom = make_annular_domain(a, b, A, B, nx, ny)
    return solve(dom, cfg)


# ---------------------------------------------------------------------------
# persistence

META_KEYS = ("converged", "residual_norm", "t_reached", "iterations", "center_height")


def format_meta(sol: Solution) -> str:
    vals = {
        "converged": "true" if sol.converged else "false",
        "residual_norm": "%.17g" % sol.residual_norm,
        "t_reached": "%.17g" % sol.t_reached,
        "iterations": "%d" % sol.iterations,
        "center_height": "%.17g" % sol.center_height,
    }
    lines = [f"{k} = {vals[k]}" for k in META_KEYS]
    if sol.failure:
        lines.append(f"failure = {sol.failure}")
    return "\n".join(lines) + "\n"


def write_solution(sol: Solution, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fpath, mpath = out / "field.txt", out / "meta.txt"
    write_field(sol.field, fpath)
    mpath.write_text(format_meta(sol), encoding="utf-8")
    return fpath, mpath


def read_meta(path) -> dict:
    meta = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    out = dict(meta)
    if "converged" in meta:
        out["converged"] = meta["converged"] == "true"
    for k in ("residual_norm", "t_reached", "center_height"):
        if k in meta:
            out[k] = float(meta[k])
    if "iterations" in meta:
        out["iterations"] = int(meta["iterations"])
    return out


def read_solution(out_dir) -> Solution:
    out = Path(out_dir)
    f = read_field(out / "field.txt")
    m = read_meta(out / "meta.txt")
    return Solution(field=f, converged=m["converged"], residual_norm=m["residual_norm"],
                    t_reached=m["t_reached"], iterations=m["iterations"],
                    center_height=m["center_height"], failure=m.get("failure"))


def rectangle_grid(L: float, b: float, dx: float, ny: int) -> tuple[int, int]:
    """(nx, ny) for Rectangle(L, b) at x-spacing ``dx``; L/dx must be integral."""
    k = L / dx
    if abs(k - round(k)) > 1e-9 * max(k, 1):
        raise DomainError(f"L={L} is not a multiple of dx={dx}")
    return 2 * int(round(k)) + 1, ny


__all__ = [
    "SolverConfig", "Solution", "solve", "compare_fields", "ComparisonReport",
    "argmax_node", "NodeIndex", "symmetrize_check", "asymmetry",
    "solve_annulus_family", "write_solution", "read_solution", "format_meta",
    "read_meta", "rectangle_grid", "Rectangle",
]

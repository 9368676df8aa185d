"""Tangencies of computed surfaces with minimal foliations, and the Morse-Rado count.

Two foliations are supported: vertical planes ``F_v(p) = v . p`` and the
translates of a complete translating graph, ``H = z - h(x, y)``.  A graph
``z = u`` is tangent to a leaf of ``H`` exactly where ``Du = Dh``; those
points are found as grid cells where both components of ``Du - Dh`` change
sign, grouped into clusters, and weighted by the winding number of
``Du - Dh`` around each cluster.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import closed_forms as cf
from .geometry import HeightField
from .ode_solitons import ProfileCurve, RadialProfile
from .solver import Solution

CLUSTER_RADIUS = 3
EDGE_TOLERANCE_DEG = 1.0
# N(H|M) <= 8 for annular graphs is quoted, not derived here
GRAPH_FAMILY_ANNULUS_BOUND = 8


class LeafCoincidenceError(ValueError):
    """The surface is itself (a piece of) a leaf: every point is a tangency."""


@dataclass(frozen=True)
class VerticalPlane:
    v: tuple[float, float]

    def __post_init__(self):
        vx, vy = (float(c) for c in self.v)
        if abs(math.hypot(vx, vy) - 1.0) > 1e-12:
            raise ValueError("v must be a unit horizontal vector")
        object.__setattr__(self, "v", (vx, vy))

    @classmethod
    def at_angle(cls, degrees: float) -> "VerticalPlane":
        a = math.radians(degrees)
        return cls((math.cos(a), math.sin(a)))

    def __call__(self, x, y, z):
        return self.v[0] * np.asarray(x) + self.v[1] * np.asarray(y)


@dataclass(frozen=True, eq=False)
class GraphFamily:
    """Leaves z = h(x, y) + c for a closed form, a rotated closed form, or the bowl."""

    h: object

    def inside(self, x, y) -> np.ndarray:
        x, y = np.asarray(x, float), np.asarray(y, float)
        h = self.h
        if isinstance(h, cf.Rotated):
            return h.inside(x, y)
        if isinstance(h, RadialProfile):
            return np.hypot(x, y) <= h.r[-1]
        return np.abs(y) < h.half_width - cf.EDGE_GUARD

    def height(self, x, y):
        h = self.h
        if isinstance(h, cf.Rotated):
            return h.evaluate(x, y)
        if isinstance(h, RadialProfile):
            return h.height()(x, y)
        return cf.evaluate(h, x, y)

    def __call__(self, x, y, z):
        return np.asarray(z) - self.height(x, y)


FoliationFunction = VerticalPlane | GraphFamily


@dataclass(frozen=True)
class CriticalPoint:
    x: float
    y: float
    z: float
    multiplicity: int
    cells: int = 1
    # extent (xmin, xmax, ymin, ymax) of the cluster's cells
    extent: tuple | None = None

    def contains(self, x: float, y: float) -> bool:
        if self.extent is None:
            return self.x == x and self.y == y
        x0, x1, y0, y1 = self.extent
        return x0 <= x <= x1 and y0 <= y <= y1


@dataclass(frozen=True)
class CriticalPointReport:
    points: tuple
    total: int
    rhs: int | None = None
    q_count: int | None = None
    a_count: int | None = None
    euler_char: int | None = None
    cluster_radius: int = CLUSTER_RADIUS
    overlapping: bool = False
    notes: tuple = dc_field(default_factory=tuple)

    def __post_init__(self):
        if self.total != sum(p.multiplicity for p in self.points):
            raise ValueError("total must equal the sum of multiplicities")
        if self.total < 0:
            raise ValueError("total must be non-negative")

    def has_point_near(self, x: float, y: float, radius: float) -> bool:
        return any(math.hypot(p.x - x, p.y - y) <= radius for p in self.points)

    def cluster_containing(self, x: float, y: float):
        for p in self.points:
            if p.contains(x, y):
                return p
        return None


def _surface(obj) -> HeightField:
    if isinstance(obj, Solution):
        return obj.field
    if isinstance(obj, HeightField):
        return obj
    raise TypeError("expected a Solution or HeightField")


def _fd_gradient(U, dx, dy):
    """Central differences on the inner block, NaN on the rim."""
    gx = np.full(U.shape, np.nan)
    gy = np.full(U.shape, np.nan)
    gx[1:-1, 1:-1] = (U[1:-1, 2:] - U[1:-1, :-2]) / (2 * dx)
    gy[1:-1, 1:-1] = (U[2:, 1:-1] - U[:-2, 1:-1]) / (2 * dy)
    return gx, gy


def _winding(Vx, Vy, j0, j1, i0, i1) -> int | None:
    """Winding number of (Vx, Vy) along the node rectangle [j0, j1] x [i0, i1]."""
    loop = ([(j0, i) for i in range(i0, i1 + 1)]
            + [(j, i1) for j in range(j0 + 1, j1 + 1)]
            + [(j1, i) for i in range(i1 - 1, i0 - 1, -1)]
            + [(j, i0) for j in range(j1 - 1, j0, -1)])
    ang = []
    for j, i in loop:
        vx, vy = Vx[j, i], Vy[j, i]
        if not (math.isfinite(vx) and math.isfinite(vy)) or (vx == 0 and vy == 0):
            return None
        ang.append(math.atan2(vy, vx))
    total = 0.0
    for k in range(len(ang)):
        d = ang[(k + 1) % len(ang)] - ang[k]
        d = (d + math.pi) % (2 * math.pi) - math.pi
        total += d
    return int(round(total / (2 * math.pi)))


def _clusters(cells: np.ndarray, radius: int) -> list[list[tuple[int, int]]]:
    """Group cells whose Chebyshev distance is at most ``radius`` (single linkage)."""
    pts = [tuple(c) for c in cells.tolist()]
    parent = list(range(len(pts)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            if max(abs(pts[a][0] - pts[b][0]), abs(pts[a][1] - pts[b][1])) <= radius:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list] = {}
    for k, p in enumerate(pts):
        groups.setdefault(find(k), []).append(p)
    return [groups[k] for k in sorted(groups)]


def count_critical_points_graph(surface, fol, tol: float = 1e-9,
                                cluster_radius: int = CLUSTER_RADIUS) -> CriticalPointReport:
    """Interior tangencies of the graph ``surface`` with the leaves of ``fol``."""
    f = _surface(surface)
    if isinstance(fol, VerticalPlane):
        # a graph has no vertical tangent planes
        return CriticalPointReport(points=(), total=0, cluster_radius=cluster_radius)
    if not isinstance(fol, GraphFamily):
        raise TypeError("unknown foliation")

    d = f.domain
    X, Y = d.meshgrid()
    notes = []
    inside = fol.inside(X, Y)
    Hv = np.full(X.shape, np.nan)
    Hv[inside] = fol.height(X[inside], Y[inside])
    # both gradients by the same stencil, so identical surfaces cancel exactly
    ux, uy = _fd_gradient(f.values, d.dx, d.dy)
    hx, hy = _fd_gradient(Hv, d.dx, d.dy)
    valid = d.interior & np.isfinite(hx) & np.isfinite(hy)
    if not valid.any():
        raise ValueError("the foliation is undefined on the whole surface")
    if (d.interior & ~valid).any():
        notes.append(f"restricted to the overlap with the leaf domain "
                     f"({int(valid.sum())} of {int(d.interior.sum())} interior nodes)")
    Vx = np.where(valid, ux - hx, np.nan)
    Vy = np.where(valid, uy - hy, np.nan)
    vmax = float(np.max(np.hypot(Vx[valid], Vy[valid])))
    if vmax <= tol:
        raise LeafCoincidenceError(
            f"leaf coincidence: |Du - Dh| <= {tol:g} at every node, the surface is a leaf")

    corners_ok = valid[:-1, :-1] & valid[1:, :-1] & valid[:-1, 1:] & valid[1:, 1:]
    quad = lambda A: np.stack([A[:-1, :-1], A[:-1, 1:], A[1:, :-1], A[1:, 1:]])
    qx, qy = quad(np.nan_to_num(Vx)), quad(np.nan_to_num(Vy))
    change = ((qx.min(0) <= 0) & (qx.max(0) >= 0) & (qy.min(0) <= 0) & (qy.max(0) >= 0))
    cells = np.argwhere(change & corners_ok)

    points = []
    boxes = []
    for group in _clusters(cells, cluster_radius):
        js = [c[0] for c in group]
        is_ = [c[1] for c in group]
        j0, j1 = min(js) - 1, max(js) + 2
        i0, i1 = min(is_) - 1, max(is_) + 2
        w = None
        if j0 >= 0 and i0 >= 0 and j1 < d.ny and i1 < d.nx:
            w = _winding(Vx, Vy, j0, j1, i0, i1)
        if w is None:
            notes.append("winding loop left the valid region; multiplicity set to 1")
            mult = 1
        else:
            mult = abs(w)
        boxes.append((j0, j1, i0, i1))
        # location: the cell minimising |V| at its centre
        best = min(group, key=lambda c: float(np.hypot(qx[:, c[0], c[1]].mean(), qy[:, c[0], c[1]].mean())))
        cj, ci = best
        xs = float(d.x[ci] + d.dx / 2)
        ys = float(d.y[cj] + d.dy / 2)
        zs = float(np.mean(f.values[cj:cj + 2, ci:ci + 2]))
        extent = (float(d.x[min(is_)]), float(d.x[max(is_) + 1]),
                  float(d.y[min(js)]), float(d.y[max(js) + 1]))
        points.append(CriticalPoint(xs, ys, zs, mult, cells=len(group), extent=extent))
    overlapping = any(
        not (a[1] < b[0] or b[1] < a[0] or a[3] < b[2] or b[3] < a[2])
        for k, a in enumerate(boxes) for b in boxes[k + 1:]
    )
    if overlapping:
        notes.append("cluster loops overlap; tighten the cluster radius or refine the grid")
    return CriticalPointReport(points=tuple(points), total=sum(p.multiplicity for p in points),
                               cluster_radius=cluster_radius, overlapping=overlapping,
                               notes=tuple(notes))


def count_critical_points_rotational(c, fol: VerticalPlane) -> CriticalPointReport:
    """Tangencies of a surface of revolution with vertical planes orthogonal to v.

    The normal is horizontal exactly where cos(theta) = 0; each such circle
    meets the planes orthogonal to v at the two points +-r v.
    """
    if not isinstance(fol, VerticalPlane):
        raise TypeError("rotational count is defined for vertical planes")
    if isinstance(c, RadialProfile):
        return CriticalPointReport(points=(), total=0, notes=("graph: no horizontal normals",))
    if not isinstance(c, ProfileCurve):
        raise TypeError("expected a ProfileCurve or RadialProfile")
    cos_t = np.cos(c.theta)
    # theta = pi/2 exactly at the neck; cos rounds to ~6e-17 there
    cos_t[np.abs(c.theta - math.pi / 2) == 0] = 0.0
    circles = []
    for k in range(len(cos_t)):
        if cos_t[k] == 0.0:
            circles.append((float(c.r[k]), float(c.z[k])))
        elif k + 1 < len(cos_t) and cos_t[k] * cos_t[k + 1] < 0:
            s = cos_t[k] / (cos_t[k] - cos_t[k + 1])
            circles.append((float(c.r[k] + s * (c.r[k + 1] - c.r[k])),
                            float(c.z[k] + s * (c.z[k + 1] - c.z[k]))))
    vx, vy = fol.v
    pts = []
    for r, z in circles:
        for sgn in (1, -1):
            pts.append(CriticalPoint(sgn * r * vx + 0.0, sgn * r * vy + 0.0, z, 1))
    return CriticalPointReport(points=tuple(pts), total=len(pts))


# ---------------------------------------------------------------------------
# right-hand side of the Morse-Rado inequality

@dataclass(frozen=True)
class ConvexCurve:
    """A strictly convex closed curve in {z = 0}; only its convexity matters."""
    label: str = "convex"


@dataclass(frozen=True)
class RectangleCurve:
    half_width: float
    half_height: float
    center: tuple[float, float] = (0.0, 0.0)


def _edge_angle_ok(v) -> bool:
    ang = math.degrees(math.atan2(v[1], v[0])) % 90.0
    return min(ang, 90.0 - ang) >= EDGE_TOLERANCE_DEG


def boundary_minima(boundary_desc, fol: VerticalPlane) -> list[tuple[float, float]]:
    """Local minima of F_v on each boundary curve (None location for abstract curves)."""
    out = []
    for curve in boundary_desc:
        if isinstance(curve, ConvexCurve):
            out.append(None)
        elif isinstance(curve, RectangleCurve):
            if not _edge_angle_ok(fol.v):
                raise ValueError("v is within 1 degree of a rectangle edge direction; "
                                 "the minimum set is a segment")
            vx, vy = fol.v
            cx, cy = curve.center
            # corner minimising v . p
            out.append((cx - math.copysign(curve.half_width, vx),
                        cy - math.copysign(curve.half_height, vy)))
        else:
            raise TypeError(f"unsupported boundary curve {curve!r}")
    return out


def morse_rado_rhs(boundary_desc, fol, euler_char: int, a_flags=None) -> int:
    """|Q| - |A| - chi for the boundary curves ``boundary_desc`` in {z = 0}.

    ``a_flags[k]`` says whether the k-th boundary minimum is also a local
    minimum of F on the surface.  For a graph-family foliation over nested
    rectangles the bound 8 is returned as a quoted constant.
    """
    if isinstance(fol, GraphFamily):
        return GRAPH_FAMILY_ANNULUS_BOUND
    if not isinstance(fol, VerticalPlane):
        raise TypeError("unknown foliation")
    q = len(boundary_minima(boundary_desc, fol))
    flags = list(a_flags) if a_flags is not None else [False] * q
    if len(flags) != q:
        raise ValueError("need one A flag per boundary minimum")
    return q - sum(bool(f) for f in flags) - int(euler_char)


def with_rhs(report: CriticalPointReport, boundary_desc, fol, euler_char: int,
             a_flags=None) -> CriticalPointReport:
    rhs = morse_rado_rhs(boundary_desc, fol, euler_char, a_flags)
    q = a = None
    if isinstance(fol, VerticalPlane):
        q = len(boundary_desc)
        a = sum(bool(f) for f in a_flags) if a_flags else 0
    return CriticalPointReport(points=report.points, total=report.total, rhs=rhs, q_count=q,
                               a_count=a, euler_char=euler_char,
                               cluster_radius=report.cluster_radius,
                               overlapping=report.overlapping, notes=report.notes)


def write_report_csv(report: CriticalPointReport, path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "x", "y", "z", "value"])
        for p in report.points:
            w.writerow(["point", "%.17g" % p.x, "%.17g" % p.y, "%.17g" % p.z, p.multiplicity])
        w.writerow(["total", "", "", "", report.total])
        w.writerow(["rhs", "", "", "", "" if report.rhs is None else report.rhs])

"""Grids, masks and the discrete translator operators.

Arrays are stored with shape ``(ny, nx)``: axis 0 runs over y (from ``y0``
upward) and axis 1 over x.  Exterior nodes carry NaN.

Sign convention: a graph ``z = u(x, y)`` is a translator when

    div(Du / W) + 1 / W = 0,        W = sqrt(1 + |Du|^2),

so that ``log cos y`` (the grim reaper) is an exact solution and zero
Dirichlet data produce solutions that are positive inside the domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Union

import numpy as np

SPACING_RTOL = 1e-9


class Tag(IntEnum):
    EXTERIOR = 0
    BOUNDARY = 1
    INTERIOR = 2


class DomainError(ValueError):
    """Invalid grid or region parameters."""


@dataclass(frozen=True)
class Rectangle:
    L: float
    b: float


@dataclass(frozen=True)
class Annulus:
    a: float
    b: float
    A: float
    B: float


Shape = Union[Rectangle, Annulus]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridDomain:
    x0: float
    y0: float
    dx: float
    dy: float
    nx: int
    ny: int
    mask: np.ndarray
    shape_meta: Shape

    def __post_init__(self):
        object.__setattr__(self, "mask", _frozen(self.mask.astype(np.int8)))
        if self.mask.shape != (self.ny, self.nx):
            raise DomainError("mask shape does not match (ny, nx)")

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y)

    @property
    def interior(self) -> np.ndarray:
        return self.mask == Tag.INTERIOR

    @property
    def boundary(self) -> np.ndarray:
        return self.mask == Tag.BOUNDARY

    @property
    def exterior(self) -> np.ndarray:
        return self.mask == Tag.EXTERIOR

    @property
    def active(self) -> np.ndarray:
        return self.mask != Tag.EXTERIOR

    def node_index(self, x: float, y: float) -> tuple[int, int] | None:
        """(j, i) of the node at (x, y), or None when (x, y) is not a node."""
        fi = (x - self.x0) / self.dx
        fj = (y - self.y0) / self.dy
        i, j = int(round(fi)), int(round(fj))
        if abs(fi - i) > 1e-7 or abs(fj - j) > 1e-7:
            return None
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            return None
        return j, i

    @property
    def origin_index(self) -> tuple[int, int] | None:
        return self.node_index(0.0, 0.0)

    def same_grid(self, other: "GridDomain") -> bool:
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and self.x0 == other.x0
            and self.y0 == other.y0
            and self.dx == other.dx
            and self.dy == other.dy
        )

    def check_invariants(self) -> None:
        """Raise DomainError if an interior node touches the exterior."""
        m = self.mask
        if (m[0, :] == Tag.INTERIOR).any() or (m[-1, :] == Tag.INTERIOR).any():
            raise DomainError("interior node on the grid edge")
        if (m[:, 0] == Tag.INTERIOR).any() or (m[:, -1] == Tag.INTERIOR).any():
            raise DomainError("interior node on the grid edge")
        inner = m[1:-1, 1:-1] == Tag.INTERIOR
        for dj in (-1, 0, 1):
            for di in (-1, 0, 1):
                nb = m[1 + dj : m.shape[0] - 1 + dj, 1 + di : m.shape[1] - 1 + di]
                if (inner & (nb == Tag.EXTERIOR)).any():
                    raise DomainError("interior node has an exterior neighbour")


def make_rectangle_domain(L: float, b: float, nx: int, ny: int) -> GridDomain:
    """Grid on [-L, L] x [-b, b] with the origin as a node."""
    if not (L > 0 and b > 0):
        raise DomainError(f"L and b must be positive (got L={L}, b={b})")
    if nx < 5 or ny < 5:
        raise DomainError("nx and ny must be at least 5")
    if nx % 2 == 0 or ny % 2 == 0:
        raise DomainError(
            f"nx and ny must be odd so that (0, 0) is a node (got nx={nx}, ny={ny})"
        )
    dx, dy = 2 * L / (nx - 1), 2 * b / (ny - 1)
    shape = Rectangle(L, b)
    return GridDomain(x0=-L, y0=-b, dx=dx, dy=dy, nx=nx, ny=ny,
                      mask=_mask_for(shape, -L, -b, dx, dy, nx, ny), shape_meta=shape)


def _is_multiple(length: float, h: float) -> bool:
    q = length / h
    return abs(q - round(q)) <= SPACING_RTOL * max(1.0, q)


def _smallest_compatible(inner: float, outer: float, limit: int = 100000) -> int | None:
    # nx - 1 = 2k; need inner / (outer / k) integral
    for k in range(2, limit):
        if _is_multiple(inner, outer / k):
            return 2 * k + 1
    return None


def make_annular_domain(a: float, b: float, A: float, B: float,
                        nx: int, ny: int) -> GridDomain:
    """Grid on [-A, A] x [-B, B] minus the open rectangle (-a, a) x (-b, b).

    Both rectangle traces must fall on grid lines.
    """
    if min(a, b, A, B) <= 0:
        raise DomainError("all rectangle half-widths must be positive")
    if not (a < A and b < B):
        raise DomainError(f"rectangles not nested: need a < A and b < B (a={a}, A={A}, b={b}, B={B})")
    if nx < 5 or ny < 5 or nx % 2 == 0 or ny % 2 == 0:
        raise DomainError("nx and ny must be odd and at least 5")
    dx = 2 * A / (nx - 1)
    dy = 2 * B / (ny - 1)
    bad = []
    if not _is_multiple(a, dx):
        bad.append(("nx", nx, _smallest_compatible(a, A)))
    if not _is_multiple(b, dy):
        bad.append(("ny", ny, _smallest_compatible(b, B)))
    if bad:
        parts = []
        for name, got, best in bad:
            hint = f"smallest compatible {name} is {best}" if best else f"no compatible {name} found"
            parts.append(f"{name}={got} does not align the inner rectangle with the grid; {hint}")
        raise DomainError("; ".join(parts))

    shape = Annulus(a, b, A, B)
    mask = _mask_for(shape, -A, -B, dx, dy, nx, ny)
    return GridDomain(x0=-A, y0=-B, dx=dx, dy=dy, nx=nx, ny=ny,
                      mask=mask, shape_meta=shape)


def window_domain(dom: GridDomain, W: float, Y: float) -> tuple[GridDomain, tuple[slice, slice]]:
    """Sub-grid of ``dom`` covering [-W, W] x [-Y, Y], snapped inward to nodes.

    Returns the window (as a Rectangle grid) and the (rows, cols) slices that
    extract it from arrays on ``dom``.
    """
    kx = int(math.floor(W / dom.dx + 1e-9))
    ky = int(math.floor(Y / dom.dy + 1e-9))
    org = dom.origin_index
    if org is None:
        raise DomainError("window requires a grid containing the origin")
    j0, i0 = org
    if kx < 2 or ky < 2 or i0 - kx < 0 or j0 - ky < 0 or i0 + kx >= dom.nx or j0 + ky >= dom.ny:
        raise DomainError("window does not fit inside the grid")
    rows = slice(j0 - ky, j0 + ky + 1)
    cols = slice(i0 - kx, i0 + kx + 1)
    Wn, Yn = kx * dom.dx, ky * dom.dy
    nx, ny = 2 * kx + 1, 2 * ky + 1
    shape = Rectangle(Wn, Yn)
    win = GridDomain(x0=-Wn, y0=-Yn, dx=dom.dx, dy=dom.dy, nx=nx, ny=ny,
                     mask=_mask_for(shape, -Wn, -Yn, dom.dx, dom.dy, nx, ny), shape_meta=shape)
    return win, (rows, cols)


@dataclass(frozen=True, eq=False)
class HeightField:
    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.domain.ny, self.domain.nx):
            raise DomainError("values shape does not match the domain")
        v[self.domain.exterior] = np.nan
        if not np.isfinite(v[self.domain.active]).all():
            raise DomainError("height field must be finite on interior and boundary nodes")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def boundary_values(self) -> np.ndarray:
        return self.values[self.domain.boundary]

    @classmethod
    def zeros(cls, domain: GridDomain) -> "HeightField":
        return cls(domain, np.zeros((domain.ny, domain.nx)))

    @classmethod
    def from_function(cls, domain: GridDomain, fn) -> "HeightField":
        X, Y = domain.meshgrid()
        vals = np.full(X.shape, np.nan)
        act = domain.active
        vals[act] = fn(X[act], Y[act])
        return cls(domain, vals)

    def with_values(self, values: np.ndarray) -> "HeightField":
        return HeightField(self.domain, values)

    def __add__(self, c: float) -> "HeightField":
        return HeightField(self.domain, self.values + c)

    def __sub__(self, c: float) -> "HeightField":
        return HeightField(self.domain, self.values - c)


# ---------------------------------------------------------------------------
# Discrete operators.  Each works on a full (ny, nx) array (real or complex)
# and returns values on the inner block [1:-1, 1:-1]; callers select the
# Interior nodes from that block.

def _central(U, dx, dy):
    ux = (U[1:-1, 2:] - U[1:-1, :-2]) / (2 * dx)
    uy = (U[2:, 1:-1] - U[:-2, 1:-1]) / (2 * dy)
    return ux, uy


def strong_residual_block(U, dx, dy, t):
    ux, uy = _central(U, dx, dy)
    uxx = (U[1:-1, 2:] - 2 * U[1:-1, 1:-1] + U[1:-1, :-2]) / dx**2
    uyy = (U[2:, 1:-1] - 2 * U[1:-1, 1:-1] + U[:-2, 1:-1]) / dy**2
    uxy = (U[2:, 2:] - U[2:, :-2] - U[:-2, 2:] + U[:-2, :-2]) / (4 * dx * dy)
    return ((1 + uy**2) * uxx - 2 * ux * uy * uxy + (1 + ux**2) * uyy
            + t * (1 + ux**2 + uy**2))


def divergence_residual_block(U, dx, dy, t):
    # fluxes Du/W on the cell faces, cross derivatives averaged over the
    # two adjacent columns/rows
    px = (U[1:-1, 1:] - U[1:-1, :-1]) / dx
    qx = (U[2:, 1:] + U[2:, :-1] - U[:-2, 1:] - U[:-2, :-1]) / (4 * dy)
    fx = px / np.sqrt(1 + px**2 + qx**2)
    qy = (U[1:, 1:-1] - U[:-1, 1:-1]) / dy
    py = (U[1:, 2:] + U[:-1, 2:] - U[1:, :-2] - U[:-1, :-2]) / (4 * dx)
    fy = qy / np.sqrt(1 + py**2 + qy**2)
    ux, uy = _central(U, dx, dy)
    w = np.sqrt(1 + ux**2 + uy**2)
    return (fx[:, 1:] - fx[:, :-1]) / dx + (fy[1:, :] - fy[:-1, :]) / dy + t / w


def _interior_values(f: HeightField, block) -> np.ndarray:
    res = np.full(f.values.shape, np.nan)
    res[1:-1, 1:-1] = block
    out = res[f.domain.interior]
    if not np.isfinite(out).all():
        raise DomainError("stencil touched an exterior node")
    return out


def translator_residual(f: HeightField, t: float = 1.0) -> np.ndarray:
    """Strong-form residual at every Interior node (flattened, row-major).

    ``(1+u_y^2) u_xx - 2 u_x u_y u_xy + (1+u_x^2) u_yy + t (1+|Du|^2)``
    with second-order central differences.  ``t = 1`` is the translator
    equation, ``t = 0`` the minimal surface equation.
    """
    d = f.domain
    return _interior_values(f, strong_residual_block(f.values, d.dx, d.dy, t))


def divergence_residual(f: HeightField, t: float = 1.0) -> np.ndarray:
    """Conservative residual ``div(Du/W) + t/W`` at every Interior node."""
    d = f.domain
    return _interior_values(f, divergence_residual_block(f.values, d.dx, d.dy, t))


def residual_field(f: HeightField, t: float = 1.0, scheme: str = "strong") -> np.ndarray:
    """Residual scattered back to a (ny, nx) array, NaN off the Interior."""
    fn = translator_residual if scheme == "strong" else divergence_residual
    out = np.full(f.values.shape, np.nan)
    out[f.domain.interior] = fn(f, t)
    return out


def gradient(f: HeightField) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient on Interior nodes; NaN elsewhere."""
    d = f.domain
    gx = np.full(f.values.shape, np.nan)
    gy = np.full(f.values.shape, np.nan)
    ux, uy = _central(f.values, d.dx, d.dy)
    gx[1:-1, 1:-1] = ux
    gy[1:-1, 1:-1] = uy
    gx[~d.interior] = np.nan
    gy[~d.interior] = np.nan
    return gx, gy


def ilmanen_area(f: HeightField) -> float:
    """Area of the graph in the metric ``e^{-z} delta``.

    Midpoint rule over cells whose four corners are Interior or Boundary.
    """
    d = f.domain
    U = f.values
    act = d.active
    cell_ok = act[:-1, :-1] & act[1:, :-1] & act[:-1, 1:] & act[1:, 1:]
    um = 0.25 * (U[:-1, :-1] + U[1:, :-1] + U[:-1, 1:] + U[1:, 1:])
    ux = 0.5 * ((U[:-1, 1:] - U[:-1, :-1]) + (U[1:, 1:] - U[1:, :-1])) / d.dx
    uy = 0.5 * ((U[1:, :-1] - U[:-1, :-1]) + (U[1:, 1:] - U[:-1, 1:])) / d.dy
    dens = np.exp(-um[cell_ok]) * np.sqrt(1 + ux[cell_ok] ** 2 + uy[cell_ok] ** 2)
    # fixed-order sequential reduction
    return math.fsum(dens.tolist()) * d.dx * d.dy


# ---------------------------------------------------------------------------
# translator-field v1

FIELD_HEADER = "# translator-field v1"


def _fmt(v: float) -> str:
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


def _shape_line(shape: Shape) -> str:
    if isinstance(shape, Rectangle):
        return "shape Rectangle %s %s" % (_fmt(shape.L), _fmt(shape.b))
    return "shape Annulus %s %s %s %s" % tuple(_fmt(v) for v in (shape.a, shape.b, shape.A, shape.B))


def format_field(f: HeightField) -> str:
    d = f.domain
    lines = [
        FIELD_HEADER,
        "%d %d %s %s %s %s" % (d.nx, d.ny, _fmt(d.x0), _fmt(d.y0), _fmt(d.dx), _fmt(d.dy)),
        _shape_line(d.shape_meta),
    ]
    for row in f.values:
        lines.append(" ".join(_fmt(v) for v in row.tolist()))
    return "\n".join(lines) + "\n"


def write_field(f: HeightField, path) -> None:
    Path(path).write_text(format_field(f), encoding="utf-8")


def _mask_for(shape: Shape, x0, y0, dx, dy, nx, ny) -> np.ndarray:
    if isinstance(shape, Rectangle):
        mask = np.full((ny, nx), Tag.INTERIOR, dtype=np.int8)
        mask[0, :] = mask[-1, :] = Tag.BOUNDARY
        mask[:, 0] = mask[:, -1] = Tag.BOUNDARY
        return mask
    I = np.rint((x0 + dx * np.arange(nx)) / dx).astype(np.int64)[None, :]
    J = np.rint((y0 + dy * np.arange(ny)) / dy).astype(np.int64)[:, None]
    ia, jb = int(round(shape.a / dx)), int(round(shape.b / dy))
    iA, jB = (nx - 1) // 2, (ny - 1) // 2
    mask = np.full((ny, nx), Tag.INTERIOR, dtype=np.int8)
    inside = (np.abs(I) < ia) & (np.abs(J) < jb)
    on_inner = (np.abs(I) <= ia) & (np.abs(J) <= jb) & ~inside
    on_outer = (np.abs(I) == iA) | (np.abs(J) == jB)
    mask[inside] = Tag.EXTERIOR
    mask[on_inner | on_outer] = Tag.BOUNDARY
    return mask


def parse_field(text: str) -> HeightField:
    lines = text.splitlines()
    if not lines or lines[0].strip() != FIELD_HEADER:
        raise ValueError("not a translator-field v1 file")
    head = lines[1].split()
    nx, ny = int(head[0]), int(head[1])
    x0, y0, dx, dy = (float(v) for v in head[2:6])
    sh = lines[2].split()
    if sh[0] != "shape":
        raise ValueError("missing shape line")
    if sh[1] == "Rectangle":
        shape: Shape = Rectangle(float(sh[2]), float(sh[3]))
    elif sh[1] == "Annulus":
        shape = Annulus(*(float(v) for v in sh[2:6]))
    else:
        raise ValueError(f"unknown shape {sh[1]!r}")
    rows = [ln for ln in lines[3:] if ln.strip()]
    if len(rows) != ny:
        raise ValueError(f"expected {ny} rows, found {len(rows)}")
    vals = np.array([[float(v) for v in ln.split()] for ln in rows])
    if vals.shape != (ny, nx):
        raise ValueError("row length does not match nx")
    dom = GridDomain(x0=x0, y0=y0, dx=dx, dy=dy, nx=nx, ny=ny,
                     mask=_mask_for(shape, x0, y0, dx, dy, nx, ny), shape_meta=shape)
    return HeightField(dom, vals)


def read_field(path) -> HeightField:
    return parse_field(Path(path).read_text(encoding="utf-8"))

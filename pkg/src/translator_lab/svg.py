"""Self-contained SVG output: marching-squares contour maps and line plots.

Coordinates are printed with a fixed number of decimals so identical inputs
give byte-identical files.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

WIDTH, HEIGHT, PAD = 640, 400, 48
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _f(v: float) -> str:
    return f"{v:.3f}"


class _Frame:
    """Maps data coordinates into the fixed viewport."""

    def __init__(self, xmin, xmax, ymin, ymax, equal=False):
        if xmax <= xmin:
            xmax = xmin + 1.0
        if ymax <= ymin:
            ymax = ymin + 1.0
        self.xmin, self.xmax, self.ymin, self.ymax = xmin, xmax, ymin, ymax
        w, h = WIDTH - 2 * PAD, HEIGHT - 2 * PAD
        self.sx = w / (xmax - xmin)
        self.sy = h / (ymax - ymin)
        if equal:
            self.sx = self.sy = min(self.sx, self.sy)

    def px(self, x):
        return PAD + (x - self.xmin) * self.sx

    def py(self, y):
        return HEIGHT - PAD - (y - self.ymin) * self.sy


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{_escape(title)}</text>',
    ]


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _axes(fr: _Frame, xlabel: str, ylabel: str) -> list[str]:
    x0, x1 = fr.px(fr.xmin), fr.px(fr.xmax)
    y0, y1 = fr.py(fr.ymin), fr.py(fr.ymax)
    out = [
        f'<rect x="{_f(x0)}" y="{_f(y1)}" width="{_f(x1 - x0)}" height="{_f(y0 - y1)}" '
        'fill="none" stroke="black" stroke-width="1"/>',
    ]
    for v, x in ((fr.xmin, x0), (fr.xmax, x1)):
        out.append(f'<text x="{_f(x)}" y="{_f(y0 + 16)}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{v:.4g}</text>')
    for v, y in ((fr.ymin, y0), (fr.ymax, y1)):
        out.append(f'<text x="{_f(x0 - 4)}" y="{_f(y + 4)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{v:.4g}</text>')
    out.append(f'<text x="{_f((x0 + x1) / 2)}" y="{HEIGHT - 8}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{_escape(xlabel)}</text>')
    out.append(f'<text x="12" y="{_f((y0 + y1) / 2)}" font-family="sans-serif" '
               f'font-size="12">{_escape(ylabel)}</text>')
    return out


def line_plot(series, title="", xlabel="x", ylabel="y") -> str:
    """``series`` is a list of (label, xs, ys[, dashed]) tuples."""
    xs_all = np.concatenate([np.asarray(s[1], float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], float) for s in series])
    ok = np.isfinite(xs_all) & np.isfinite(ys_all)
    fr = _Frame(xs_all[ok].min(), xs_all[ok].max(), ys_all[ok].min(), ys_all[ok].max())
    out = _header(title) + _axes(fr, xlabel, ylabel)
    for k, s in enumerate(series):
        label, xs, ys = s[0], np.asarray(s[1], float), np.asarray(s[2], float)
        dashed = len(s) > 3 and s[3]
        colour = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_f(fr.px(x))},{_f(fr.py(y))}"
                       for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y))
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" '
                   f'stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{WIDTH - PAD - 4}" y="{PAD + 14 * (k + 1)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11" fill="{colour}">{_escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# corner order: (0,0) (1,0) (1,1) (0,1) in (i, j); edges 0 bottom, 1 right, 2 top, 3 left
_SEGMENTS = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 5: [(3, 2), (0, 1)],
    6: [(0, 2)], 7: [(3, 2)], 8: [(2, 3)], 9: [(0, 2)], 10: [(0, 3), (1, 2)],
    11: [(1, 2)], 12: [(1, 3)], 13: [(0, 1)], 14: [(3, 0)],
}


def contour_segments(x, y, Z, level):
    """Marching-squares segments of {Z = level}; cells with a NaN corner are skipped."""
    segs = []
    ny, nx = Z.shape
    for j in range(ny - 1):
        for i in range(nx - 1):
            c = (Z[j, i], Z[j, i + 1], Z[j + 1, i + 1], Z[j + 1, i])
            if any(math.isnan(v) for v in c):
                continue
            code = sum(1 << k for k, v in enumerate(c) if v > level)
            if code in (0, 15):
                continue
            px = (x[i], x[i + 1], x[i + 1], x[i])
            py = (y[j], y[j], y[j + 1], y[j + 1])

            def edge_point(e):
                a, b = e, (e + 1) % 4
                za, zb = c[a], c[b]
                s = 0.5 if zb == za else (level - za) / (zb - za)
                return px[a] + s * (px[b] - px[a]), py[a] + s * (py[b] - py[a])

            for e1, e2 in _SEGMENTS[code]:
                segs.append((edge_point(e1), edge_point(e2)))
    return segs


def contour_plot(field, levels=10, title="", points=()) -> str:
    """Contour map of a HeightField with optional marked points [(x, y, label)]."""
    d = field.domain
    x, y, Z = d.x, d.y, field.values
    zmin, zmax = float(np.nanmin(Z)), float(np.nanmax(Z))
    if isinstance(levels, int):
        if zmax > zmin:
            levels = [zmin + (zmax - zmin) * (k + 0.5) / levels for k in range(levels)]
        else:
            levels = []
    fr = _Frame(float(x[0]), float(x[-1]), float(y[0]), float(y[-1]), equal=True)
    out = _header(title) + _axes(fr, "x", "y")
    for k, lev in enumerate(levels):
        frac = 0.0 if zmax == zmin else (lev - zmin) / (zmax - zmin)
        colour = f"rgb({int(255 * frac)},0,{int(255 * (1 - frac))})"
        parts = [f"M{_f(fr.px(a[0]))},{_f(fr.py(a[1]))}L{_f(fr.px(b[0]))},{_f(fr.py(b[1]))}"
                 for a, b in contour_segments(x, y, Z, lev)]
        if parts:
            out.append(f'<path d="{"".join(parts)}" fill="none" stroke="{colour}" stroke-width="1"/>')
    for px_, py_, label in points:
        out.append(f'<circle cx="{_f(fr.px(px_))}" cy="{_f(fr.py(py_))}" r="4" fill="none" '
                   'stroke="black" stroke-width="1.5"/>')
        if label:
            out.append(f'<text x="{_f(fr.px(px_) + 6)}" y="{_f(fr.py(py_) - 6)}" '
                       f'font-family="sans-serif" font-size="11">{_escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(text: str, path) -> None:
    Path(path).write_text(text, encoding="utf-8")

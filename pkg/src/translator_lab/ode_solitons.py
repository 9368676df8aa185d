"""Rotationally symmetric translators: the bowl soliton and translating catenoids.

The bowl is stored as a depth function ``u(r) >= 0`` solving

    u'' = (1 + u'^2) (1 - u'/r),    u(0) = u'(0) = 0,

and the translating graph is ``z = -u(r)`` (it opens downward, like the
grim reaper ``log cos y``).  Catenoid profiles are arclength curves
``(r(s), z(s))`` with tangent angle ``theta``:

    r' = cos(theta),  z' = sin(theta),  theta' = -sin(theta)/r - cos(theta),

started at the neck ``r = lam, theta = pi/2`` and integrated in both
directions.  The unit normal is ``(-sin(theta), cos(theta))`` in the (r, z)
plane, horizontal at the neck.  Flipping it changes the sign of both the
mean curvature and ``e3 . nu``, so the equation does not depend on the choice.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline

# RK4 real-axis stability bound is about 2.78; keep a margin
STABILITY_LIMIT = 2.5


class ProfileError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class RadialProfile:
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray

    def height(self):
        """Callable z(x, y) = -u(sqrt(x^2 + y^2)) on the sampled range."""
        spline = CubicHermiteSpline(self.r, self.u, self.du)
        r_max = self.r[-1]

        def z(x, y):
            rr = np.hypot(x, y)
            if np.any(rr > r_max):
                raise ValueError("point outside the sampled bowl profile")
            return -spline(rr)

        return z

    def depth(self, rr):
        return CubicHermiteSpline(self.r, self.u, self.du)(rr)

    def slope(self, rr):
        """u'(r), interpolated."""
        return CubicHermiteSpline(self.r, self.u, self.du).derivative()(rr)


@dataclass(frozen=True, eq=False)
class ProfileCurve:
    s: np.ndarray
    r: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    lam: float

    @property
    def neck_index(self) -> int:
        return int(np.flatnonzero(self.s == 0.0)[0])

    def wing(self, which: str) -> tuple[np.ndarray, np.ndarray]:
        """(r, z) of one wing ordered outward from the neck.

        ``upper`` is s >= 0, ``lower`` is s <= 0.
        """
        k = self.neck_index
        if which == "upper":
            return self.r[k:], self.z[k:]
        if which == "lower":
            return self.r[k::-1], self.z[k::-1]
        raise ValueError("which must be 'upper' or 'lower'")


def _rk4(f, y0, t0, h, n, guard=None):
    ys = np.empty((n + 1, len(y0)))
    ys[0] = y0
    y = list(y0)
    t = t0
    for k in range(n):
        k1 = f(t, y)
        k2 = f(t + h / 2, [a + h / 2 * b for a, b in zip(y, k1)])
        k3 = f(t + h / 2, [a + h / 2 * b for a, b in zip(y, k2)])
        k4 = f(t + h, [a + h * b for a, b in zip(y, k3)])
        y = [a + h / 6 * (p + 2 * q + 2 * w + v) for a, p, q, w, v in zip(y, k1, k2, k3, k4)]
        t = t0 + (k + 1) * h
        if guard is not None:
            guard(t, y)
        ys[k + 1] = y
    return ys


def _bowl_rhs(r, y):
    p = y[1]
    if r == 0.0:
        return [p, 0.5]
    return [p, (1 + p * p) * (1 - p / r)]


def bowl_profile(r_max: float, h: float) -> RadialProfile:
    """Integrate the bowl ODE on [0, r_max] with fixed-step RK4.

    The first step uses the series u = r^2/4 + r^4/128 to step off the
    removable singularity at r = 0.
    """
    if not (r_max > 0 and h > 0):
        raise ValueError("r_max and h must be positive")
    # the linearisation in u' has eigenvalue ~ -r for large r
    if h * max(r_max, 1.0) > STABILITY_LIMIT:
        raise ProfileError(
            f"step h={h} too large for stability up to r_max={r_max}; "
            f"need h <= {STABILITY_LIMIT / max(r_max, 1.0):.3g}"
        )
    n = int(math.ceil(r_max / h - 1e-9))
    if n < 2:
        raise ValueError("r_max must cover at least two steps")
    h1 = r_max / n
    r1 = h1
    y1 = [r1**2 / 4 + r1**4 / 128, r1 / 2 + r1**3 / 32]
    rest = _rk4(_bowl_rhs, y1, r1, h1, n - 1)
    r = h1 * np.arange(n + 1)
    r[-1] = r_max
    u = np.concatenate([[0.0], rest[:, 0]])
    du = np.concatenate([[0.0], rest[:, 1]])
    return RadialProfile(r=r, u=u, du=du)


def _catenoid_rhs(s, y):
    r, z, th = y
    st, ct = math.sin(th), math.cos(th)
    return [ct, st, -st / r - ct]


def catenoid_profile(lam: float, s_max: float, h: float) -> ProfileCurve:
    """Profile of the translating catenoid with neck radius ``lam`` on [-s_max, s_max]."""
    if not (lam > 0 and s_max > 0 and h > 0):
        raise ValueError("lam, s_max and h must be positive")
    n = int(math.ceil(s_max / h - 1e-9))
    hs = s_max / n
    floor = 1e-3 * lam

    def guard(s, y):
        if y[0] < floor:
            raise ProfileError(
                f"profile reached the axis (r={y[0]:.3g} at s={s:.6g}); "
                "check the orientation of the normal"
            )

    y0 = [lam, 0.0, math.pi / 2]
    fwd = _rk4(_catenoid_rhs, y0, 0.0, hs, n, guard)
    bwd = _rk4(_catenoid_rhs, y0, 0.0, -hs, n, guard)
    s = hs * np.arange(-n, n + 1, dtype=float)
    s[0], s[-1] = -s_max, s_max
    data = np.concatenate([bwd[:0:-1], fwd])
    return ProfileCurve(s=s, r=data[:, 0], z=data[:, 1], theta=data[:, 2], lam=lam)


def necksize_rotational(c) -> float:
    """Distance from the axis to the surface: min r over the profile."""
    if isinstance(c, RadialProfile):
        return float(c.r[0])
    return float(np.min(c.r))


# ---------------------------------------------------------------------------
# residual oracles

def bowl_ode_defect(p: RadialProfile, stride: int = 1, r_min: float = 0.05) -> np.ndarray:
    """ODE defect with u'' taken by central differences of the sampled u'."""
    du = p.du[::stride]
    r = p.r[::stride]
    if len(r) < 3:
        raise ValueError("stride too large")
    rr = r[1:-1]
    d2 = (du[2:] - du[:-2]) / (r[2:] - r[:-2])
    d1 = du[1:-1]
    defect = d2 - (1 + d1**2) * (1 - d1 / rr)
    return defect[rr >= r_min]


def catenoid_curvature_defect(c: ProfileCurve, stride: int = 1) -> np.ndarray:
    """``H + e3 . nu`` along the profile from finite-difference curvature.

    Only the sampled (r, z) are used; theta is not consulted.
    """
    s, r, z = c.s[::stride], c.r[::stride], c.z[::stride]
    h1 = s[1:-1] - s[:-2]
    h2 = s[2:] - s[1:-1]
    if not np.allclose(h1, h2, rtol=1e-9):
        raise ValueError("non-uniform sampling")
    hh = h1
    rp = (r[2:] - r[:-2]) / (2 * hh)
    zp = (z[2:] - z[:-2]) / (2 * hh)
    rpp = (r[2:] - 2 * r[1:-1] + r[:-2]) / hh**2
    zpp = (z[2:] - 2 * z[1:-1] + z[:-2]) / hh**2
    speed = np.hypot(rp, zp)
    kappa = (rp * zpp - zp * rpp) / speed**3
    sin_t = zp / speed
    cos_t = rp / speed
    H = kappa + sin_t / r[1:-1]
    return H + cos_t


# ---------------------------------------------------------------------------
# CSV

def _g(v: float) -> str:
    return "%.17g" % v


def write_profile_csv(c: ProfileCurve, path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", "r", "z", "theta"])
        for row in zip(c.s.tolist(), c.r.tolist(), c.z.tolist(), c.theta.tolist()):
            w.writerow([_g(v) for v in row])


def write_bowl_csv(p: RadialProfile, path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "u", "du"])
        for row in zip(p.r.tolist(), p.u.tolist(), p.du.tolist()):
            w.writerow([_g(v) for v in row])


def read_profile_csv(path, lam: float) -> ProfileCurve:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return ProfileCurve(s=data[:, 0], r=data[:, 1], z=data[:, 2], theta=data[:, 3], lam=lam)

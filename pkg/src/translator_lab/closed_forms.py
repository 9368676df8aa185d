"""Closed-form translating graphs: grim reaper and its shifted/tilted variants."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# samples closer than this to the strip edge are rejected
EDGE_GUARD = 1e-12


class StripDomainError(ValueError):
    pass


@dataclass(frozen=True)
class GrimReaper:
    """z = log cos y on |y| < pi/2."""

    @property
    def half_width(self) -> float:
        return math.pi / 2


@dataclass(frozen=True)
class ShiftedGrimReaper:
    """z = log cos y - log cos b; vanishes on y = +-b, requires 0 < b < pi/2."""

    b: float

    def __post_init__(self):
        if not (0 < self.b < math.pi / 2):
            raise StripDomainError(f"ShiftedGrimReaper needs 0 < b < pi/2 (got {self.b})")

    @property
    def half_width(self) -> float:
        return math.pi / 2


@dataclass(frozen=True)
class TiltedGrimReaper:
    """Dilated grim reaper over |y| < b tilted along x with slope sign * tilt_slope(b)."""

    b: float
    sign: int = 1

    def __post_init__(self):
        if self.b < math.pi / 2:
            raise StripDomainError(f"TiltedGrimReaper needs b >= pi/2 (got {self.b})")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @property
    def half_width(self) -> float:
        return self.b


ClosedFormFamily = GrimReaper | ShiftedGrimReaper | TiltedGrimReaper


def tilt_slope(b: float) -> float:
    """Slope sqrt((2b/pi)^2 - 1) of the tilted grim reaper over |y| < b."""
    if b < math.pi / 2:
        raise StripDomainError(
            f"no complete translating graph over a strip of half-width {b} < pi/2"
        )
    # clamp: (2b/pi)^2 may round to just below 1 at b = pi/2
    return math.sqrt(max((2 * b / math.pi) ** 2 - 1.0, 0.0))


def _check_strip(y, half_width):
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(y) >= half_width - EDGE_GUARD):
        raise StripDomainError(f"y outside the open strip |y| < {half_width}")
    return y


def evaluate(fam: ClosedFormFamily, x, y):
    """Height of ``fam`` at (x, y); arrays broadcast."""
    x = np.asarray(x, dtype=float)
    y = _check_strip(y, fam.half_width)
    if isinstance(fam, GrimReaper):
        z = np.log(np.cos(y)) + 0.0 * x
    elif isinstance(fam, ShiftedGrimReaper):
        z = np.log(np.cos(y)) - math.log(math.cos(fam.b)) + 0.0 * x
    else:
        k = 2 * fam.b / math.pi
        z = k * k * np.log(np.cos(y / k)) + fam.sign * tilt_slope(fam.b) * x
    return z if z.ndim else float(z)


def gradient(fam: ClosedFormFamily, x, y):
    """Exact (dz/dx, dz/dy) of ``fam``."""
    x = np.asarray(x, dtype=float)
    y = _check_strip(y, fam.half_width)
    if isinstance(fam, TiltedGrimReaper):
        k = 2 * fam.b / math.pi
        gx = fam.sign * tilt_slope(fam.b) + 0.0 * x + 0.0 * y
        gy = -k * np.tan(y / k) + 0.0 * x
    else:
        gx = 0.0 * x + 0.0 * y
        gy = -np.tan(y) + 0.0 * x
    return gx, gy


@dataclass(frozen=True)
class Rotated:
    """A closed form rotated by ``angle`` about the z-axis and shifted in height."""

    base: ClosedFormFamily
    angle: float = 0.0
    shift: float = 0.0

    @property
    def half_width(self) -> float:
        return self.base.half_width

    def _local(self, x, y):
        c, s = math.cos(self.angle), math.sin(self.angle)
        return c * x + s * y, -s * x + c * y

    def inside(self, x, y, margin: float = 0.0):
        _, yl = self._local(np.asarray(x, float), np.asarray(y, float))
        return np.abs(yl) < self.half_width - max(margin, EDGE_GUARD)

    def evaluate(self, x, y):
        xl, yl = self._local(np.asarray(x, float), np.asarray(y, float))
        return evaluate(self.base, xl, yl) + self.shift

    def gradient(self, x, y):
        xl, yl = self._local(np.asarray(x, float), np.asarray(y, float))
        gxl, gyl = gradient(self.base, xl, yl)
        c, s = math.cos(self.angle), math.sin(self.angle)
        return c * gxl - s * gyl, s * gxl + c * gyl

"""Monotone intensity-translation functions built from cubic Bezier curves.

A translation remaps normalized pixel values through a lookup table sampled
from a cubic Bezier curve whose endpoints are pinned to unit-square corners:
(0,0)->(1,1) for increasing maps, (0,1)->(1,0) for decreasing ones.  With all
control coordinates inside [0,1], both x(t) and y(t) are monotone in t, so
sorting samples by x yields a total, monotone, invertible function on [0,1].

The curve is parametric: evaluating it at a pixel value directly would give a
2-D point, so the table is built by sampling the curve at ``resolution``
parameter values and interpolating x -> y linearly.  At the default
resolution of 1000 the interpolation error is far below 8-bit quantization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DomainError

Point = tuple[float, float]

_INCREASING = ((0.0, 0.0), (1.0, 1.0))
_DECREASING = ((0.0, 1.0), (1.0, 0.0))

DEFAULT_RESOLUTION = 1000


@dataclass(frozen=True)
class ControlPoints:
    """Four 2-D control points of a cubic intensity-translation curve.

    Endpoints ``p0``/``p3`` must sit on the unit-square corners matching the
    map direction; ``p1``/``p2`` may lie anywhere in the unit square.
    """

    p0: Point
    p1: Point
    p2: Point
    p3: Point

    def __post_init__(self):
        for name in ("p0", "p1", "p2", "p3"):
            x, y = getattr(self, name)
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise DomainError(f"{name}=({x}, {y}) is outside the unit square")
        ends = (tuple(self.p0), tuple(self.p3))
        if ends not in (_INCREASING, _DECREASING):
            raise DomainError(
                "endpoints must be (0,0)->(1,1) for increasing maps or "
                f"(0,1)->(1,0) for decreasing maps, got {ends}"
            )

    @property
    def increasing(self) -> bool:
        return self.p3[1] > self.p0[1]

    def as_array(self) -> np.ndarray:
        return np.array([self.p0, self.p1, self.p2, self.p3], dtype=np.float64)


def bezier_point(cp: ControlPoints, t: float) -> tuple[float, float]:
    """Evaluate the cubic curve at parameter ``t`` in [0, 1].

    Exact polynomial evaluation, no clamping: the result is
    sum_i C(3,i) (1-t)^(3-i) t^i P_i.
    """
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"curve parameter t={t} outside [0, 1]")
    x, y = _curve_samples(cp, np.asarray([t], dtype=np.float64))
    return float(x[0]), float(y[0])


def _curve_samples(cp: ControlPoints, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pts = cp.as_array()
    u = 1.0 - ts
    w0 = u * u * u
    w1 = 3.0 * u * u * ts
    w2 = 3.0 * u * ts * ts
    w3 = ts * ts * ts
    x = w0 * pts[0, 0] + w1 * pts[1, 0] + w2 * pts[2, 0] + w3 * pts[3, 0]
    y = w0 * pts[0, 1] + w1 * pts[1, 1] + w2 * pts[2, 1] + w3 * pts[3, 1]
    return x, y


@dataclass
class TranslationTable:
    """Sampled x -> y lookup table of one translation curve.

    ``abscissa`` is non-decreasing and spans [0, 1] after endpoint clamping;
    lookups interpolate linearly and are total on [0, 1].  Duplicate abscissa
    entries keep their first occurrence.  Instances are immutable by
    convention and safe to share across workers.
    """

    abscissa: np.ndarray
    ordinate: np.ndarray
    source: ControlPoints | None
    resolution: int
    _xs: np.ndarray = field(init=False, repr=False)
    _ys: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        keep = np.concatenate(([True], np.diff(self.abscissa) > 0.0))
        self._xs = self.abscissa[keep]
        self._ys = self.ordinate[keep]

    @property
    def increasing(self) -> bool:
        return bool(self.ordinate[-1] >= self.ordinate[0])

    def lookup(self, values):
        """Map intensities through the table (linear interpolation)."""
        return np.interp(values, self._xs, self._ys)

    def inverted(self) -> "TranslationTable":
        """Swap abscissa and ordinate, re-sort, and clamp endpoints.

        Numerically inverts the translation: applying a table and then its
        inverse recovers the input up to interpolation error.
        """
        order = np.argsort(self.ordinate, kind="stable")
        xs = self.ordinate[order].copy()
        ys = self.abscissa[order].copy()
        xs[0], xs[-1] = 0.0, 1.0
        return TranslationTable(xs, ys, source=None, resolution=self.resolution)


def build_translation(cp: ControlPoints, resolution: int = DEFAULT_RESOLUTION) -> TranslationTable:
    """Sample the curve uniformly in t and assemble the x -> y table.

    Samples are sorted by abscissa (stable, so ties keep first occurrence)
    and the first/last abscissa are clamped to 0 and 1.
    """
    if resolution < 2:
        raise ConfigError(f"table resolution must be >= 2, got {resolution}")
    ts = np.linspace(0.0, 1.0, resolution)
    xs, ys = _curve_samples(cp, ts)
    order = np.argsort(xs, kind="stable")
    xs = xs[order]
    ys = ys[order]
    xs[0], xs[-1] = 0.0, 1.0
    return TranslationTable(xs, ys, source=cp, resolution=resolution)


def apply_translation(img: np.ndarray, table: TranslationTable) -> np.ndarray:
    """Replace every pixel p by table.lookup(p); shape and dtype preserved.

    Input must be a floating array normalized to [0, 1] (1e-6 slack).
    """
    img = np.asarray(img)
    if not np.issubdtype(img.dtype, np.floating):
        raise DataError(f"expected a floating-point normalized image, got dtype {img.dtype}")
    if img.size == 0:
        raise DataError("empty image")
    lo, hi = float(img.min()), float(img.max())
    if lo < -1e-6 or hi > 1.0 + 1e-6:
        raise DataError(f"image values [{lo}, {hi}] are not normalized to [0, 1]")
    flat = np.clip(img.ravel(), 0.0, 1.0)
    out = table.lookup(flat).reshape(img.shape)
    return out.astype(img.dtype, copy=False)


def sample_control_points(rng: np.random.Generator, direction: str = "random") -> ControlPoints:
    """Draw a random translation curve.

    Endpoints are fixed by ``direction`` (coin flip when "random"); the two
    inner control points are uniform on the unit square.  Fully determined
    by the generator state: draw order is coin (random direction only), then
    p1=(x,y), p2=(x,y).
    """
    if direction == "random":
        increasing = bool(rng.random() < 0.5)
    elif direction == "increasing":
        increasing = True
    elif direction == "decreasing":
        increasing = False
    else:
        raise ConfigError(f"unknown translation direction {direction!r}")
    u = rng.random(4)
    p0, p3 = _INCREASING if increasing else _DECREASING
    return ControlPoints(p0=p0, p1=(float(u[0]), float(u[1])), p2=(float(u[2]), float(u[3])), p3=p3)

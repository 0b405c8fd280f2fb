"""Discretized time domain and trapezoidal quadrature weights.

All time integrals in the library are computed as weighted sums over a
shared grid; double integrals use the tensor product of the same weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = ["Grid", "QuadWeights", "make_uniform_grid", "quad_weights"]


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Grid:
    """Strictly increasing time points spanning the closed interval [a, b]."""

    points: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        pts = _frozen_array(self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        if pts.ndim != 1 or pts.size < 2:
            raise ValidationError("grid needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ValidationError("grid points must be strictly increasing")
        if self.a >= self.b:
            raise ValidationError("domain bounds must satisfy a < b")
        span = max(1.0, abs(self.b - self.a))
        if abs(pts[0] - self.a) > 1e-12 * span or abs(pts[-1] - self.b) > 1e-12 * span:
            raise ValidationError("grid must span [a, b] exactly (endpoints included)")

    @property
    def m(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class QuadWeights:
    """Nonnegative quadrature weights, one per grid point, summing to b - a."""

    weights: np.ndarray
    grid: Grid = field(repr=False)

    def __post_init__(self):
        w = _frozen_array(self.weights)
        object.__setattr__(self, "weights", w)
        if w.shape != self.grid.points.shape:
            raise ValidationError("weight vector length must match grid length")
        if np.any(w < 0):
            raise ValidationError("quadrature weights must be nonnegative")
        span = self.grid.b - self.grid.a
        if abs(w.sum() - span) > 1e-12 * max(1.0, abs(span)):
            raise ValidationError("quadrature weights must sum to b - a")


def make_uniform_grid(m: int, a: float, b: float) -> Grid:
    """Build a grid of ``m`` equidistant points including both endpoints."""
    if int(m) != m or m < 2:
        raise ValidationError("grid size must be an integer >= 2")
    if not (a < b):
        raise ValidationError("domain bounds must satisfy a < b")
    return Grid(np.linspace(a, b, int(m)), float(a), float(b))


def quad_weights(grid: Grid) -> QuadWeights:
    """Trapezoidal weights for the grid.

    For interior points the weight is half the width of the two adjacent
    intervals, ``(x[j+1] - x[j-1]) / 2``; endpoints get half their single
    interval. For a uniform grid with spacing h this is (h/2, h, ..., h, h/2).
    """
    x = grid.points
    w = np.empty_like(x)
    w[0] = (x[1] - x[0]) / 2.0
    w[-1] = (x[-1] - x[-2]) / 2.0
    w[1:-1] = (x[2:] - x[:-2]) / 2.0
    return QuadWeights(w, grid)

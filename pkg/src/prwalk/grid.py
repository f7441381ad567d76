"""Raster types and pixel geometry shared by the rest of the package.

Arrays are indexed ``[row, column]`` = ``[y, x]`` with the origin at the
top-left corner. Pixels are passed around as ``(x, y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class Pixel(NamedTuple):
    x: int
    y: int


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


class _Grid:
    __slots__ = ("values",)

    values: np.ndarray

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"{type(self).__name__}({self.width}x{self.height})"


class ProbabilityMap(_Grid):
    """Per-pixel vessel confidence in ``[0, 1]``."""

    __slots__ = ()

    def __init__(self, values):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"probability map must be 2-D, got shape {arr.shape}")
        if arr.size and not (np.all(arr >= 0.0) and np.all(arr <= 1.0)):
            # NaN fails both comparisons
            raise ValueError("probability values must lie in [0, 1]")
        self.values = _frozen(arr)


class BinaryMask(_Grid):
    """Boolean vessel mask, ``True`` = vessel."""

    __slots__ = ()

    def __init__(self, values):
        arr = np.asarray(values)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        self.values = _frozen(np.array(arr, dtype=bool))

    def count(self) -> int:
        return int(self.values.sum())


def as_mask(grid) -> np.ndarray:
    """Return a 2-D bool array view of a mask-like input."""
    if isinstance(grid, BinaryMask):
        return grid.values
    arr = np.asarray(grid)
    if arr.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def as_prob(grid) -> np.ndarray:
    """Return a validated 2-D float array of a probability-like input."""
    if isinstance(grid, ProbabilityMap):
        return grid.values
    return ProbabilityMap(grid).values


@dataclass(frozen=True)
class Roi:
    """Square region of interest centred on ``center``, clipped to the image.

    Bounds are inclusive.
    """

    center: Pixel
    side: int
    x_min: int
    x_max: int
    y_min: int
    y_max: int

    @classmethod
    def around(cls, center: Pixel, side: int, width: int, height: int) -> "Roi":
        half = side // 2
        cx, cy = center
        return cls(
            center=Pixel(cx, cy),
            side=side,
            x_min=max(0, cx - half),
            x_max=min(width - 1, cx + half),
            y_min=max(0, cy - half),
            y_max=min(height - 1, cy + half),
        )

    def contains(self, x: int, y: int) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.y_min, self.y_max + 1), slice(self.x_min, self.x_max + 1)

    @property
    def area(self) -> int:
        return (self.x_max - self.x_min + 1) * (self.y_max - self.y_min + 1)

    def to_mask(self, shape: tuple[int, int]) -> np.ndarray:
        out = np.zeros(shape, dtype=bool)
        out[self.slices] = True
        return out


def euclidean_distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def pixels_of(mask) -> list[Pixel]:
    """Foreground pixels in raster order (by row, then column)."""
    ys, xs = np.nonzero(as_mask(mask))
    return [Pixel(int(x), int(y)) for y, x in zip(ys, xs)]

"""Connected-component labeling and centerline thinning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import BinaryMask, as_mask

_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


@dataclass(frozen=True)
class LabelMap:
    labels: np.ndarray
    count: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def __array__(self, dtype=None, copy=None):
        return self.labels if dtype is None else self.labels.astype(dtype)


@dataclass(frozen=True)
class ComponentIndex:
    """Per-label pixel coordinates (``(N, 2)`` arrays of ``x, y``) and sizes.

    ``largest`` is the label of the biggest component (smallest id on ties),
    or ``None`` for an empty labeling.
    """

    pixels: dict[int, np.ndarray]
    sizes: dict[int, int]
    largest: int | None

    def fragments_by_size(self) -> list[int]:
        """Non-largest labels, biggest first, ties by label id."""
        rest = [k for k in self.sizes if k != self.largest]
        return sorted(rest, key=lambda k: (-self.sizes[k], k))


def label_components(mask, connectivity: int = 8) -> LabelMap:
    """Label foreground components, numbered in raster order of first pixel."""
    if connectivity not in _STRUCTURES:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    arr = as_mask(mask)
    labels, count = ndimage.label(arr, structure=_STRUCTURES[connectivity])
    labels = labels.astype(np.int32)
    labels.flags.writeable = False
    return LabelMap(labels, int(count))


def count_components(mask, connectivity: int = 8) -> int:
    return label_components(mask, connectivity).count


def component_index(labels: LabelMap) -> ComponentIndex:
    lab = np.asarray(labels.labels)
    flat = lab.ravel()
    order = np.argsort(flat, kind="stable")
    sorted_labels = flat[order]
    bounds = np.searchsorted(sorted_labels, np.arange(labels.count + 2))
    width = lab.shape[1]
    pixels: dict[int, np.ndarray] = {}
    sizes: dict[int, int] = {}
    for k in range(1, labels.count + 1):
        idx = order[bounds[k]:bounds[k + 1]]
        pixels[k] = np.stack([idx % width, idx // width], axis=1)
        sizes[k] = int(idx.size)
    largest = None
    if sizes:
        # max() keeps the first maximal key, i.e. the smallest label id
        largest = max(sizes, key=lambda k: sizes[k])
    return ComponentIndex(pixels, sizes, largest)


# -- thinning ----------------------------------------------------------------


def _neighbours(p: np.ndarray):
    """P2..P9 (N, NE, E, SE, S, SW, W, NW) of the interior of a padded array."""
    return (
        p[:-2, 1:-1],
        p[:-2, 2:],
        p[1:-1, 2:],
        p[2:, 2:],
        p[2:, 1:-1],
        p[2:, :-2],
        p[1:-1, :-2],
        p[:-2, :-2],
    )


def _subiteration(p: np.ndarray, first: bool) -> bool:
    nb = _neighbours(p)
    p2, p3, p4, p5, p6, p7, p8, p9 = nb
    core = p[1:-1, 1:-1]
    b = sum(n.astype(np.int16) for n in nb)
    seq = nb + (p2,)
    a = sum(((seq[i] == 0) & (seq[i + 1] == 1)).astype(np.int16) for i in range(8))
    cond = (core == 1) & (b >= 2) & (b <= 6) & (a == 1)
    if first:
        cond &= (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
    else:
        cond &= (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
    ys, xs = np.nonzero(cond)
    changed = False
    for y, x in zip(ys + 1, xs + 1):
        # Candidates come from the parallel test; each is deleted only if it
        # is still a simple point of the partially thinned image. Plain
        # parallel Zhang-Suen erases 2x2 squares and can split components.
        if _simple(p, y, x):
            p[y, x] = 0
            changed = True
    return changed


def _simple(p: np.ndarray, y: int, x: int) -> bool:
    """8-connectivity simple-point test (Yokoi connectivity number == 1)."""
    n = (
        p[y, x + 1], p[y - 1, x + 1], p[y - 1, x], p[y - 1, x - 1],
        p[y, x - 1], p[y + 1, x - 1], p[y + 1, x], p[y + 1, x + 1],
    )
    q = [1 - v for v in n]
    c8 = sum(q[k] - q[k] * q[(k + 1) % 8] * q[(k + 2) % 8] for k in (0, 2, 4, 6))
    return c8 == 1


def _clear_squares(p: np.ndarray) -> bool:
    sq = p[:-1, :-1] & p[1:, :-1] & p[:-1, 1:] & p[1:, 1:]
    if not sq.any():
        return False
    changed = False
    for y, x in zip(*np.nonzero(sq)):
        for dy, dx in ((0, 0), (0, 1), (1, 0), (1, 1)):
            yy, xx = y + dy, x + dx
            if not (p[y, x] and p[y + 1, x] and p[y, x + 1] and p[y + 1, x + 1]):
                break
            if _simple(p, yy, xx):
                p[yy, xx] = 0
                changed = True
                break
    return changed


def skeletonize(mask) -> BinaryMask:
    """Zhang-Suen thinning with a sequential topology guard.

    Candidates of each sub-iteration are found in parallel, then deleted in
    raster order only if they are still simple points of the current image,
    so the number of 8-connected components (and of background holes) is
    preserved. Wherever plain Zhang-Suen keeps the topology the result is
    identical to it, because deleting a non-simple point can never be undone
    by later deletions.

    Zhang-Suen can leave 2x2 squares behind; a clean-up pass removes a
    simple pixel from each such square and thinning resumes until nothing
    changes. Squares in which no pixel is simple (four diagonal arms meeting
    at one block) are kept, since removing any pixel would cut an arm off.
    """
    arr = as_mask(mask)
    p = np.pad(arr.astype(np.uint8), 1)
    changed = True
    while changed:
        changed = _subiteration(p, True)
        changed = _subiteration(p, False) or changed
        if not changed:
            changed = _clear_squares(p)
    return BinaryMask(p[1:-1, 1:-1].astype(bool))

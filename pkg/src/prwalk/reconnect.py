"""Probability regularized walk: reconnect broken vessel fragments.

For every fragment (a connected component other than the largest one, the
trunk) the closest pair of centerline pixels ``A`` (fragment) and ``B``
(trunk) is found. A square ROI of side ``roi_side`` centred on their midpoint
bounds the search; fragments farther than ``roi_side`` from the trunk are
skipped. A parabola fitted through the fragment pixels is intersected with
the trunk to get a target ``C``, and walkers seeded on every fragment pixel in
the ROI greedily step to the 8-neighbour maximising::

    alpha / dist(candidate, C) + (1 - alpha) * prob[candidate]

Paths of walkers that reach the trunk are stamped into the mask with a 3x3
brush.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import ndimage

from .components import component_index, label_components, skeletonize
from .grid import BinaryMask, Pixel, Roi, as_mask, as_prob, euclidean_distance

CONNECTED = "connected"
ABORTED_LOW_PROBABILITY = "aborted_low_probability"
ABORTED_STEP_BUDGET = "aborted_step_budget"
ABORTED_LEFT_ROI = "aborted_left_roi"
NO_ESCAPE = "no_escape"
SKIPPED = "skipped"

_FAILURE_ORDER = (ABORTED_LOW_PROBABILITY, ABORTED_STEP_BUDGET, ABORTED_LEFT_ROI, NO_ESCAPE)

# Neighbour visiting order; also the argmax tie-break.
OMEGA = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))

REPORT_SCHEMA = "prwalk.reconnect/1"


class FitError(ValueError):
    pass


class TargetError(ValueError):
    pass


@dataclass(frozen=True)
class WalkConfig:
    alpha: float = 0.2
    roi_side: int = 100
    eps_nn: float = 0.1
    max_steps: int | None = None
    rng_seed: int = 0  # unused; the walk is deterministic
    walk_from_target: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.roi_side < 0:
            raise ValueError(f"roi_side must be >= 0, got {self.roi_side}")
        if not 0.0 <= self.eps_nn <= 1.0:
            raise ValueError(f"eps_nn must be in [0, 1], got {self.eps_nn}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")

    @property
    def step_budget(self) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return max(1, self.roi_side * self.roi_side)


@dataclass(frozen=True)
class FracturePair:
    fragment_label: int
    a: Pixel
    b: Pixel
    d_ab: float
    m: Pixel


@dataclass(frozen=True)
class Parabola:
    """``y = a x^2 + b x + c`` (axis ``"y_of_x"``) or the transposed form."""

    a: float
    b: float
    c: float
    axis: str = "y_of_x"

    def __call__(self, t):
        return (self.a * t + self.b) * t + self.c

    def residual(self, x, y):
        """Distance to the curve along the dependent axis."""
        if self.axis == "y_of_x":
            return np.abs(np.asarray(y, dtype=float) - self(np.asarray(x, dtype=float)))
        return np.abs(np.asarray(x, dtype=float) - self(np.asarray(y, dtype=float)))


@dataclass
class WalkOutcome:
    status: str
    path: list[Pixel]
    target: Pixel

    @property
    def connected(self) -> bool:
        return self.status == CONNECTED


@dataclass
class RoiRecord:
    fragment_label: int
    a: Pixel
    b: Pixel
    d_ab: float
    status: str
    path_length: int = 0
    stamped_pixel_count: int = 0
    roi: tuple[int, int, int, int] | None = None  # x_min, x_max, y_min, y_max
    target: Pixel | None = None
    guidance: str | None = None
    walkers: int = 0
    connected_walkers: int = 0
    stamped: list[Pixel] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["a"] = list(self.a)
        d["b"] = list(self.b)
        d["target"] = None if self.target is None else list(self.target)
        d["roi"] = None if self.roi is None else list(self.roi)
        d["stamped"] = [list(p) for p in self.stamped]
        return d


@dataclass
class ReconnectReport:
    records: list[RoiRecord]
    components_before: int
    components_after: int
    config: WalkConfig
    baseline: bool = False

    @property
    def attempted(self) -> list[RoiRecord]:
        return [r for r in self.records if r.status != SKIPPED]

    def totals(self) -> dict:
        counts = Counter(r.status for r in self.records)
        return {
            "rois": len(self.records),
            "attempted": len(self.attempted),
            "connected": counts.get(CONNECTED, 0),
            "skipped": counts.get(SKIPPED, 0),
            "stamped_pixels": sum(r.stamped_pixel_count for r in self.records),
            "statuses": dict(sorted(counts.items())),
            "components_before": self.components_before,
            "components_after": self.components_after,
        }

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "method": "baseline" if self.baseline else "prw",
            "config": asdict(self.config),
            "records": [r.to_dict() for r in self.records],
            "totals": self.totals(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


# -- geometry ----------------------------------------------------------------


def _coords(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    return arr.reshape(-1, 2)


def _raster_sorted(arr: np.ndarray) -> np.ndarray:
    return arr[np.lexsort((arr[:, 0], arr[:, 1]))]


def nearest_pair(fragment_centerline, trunk_centerline, fragment_label: int = 0) -> FracturePair:
    """Closest (fragment, trunk) pixel pair by exhaustive search.

    Ties go to the lexicographically smallest ``(A.y, A.x, B.y, B.x)``.
    """
    frag = _coords(fragment_centerline)
    trunk = _coords(trunk_centerline)
    if len(frag) == 0 or len(trunk) == 0:
        raise ValueError("nearest_pair needs two non-empty pixel lists")
    frag = _raster_sorted(frag)
    trunk = _raster_sorted(trunk)

    best = None
    chunk = max(1, 2_000_000 // len(trunk))
    for start in range(0, len(frag), chunk):
        block = frag[start:start + chunk]
        d2 = ((block[:, None, :] - trunk[None, :, :]) ** 2).sum(axis=2)
        k = int(np.argmin(d2))
        i, j = divmod(k, len(trunk))
        if best is None or d2[i, j] < best[0]:
            best = (int(d2[i, j]), start + i, j)
    _, i, j = best
    a = Pixel(int(frag[i, 0]), int(frag[i, 1]))
    b = Pixel(int(trunk[j, 0]), int(trunk[j, 1]))
    m = Pixel((a.x + b.x + 1) // 2, (a.y + b.y + 1) // 2)
    return FracturePair(fragment_label, a, b, euclidean_distance(a, b), m)


def roi_of(pair: FracturePair, roi_side: int, width: int, height: int) -> Roi | None:
    """ROI around the pair's midpoint, or ``None`` when the gap exceeds ``roi_side``."""
    if pair.d_ab > roi_side:
        return None
    return Roi.around(pair.m, roi_side, width, height)


def fit_parabola(points, axis: str | None = None) -> Parabola:
    """Least-squares quadratic through ``points``.

    With ``axis=None`` fits ``y(x)`` when the points spread at least as far
    along x as along y, otherwise ``x(y)``. Pass ``"y_of_x"`` or ``"x_of_y"``
    to force an orientation.
    """
    if axis not in (None, "y_of_x", "x_of_y"):
        raise ValueError(f"unknown axis {axis!r}")
    pts = _coords(points).astype(np.float64)
    if len(pts) < 3:
        raise FitError(f"need at least 3 points, got {len(pts)}")
    xs, ys = pts[:, 0], pts[:, 1]
    if axis is None:
        axis = "y_of_x" if np.ptp(xs) >= np.ptp(ys) else "x_of_y"
    if axis == "y_of_x":
        t, v, axis = xs, ys, "y_of_x"
    else:
        t, v, axis = ys, xs, "x_of_y"
    if np.unique(t).size < 3:
        raise FitError("fewer than 3 distinct abscissae; quadratic fit is rank deficient")
    design = np.stack([t * t, t, np.ones_like(t)], axis=1)
    coef, _, rank, _ = np.linalg.lstsq(design, v, rcond=None)
    if rank < 3 or not np.all(np.isfinite(coef)):
        raise FitError("rank-deficient quadratic fit")
    return Parabola(float(coef[0]), float(coef[1]), float(coef[2]), axis)


def target_point(curve: Parabola, trunk_pixels, roi: Roi, anchor: Pixel | None = None) -> Pixel:
    """Trunk pixel in ``roi`` closest to ``curve`` along its dependent axis.

    Ties go to the pixel nearest ``anchor`` (if given), then raster order.
    """
    pts = _coords(trunk_pixels)
    if len(pts):
        inside = (
            (pts[:, 0] >= roi.x_min) & (pts[:, 0] <= roi.x_max)
            & (pts[:, 1] >= roi.y_min) & (pts[:, 1] <= roi.y_max)
        )
        pts = pts[inside]
    if len(pts) == 0:
        raise TargetError("no trunk pixel inside the ROI")
    res = curve.residual(pts[:, 0], pts[:, 1])
    if anchor is not None:
        near = (pts[:, 0] - anchor[0]) ** 2 + (pts[:, 1] - anchor[1]) ** 2
    else:
        near = np.zeros(len(pts), dtype=np.int64)
    k = np.lexsort((pts[:, 0], pts[:, 1], near, res))[0]
    return Pixel(int(pts[k, 0]), int(pts[k, 1]))


def direction_prob(candidate, target) -> float:
    """Inverse distance to the target; undefined at the target itself."""
    d = euclidean_distance(candidate, target)
    if d == 0:
        raise ValueError("candidate coincides with the target (arrival)")
    return 1.0 / d


def step_prob(candidate, target, pnn: float, alpha: float) -> float:
    return alpha * direction_prob(candidate, target) + (1.0 - alpha) * pnn


# -- walking -----------------------------------------------------------------


def _walk(seed, target, rows, goal, roi: Roi, width, height, alpha, eps, budget, source=None):
    """Core walker.

    ``rows``, ``goal`` and ``source`` are nested lists cropped to ``roi``
    (indexed ``[y - roi.y_min][x - roi.x_min]``). Pixels of ``source`` (the
    component the walker starts from) are never re-entered.
    """
    if alpha == 0.0:
        # No directional drive: the walker never leaves its seed.
        return WalkOutcome(NO_ESCAPE, [], target)
    x, y = seed
    xc, yc = target
    x0, y0 = roi.x_min, roi.y_min
    visited = {(x, y)}
    path: list[Pixel] = []
    beta = 1.0 - alpha
    for _ in range(budget):
        best = None
        best_score = -math.inf
        above_floor = False
        blocked_by_roi = False
        for dx, dy in OMEGA:
            nx, ny = x + dx, y + dy
            if (nx, ny) in visited:
                continue
            if not (roi.x_min <= nx <= roi.x_max and roi.y_min <= ny <= roi.y_max):
                if 0 <= nx < width and 0 <= ny < height:
                    blocked_by_roi = True
                continue
            if source is not None and source[ny - y0][nx - x0]:
                continue
            if nx == xc and ny == yc:
                path.append(Pixel(nx, ny))
                return WalkOutcome(CONNECTED, path, target)
            pnn = rows[ny - y0][nx - x0]
            if pnn >= eps:
                above_floor = True
            score = alpha / math.hypot(nx - xc, ny - yc) + beta * pnn
            if score > best_score:
                best_score = score
                best = (nx, ny)
        if best is None:
            return WalkOutcome(ABORTED_LEFT_ROI if blocked_by_roi else NO_ESCAPE, path, target)
        if not above_floor:
            return WalkOutcome(ABORTED_LOW_PROBABILITY, path, target)
        x, y = best
        visited.add(best)
        path.append(Pixel(x, y))
        if goal[y - y0][x - x0]:
            return WalkOutcome(CONNECTED, path, target)
    return WalkOutcome(ABORTED_STEP_BUDGET, path, target)


def walk(seed, target, prob, roi: Roi, cfg: WalkConfig = WalkConfig(), trunk=None,
         use_floor: bool = True) -> WalkOutcome:
    """Walk greedily from ``seed`` toward ``target`` inside ``roi``.

    The walk connects on stepping onto ``target`` or any ``trunk`` pixel.
    ``use_floor=False`` disables the low-probability abort.
    """
    p = as_prob(prob)
    h, w = p.shape
    if not roi.contains(*seed):
        raise ValueError(f"seed {tuple(seed)} lies outside the ROI")
    goal = np.zeros((h, w), dtype=bool) if trunk is None else as_mask(trunk)
    eps = cfg.eps_nn if use_floor else -1.0
    return _walk(tuple(seed), Pixel(*target), p[roi.slices].tolist(),
                 goal[roi.slices].tolist(), roi, w, h, cfg.alpha, eps, cfg.step_budget)


# -- per-fragment reconnection ----------------------------------------------


def _stamp(paths, roi: Roi, mask: np.ndarray) -> np.ndarray:
    """3x3 stamp around every path pixel not already in ``mask``, clipped to the ROI."""
    out = np.zeros(mask.shape, dtype=bool)
    crop = np.zeros((roi.y_max - roi.y_min + 1, roi.x_max - roi.x_min + 1), dtype=bool)
    for path in paths:
        for x, y in path:
            if not mask[y, x]:
                crop[y - roi.y_min, x - roi.x_min] = True
    if crop.any():
        out[roi.slices] = ndimage.binary_dilation(crop, structure=np.ones((3, 3), bool))
    return out


def _summarise(outcomes) -> str:
    if any(o.connected for o in outcomes):
        return CONNECTED
    # seeds buried inside the fragment never move; they say nothing about the gap
    moved = [o for o in outcomes if not (o.status == NO_ESCAPE and not o.path)]
    if not moved:
        return NO_ESCAPE
    counts = Counter(o.status for o in moved)
    return max(_FAILURE_ORDER, key=lambda s: (counts.get(s, 0), -_FAILURE_ORDER.index(s)))


class _State:
    """Mutable working copy for one reconnection run."""

    def __init__(self, mask, prob, centerline):
        self.mask = mask
        self.prob = prob
        self.centerline = centerline
        self.shape = mask.shape


def _attempt(state: _State, label: int, fragment: np.ndarray, trunk: np.ndarray,
             cfg: WalkConfig, use_floor: bool):
    """Try to join ``fragment`` to ``trunk``; return (new pixels, record)."""
    h, w = state.shape
    frag_cl = fragment & state.centerline
    trunk_cl = trunk & state.centerline
    if not frag_cl.any():
        frag_cl = fragment
    if not trunk_cl.any():
        trunk_cl = trunk
    frag_cl_xy = np.argwhere(frag_cl)[:, ::-1]
    trunk_cl_xy = np.argwhere(trunk_cl)[:, ::-1]
    pair = nearest_pair(frag_cl_xy, trunk_cl_xy, label)
    roi = roi_of(pair, cfg.roi_side, w, h)
    if roi is None:
        return None, RoiRecord(label, pair.a, pair.b, pair.d_ab, SKIPPED)

    frag_xy = np.argwhere(fragment)[:, ::-1]
    try:
        curve = fit_parabola(frag_xy)
        trunk_roi = np.argwhere(trunk[roi.slices])[:, ::-1] + (roi.x_min, roi.y_min)
        target = target_point(curve, trunk_roi, roi, anchor=pair.a)
        guidance = "parabola"
    except (FitError, TargetError):
        target = pair.b
        guidance = "nearest"

    eps = cfg.eps_nn if use_floor else -1.0
    budget = cfg.step_budget
    sub = fragment[roi.slices]
    seeds = [Pixel(int(x) + roi.x_min, int(y) + roi.y_min) for y, x in np.argwhere(sub)]
    rows = state.prob[roi.slices].tolist()
    goal = trunk[roi.slices].tolist()
    source = sub.tolist()
    outcomes = [
        _walk(s, target, rows, goal, roi, w, h, cfg.alpha, eps, budget, source)
        for s in seeds
    ]
    if cfg.walk_from_target and not any(o.connected for o in outcomes):
        outcomes.append(
            _walk(target, pair.a, rows, source, roi, w, h,
                  cfg.alpha, eps, budget, goal)
        )

    status = _summarise(outcomes)
    record = RoiRecord(
        label, pair.a, pair.b, pair.d_ab, status,
        roi=(roi.x_min, roi.x_max, roi.y_min, roi.y_max),
        target=target, guidance=guidance, walkers=len(outcomes),
    )
    winners = [o.path for o in outcomes if o.connected]
    if not winners:
        return None, record
    new = _stamp(winners, roi, state.mask) & ~state.mask
    record.connected_walkers = len(winners)
    record.path_length = min(len(p) for p in winners)
    ys, xs = np.nonzero(new)
    record.stamped = [Pixel(int(x), int(y)) for x, y in zip(xs, ys)]
    record.stamped_pixel_count = len(record.stamped)
    return (new, winners), record


def reconnect_fragment(fragment_label: int, labels, index, prob, mask,
                       cfg: WalkConfig = WalkConfig(), use_floor: bool = True):
    """Attempt one fragment against the trunk of ``index``.

    Returns ``(updated_mask, record)``; the mask is unchanged unless a walker
    reached the trunk.
    """
    lab = np.asarray(labels.labels)
    if index.largest is None or fragment_label == index.largest:
        raise ValueError("fragment_label must name a non-trunk component")
    m = as_mask(mask).copy()
    p = as_prob(prob)
    state = _State(m, p, skeletonize(m).values)
    result, record = _attempt(state, fragment_label, lab == fragment_label,
                              lab == index.largest, cfg, use_floor)
    if result is not None:
        m |= result[0]
    return BinaryMask(m), record


def _run(mask, prob, cfg: WalkConfig, baseline: bool, centerline=None):
    m0 = as_mask(mask)
    p = as_prob(prob)
    if m0.shape != p.shape:
        raise ValueError(f"mask shape {m0.shape} does not match probability shape {p.shape}")
    labels = label_components(m0, 8)
    before = labels.count
    if before <= 1:
        return BinaryMask(m0), ReconnectReport([], before, before, cfg, baseline)

    index = component_index(labels)
    lab = labels.labels
    work = m0.copy()
    if centerline is None:
        centerline = skeletonize(m0).values
    else:
        centerline = as_mask(centerline)
        if centerline.shape != m0.shape:
            raise ValueError("centerline shape does not match the mask")
    state = _State(work, p, centerline.copy())
    trunk = lab == index.largest
    records = []
    for label in index.fragments_by_size():
        fragment = lab == label
        if (fragment & trunk).any():
            continue  # absorbed by an earlier connection
        result, record = _attempt(state, label, fragment, trunk, cfg, use_floor=not baseline)
        records.append(record)
        if result is None:
            continue
        new, paths = result
        work |= new
        for path in paths:
            for x, y in path:
                state.centerline[y, x] = True
        relabel, _ = ndimage.label(work, structure=np.ones((3, 3), bool))
        seed_y, seed_x = np.argwhere(trunk)[0]
        trunk = relabel == relabel[seed_y, seed_x]

    after = label_components(work, 8).count
    return BinaryMask(work), ReconnectReport(records, before, after, cfg, baseline)


def prw(mask, prob, cfg: WalkConfig = WalkConfig(), centerline=None):
    """Reconnect fragments to the trunk; returns ``(mask, ReconnectReport)``.

    ``centerline`` may carry a precomputed ``skeletonize(mask)`` so that
    repeated runs on one mask (parameter sweeps) skip the thinning step.

    Fragments are processed largest first. Each successful connection merges
    the fragment (and anything the stamp touched) into the trunk before the
    next fragment is tried.
    """
    return _run(mask, prob, cfg, baseline=False, centerline=centerline)


def directional_walk_baseline(mask, prob, cfg: WalkConfig = WalkConfig(), centerline=None):
    """Same pipeline with a purely geometric walker (``alpha = 1``, no floor)."""
    return _run(mask, prob, replace(cfg, alpha=1.0), baseline=True, centerline=centerline)

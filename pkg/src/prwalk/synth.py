"""Seeded synthetic vessel trees with injected gaps and simulated confidence maps.

Randomness comes from numpy's counter-based Philox generator. Each operation
draws from its own stream, ``SeedSequence(rng_seed, spawn_key=(k,))`` with
``k`` = 0 (tree), 1 (gaps), 2 (probability noise), so changing e.g. the noise
settings never perturbs the geometry of a fixture.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .components import count_components, skeletonize
from .grid import BinaryMask, Pixel, ProbabilityMap, as_mask
from .raster import read_raster, write_raster

_TRUTH, _GAPS, _NOISE = 0, 1, 2
MANIFEST_SCHEMA = "prwalk.gaps/1"


@dataclass(frozen=True)
class SynthConfig:
    rng_seed: int = 0
    image_side: int = 256
    branch_count: int = 4
    vessel_width: int = 3
    gap_count: int = 3
    gap_length: int = 20
    ridge_prob: float = 0.35
    noise_amplitude: float = 0.05
    blur_radius: int = 1
    bend: float = 0.25  # control-point offset, as a fraction of stroke length
    ridge_width: int = 0  # 0: whole gap at ridge_prob; k: only a k-wide band on the axis

    def __post_init__(self):
        if self.image_side < 8:
            raise ValueError("image_side must be at least 8")
        if self.vessel_width < 1 or self.branch_count < 1:
            raise ValueError("vessel_width and branch_count must be positive")
        if not 0 <= self.gap_length < self.image_side:
            raise ValueError("gap_length must lie in [0, image_side)")
        if not 0.0 < self.ridge_prob < 0.8:
            raise ValueError("ridge_prob must lie in (0, 0.8)")
        if not 0.0 <= self.noise_amplitude <= 1.0:
            raise ValueError("noise_amplitude must lie in [0, 1]")
        if self.gap_count < 0 or self.blur_radius < 0 or self.ridge_width < 0:
            raise ValueError("gap_count, blur_radius and ridge_width must be non-negative")


@dataclass
class GapRecord:
    gap_id: int
    removed: list[Pixel]
    endpoints: tuple[Pixel, Pixel]
    length: int

    def to_dict(self) -> dict:
        return {
            "gap_id": self.gap_id,
            "length": self.length,
            "endpoints": [list(p) for p in self.endpoints],
            "removed": [list(p) for p in self.removed],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GapRecord":
        return cls(
            d["gap_id"],
            [Pixel(*p) for p in d["removed"]],
            tuple(Pixel(*p) for p in d["endpoints"]),
            d["length"],
        )


@dataclass
class Fixture:
    config: SynthConfig
    truth: BinaryMask
    broken: BinaryMask
    prob: ProbabilityMap
    gaps: list[GapRecord] = field(default_factory=list)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream,))))


# -- ground truth ------------------------------------------------------------


def _bezier(ctrl: np.ndarray) -> np.ndarray:
    """Rasterise a cubic Bezier into an 8-connected, corner-free pixel chain."""
    chord = sum(np.linalg.norm(ctrl[i + 1] - ctrl[i]) for i in range(3))
    n = max(8, int(math.ceil(chord * 4)))
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = (
        (1 - t) ** 3 * ctrl[0]
        + 3 * (1 - t) ** 2 * t * ctrl[1]
        + 3 * (1 - t) * t ** 2 * ctrl[2]
        + t ** 3 * ctrl[3]
    )
    pix = np.floor(pts + 0.5).astype(np.int64)
    chain = [tuple(pix[0])]
    for p in map(tuple, pix[1:]):
        if p != chain[-1]:
            chain.append(p)
    # drop staircase corners so width-1 strokes stay one pixel thin
    out = [chain[0]]
    for i in range(1, len(chain) - 1):
        nxt = chain[i + 1]
        prev = out[-1]
        if max(abs(nxt[0] - prev[0]), abs(nxt[1] - prev[1])) <= 1:
            continue
        out.append(chain[i])
    if len(chain) > 1:
        out.append(chain[-1])
    return np.array(out, dtype=np.int64)


def _stroke(rng, start, length, angle, bend, lo, hi) -> np.ndarray:
    start = np.asarray(start, dtype=float)
    d = np.array([math.cos(angle), math.sin(angle)])
    normal = np.array([-d[1], d[0]])
    end = start + d * length
    c1 = start + d * length / 3 + normal * rng.normal(0.0, bend * length)
    c2 = start + d * 2 * length / 3 + normal * rng.normal(0.0, bend * length)
    ctrl = np.clip(np.stack([start, c1, c2, end]), lo, hi)
    return _bezier(ctrl)


def _tree_centerline(cfg: SynthConfig) -> np.ndarray:
    rng = _rng(cfg.rng_seed, _TRUTH)
    side = cfg.image_side
    margin = max(cfg.vessel_width + 1, side // 16)
    lo, hi = margin, side - 1 - margin
    center = np.full(2, side / 2.0)
    angle = rng.uniform(0, 2 * math.pi)
    span = (hi - lo) * 0.9
    start = center - np.array([math.cos(angle), math.sin(angle)]) * span / 2
    strokes = [_stroke(rng, start, span, angle, cfg.bend, lo, hi)]
    for _ in range(cfg.branch_count - 1):
        parent = strokes[int(rng.integers(len(strokes)))]
        k = int(rng.integers(len(parent) // 5, max(len(parent) // 5 + 1, 4 * len(parent) // 5)))
        origin = parent[k]
        length = rng.uniform(0.25, 0.5) * side
        strokes.append(_stroke(rng, origin, length, rng.uniform(0, 2 * math.pi), cfg.bend, lo, hi))
    return np.concatenate(strokes)


def gen_ground_truth(cfg: SynthConfig) -> BinaryMask:
    side = cfg.image_side
    cl = np.zeros((side, side), dtype=bool)
    pts = _tree_centerline(cfg)
    cl[pts[:, 1], pts[:, 0]] = True
    w = cfg.vessel_width
    if w == 1:
        return BinaryMask(cl)
    return BinaryMask(ndimage.binary_dilation(cl, structure=np.ones((w, w), bool)))


# -- gaps --------------------------------------------------------------------


def _crossings(skel: np.ndarray) -> np.ndarray:
    """0->1 transitions around each skeleton pixel's 8-ring (2 on a plain curve)."""
    p = np.pad(skel.astype(np.int8), 1)
    ring = [p[:-2, 1:-1], p[:-2, 2:], p[1:-1, 2:], p[2:, 2:],
            p[2:, 1:-1], p[2:, :-2], p[1:-1, :-2], p[:-2, :-2]]
    ring.append(ring[0])
    a = sum(((ring[i] == 0) & (ring[i + 1] == 1)).astype(np.int8) for i in range(8))
    return np.where(skel, a, 0)


def _trace(skel, regular, start, steps):
    """Follow the skeleton from ``start`` through regular curve pixels only.

    Staircase corner pixels adjacent to the previous step are skipped so the
    walk never doubles back.
    """
    path = [start]
    seen = {start}
    h, w = skel.shape
    while len(path) < steps:
        y, x = path[-1]
        prev = path[-2] if len(path) > 1 else None
        options = []
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if not (dy or dx) or not (0 <= ny < h and 0 <= nx < w):
                    continue
                if not skel[ny, nx] or (ny, nx) in seen:
                    continue
                if prev is not None and max(abs(ny - prev[0]), abs(nx - prev[1])) <= 1:
                    continue
                options.append((abs(dy) + abs(dx), ny, nx))
        if not options:
            return None
        _, ny, nx = min(options)
        if not regular[ny, nx]:
            return None
        path.append((ny, nx))
        seen.add((ny, nx))
    return path


def inject_gaps(truth, cfg: SynthConfig):
    """Cut ``cfg.gap_count`` gaps of ``cfg.gap_length`` centerline pixels.

    Gaps are placed on junction-free stretches, each cut splits exactly one
    component, and gaps stay at least ``gap_length + 4 * vessel_width``
    apart. Returns ``(broken_mask, [GapRecord, ...])``.
    """
    t = as_mask(truth)
    if not t.any():
        raise ValueError("cannot inject gaps into an empty mask")
    if cfg.gap_count == 0:
        return BinaryMask(t), []
    if cfg.gap_length < 1:
        raise ValueError("gap_length must be at least 1 when gaps are requested")
    rng = _rng(cfg.rng_seed, _GAPS)
    skel = skeletonize(t).values
    regular = _crossings(skel) == 2
    radius = cfg.vessel_width // 2 + 1
    guard = cfg.gap_length + 2 * radius + 2
    # keep cuts away from junctions and loose ends
    irregular = skel & ~regular
    near_irregular = ndimage.binary_dilation(irregular, iterations=guard)
    candidates = np.argwhere(regular & ~near_irregular)
    broken = t.copy()
    gaps: list[GapRecord] = []
    taken = np.zeros_like(t)
    spacing = cfg.gap_length + 4 * cfg.vessel_width
    components = count_components(broken)
    tries = 0
    while len(gaps) < cfg.gap_count:
        tries += 1
        if tries > 200 * cfg.gap_count or len(candidates) == 0:
            raise ValueError(
                f"could only place {len(gaps)} of {cfg.gap_count} gaps; "
                "image too small or gaps too long"
            )
        y, x = candidates[int(rng.integers(len(candidates)))]
        if taken[y, x]:
            continue
        path = _trace(skel, regular, (int(y), int(x)), cfg.gap_length)
        if path is None:
            continue
        line = np.zeros_like(t)
        for py, px in path:
            line[py, px] = True
        zone = ndimage.binary_dilation(line, structure=np.ones((2 * radius + 1,) * 2, bool))
        removed = zone & broken
        if (removed & taken).any():
            continue
        trial = broken & ~removed
        if count_components(trial) != components + 1 or count_components(removed) != 1:
            continue
        broken = trial
        components += 1
        taken |= ndimage.binary_dilation(line, iterations=spacing)
        ry, rx = np.nonzero(removed)
        gaps.append(GapRecord(
            len(gaps),
            [Pixel(int(a), int(b)) for a, b in zip(rx, ry)],
            (Pixel(path[0][1], path[0][0]), Pixel(path[-1][1], path[-1][0])),
            len(path),
        ))
    return BinaryMask(broken), gaps


# -- probability -------------------------------------------------------------


def simulate_probability(truth, broken, cfg: SynthConfig) -> ProbabilityMap:
    """Confidence map: vessel core 1.0 falling to 0.8 at the rim, ``ridge_prob``
    across gaps (or only along the gap axis when ``ridge_width`` is set),
    uniform noise in ``[0, noise_amplitude]`` on background, then
    a box blur of radius ``blur_radius``.
    """
    t = as_mask(truth)
    b = as_mask(broken)
    if t.shape != b.shape:
        raise ValueError("truth and broken masks differ in shape")
    rng = _rng(cfg.rng_seed, _NOISE)
    out = rng.uniform(0.0, 1.0, size=t.shape) * cfg.noise_amplitude
    if b.any():
        depth = ndimage.distance_transform_cdt(b, metric="chessboard").astype(float)
        half = max(1.0, (cfg.vessel_width - 1) / 2.0)
        core = 0.8 + 0.2 * np.clip((depth - 1.0) / half, 0.0, 1.0)
        out[b] = core[b]
    gap = t & ~b
    if cfg.ridge_width > 0 and gap.any():
        axis = skeletonize(t).values & gap
        k = cfg.ridge_width
        gap &= ndimage.binary_dilation(axis, structure=np.ones((k, k), bool)) if k > 1 else axis
    out[gap] = cfg.ridge_prob
    if cfg.blur_radius > 0:
        out = ndimage.uniform_filter(out, size=2 * cfg.blur_radius + 1, mode="nearest")
    return ProbabilityMap(np.clip(out, 0.0, 1.0))


def make_fixture(cfg: SynthConfig) -> Fixture:
    truth = gen_ground_truth(cfg)
    broken, gaps = inject_gaps(truth, cfg)
    prob = simulate_probability(truth, broken, cfg)
    return Fixture(cfg, truth, broken, prob, gaps)


def fixture_suite(n: int, base: SynthConfig = SynthConfig(), seed0: int = 0) -> list[Fixture]:
    """``n`` fixtures with consecutive seeds; seeds whose tree cannot host the
    requested gaps are passed over."""
    out = []
    seed = seed0
    while len(out) < n:
        try:
            out.append(make_fixture(replace(base, rng_seed=seed)))
        except ValueError:
            pass
        seed += 1
        if seed - seed0 > 20 * n + 20:
            raise ValueError("too many seeds rejected; loosen the gap settings")
    return out


# -- fixture files -----------------------------------------------------------


def write_fixture(directory, fx: Fixture) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_raster(d / "truth.pgm", fx.truth)
    write_raster(d / "broken.pgm", fx.broken)
    write_raster(d / "prob.pgm", fx.prob)
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "config": asdict(fx.config),
        "gaps": [g.to_dict() for g in fx.gaps],
    }
    (d / "gaps.json").write_text(json.dumps(manifest, indent=1))


def read_fixture(directory) -> Fixture:
    d = Path(directory)
    manifest = json.loads((d / "gaps.json").read_text())
    return Fixture(
        SynthConfig(**manifest["config"]),
        read_raster(d / "truth.pgm", "mask"),
        read_raster(d / "broken.pgm", "mask"),
        read_raster(d / "prob.pgm", "probability"),
        [GapRecord.from_dict(g) for g in manifest["gaps"]],
    )

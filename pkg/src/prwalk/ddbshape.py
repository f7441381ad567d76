"""Receptive-field and channel bookkeeping for blocks of dilated convolutions.

Three wirings are modelled: ``cascade`` (layers in series), ``parallel``
(layers side by side on the same input, outputs merged) and ``dense``
(every layer sees the concatenation of the block input and all earlier
layer outputs). Blocks are repeated ``repeats`` times in series.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

MODES = ("cascade", "parallel", "dense")
SHAPE_SCHEMA = "prwalk.ddb/1"


@dataclass(frozen=True)
class ConvSpec:
    kernel: int = 3
    dilation: int = 1

    def __post_init__(self):
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"kernel must be odd and positive, got {self.kernel}")
        if self.dilation < 1:
            raise ValueError(f"dilation must be positive, got {self.dilation}")

    @property
    def reach(self) -> int:
        """Growth of the support side length contributed by this layer."""
        return (self.kernel - 1) * self.dilation


@dataclass(frozen=True)
class BlockTopology:
    mode: str
    layers: tuple[ConvSpec, ...]
    repeats: int = 4

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("a block needs at least one layer")
        if self.repeats < 1:
            raise ValueError("repeats must be positive")

    @classmethod
    def from_rates(cls, mode: str, rates, kernel: int = 3, repeats: int = 4) -> "BlockTopology":
        return cls(mode, tuple(ConvSpec(kernel, r) for r in rates), repeats)


@dataclass
class ShapeReport:
    receptive_field: int
    concat_channel_growth: list[int] = field(default_factory=list)
    topology: dict | None = None

    def to_dict(self) -> dict:
        return {"schema": SHAPE_SCHEMA, **asdict(self)}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def receptive_field(topology: BlockTopology) -> int:
    """Side length of the square input region seen by one output pixel."""
    reaches = [c.reach for c in topology.layers]
    if topology.mode == "parallel":
        per_block = max(reaches)
    else:
        # dense concatenation keeps the full serial chain as its deepest path
        per_block = sum(reaches)
    return 1 + topology.repeats * per_block


def _dilated_ones(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """'Same' correlation with an all-ones dilated kernel (zero padding)."""
    k = np.zeros((spec.reach + 1,) * 2)
    k[::spec.dilation, ::spec.dilation] = 1.0
    return ndimage.correlate(x, k, mode="constant", cval=0.0)


def _block(x: np.ndarray, topology: BlockTopology) -> np.ndarray:
    if topology.mode == "cascade":
        for spec in topology.layers:
            x = _dilated_ones(x, spec)
        return x
    if topology.mode == "parallel":
        return sum(_dilated_ones(x, spec) for spec in topology.layers)
    feats = [x]
    for spec in topology.layers:
        # each layer sees the block input and every earlier output
        feats.append(_dilated_ones(sum(feats), spec))
    return sum(feats)


def impulse_response_support(topology: BlockTopology, grid_side: int) -> int:
    """Push a centred unit impulse through the topology with all-ones kernels
    and return the side of the square holding the non-zero response."""
    rf = receptive_field(topology)
    if grid_side <= rf:
        raise ValueError(f"grid_side must exceed the receptive field ({rf}), got {grid_side}")
    x = np.zeros((grid_side, grid_side))
    x[grid_side // 2, grid_side // 2] = 1.0
    for _ in range(topology.repeats):
        x = _block(x, topology)
    ys, xs = np.nonzero(x > 0)
    side_y = int(ys.max() - ys.min() + 1)
    side_x = int(xs.max() - xs.min() + 1)
    if side_x != side_y:
        raise AssertionError(f"non-square support {side_x}x{side_y}")
    return side_x


def dense_concat_channels(input_channels: int, per_layer_out: int, layers: int) -> list[int]:
    """Input channel count seen by each layer of a dense block."""
    if input_channels < 1 or per_layer_out < 1 or layers < 1:
        raise ValueError("all arguments must be positive")
    return [input_channels + j * per_layer_out for j in range(layers)]


def shape_report(topology: BlockTopology, input_channels: int = 64,
                 per_layer_out: int = 32) -> ShapeReport:
    growth = []
    if topology.mode == "dense":
        growth = dense_concat_channels(input_channels, per_layer_out, len(topology.layers))
    topo = {
        "mode": topology.mode,
        "repeats": topology.repeats,
        "layers": [asdict(c) for c in topology.layers],
    }
    return ShapeReport(receptive_field(topology), growth, topo)

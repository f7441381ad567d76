"""Probability-guided reconnection of fractured vessel masks.

Submodules: ``grid`` and ``raster`` (raster types and codecs), ``components``
(labeling, thinning), ``reconnect`` (the walker), ``metrics``, ``dicemath``,
``ddbshape``, ``synth`` and ``cli``.
"""

__version__ = "0.1.0"

from .grid import BinaryMask, Pixel, ProbabilityMap, Roi  # noqa: E402
from .reconnect import ReconnectReport, WalkConfig, directional_walk_baseline, prw  # noqa: E402

__all__ = [
    "BinaryMask",
    "Pixel",
    "ProbabilityMap",
    "Roi",
    "ReconnectReport",
    "WalkConfig",
    "directional_walk_baseline",
    "prw",
]

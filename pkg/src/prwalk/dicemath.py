"""Smoothed Dice loss, its gradient, and the multi-scale combination."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class LossConfig:
    """Dice smoothing ``epsilon``, number of decoder scales and their weights.

    Weights default to ``1 / scales`` each.
    """

    epsilon: float = 1.0
    scales: int = 4
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.scales < 1:
            raise ValueError("scales must be at least 1")
        if not self.weights:
            object.__setattr__(self, "weights", (1.0 / self.scales,) * self.scales)
        if len(self.weights) != self.scales:
            raise ValueError(f"expected {self.scales} weights, got {len(self.weights)}")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")


def _pair(p, g):
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g)
    if p.shape != g.shape:
        raise ValueError(f"prediction shape {p.shape} does not match label shape {g.shape}")
    if p.size and (np.nanmin(p) < 0 or np.nanmax(p) > 1 or np.isnan(p).any()):
        raise ValueError("predictions must lie in [0, 1]")
    if not np.isin(g, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return p, g.astype(np.float64)


def _check_eps(epsilon):
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")


def dice_loss(p, g, epsilon: float = 1.0) -> float:
    """``1 - (2 sum(p g) + eps) / (sum(p^2) + sum(g^2) + eps)``."""
    _check_eps(epsilon)
    p, g = _pair(p, g)
    num = 2.0 * np.sum(p * g) + epsilon
    den = np.sum(p * p) + np.sum(g * g) + epsilon
    # (den - num) / den rather than 1 - num / den: one rounding fewer
    return float((den - num) / den)


def dice_grad(p, g, epsilon: float = 1.0) -> np.ndarray:
    """Analytic derivative of :func:`dice_loss` with respect to every ``p_i``."""
    _check_eps(epsilon)
    p, g = _pair(p, g)
    num = 2.0 * np.sum(p * g) + epsilon
    den = np.sum(p * p) + np.sum(g * g) + epsilon
    return -2.0 * g / den + 2.0 * p * num / (den * den)


def downsample_label(g, factor: int) -> np.ndarray:
    """Block-majority downsampling of a 0/1 label grid; ties go to foreground."""
    if factor < 1 or factor & (factor - 1):
        raise ValueError(f"factor must be a power of two, got {factor}")
    g = np.asarray(g)
    if g.ndim != 2:
        raise ValueError("label grid must be 2-D")
    if not np.isin(g, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    h, w = g.shape
    if h % factor or w % factor:
        raise ValueError(f"grid {w}x{h} is not divisible by {factor}")
    if factor == 1:
        return g.astype(np.uint8)
    blocks = g.reshape(h // factor, factor, w // factor, factor).sum(axis=(1, 3))
    return (2 * blocks >= factor * factor).astype(np.uint8)


def multiscale_loss(preds, g, cfg: LossConfig = LossConfig()) -> float:
    """Weighted sum of per-scale Dice losses.

    ``preds[n]`` is compared with ``g`` downsampled by ``2**n`` (largest
    scale first).
    """
    preds = list(preds)
    if len(preds) != cfg.scales:
        raise ValueError(f"expected {cfg.scales} prediction grids, got {len(preds)}")
    total = 0.0
    for n, (pred, lam) in enumerate(zip(preds, cfg.weights)):
        total += lam * dice_loss(pred, downsample_label(g, 2 ** n), cfg.epsilon)
    return total


def finite_difference_grad(p, g, epsilon: float = 1.0, h: float = 1e-5) -> np.ndarray:
    """Central differences of :func:`dice_loss`, one pixel at a time.

    The two loss evaluations are done in exact rational arithmetic on the
    binary values of ``p``, ``h`` and ``epsilon``, so the only error left is
    the O(h^2) truncation of the difference quotient; float cancellation
    would otherwise swamp pixels whose derivative is tiny.
    Perturbed values are not clipped to ``[0, 1]``.
    """
    _check_eps(epsilon)
    p, g = _pair(p, g)
    eps = Fraction(epsilon)
    step = Fraction(h)
    ps = [Fraction(v) for v in p.ravel().tolist()]
    gs = [int(v) for v in g.ravel().tolist()]
    num0 = 2 * sum(pi for pi, gi in zip(ps, gs) if gi) + eps
    den0 = sum(pi * pi for pi in ps) + sum(gs) + eps
    out = np.empty(p.size)
    for i, (pi, gi) in enumerate(zip(ps, gs)):
        vals = []
        for q in (pi + step, pi - step):
            num = num0 + 2 * (q - pi) * gi
            den = den0 + q * q - pi * pi
            vals.append(1 - num / den)
        out[i] = float((vals[0] - vals[1]) / (2 * step))
    return out.reshape(p.shape)


def max_relative_error(analytic, numeric, floor: float = 1e-8) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / scale))

"""Segmentation scores, reconnection error and Otsu binarization."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .grid import BinaryMask, as_mask, as_prob

EVAL_SCHEMA = "prwalk.eval/1"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class RoiErrorRecord:
    roi_id: int
    tp: int
    fp: int

    @property
    def error(self) -> float:
        return self.fp / (self.tp + self.fp)


@dataclass
class EvalReport:
    confusion: ConfusionCounts
    acc: float | None
    sen: float | None
    spe: float | None
    auc: float | None = None
    err: float | None = None
    rois: list[RoiErrorRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": EVAL_SCHEMA,
            "acc": self.acc,
            "sen": self.sen,
            "spe": self.spe,
            "auc": self.auc,
            "err": self.err,
            "confusion": asdict(self.confusion),
            "rois": [asdict(r) for r in self.rois],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _region(region, shape):
    if region is None:
        return None
    r = as_mask(region)
    if r.shape != shape:
        raise ValueError(f"region shape {r.shape} does not match {shape}")
    return r


def confusion(pred, truth, region=None) -> ConfusionCounts:
    p = as_mask(pred)
    t = as_mask(truth)
    if p.shape != t.shape:
        raise ValueError(f"prediction shape {p.shape} does not match truth shape {t.shape}")
    r = _region(region, p.shape)
    if r is not None:
        p, t = p[r], t[r]
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = int(p.size - tp - fp - fn)
    return ConfusionCounts(tp, fp, tn, fn)


def acc_sen_spe(c: ConfusionCounts):
    """Accuracy, sensitivity, specificity; ``None`` where a denominator is zero."""
    acc = (c.tp + c.tn) / c.total if c.total else None
    sen = c.tp / (c.tp + c.fn) if c.tp + c.fn else None
    spe = c.tn / (c.tn + c.fp) if c.tn + c.fp else None
    return acc, sen, spe


def auc(prob, truth, region=None) -> float | None:
    """Area under the ROC curve, trapezoidal over every distinct score.

    Returns ``None`` when the region holds only one class.
    """
    s = as_prob(prob)
    t = as_mask(truth)
    if s.shape != t.shape:
        raise ValueError(f"score shape {s.shape} does not match truth shape {t.shape}")
    r = _region(region, s.shape)
    if r is not None:
        s, t = s[r], t[r]
    s = s.ravel()
    t = t.ravel()
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(-s, kind="stable")
    s, t = s[order], t[order]
    # last index of each run of equal scores
    cut = np.nonzero(np.diff(s))[0]
    ends = np.concatenate([cut, [s.size - 1]])
    tps = np.cumsum(t)[ends]
    fps = (ends + 1) - tps
    tpr = np.concatenate([[0.0], tps / n_pos])
    fpr = np.concatenate([[0.0], fps / n_neg])
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))


def err_metric(records) -> float:
    """Mean false-positive fraction over ROIs; 0 when no ROI stamped anything."""
    records = list(records)
    if not records:
        return 0.0
    for r in records:
        if r.tp + r.fp <= 0:
            raise ValueError(f"ROI {r.roi_id} has no stamped pixels")
    return sum(r.fp / (r.tp + r.fp) for r in records) / len(records)


def roi_error_records(report, truth) -> list[RoiErrorRecord]:
    """Score the stamped pixels of each ROI in a reconnect report against truth.

    ``report`` is a ``ReconnectReport`` or its JSON dict.
    """
    t = as_mask(truth)
    if hasattr(report, "to_dict"):
        report = report.to_dict()
    out = []
    for i, rec in enumerate(report["records"]):
        stamped = rec.get("stamped") or []
        if not stamped:
            continue
        xy = np.asarray(stamped, dtype=np.int64)
        hit = t[xy[:, 1], xy[:, 0]]
        tp = int(hit.sum())
        out.append(RoiErrorRecord(i, tp, len(xy) - tp))
    return out


# -- Otsu --------------------------------------------------------------------


def quantize(prob) -> np.ndarray:
    """Map ``[0, 1]`` values onto 256 bins, rounding half up."""
    return np.floor(as_prob(prob) * 255.0 + 0.5).astype(np.int64)


def otsu_bin(prob) -> int:
    """Histogram bin ``t`` such that bins ``<= t`` form the background class.

    Between-class variance is compared exactly (rational arithmetic); the
    first maximum wins.
    """
    q = quantize(prob).ravel()
    hist = np.bincount(q, minlength=256)
    if np.count_nonzero(hist) < 2:
        raise ValueError("Otsu threshold needs at least two distinct quantized values")
    levels = np.arange(256)
    n_total = int(hist.sum())
    s_total = int((hist * levels).sum())
    n0 = s0 = 0
    best = None
    best_t = -1
    for t in range(255):
        n0 += int(hist[t])
        s0 += int(hist[t]) * t
        n1 = n_total - n0
        if n0 == 0 or n1 == 0:
            continue
        s1 = s_total - s0
        # w0 w1 (mu0 - mu1)^2 up to the constant factor 1 / n_total^2
        score = Fraction((n1 * s0 - n0 * s1) ** 2, n0 * n1)
        if best is None or score > best:
            best = score
            best_t = t
    return best_t


def otsu_threshold(prob) -> float:
    """Threshold in ``[0, 1]``; foreground is ``value > threshold``."""
    return (otsu_bin(prob) + 0.5) / 255.0


def binarize(prob, threshold: float) -> BinaryMask:
    return BinaryMask(as_prob(prob) > threshold)


def evaluate(pred, truth, prob=None, report=None, region=None) -> EvalReport:
    c = confusion(pred, truth, region)
    acc, sen, spe = acc_sen_spe(c)
    out = EvalReport(c, acc, sen, spe)
    if prob is not None:
        out.auc = auc(prob, truth, region)
    if report is not None:
        out.rois = roi_error_records(report, truth)
        out.err = err_metric(out.rois)
    return out

"""Slow, obviously-correct reference implementations shared by the tests."""

from collections import deque

import numpy as np


def flood_fill_labels(mask, connectivity=8):
    """Breadth-first flood fill, labels in raster order of first pixel."""
    mask = np.asarray(mask, bool)
    h, w = mask.shape
    out = np.zeros((h, w), int)
    if connectivity == 8:
        steps = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dy or dx]
    else:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    n = 0
    for y in range(h):
        for x in range(w):
            if mask[y, x] and not out[y, x]:
                n += 1
                out[y, x] = n
                q = deque([(y, x)])
                while q:
                    cy, cx = q.popleft()
                    for dy, dx in steps:
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not out[ny, nx]:
                            out[ny, nx] = n
                            q.append((ny, nx))
    return out, n


def pairwise_auc(scores, labels):
    pos = scores[labels]
    neg = scores[~labels]
    wins = 0.0
    for a in pos:
        for b in neg:
            wins += 1.0 if a > b else 0.5 if a == b else 0.0
    return wins / (len(pos) * len(neg))


def scan_otsu(prob):
    """Try every split of the 256-bin histogram, variance in floats."""
    q = np.floor(np.asarray(prob) * 255 + 0.5).astype(int).ravel()
    best, best_t = -1.0, None
    for t in range(255):
        lo, hi = q[q <= t], q[q > t]
        if lo.size == 0 or hi.size == 0:
            continue
        w0, w1 = lo.size / q.size, hi.size / q.size
        v = w0 * w1 * (lo.mean() - hi.mean()) ** 2
        if v > best * (1 + 1e-12):
            best, best_t = v, t
    return best_t

"""Pure-NumPy backend for the hot kernels.

Selected with KDRP_BACKEND=numpy (or automatically when numba is absent).
Each function here must produce output bit-identical to its numba twin in
numba_impl; tests/test_backends.py enforces that.
"""

from __future__ import annotations

import numpy as np

from ..rng import SplitMix64
from .scalar import clamp_span, normal_cdf

name = "numpy"

# FAST circle of radius 3: 16 (dx, dy) offsets, clockwise from the top pixel.
FAST_OFFSETS = (
    (0, -3), (1, -3), (2, -2), (3, -1),
    (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1),
    (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)

FAST_BORDER = 3
FAST_ARC = 9
SCORE_SENTINEL = -1000


def fast_score_map(img: np.ndarray) -> np.ndarray:
    """Corner score for every pixel: the largest threshold at which the
    segment test still fires, minus one arc never fires => large negative.

    Returns an int32 map; border pixels (within 3 of an edge) hold
    SCORE_SENTINEL.
    """
    h, w = img.shape
    out = np.full((h, w), SCORE_SENTINEL, dtype=np.int32)
    hi = h - FAST_BORDER
    wi = w - FAST_BORDER
    if hi <= FAST_BORDER or wi <= FAST_BORDER:
        return out
    center = img[FAST_BORDER:hi, FAST_BORDER:wi].astype(np.int16)
    # d[k] = circle_k - center, per pixel
    d = np.empty((16,) + center.shape, dtype=np.int16)
    for k, (dx, dy) in enumerate(FAST_OFFSETS):
        d[k] = (
            img[FAST_BORDER + dy:hi + dy, FAST_BORDER + dx:wi + dx].astype(np.int16)
            - center
        )
    # min/max over every contiguous arc of 9 via min-of-3-of-min-of-3
    min3 = np.empty_like(d)
    max3 = np.empty_like(d)
    for s in range(16):
        min3[s] = np.minimum(np.minimum(d[s], d[(s + 1) % 16]), d[(s + 2) % 16])
        max3[s] = np.maximum(np.maximum(d[s], d[(s + 1) % 16]), d[(s + 2) % 16])
    bright_best = None
    dark_best = None
    for s in range(16):
        arc_min = np.minimum(
            np.minimum(min3[s], min3[(s + 3) % 16]), min3[(s + 6) % 16]
        )
        arc_max = np.maximum(
            np.maximum(max3[s], max3[(s + 3) % 16]), max3[(s + 6) % 16]
        )
        bright_best = arc_min if bright_best is None else np.maximum(bright_best, arc_min)
        dark_best = arc_max if dark_best is None else np.minimum(dark_best, arc_max)
    # brightest arc: all d > t  <=>  t <= min(d) - 1
    # darkest arc:   all d < -t <=>  t <= -max(d) - 1
    score = np.maximum(bright_best.astype(np.int32), -dark_best.astype(np.int32)) - 1
    out[FAST_BORDER:hi, FAST_BORDER:wi] = score
    return out


def shi_tomasi_response(img: np.ndarray) -> np.ndarray:
    """Minimum-eigenvalue corner response over 3x3 Sobel gradients summed in
    a 3x3 window.  Valid two pixels in from each edge; zero elsewhere."""
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.float64)
    if h < 5 or w < 5:
        return out
    p = img.astype(np.int64)
    # Sobel, valid at [1, h-1) x [1, w-1)
    gx = (
        (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:])
        - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
    )
    gy = (
        (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:])
        - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
    )
    xx = gx * gx
    yy = gy * gy
    xy = gx * gy

    def box3(m):
        return (
            m[:-2, :-2] + m[:-2, 1:-1] + m[:-2, 2:]
            + m[1:-1, :-2] + m[1:-1, 1:-1] + m[1:-1, 2:]
            + m[2:, :-2] + m[2:, 1:-1] + m[2:, 2:]
        )

    a = box3(xx).astype(np.float64)
    b = box3(xy).astype(np.float64)
    c = box3(yy).astype(np.float64)
    disc = np.sqrt((a - c) * (a - c) + 4.0 * (b * b))
    lam = 0.5 * ((a + c) - disc)
    np.maximum(lam, 0.0, out=lam)
    out[2:h - 2, 2:w - 2] = lam
    return out


def greedy_min_distance(ys: np.ndarray, xs: np.ndarray, min_distance: float,
                        max_corners: int) -> np.ndarray:
    """Select candidate indices in input order, skipping any candidate closer
    than min_distance (Euclidean) to one already selected."""
    md2 = min_distance * min_distance
    sel_y = np.empty(max_corners, dtype=np.float64)
    sel_x = np.empty(max_corners, dtype=np.float64)
    chosen = []
    count = 0
    for i in range(ys.shape[0]):
        if count:
            dy = sel_y[:count] - ys[i]
            dx = sel_x[:count] - xs[i]
            if float(np.min(dy * dy + dx * dx)) < md2:
                continue
        sel_y[count] = ys[i]
        sel_x[count] = xs[i]
        chosen.append(i)
        count += 1
        if count >= max_corners:
            break
    return np.asarray(chosen, dtype=np.int64)


def nms_keep(boxes: np.ndarray, probs: np.ndarray, alpha: float) -> np.ndarray:
    """Greedy suppression over detections already sorted best-first.

    boxes is (n, 4) int64 rows (x, y, w, h); returns a bool keep mask.
    A detection is kept iff its IoU with every earlier kept one is <= alpha.
    """
    n = boxes.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    alive = np.ones(n, dtype=np.bool_)
    x0 = boxes[:, 0].astype(np.float64)
    y0 = boxes[:, 1].astype(np.float64)
    x1 = x0 + boxes[:, 2]
    y1 = y0 + boxes[:, 3]
    area = boxes[:, 2].astype(np.float64) * boxes[:, 3]
    for i in range(n):
        if not alive[i]:
            continue
        keep[i] = True
        if i + 1 >= n:
            break
        iw = np.minimum(x1[i], x1[i + 1:]) - np.maximum(x0[i], x0[i + 1:])
        ih = np.minimum(y1[i], y1[i + 1:]) - np.maximum(y0[i], y0[i + 1:])
        np.maximum(iw, 0.0, out=iw)
        np.maximum(ih, 0.0, out=ih)
        inter = iw * ih
        iou = inter / (area[i] + area[i + 1:] - inter)
        alive[i + 1:] &= ~(iou > alpha)
    return keep


def kdrp_sample(cum: np.ndarray, width: int, height: int, min_side: int,
                needed: int, max_attempts: int, mean: float, std: float,
                normalize: bool, cell_area: float, seed: int):
    """Stochastic region sampling: draw random rectangles and accept each with
    probability equal to the normal-CDF percentile of its keypoint count
    against the 256-cell density baseline.

    Draw order per candidate: x1, x2, y1, y2, then one acceptance uniform.
    Returns (regions (needed, 4) int64, attempts, exhausted flag).
    """
    rng = SplitMix64(seed)
    out = np.zeros((needed, 4), dtype=np.int64)
    count = 0
    attempts = 0
    while count < needed:
        if attempts >= max_attempts:
            return out[:count].copy(), attempts, True
        xa = rng.next_below(width)
        xb = rng.next_below(width)
        ya = rng.next_below(height)
        yb = rng.next_below(height)
        attempts += 1
        xlo, xhi = (xa, xb) if xa <= xb else (xb, xa)
        ylo, yhi = (ya, yb) if ya <= yb else (yb, ya)
        x, rw = clamp_span(xlo, xhi, width, min_side)
        y, rh = clamp_span(ylo, yhi, height, min_side)
        c = int(cum[y + rh, x + rw]) - int(cum[y, x + rw]) \
            - int(cum[y + rh, x]) + int(cum[y, x])
        if normalize:
            eff = (float(c) * cell_area) / float(rw * rh)
        else:
            eff = float(c)
        if std == 0.0:
            z = 0.0
        else:
            z = (eff - mean) / std
        p = normal_cdf(z)
        u = rng.next_float()
        if u < p:
            out[count, 0] = x
            out[count, 1] = y
            out[count, 2] = rw
            out[count, 3] = rh
            count += 1
    return out, attempts, False

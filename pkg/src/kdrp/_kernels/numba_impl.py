"""numba backend for the hot kernels (the default when numba imports).

Outputs are bit-identical to numpy_impl: integer work is exact, float
expressions are written in the same order, and the PRNG is the same
SplitMix64 stream realized in wrapping uint64 arithmetic.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from . import scalar
from .numpy_impl import FAST_BORDER, FAST_OFFSETS, SCORE_SENTINEL

name = "numba"

_JIT = {"cache": True, "nogil": True}

_U_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_U_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_U_MIX2 = np.uint64(0x94D049BB133111EB)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_INV_2_53 = 1.0 / 9007199254740992.0

_OFF_X = np.array([o[0] for o in FAST_OFFSETS], dtype=np.int64)
_OFF_Y = np.array([o[1] for o in FAST_OFFSETS], dtype=np.int64)

_normal_cdf = njit(**_JIT)(scalar.normal_cdf)
_clamp_span = njit(**_JIT)(scalar.clamp_span)


@njit(**_JIT)
def _sm64_next(state):
    state = state + _U_GAMMA
    z = state
    z = (z ^ (z >> _U30)) * _U_MIX1
    z = (z ^ (z >> _U27)) * _U_MIX2
    return state, z ^ (z >> _U31)


@njit(**_JIT)
def fast_score_map(img):
    h, w = img.shape
    out = np.full((h, w), SCORE_SENTINEL, dtype=np.int32)
    if h < 2 * FAST_BORDER + 1 or w < 2 * FAST_BORDER + 1:
        return out
    d = np.empty(16, dtype=np.int64)
    for y in range(FAST_BORDER, h - FAST_BORDER):
        for x in range(FAST_BORDER, w - FAST_BORDER):
            c = np.int64(img[y, x])
            for k in range(16):
                d[k] = np.int64(img[y + _OFF_Y[k], x + _OFF_X[k]]) - c
            best = np.int64(-512)
            for s in range(16):
                arc_min = d[s]
                arc_max = d[s]
                for j in range(1, 9):
                    v = d[(s + j) % 16]
                    if v < arc_min:
                        arc_min = v
                    if v > arc_max:
                        arc_max = v
                if arc_min > best:
                    best = arc_min
                if -arc_max > best:
                    best = -arc_max
            out[y, x] = best - 1
    return out


@njit(**_JIT)
def shi_tomasi_response(img):
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.float64)
    if h < 5 or w < 5:
        return out
    gx = np.zeros((h, w), dtype=np.int64)
    gy = np.zeros((h, w), dtype=np.int64)
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            gx[y, x] = (
                np.int64(img[y - 1, x + 1]) + 2 * np.int64(img[y, x + 1])
                + np.int64(img[y + 1, x + 1])
                - np.int64(img[y - 1, x - 1]) - 2 * np.int64(img[y, x - 1])
                - np.int64(img[y + 1, x - 1])
            )
            gy[y, x] = (
                np.int64(img[y + 1, x - 1]) + 2 * np.int64(img[y + 1, x])
                + np.int64(img[y + 1, x + 1])
                - np.int64(img[y - 1, x - 1]) - 2 * np.int64(img[y - 1, x])
                - np.int64(img[y - 1, x + 1])
            )
    for y in range(2, h - 2):
        for x in range(2, w - 2):
            a = np.int64(0)
            b = np.int64(0)
            c = np.int64(0)
            for dy in range(-1, 2):
                for dx in range(-1, 2):
                    ix = gx[y + dy, x + dx]
                    iy = gy[y + dy, x + dx]
                    a += ix * ix
                    b += ix * iy
                    c += iy * iy
            af = np.float64(a)
            bf = np.float64(b)
            cf = np.float64(c)
            disc = np.sqrt((af - cf) * (af - cf) + 4.0 * (bf * bf))
            lam = 0.5 * ((af + cf) - disc)
            if lam < 0.0:
                lam = 0.0
            out[y, x] = lam
    return out


@njit(**_JIT)
def greedy_min_distance(ys, xs, min_distance, max_corners):
    md2 = min_distance * min_distance
    n = ys.shape[0]
    chosen = np.empty(n if n < max_corners else max_corners, dtype=np.int64)
    count = 0
    for i in range(n):
        ok = True
        for j in range(count):
            k = chosen[j]
            dy = np.float64(ys[k] - ys[i])
            dx = np.float64(xs[k] - xs[i])
            if dy * dy + dx * dx < md2:
                ok = False
                break
        if ok:
            chosen[count] = i
            count += 1
            if count >= max_corners:
                break
    return chosen[:count].copy()


@njit(**_JIT)
def nms_keep(boxes, probs, alpha):
    n = boxes.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    alive = np.ones(n, dtype=np.bool_)
    for i in range(n):
        if not alive[i]:
            continue
        keep[i] = True
        xi0 = np.float64(boxes[i, 0])
        yi0 = np.float64(boxes[i, 1])
        xi1 = xi0 + np.float64(boxes[i, 2])
        yi1 = yi0 + np.float64(boxes[i, 3])
        ai = np.float64(boxes[i, 2]) * np.float64(boxes[i, 3])
        for j in range(i + 1, n):
            if not alive[j]:
                continue
            xj0 = np.float64(boxes[j, 0])
            yj0 = np.float64(boxes[j, 1])
            xj1 = xj0 + np.float64(boxes[j, 2])
            yj1 = yj0 + np.float64(boxes[j, 3])
            iw = min(xi1, xj1) - max(xi0, xj0)
            if iw < 0.0:
                iw = 0.0
            ih = min(yi1, yj1) - max(yi0, yj0)
            if ih < 0.0:
                ih = 0.0
            inter = iw * ih
            aj = np.float64(boxes[j, 2]) * np.float64(boxes[j, 3])
            iou = inter / (ai + aj - inter)
            if iou > alpha:
                alive[j] = False
    return keep


@njit(**_JIT)
def _kdrp_sample_jit(cum, width, height, min_side, needed, max_attempts, mean,
                     std, normalize, cell_area, seed):
    state = np.uint64(seed)
    uw = np.uint64(width)
    uh = np.uint64(height)
    out = np.zeros((needed, 4), dtype=np.int64)
    count = 0
    attempts = 0
    while count < needed:
        if attempts >= max_attempts:
            return out[:count].copy(), attempts, True
        state, r = _sm64_next(state)
        xa = np.int64(r % uw)
        state, r = _sm64_next(state)
        xb = np.int64(r % uw)
        state, r = _sm64_next(state)
        ya = np.int64(r % uh)
        state, r = _sm64_next(state)
        yb = np.int64(r % uh)
        attempts += 1
        if xa <= xb:
            xlo, xhi = xa, xb
        else:
            xlo, xhi = xb, xa
        if ya <= yb:
            ylo, yhi = ya, yb
        else:
            ylo, yhi = yb, ya
        x, rw = _clamp_span(xlo, xhi, width, min_side)
        y, rh = _clamp_span(ylo, yhi, height, min_side)
        c = cum[y + rh, x + rw] - cum[y, x + rw] - cum[y + rh, x] + cum[y, x]
        if normalize:
            eff = (np.float64(c) * cell_area) / np.float64(rw * rh)
        else:
            eff = np.float64(c)
        if std == 0.0:
            z = 0.0
        else:
            z = (eff - mean) / std
        p = _normal_cdf(z)
        state, r = _sm64_next(state)
        u = np.float64(r >> _U11) * _INV_2_53
        if u < p:
            out[count, 0] = x
            out[count, 1] = y
            out[count, 2] = rw
            out[count, 3] = rh
            count += 1
    return out, attempts, False


def kdrp_sample(cum, width, height, min_side, needed, max_attempts, mean,
                std, normalize, cell_area, seed):
    # seeds use the full 64-bit range; a plain int >= 2**63 would not fit
    # the int64 numba infers, so the cast happens here at the boundary
    return _kdrp_sample_jit(cum, width, height, min_side, needed,
                            max_attempts, mean, std, normalize, cell_area,
                            np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF))

"""Corner keypoint detectors and an integral-count index.

Two detectors share one contract: FAST (radius-3 segment test, arc of 9)
and Shi-Tomasi (minimum eigenvalue of the 3x3-summed structure tensor).
Both are deterministic and return keypoints in a fixed order.  The index
turns rectangle keypoint counting into four prefix-sum lookups.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels.numpy_impl import FAST_BORDER
from .image import Image, Region

__all__ = [
    "Keypoint",
    "FastConfig",
    "ShiTomasiConfig",
    "KeypointIndex",
    "detect_fast",
    "detect_shi_tomasi",
    "detect_all",
    "build_index",
    "count_in",
    "keypoints_to_dicts",
    "keypoints_from_dicts",
]

FAST_TAG = "fast"
SHI_TOMASI_TAG = "shi_tomasi"


@dataclass(frozen=True)
class Keypoint:
    """Pixel location plus the tag of the detector that produced it."""

    x: int
    y: int
    detector: str


@dataclass(frozen=True)
class FastConfig:
    threshold: int = 20
    nonmax: bool = True

    def __post_init__(self) -> None:
        if self.threshold < 1:
            raise ValueError("threshold must be >= 1")


@dataclass(frozen=True)
class ShiTomasiConfig:
    max_corners: int = 2000
    quality: float = 0.01
    min_distance: float = 5.0

    def __post_init__(self) -> None:
        if self.max_corners <= 0:
            raise ValueError("max_corners must be positive")
        if not 0.0 < self.quality <= 1.0:
            raise ValueError("quality must be in (0, 1]")
        if self.min_distance < 0.0:
            raise ValueError("min_distance must be non-negative")


def detect_fast(image: Image, threshold: int = 20, nonmax: bool = True) -> list[Keypoint]:
    """FAST segment-test corners, row-major.

    A pixel is a corner when 9 contiguous circle pixels are all brighter
    than center+threshold or all darker than center-threshold.  With nonmax,
    only strict 3x3 local maxima of the corner score survive.  Pixels within
    3 of a border are never evaluated.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    if image.width < 2 * FAST_BORDER + 1 or image.height < 2 * FAST_BORDER + 1:
        raise ValueError(
            "image must be at least 7x7 for the radius-3 circle, got %dx%d"
            % (image.width, image.height)
        )
    score = _kernels.fast_score_map(image.pixels)
    corner = score >= threshold
    if nonmax:
        # strict local max over the 8-neighborhood; borders padded low
        padded = np.pad(score, 1, mode="constant", constant_values=np.iinfo(np.int32).min)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dy == 0 and dx == 0:
                    continue
                h, w = score.shape
                corner &= score > padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
    ys, xs = np.nonzero(corner)
    return [Keypoint(int(x), int(y), FAST_TAG) for y, x in zip(ys, xs)]


def detect_shi_tomasi(
    image: Image,
    max_corners: int = 2000,
    quality: float = 0.01,
    min_distance: float = 5.0,
) -> list[Keypoint]:
    """Minimum-eigenvalue corners, strongest first.

    Pixels with response >= quality * (global max response) are candidates;
    candidates are taken in descending response order (ties row-major),
    skipping any within min_distance of an already-taken corner, until
    max_corners.  A zero global max yields no corners.
    """
    if max_corners <= 0:
        raise ValueError("max_corners must be positive")
    if not 0.0 < quality <= 1.0:
        raise ValueError("quality must be in (0, 1]")
    if image.width < 5 or image.height < 5:
        raise ValueError(
            "image must be at least 5x5 for Sobel + 3x3 aggregation, got %dx%d"
            % (image.width, image.height)
        )
    resp = _kernels.shi_tomasi_response(image.pixels)
    gmax = float(resp.max())
    if gmax <= 0.0:
        return []
    ys, xs = np.nonzero(resp >= quality * gmax)
    values = resp[ys, xs]
    order = np.lexsort((xs, ys, -values))
    ys = ys.astype(np.int64)[order]
    xs = xs.astype(np.int64)[order]
    picked = _kernels.greedy_min_distance(ys, xs, float(min_distance), int(max_corners))
    return [Keypoint(int(xs[i]), int(ys[i]), SHI_TOMASI_TAG) for i in picked]


def detect_all(
    image: Image, detectors: list[FastConfig | ShiTomasiConfig]
) -> list[Keypoint]:
    """Concatenation of every configured detector's output, in detector
    order.  Duplicate locations across detectors are kept: each occurrence
    adds density mass."""
    if not detectors:
        raise ValueError("at least one detector must be configured")
    out: list[Keypoint] = []
    for det in detectors:
        if isinstance(det, FastConfig):
            out.extend(detect_fast(image, det.threshold, det.nonmax))
        elif isinstance(det, ShiTomasiConfig):
            out.extend(
                detect_shi_tomasi(
                    image, det.max_corners, det.quality, det.min_distance
                )
            )
        else:
            raise TypeError("unknown detector config %r" % (det,))
    return out


@dataclass(frozen=True)
class KeypointIndex:
    """Prefix-sum grid over keypoint counts.

    cumulative[r, c] = number of keypoints with y < r and x < c, so any
    half-open rectangle count is four lookups.  Shape (height+1, width+1).
    """

    width: int
    height: int
    total: int
    cumulative: np.ndarray = field(repr=False)


def build_index(width: int, height: int, keypoints: list[Keypoint]) -> KeypointIndex:
    """Index keypoints for O(1) rectangle counting; multiplicity is kept."""
    if width <= 0 or height <= 0:
        raise ValueError("index dimensions must be positive")
    grid = np.zeros((height, width), dtype=np.int64)
    for kp in keypoints:
        if not (0 <= kp.x < width and 0 <= kp.y < height):
            raise ValueError(
                "keypoint (%d, %d) outside %dx%d" % (kp.x, kp.y, width, height)
            )
        grid[kp.y, kp.x] += 1
    cum = np.zeros((height + 1, width + 1), dtype=np.int64)
    np.cumsum(np.cumsum(grid, axis=0), axis=1, out=cum[1:, 1:])
    cum.setflags(write=False)
    return KeypointIndex(width, height, len(keypoints), cum)


def count_in(index: KeypointIndex, region: Region) -> int:
    """Exact keypoint count inside the half-open rectangle, O(1)."""
    region.validate(index.width, index.height)
    c = index.cumulative
    x0, y0 = region.x, region.y
    x1, y1 = region.x + region.w, region.y + region.h
    return int(c[y1, x1] - c[y0, x1] - c[y1, x0] + c[y0, x0])


def keypoints_to_dicts(keypoints: list[Keypoint]) -> list[dict]:
    return [{"x": k.x, "y": k.y, "detector": k.detector} for k in keypoints]


def keypoints_from_dicts(rows: list[dict]) -> list[Keypoint]:
    return [Keypoint(int(r["x"]), int(r["y"]), str(r["detector"])) for r in rows]

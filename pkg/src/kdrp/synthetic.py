"""Synthetic dataset generator: keypoint-rich rectangles on smooth ground.

Backgrounds are flat or gently ramped (no corner structure); objects are
speckle-filled rectangles whose high contrast makes dense keypoints, so
ground truth and keypoint density coincide by construction.  Everything is
drawn from one seeded PRNG in a fixed order: byte-identical datasets per
(spec, seed).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .evaluation import DatasetManifest, GroundTruthBox, ManifestEntry, save_manifest
from .image import Image, Region, encode_pgm
from .rng import MASK64, SplitMix64, derive_seed

__all__ = ["SynthSpec", "render_image", "place_objects", "generate_synthetic"]

# objects keep this many pixels of clearance from each other
_GAP = 8
_PLACEMENT_TRIES = 100


@dataclass(frozen=True)
class SynthSpec:
    images: int = 8
    width: int = 512
    height: int = 512
    min_objects: int = 0
    max_objects: int = 3
    n_classes: int = 3
    texture_density: float = 0.25
    min_size: int = 32
    max_size: int = 96
    align: int | None = None
    gradient: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.images < 0:
            raise ValueError("images must be >= 0")
        if self.width < 16 or self.height < 16:
            raise ValueError("images must be at least 16x16")
        if not 0 <= self.min_objects <= self.max_objects:
            raise ValueError("need 0 <= min_objects <= max_objects")
        if self.n_classes < 1:
            raise ValueError("n_classes must be >= 1")
        if not 0.0 < self.texture_density < 1.0:
            raise ValueError("texture_density must lie in (0, 1)")
        if not 1 <= self.min_size <= self.max_size:
            raise ValueError("need 1 <= min_size <= max_size")
        if self.max_size > min(self.width, self.height):
            raise ValueError("max_size cannot exceed the image side")
        if self.align is not None and self.align < 1:
            raise ValueError("align must be >= 1 when given")
        object.__setattr__(self, "seed", int(self.seed) & MASK64)


def _background(width: int, height: int, gradient: bool) -> np.ndarray:
    if not gradient:
        return np.full((height, width), 128, dtype=np.uint8)
    # integer ramps, max step 1 per pixel: smooth enough to carry no corners
    xs = (80 * np.arange(width, dtype=np.int64)) // max(1, width - 1)
    ys = (40 * np.arange(height, dtype=np.int64)) // max(1, height - 1)
    return (60 + ys[:, None] + xs[None, :]).astype(np.uint8)


def render_image(
    width: int,
    height: int,
    boxes: list[GroundTruthBox],
    rng: SplitMix64,
    texture_density: float = 0.25,
    gradient: bool = True,
) -> Image:
    """Draw speckle-filled object rectangles over the background.

    Each box consumes exactly w*h uniforms, in box order: a pixel goes
    bright (255) when its uniform falls below texture_density, dark (20)
    otherwise.
    """
    canvas = _background(width, height, gradient)
    for gt in boxes:
        r = gt.region.validate(width, height)
        u = rng.next_array_float(r.w * r.h).reshape(r.h, r.w)
        patch = np.where(u < texture_density, 255, 20).astype(np.uint8)
        canvas[r.y:r.y + r.h, r.x:r.x + r.w] = patch
    return Image(width, height, canvas)


def _separated(a: Region, b: Region, gap: int) -> bool:
    return (
        a.x + a.w + gap <= b.x
        or b.x + b.w + gap <= a.x
        or a.y + a.h + gap <= b.y
        or b.y + b.h + gap <= a.y
    )


def place_objects(spec: SynthSpec, rng: SplitMix64) -> list[GroundTruthBox]:
    """Sample non-overlapping object boxes (>= 8 px apart).

    Draw order per image: object count, then per object (per try) width,
    height, x, y, class.  A placement that cannot avoid existing boxes
    after 100 tries is dropped, so images may hold fewer objects than drawn.
    """
    span = spec.max_objects - spec.min_objects + 1
    target = spec.min_objects + rng.next_below(span)
    placed: list[GroundTruthBox] = []
    for _ in range(target):
        for _ in range(_PLACEMENT_TRIES):
            size_span = spec.max_size - spec.min_size + 1
            w = spec.min_size + rng.next_below(size_span)
            h = spec.min_size + rng.next_below(size_span)
            if spec.align is not None:
                a = spec.align
                x = a * rng.next_below((spec.width - w) // a + 1)
                y = a * rng.next_below((spec.height - h) // a + 1)
            else:
                x = rng.next_below(spec.width - w + 1)
                y = rng.next_below(spec.height - h + 1)
            cls = 1 + rng.next_below(spec.n_classes)
            region = Region(x, y, w, h)
            if all(_separated(region, p.region, _GAP) for p in placed):
                placed.append(GroundTruthBox(region, cls))
                break
    return placed


def generate_synthetic(out_dir: str, spec: SynthSpec) -> DatasetManifest:
    """Write PGM images plus manifest.jsonl and classes.json under out_dir.

    Image i draws everything from a child seed derived from (seed, i), so
    a given (spec, seed) pair regenerates byte-identical files and the
    result is insensitive to image order.
    """
    os.makedirs(out_dir, exist_ok=True)
    entries: list[ManifestEntry] = []
    for i in range(spec.images):
        rng = SplitMix64(derive_seed(spec.seed, i))
        boxes = place_objects(spec, rng)
        image = render_image(
            spec.width, spec.height, boxes, rng, spec.texture_density, spec.gradient
        )
        name = "img_%04d.pgm" % i
        path = os.path.join(out_dir, name)
        with open(path, "wb") as f:
            f.write(encode_pgm(image))
        entries.append(ManifestEntry(path, tuple(boxes)))
    class_names = ["class_%d" % c for c in range(1, spec.n_classes + 1)]
    save_manifest(out_dir, entries, class_names)
    return DatasetManifest(tuple(entries), tuple(class_names))

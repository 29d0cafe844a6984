"""Region scoring, per-class non-maximum suppression, hypothesis selection.

The scorer is pluggable: an oracle that scores against ground truth (test
scaffolding with controllable noise), a seeded uniform simplex draw, or a
precomputed score table replayed from JSON.  Every stage is a pure function
with total tie-breaking, so identical inputs give identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .image import Image, Region
from .rng import MASK64, SplitMix64

__all__ = [
    "ClassScores",
    "Detection",
    "ScorerSpec",
    "iou",
    "score",
    "to_detections",
    "nms",
    "select_topk",
    "select_threshold",
    "parse_selection",
    "load_score_table",
    "ScoreTableError",
]

SCORER_KINDS = ("oracle", "uniform-random", "external-file")
SUM_TOLERANCE = 1e-6


class ScoreTableError(ValueError):
    """The external score table is malformed or missing a requested region."""


def iou(a: Region, b: Region) -> float:
    """Intersection over union of two half-open rectangles, in [0, 1]."""
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    return inter / union


@dataclass(frozen=True)
class ClassScores:
    """Probability vector of length n+1; index 0 is the background class."""

    probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probabilities)
        if len(probs) < 2:
            raise ValueError("need background plus at least one class")
        if any(p < 0.0 or p > 1.0 for p in probs):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(sum(probs) - 1.0) > SUM_TOLERANCE:
            raise ValueError("probabilities must sum to 1 within 1e-6")
        object.__setattr__(self, "probabilities", probs)

    @property
    def n_classes(self) -> int:
        return len(self.probabilities) - 1


@dataclass(frozen=True)
class Detection:
    """A region claimed to hold an object of class_id with this confidence."""

    region: Region
    class_id: int
    probability: float

    def __post_init__(self) -> None:
        if self.class_id < 1:
            raise ValueError("class_id must be >= 1 (0 is background)")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must lie in [0, 1]")


@dataclass(frozen=True)
class ScorerSpec:
    """Which scorer to run.

    oracle: scores each region by its best IoU against ground truth, plus
    uniform noise in [-noise, +noise] (noise < 0.5 so a perfect box cannot
    be pushed below a disjoint one).  uniform-random: a seeded draw from the
    probability simplex.  external-file: probabilities replayed from a JSON
    table keyed by region coordinates.
    """

    kind: str
    noise: float = 0.0
    seed: int = 0
    path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in SCORER_KINDS:
            raise ValueError(
                "scorer kind must be one of %s, got %r" % (", ".join(SCORER_KINDS), self.kind)
            )
        if not 0.0 <= self.noise < 0.5:
            raise ValueError("noise amplitude must lie in [0, 0.5)")
        if self.kind == "external-file" and not self.path:
            raise ValueError("external-file scorer requires a path")
        object.__setattr__(self, "seed", int(self.seed) & MASK64)


def _truth_pairs(truth) -> list[tuple[Region, int]]:
    out = []
    for t in truth:
        if isinstance(t, tuple):
            region, cls = t
        else:
            region, cls = t.region, t.class_id
        out.append((region, int(cls)))
    return out


def load_score_table(path: str) -> dict[tuple[int, int, int, int], tuple[float, ...]]:
    """Read an external score table: a JSON array of {x,y,w,h,probabilities}."""
    with open(path, "r", encoding="utf-8") as f:
        rows = json.load(f)
    if not isinstance(rows, list):
        raise ScoreTableError("score table must be a JSON array")
    table: dict[tuple[int, int, int, int], tuple[float, ...]] = {}
    width = None
    for row in rows:
        try:
            key = (int(row["x"]), int(row["y"]), int(row["w"]), int(row["h"]))
            probs = tuple(float(p) for p in row["probabilities"])
        except (KeyError, TypeError) as exc:
            raise ScoreTableError("malformed score table row: %r" % (row,)) from exc
        if width is None:
            width = len(probs)
        elif len(probs) != width:
            raise ScoreTableError("score table rows disagree on class count")
        table[key] = probs
    return table


def score(
    spec: ScorerSpec,
    image: Image,
    regions: list[Region],
    truth=None,
    n_classes: int | None = None,
) -> list[ClassScores]:
    """Class probabilities for each region, aligned with the input order."""
    for r in regions:
        r.validate(image.width, image.height)
    if spec.kind == "oracle":
        if truth is None:
            raise ValueError("oracle scorer requires ground truth")
        pairs = _truth_pairs(truth)
        if n_classes is None:
            n_classes = max((c for _, c in pairs), default=1)
        rng = SplitMix64(spec.seed)
        out = []
        for r in regions:
            best_iou = 0.0
            best_cls = 0
            for g, cls in pairs:
                v = iou(r, g)
                if v > best_iou:
                    best_iou = v
                    best_cls = cls
            u = rng.next_float()  # one draw per region, used or not
            probs = [0.0] * (n_classes + 1)
            if best_cls == 0:
                probs[0] = 1.0
            else:
                noise = (2.0 * u - 1.0) * spec.noise
                p = best_iou + noise
                p = 0.0 if p < 0.0 else (1.0 if p > 1.0 else p)
                probs[best_cls] = p
                probs[0] = 1.0 - p
            out.append(ClassScores(tuple(probs)))
        return out
    if spec.kind == "uniform-random":
        if n_classes is None or n_classes < 1:
            raise ValueError("uniform-random scorer requires n_classes >= 1")
        rng = SplitMix64(spec.seed)
        out = []
        for _ in regions:
            cuts = sorted(rng.next_float() for _ in range(n_classes))
            edges = [0.0] + cuts + [1.0]
            probs = tuple(edges[i + 1] - edges[i] for i in range(n_classes + 1))
            out.append(ClassScores(probs))
        return out
    # external-file
    table = load_score_table(spec.path)
    out = []
    for r in regions:
        key = (r.x, r.y, r.w, r.h)
        if key not in table:
            raise ScoreTableError(
                "score table has no entry for region x=%d y=%d w=%d h=%d" % key
            )
        out.append(ClassScores(table[key]))
    return out


def to_detections(regions: list[Region], scores: list[ClassScores]) -> list[Detection]:
    """One detection per region: the most probable non-background class,
    ties to the lowest class id."""
    if len(regions) != len(scores):
        raise ValueError("regions and scores must align")
    dets = []
    for r, s in zip(regions, scores):
        probs = s.probabilities
        best = 1
        for c in range(2, len(probs)):
            if probs[c] > probs[best]:
                best = c
        dets.append(Detection(r, best, probs[best]))
    return dets


def _class_key(d: Detection):
    return (-d.probability, d.region.y, d.region.x, d.region.h, d.region.w)


def _global_key(d: Detection):
    return (-d.probability, d.region.y, d.region.x, d.region.h, d.region.w, d.class_id)


def nms(detections: list[Detection], alpha: float) -> list[Detection]:
    """Per-class greedy suppression.

    Within a class, detections are visited in descending probability (ties
    by region coordinates); one is kept iff its IoU with every kept
    detection of that class is <= alpha.  Classes never suppress each other.
    Output is globally sorted by descending probability.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    by_class: dict[int, list[Detection]] = {}
    for d in detections:
        by_class.setdefault(d.class_id, []).append(d)
    survivors: list[Detection] = []
    for cls in sorted(by_class):
        dets = sorted(by_class[cls], key=_class_key)
        boxes = np.array(
            [(d.region.x, d.region.y, d.region.w, d.region.h) for d in dets],
            dtype=np.int64,
        ).reshape(len(dets), 4)
        probs = np.array([d.probability for d in dets], dtype=np.float64)
        keep = _kernels.nms_keep(boxes, probs, float(alpha))
        survivors.extend(d for d, k in zip(dets, keep) if k)
    return sorted(survivors, key=_global_key)


def select_topk(detections: list[Detection], k: int) -> list[Detection]:
    """The k most probable detections (ties as in nms); all if fewer."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return sorted(detections, key=_global_key)[:k]


def select_threshold(detections: list[Detection], p_min: float = 0.88) -> list[Detection]:
    """Detections with probability strictly above p_min, order preserved."""
    if not 0.0 <= p_min <= 1.0:
        raise ValueError("p_min must lie in [0, 1]")
    return [d for d in detections if d.probability > p_min]


def parse_selection(text: str) -> tuple[str, float]:
    """Parse a selection mode string: 'topk:K' or 'threshold:P'."""
    mode, sep, arg = text.partition(":")
    if not sep:
        raise ValueError("selection must look like topk:K or threshold:P")
    if mode == "topk":
        k = int(arg)
        if k < 0:
            raise ValueError("topk count must be >= 0")
        return ("topk", float(k))
    if mode == "threshold":
        p = float(arg)
        if not 0.0 <= p <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        return ("threshold", p)
    raise ValueError("unknown selection mode %r" % mode)

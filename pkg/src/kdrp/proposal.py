"""Density-guided stochastic region proposal plus uniform and grid baselines.

The proposer measures keypoint density over a fixed 16x16 cell grid (256
cells), then draws random rectangles and accepts each with probability
equal to the normal-CDF percentile of its keypoint count against the cell
statistics.  A candidate costs five PRNG draws: x1, x2, y1, y2, then one
acceptance uniform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import scalar
from .image import Image, Region
from .keypoints import Keypoint, KeypointIndex, build_index, count_in
from .rng import MASK64, SplitMix64

__all__ = [
    "DensityStats",
    "ProposalConfig",
    "ProposalSet",
    "AttemptBudgetError",
    "density_baseline",
    "z_to_percentile",
    "candidate_region",
    "binomial_trial",
    "propose",
    "propose_uniform",
    "propose_grid",
    "proposal_set_to_dict",
    "proposal_set_from_dict",
    "save_proposals",
    "load_proposals",
]

GRID_CELLS_PER_SIDE = 16
GRID_CELL_COUNT = GRID_CELLS_PER_SIDE * GRID_CELLS_PER_SIDE


@dataclass(frozen=True)
class DensityStats:
    """Keypoint counts over the 256 baseline cells.

    cell_counts is row-major over the 16x16 grid (cell index = row*16+col).
    std_dev is the population standard deviation.  cell_area is the exact
    average cell area width*height/256 in square pixels.
    """

    cell_counts: np.ndarray = field(repr=False)
    mean: float
    std_dev: float
    cell_area: float

    def __post_init__(self) -> None:
        counts = np.asarray(self.cell_counts, dtype=np.int64)
        if counts.shape != (GRID_CELL_COUNT,):
            raise ValueError("cell_counts must hold exactly 256 entries")
        counts = counts.copy()
        counts.setflags(write=False)
        object.__setattr__(self, "cell_counts", counts)
        if self.std_dev < 0.0:
            raise ValueError("std_dev cannot be negative")


@dataclass(frozen=True)
class ProposalConfig:
    regions_needed: int = 2250
    min_region_side: int = 16
    max_attempts_factor: int = 1000
    density_normalization: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.regions_needed < 1:
            raise ValueError("regions_needed must be >= 1")
        if self.min_region_side < 1:
            raise ValueError("min_region_side must be >= 1")
        if self.max_attempts_factor < 2:
            raise ValueError("max_attempts_factor must be >= 2")
        object.__setattr__(self, "seed", int(self.seed) & MASK64)


@dataclass(frozen=True)
class ProposalSet:
    """Proposer output: the regions, the seed that produced them (None for
    the deterministic grid), candidate draws consumed, and the density
    statistics when the density proposer ran."""

    regions: tuple[Region, ...]
    seed: int | None
    attempts: int
    stats: DensityStats | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "regions", tuple(self.regions))


class AttemptBudgetError(RuntimeError):
    """The candidate budget ran out before enough regions were accepted."""

    def __init__(self, accepted: int, needed: int, attempts: int) -> None:
        super().__init__(
            "accepted %d of %d regions after exhausting %d candidate draws"
            % (accepted, needed, attempts)
        )
        self.accepted = accepted
        self.needed = needed
        self.attempts = attempts


def density_baseline(index: KeypointIndex) -> DensityStats:
    """Keypoint count statistics over a 16x16 partition of the image.

    Cell (row j, col i) spans columns [floor(i*w/16), floor((i+1)*w/16)) and
    rows likewise, so the 256 cells tile the image exactly.  Mean and
    population std come from exact integer sums.
    """
    w, h = index.width, index.height
    if w < GRID_CELLS_PER_SIDE or h < GRID_CELLS_PER_SIDE:
        raise ValueError(
            "density baseline needs at least a 16x16 image, got %dx%d" % (w, h)
        )
    xs = [(i * w) // GRID_CELLS_PER_SIDE for i in range(GRID_CELLS_PER_SIDE + 1)]
    ys = [(j * h) // GRID_CELLS_PER_SIDE for j in range(GRID_CELLS_PER_SIDE + 1)]
    counts = np.zeros(GRID_CELL_COUNT, dtype=np.int64)
    for j in range(GRID_CELLS_PER_SIDE):
        for i in range(GRID_CELLS_PER_SIDE):
            cell = Region(xs[i], ys[j], xs[i + 1] - xs[i], ys[j + 1] - ys[j])
            counts[j * GRID_CELLS_PER_SIDE + i] = count_in(index, cell)
    s1 = int(counts.sum())
    s2 = int((counts * counts).sum())
    mean = s1 / float(GRID_CELL_COUNT)
    # population variance from exact integer sums, one rounding at the divide
    var = (GRID_CELL_COUNT * s2 - s1 * s1) / float(GRID_CELL_COUNT * GRID_CELL_COUNT)
    if var < 0.0:
        var = 0.0
    return DensityStats(
        cell_counts=counts,
        mean=mean,
        std_dev=math.sqrt(var),
        cell_area=(w * h) / float(GRID_CELL_COUNT),
    )


def z_to_percentile(z: float) -> float:
    """Standard normal CDF of z, absolute error under 1e-7."""
    z = float(z)
    if not math.isfinite(z):
        raise ValueError("z must be finite, got %r" % z)
    return scalar.normal_cdf(z)


def candidate_region(rng: SplitMix64, width: int, height: int, min_side: int) -> Region:
    """One random rectangle: corners x1, x2, y1, y2 drawn uniformly (in that
    order), sorted, then each side grown toward the nearer image edge until
    at least min_side."""
    if min_side < 1:
        raise ValueError("min_side must be >= 1")
    if min_side > width or min_side > height:
        raise ValueError(
            "min_side %d exceeds image %dx%d" % (min_side, width, height)
        )
    xa = rng.next_below(width)
    xb = rng.next_below(width)
    ya = rng.next_below(height)
    yb = rng.next_below(height)
    xlo, xhi = (xa, xb) if xa <= xb else (xb, xa)
    ylo, yhi = (ya, yb) if ya <= yb else (yb, ya)
    x, w = scalar.clamp_span(xlo, xhi, width, min_side)
    y, h = scalar.clamp_span(ylo, yhi, height, min_side)
    return Region(x, y, w, h)


def binomial_trial(rng: SplitMix64, p: float) -> bool:
    """One acceptance coin flip: success iff the next uniform is below p."""
    return rng.next_float() < p


def propose(image: Image, keypoints: list[Keypoint], config: ProposalConfig) -> ProposalSet:
    """Density-guided proposal loop.

    Builds the keypoint index and cell statistics, then draws candidates and
    accepts each with probability z_to_percentile(z) where z is the z-score
    of its keypoint count (area-rescaled to cell scale when
    density_normalization is set; z = 0 when std_dev = 0).  Raises
    AttemptBudgetError after max_attempts_factor * regions_needed draws.
    """
    if config.min_region_side > min(image.width, image.height):
        raise ValueError(
            "min_region_side %d exceeds image %dx%d"
            % (config.min_region_side, image.width, image.height)
        )
    index = build_index(image.width, image.height, keypoints)
    stats = density_baseline(index)
    max_attempts = config.max_attempts_factor * config.regions_needed
    boxes, attempts, exhausted = _kernels.kdrp_sample(
        index.cumulative,
        image.width,
        image.height,
        config.min_region_side,
        config.regions_needed,
        max_attempts,
        stats.mean,
        stats.std_dev,
        config.density_normalization,
        stats.cell_area,
        config.seed,
    )
    if exhausted:
        raise AttemptBudgetError(boxes.shape[0], config.regions_needed, int(attempts))
    regions = tuple(
        Region(int(b[0]), int(b[1]), int(b[2]), int(b[3])) for b in boxes
    )
    return ProposalSet(regions, config.seed, int(attempts), stats)


def propose_uniform(
    width: int, height: int, count: int, min_side: int, seed: int
) -> ProposalSet:
    """Baseline: count random rectangles, every candidate accepted."""
    if count < 0:
        raise ValueError("count must be non-negative")
    seed = int(seed) & MASK64
    rng = SplitMix64(seed)
    regions = tuple(
        candidate_region(rng, width, height, min_side) for _ in range(count)
    )
    return ProposalSet(regions, seed, count, None)


def propose_grid(
    width: int, height: int, scales: list[int], stride_fraction: float = 0.5
) -> ProposalSet:
    """Baseline: all square windows of each scale at stride
    round(stride_fraction * scale), row-major per scale, scales concatenated.
    Fully deterministic; seed is None."""
    if not scales:
        raise ValueError("scales must be non-empty")
    if stride_fraction <= 0.0:
        raise ValueError("stride_fraction must be positive")
    regions: list[Region] = []
    for s in scales:
        if s < 1 or s > width or s > height:
            raise ValueError("scale %d does not fit a %dx%d image" % (s, width, height))
        stride = max(1, int(round(stride_fraction * s)))
        for y in range(0, height - s + 1, stride):
            for x in range(0, width - s + 1, stride):
                regions.append(Region(x, y, s, s))
    return ProposalSet(tuple(regions), None, len(regions), None)


# --- JSON form: {seed, attempts, regions: [{x,y,w,h}, ...]} -------------------

def proposal_set_to_dict(ps: ProposalSet) -> dict:
    return {
        "seed": ps.seed,
        "attempts": ps.attempts,
        "regions": [{"x": r.x, "y": r.y, "w": r.w, "h": r.h} for r in ps.regions],
    }


def proposal_set_from_dict(d: dict) -> ProposalSet:
    regions = tuple(
        Region(int(r["x"]), int(r["y"]), int(r["w"]), int(r["h"]))
        for r in d["regions"]
    )
    seed = d.get("seed")
    return ProposalSet(
        regions,
        None if seed is None else int(seed),
        int(d.get("attempts", len(regions))),
        None,
    )


def save_proposals(path: str, ps: ProposalSet) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(proposal_set_to_dict(ps), f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def load_proposals(path: str) -> ProposalSet:
    with open(path, "r", encoding="utf-8") as f:
        return proposal_set_from_dict(json.load(f))

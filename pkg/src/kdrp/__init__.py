"""Keypoint-density region proposal and detection pipeline toolkit.

Propose object regions by sampling random rectangles and accepting each
with probability equal to the normal-CDF percentile of its keypoint count
against per-cell density statistics; then score, suppress, and select
detections, and evaluate against ground truth.
"""

from ._kernels import BACKEND
from .image import ColorImage, Image, Region, decode_pnm, draw_regions, encode_pgm, encode_ppm
from .keypoints import (
    FastConfig,
    Keypoint,
    KeypointIndex,
    ShiTomasiConfig,
    build_index,
    count_in,
    detect_all,
    detect_fast,
    detect_shi_tomasi,
)
from .pipeline import (
    ClassScores,
    Detection,
    ScorerSpec,
    iou,
    nms,
    score,
    select_threshold,
    select_topk,
    to_detections,
)
from .proposal import (
    AttemptBudgetError,
    DensityStats,
    ProposalConfig,
    ProposalSet,
    density_baseline,
    propose,
    propose_grid,
    propose_uniform,
    z_to_percentile,
)
from .rng import SplitMix64, derive_seed

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BACKEND",
    "Image",
    "ColorImage",
    "Region",
    "decode_pnm",
    "encode_pgm",
    "encode_ppm",
    "draw_regions",
    "Keypoint",
    "FastConfig",
    "ShiTomasiConfig",
    "KeypointIndex",
    "detect_fast",
    "detect_shi_tomasi",
    "detect_all",
    "build_index",
    "count_in",
    "DensityStats",
    "ProposalConfig",
    "ProposalSet",
    "AttemptBudgetError",
    "density_baseline",
    "z_to_percentile",
    "propose",
    "propose_uniform",
    "propose_grid",
    "ClassScores",
    "Detection",
    "ScorerSpec",
    "iou",
    "score",
    "to_detections",
    "nms",
    "select_topk",
    "select_threshold",
    "SplitMix64",
    "derive_seed",
]

"""Detection metrics, dataset manifests, the per-image pipeline driver,
stage timing, and the region-budget study.

Accuracy is micro-averaged: true/false positives and false negatives are
summed over the whole dataset and TP/(TP+FP+FN) is applied once.  Matching
is greedy by detection confidence against same-class ground truth.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .image import Image, Region, decode_pnm
from .keypoints import FastConfig, ShiTomasiConfig, detect_all
from .pipeline import (
    Detection,
    ScorerSpec,
    iou,
    nms,
    score,
    select_threshold,
    select_topk,
    to_detections,
)
from .proposal import ProposalConfig, ProposalSet, propose, propose_grid, propose_uniform
from .rng import derive_seed

__all__ = [
    "GroundTruthBox",
    "ManifestEntry",
    "DatasetManifest",
    "ImageEval",
    "EvalReport",
    "PipelineConfig",
    "iou",
    "match_detections",
    "accuracy",
    "proposal_recall",
    "ManifestError",
    "load_manifest",
    "save_manifest",
    "run_image",
    "evaluate_dataset",
    "time_pipeline",
    "budget_sweep",
    "write_sweep_csv",
    "SWEEP_COLUMNS",
    "STAGES",
]

STAGES = ("proposal", "scoring", "nms", "selection")
SWEEP_COLUMNS = ("budget", "trial", "recall", "accuracy", "proposal_ms", "total_ms")


class ManifestError(ValueError):
    """The dataset manifest (or its classes.json sidecar) is malformed."""

# seed stream tags so every PRNG consumer gets an independent derived seed
_STREAM_PROPOSAL = 1
_STREAM_SCORER = 2


@dataclass(frozen=True)
class GroundTruthBox:
    region: Region
    class_id: int

    def __post_init__(self) -> None:
        if self.class_id < 1:
            raise ValueError("class_id must be >= 1 (0 is background)")


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    boxes: tuple[GroundTruthBox, ...]


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    class_names: tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class ImageEval:
    """Counts and stage wall times for one image (seconds)."""

    image: str
    tp: int
    fp: int
    fn: int
    timings: dict

    @property
    def total_time(self) -> float:
        return sum(self.timings[s] for s in STAGES)


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    accuracy: float | None
    proposal_fraction: float
    images: tuple[ImageEval, ...]


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the per-image pipeline needs besides the image itself."""

    proposer: str = "kdrp"  # kdrp | uniform | grid
    budget: int = 2250
    min_side: int = 16
    density_normalization: bool = False
    detectors: tuple = (FastConfig(), ShiTomasiConfig())
    scales: tuple[int, ...] = (32, 64, 128)
    stride_fraction: float = 0.5
    scorer: ScorerSpec = ScorerSpec("oracle")
    nms_alpha: float = 0.3
    selection: tuple[str, float] = ("threshold", 0.88)
    iou_min: float = 0.5

    def __post_init__(self) -> None:
        if self.proposer not in ("kdrp", "uniform", "grid"):
            raise ValueError("proposer must be kdrp, uniform, or grid")


def match_detections(
    detections: list[Detection],
    truth: list[GroundTruthBox],
    iou_min: float = 0.5,
) -> tuple[int, int, int, list[tuple[int, int]]]:
    """Greedy confidence-ordered matching.

    Each detection, strongest first, claims the unmatched same-class truth
    with the highest IoU provided that IoU exceeds iou_min.  Returns
    (tp, fp, fn, matched (detection index, truth index) pairs).
    """
    if not 0.0 < iou_min <= 1.0:
        raise ValueError("iou_min must lie in (0, 1]")
    order = sorted(
        range(len(detections)),
        key=lambda i: (
            -detections[i].probability,
            detections[i].region.y,
            detections[i].region.x,
            detections[i].region.h,
            detections[i].region.w,
            detections[i].class_id,
        ),
    )
    taken = [False] * len(truth)
    pairs: list[tuple[int, int]] = []
    tp = fp = 0
    for di in order:
        det = detections[di]
        best_iou = 0.0
        best_ti = -1
        for ti, gt in enumerate(truth):
            if taken[ti] or gt.class_id != det.class_id:
                continue
            v = iou(det.region, gt.region)
            if v > best_iou:
                best_iou = v
                best_ti = ti
        if best_ti >= 0 and best_iou > iou_min:
            taken[best_ti] = True
            pairs.append((di, best_ti))
            tp += 1
        else:
            fp += 1
    fn = len(truth) - tp
    return tp, fp, fn, pairs


def accuracy(tp: int, fp: int, fn: int) -> float | None:
    """Micro accuracy TP/(TP+FP+FN); None when the denominator is zero."""
    denom = tp + fp + fn
    if denom == 0:
        return None
    return tp / denom


def proposal_recall(
    proposals, truth: list[GroundTruthBox], iou_min: float = 0.5
) -> float:
    """Fraction of ground-truth boxes covered by at least one proposal with
    IoU above iou_min, ignoring class."""
    if not 0.0 < iou_min <= 1.0:
        raise ValueError("iou_min must lie in (0, 1]")
    if not truth:
        raise ValueError("proposal recall is undefined with zero truths")
    regions = proposals.regions if isinstance(proposals, ProposalSet) else proposals
    hit = 0
    for gt in truth:
        for r in regions:
            if iou(r, gt.region) > iou_min:
                hit += 1
                break
    return hit / len(truth)


# --- manifest I/O (JSON Lines + class-name sidecar) ---------------------------

def load_manifest(path: str) -> DatasetManifest:
    """Read a JSONL manifest; image paths resolve relative to the manifest.

    Class names come from a classes.json sidecar next to the manifest; when
    absent, names are synthesized for ids up to the largest one seen.
    """
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    max_class = 0
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                image_path = row["image"]
                boxes = tuple(
                    GroundTruthBox(
                        Region(int(b["x"]), int(b["y"]), int(b["w"]), int(b["h"])),
                        int(b["class"]),
                    )
                    for b in row.get("boxes", [])
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ManifestError(
                    "manifest %s line %d is malformed: %s" % (path, line_no, exc)
                ) from exc
            if not os.path.isabs(image_path):
                image_path = os.path.join(base, image_path)
            for b in boxes:
                max_class = max(max_class, b.class_id)
            entries.append(ManifestEntry(image_path, boxes))
    sidecar = os.path.join(base, "classes.json")
    if os.path.exists(sidecar):
        with open(sidecar, "r", encoding="utf-8") as f:
            class_names = tuple(str(n) for n in json.load(f))
        if len(class_names) < max_class:
            raise ManifestError(
                "classes.json lists %d classes but the manifest uses id %d"
                % (len(class_names), max_class)
            )
    else:
        class_names = tuple("class_%d" % i for i in range(1, max_class + 1))
    return DatasetManifest(tuple(entries), class_names)


def save_manifest(
    out_dir: str,
    entries: list[ManifestEntry],
    class_names: list[str],
    manifest_name: str = "manifest.jsonl",
) -> str:
    """Write manifest.jsonl plus the classes.json sidecar; returns the
    manifest path.  Image paths are stored relative to out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, manifest_name)
    with open(path, "w", encoding="utf-8") as f:
        for e in entries:
            rel = os.path.relpath(e.image_path, out_dir)
            row = {
                "image": rel,
                "boxes": [
                    {"x": b.region.x, "y": b.region.y, "w": b.region.w,
                     "h": b.region.h, "class": b.class_id}
                    for b in e.boxes
                ],
            }
            f.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
            f.write("\n")
    with open(os.path.join(out_dir, "classes.json"), "w", encoding="utf-8") as f:
        json.dump(list(class_names), f, sort_keys=True, separators=(",", ":"))
        f.write("\n")
    return path


# --- the per-image pipeline ---------------------------------------------------

def _make_proposals(image: Image, cfg: PipelineConfig, seed: int) -> ProposalSet:
    if cfg.proposer == "kdrp":
        keypoints = detect_all(image, list(cfg.detectors))
        pconf = ProposalConfig(
            regions_needed=cfg.budget,
            min_region_side=cfg.min_side,
            density_normalization=cfg.density_normalization,
            seed=seed,
        )
        return propose(image, keypoints, pconf)
    if cfg.proposer == "uniform":
        return propose_uniform(image.width, image.height, cfg.budget, cfg.min_side, seed)
    return propose_grid(image.width, image.height, list(cfg.scales), cfg.stride_fraction)


def run_image(
    image: Image,
    truth: list[GroundTruthBox],
    cfg: PipelineConfig,
    n_classes: int,
    proposal_seed: int,
    scorer_seed: int,
    image_name: str = "",
):
    """Propose, score, suppress, select, and match for one image.

    Returns (ImageEval, selected detections, proposals).  The proposal
    timing covers keypoint detection, indexing, and sampling; conversion of
    scores to detections is counted with scoring.
    """
    t0 = time.perf_counter()
    proposals = _make_proposals(image, cfg, proposal_seed)
    t1 = time.perf_counter()
    spec = cfg.scorer
    if spec.kind in ("oracle", "uniform-random"):
        spec = replace(spec, seed=scorer_seed)
    scores = score(spec, image, list(proposals.regions), truth, n_classes)
    detections = to_detections(list(proposals.regions), scores)
    t2 = time.perf_counter()
    survivors = nms(detections, cfg.nms_alpha)
    t3 = time.perf_counter()
    mode, arg = cfg.selection
    if mode == "topk":
        selected = select_topk(survivors, int(arg))
    else:
        selected = select_threshold(survivors, arg)
    t4 = time.perf_counter()
    tp, fp, fn, _ = match_detections(selected, truth, cfg.iou_min)
    timings = {
        "proposal": t1 - t0,
        "scoring": t2 - t1,
        "nms": t3 - t2,
        "selection": t4 - t3,
    }
    return ImageEval(image_name, tp, fp, fn, timings), selected, proposals


def _load_image(path: str) -> Image:
    with open(path, "rb") as f:
        return decode_pnm(f.read())


def _eval_one(args):
    idx, entry, cfg, n_classes, seed = args
    image = _load_image(entry.image_path)
    ev, _, _ = run_image(
        image,
        list(entry.boxes),
        cfg,
        n_classes,
        derive_seed(seed, _STREAM_PROPOSAL, idx),
        derive_seed(seed, _STREAM_SCORER, idx),
        image_name=entry.image_path,
    )
    return ev


def _aggregate(images: list[ImageEval]) -> EvalReport:
    tp = sum(e.tp for e in images)
    fp = sum(e.fp for e in images)
    fn = sum(e.fn for e in images)
    total = sum(e.total_time for e in images)
    prop = sum(e.timings["proposal"] for e in images)
    fraction = prop / total if total > 0 else 0.0
    return EvalReport(tp, fp, fn, accuracy(tp, fp, fn), fraction, tuple(images))


def evaluate_dataset(
    manifest: DatasetManifest, cfg: PipelineConfig, seed: int, threads: int = 1
) -> EvalReport:
    """Full pipeline over every manifest entry; deterministic given seed.

    threads parallelizes across images only; results are collected in
    manifest order either way.
    """
    n_classes = max(1, manifest.n_classes)
    jobs = [
        (idx, entry, cfg, n_classes, seed)
        for idx, entry in enumerate(manifest.entries)
    ]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            images = list(pool.map(_eval_one, jobs))
    else:
        images = [_eval_one(j) for j in jobs]
    return _aggregate(images)


def report_to_dict(report: EvalReport) -> dict:
    """JSON form of an EvalReport, stage summaries included."""
    def _summary(key):
        vals = sorted(e.timings[key] for e in report.images)
        if not vals:
            return {"mean": 0.0, "median": 0.0}
        n = len(vals)
        med = vals[n // 2] if n % 2 else 0.5 * (vals[n // 2 - 1] + vals[n // 2])
        return {"mean": sum(vals) / n, "median": med}

    return {
        "tp": report.tp,
        "fp": report.fp,
        "fn": report.fn,
        "accuracy": report.accuracy,
        "proposal_fraction": report.proposal_fraction,
        "stage_seconds": {s: _summary(s) for s in STAGES},
        "images": [
            {
                "image": e.image,
                "tp": e.tp,
                "fp": e.fp,
                "fn": e.fn,
                "timings": {s: e.timings[s] for s in STAGES},
            }
            for e in report.images
        ],
    }


def time_pipeline(
    manifest: DatasetManifest, cfg: PipelineConfig, seed: int, repeat: int = 1
) -> list[ImageEval]:
    """repeat serial passes over the dataset; one timed row per image per
    pass.  Serial on purpose: stage times must not fight for cores."""
    if repeat < 1:
        raise ValueError("repeat must be >= 1")
    rows: list[ImageEval] = []
    n_classes = max(1, manifest.n_classes)
    for _ in range(repeat):
        for idx, entry in enumerate(manifest.entries):
            image = _load_image(entry.image_path)
            ev, _, _ = run_image(
                image,
                list(entry.boxes),
                cfg,
                n_classes,
                derive_seed(seed, _STREAM_PROPOSAL, idx),
                derive_seed(seed, _STREAM_SCORER, idx),
                image_name=entry.image_path,
            )
            rows.append(ev)
    return rows


def budget_sweep(
    manifest: DatasetManifest,
    cfg: PipelineConfig,
    budgets: list[int],
    trials: int,
    seed: int,
) -> list[dict]:
    """Run the pipeline at each region budget, trials times with independent
    derived seeds; one row per (budget, trial).

    recall is the mean per-image proposal recall over images that have
    ground truth; accuracy is the micro accuracy over the trial.  Counting
    columns are deterministic given seed; the *_ms columns are wall time.
    """
    if sorted(budgets) != list(budgets):
        raise ValueError("budgets must be sorted ascending")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n_classes = max(1, manifest.n_classes)
    rows = []
    for budget in budgets:
        bcfg = replace(cfg, budget=budget)
        for trial in range(trials):
            base = derive_seed(seed, budget, trial)
            tp = fp = fn = 0
            recalls = []
            prop_s = 0.0
            total_s = 0.0
            for idx, entry in enumerate(manifest.entries):
                image = _load_image(entry.image_path)
                ev, _, proposals = run_image(
                    image,
                    list(entry.boxes),
                    bcfg,
                    n_classes,
                    derive_seed(base, _STREAM_PROPOSAL, idx),
                    derive_seed(base, _STREAM_SCORER, idx),
                    image_name=entry.image_path,
                )
                tp += ev.tp
                fp += ev.fp
                fn += ev.fn
                if entry.boxes:
                    recalls.append(
                        proposal_recall(proposals, list(entry.boxes), bcfg.iou_min)
                    )
                prop_s += ev.timings["proposal"]
                total_s += ev.total_time
            acc = accuracy(tp, fp, fn)
            rows.append(
                {
                    "budget": budget,
                    "trial": trial,
                    "recall": sum(recalls) / len(recalls) if recalls else 0.0,
                    "accuracy": 0.0 if acc is None else acc,
                    "proposal_ms": prop_s * 1000.0,
                    "total_ms": total_s * 1000.0,
                }
            )
    return rows


def write_sweep_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(SWEEP_COLUMNS))
        writer.writeheader()
        for row in rows:
            out = dict(row)
            out["recall"] = "%.6f" % row["recall"]
            out["accuracy"] = "%.6f" % row["accuracy"]
            out["proposal_ms"] = "%.3f" % row["proposal_ms"]
            out["total_ms"] = "%.3f" % row["total_ms"]
            writer.writerow(out)

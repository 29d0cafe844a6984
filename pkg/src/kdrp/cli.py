"""kdrp command line: propose, eval, bench, synth, viz.

One binary, five subcommands, machine-readable outputs (JSON/CSV) plus
human summaries.  Flag values may come from a JSON config file (--config or
the KDRP_CONFIG environment variable); explicit flags always win.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 attempt-budget
exhaustion, 4 incomplete evaluation (missing images).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .evaluation import (
    ManifestError,
    PipelineConfig,
    STAGES,
    evaluate_dataset,
    load_manifest,
    report_to_dict,
    time_pipeline,
)
from .image import PnmError, decode_pnm, draw_regions, encode_ppm
from .keypoints import FastConfig, ShiTomasiConfig, detect_all, keypoints_to_dicts
from .pipeline import ScoreTableError, ScorerSpec, parse_selection
from .proposal import (
    AttemptBudgetError,
    ProposalConfig,
    binomial_trial,
    load_proposals,
    proposal_set_to_dict,
    propose,
    propose_grid,
    propose_uniform,
)
from .rng import SplitMix64
from .synthetic import SynthSpec, generate_synthetic

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_EXHAUSTED = 3
EXIT_INCOMPLETE = 4

CONFIG_ENV = "KDRP_CONFIG"


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this CLI reserves 2 for I/O."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master PRNG seed")
    p.add_argument(
        "--config",
        default=None,
        help="JSON file of flag defaults (overridden by explicit flags; "
        "%s names a default file)" % CONFIG_ENV,
    )
    p.add_argument(
        "--threads", type=int, default=1, help="worker threads across images"
    )


def _add_proposer(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--proposer",
        choices=("kdrp", "uniform", "grid"),
        default="kdrp",
        help="region proposer",
    )
    p.add_argument("--min-side", type=int, default=16, help="minimum region side")
    p.add_argument(
        "--normalize-density",
        action="store_true",
        help="score candidates by area-normalized keypoint density instead "
        "of the raw count",
    )
    p.add_argument(
        "--max-attempts-factor",
        type=int,
        default=1000,
        help="candidate budget = factor * regions",
    )
    p.add_argument(
        "--detectors",
        default="fast,shi_tomasi",
        help="comma list of keypoint detectors (fast, shi_tomasi)",
    )
    p.add_argument("--fast-threshold", type=int, default=20, help="FAST threshold")
    p.add_argument(
        "--fast-no-nonmax",
        action="store_true",
        help="disable FAST non-maximum suppression",
    )
    p.add_argument(
        "--st-max-corners", type=int, default=2000, help="Shi-Tomasi corner cap"
    )
    p.add_argument(
        "--st-quality", type=float, default=0.01, help="Shi-Tomasi quality fraction"
    )
    p.add_argument(
        "--st-min-distance",
        type=float,
        default=5.0,
        help="Shi-Tomasi minimum corner spacing",
    )
    p.add_argument(
        "--scales",
        default="32,64,128",
        help="grid proposer: comma list of window sides",
    )
    p.add_argument(
        "--stride-fraction",
        type=float,
        default=0.5,
        help="grid proposer: stride as a fraction of scale",
    )


def _parse_detectors(args) -> list:
    out = []
    for name in args.detectors.split(","):
        name = name.strip().lower().replace("-", "_")
        if not name:
            continue
        if name == "fast":
            out.append(
                FastConfig(threshold=args.fast_threshold, nonmax=not args.fast_no_nonmax)
            )
        elif name == "shi_tomasi":
            out.append(
                ShiTomasiConfig(
                    max_corners=args.st_max_corners,
                    quality=args.st_quality,
                    min_distance=args.st_min_distance,
                )
            )
        else:
            raise ValueError("unknown detector %r" % name)
    if not out:
        raise ValueError("at least one detector is required")
    return out


def _parse_scales(text: str) -> list[int]:
    try:
        scales = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ValueError("scales must be a comma list of integers") from exc
    if not scales:
        raise ValueError("scales must be non-empty")
    return scales


def _parse_scorer(text: str, noise: float, seed: int) -> ScorerSpec:
    if text == "oracle":
        return ScorerSpec("oracle", noise=noise, seed=seed)
    if text == "random":
        return ScorerSpec("uniform-random", seed=seed)
    if text.startswith("file:"):
        return ScorerSpec("external-file", path=text[len("file:"):])
    raise ValueError("scorer must be oracle, random, or file:PATH")


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _load_image(path: str):
    with open(path, "rb") as f:
        return decode_pnm(f.read())


def _pipeline_config(args) -> PipelineConfig:
    mode, arg = parse_selection(args.select)
    return PipelineConfig(
        proposer=args.proposer,
        budget=args.budget,
        min_side=args.min_side,
        density_normalization=args.normalize_density,
        detectors=tuple(_parse_detectors(args)),
        scales=tuple(_parse_scales(args.scales)),
        stride_fraction=args.stride_fraction,
        scorer=_parse_scorer(args.scorer, args.noise, args.seed),
        nms_alpha=args.nms_iou,
        selection=(mode, arg),
        iou_min=args.iou_min,
    )


def _missing_images(manifest) -> list[str]:
    return [e.image_path for e in manifest.entries if not os.path.exists(e.image_path)]


# --- subcommands --------------------------------------------------------------

def cmd_propose(args) -> int:
    image = _load_image(args.image)
    if args.proposer == "kdrp":
        keypoints = detect_all(image, _parse_detectors(args))
        config = ProposalConfig(
            regions_needed=args.regions,
            min_region_side=args.min_side,
            max_attempts_factor=args.max_attempts_factor,
            density_normalization=args.normalize_density,
            seed=args.seed,
        )
        ps = propose(image, keypoints, config)
    elif args.proposer == "uniform":
        keypoints = None
        ps = propose_uniform(
            image.width, image.height, args.regions, args.min_side, args.seed
        )
    else:
        keypoints = None
        ps = propose_grid(
            image.width, image.height, _parse_scales(args.scales), args.stride_fraction
        )
    if args.dump_keypoints:
        if keypoints is None:
            keypoints = detect_all(image, _parse_detectors(args))
        _write_text(args.dump_keypoints, _json_line(keypoints_to_dicts(keypoints)))
    _write_text(args.out, _json_line(proposal_set_to_dict(ps)))
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    missing = _missing_images(manifest)
    if missing:
        for path in missing:
            sys.stderr.write("missing image: %s\n" % path)
        return EXIT_INCOMPLETE
    cfg = _pipeline_config(args)
    report = evaluate_dataset(manifest, cfg, args.seed, threads=args.threads)
    _write_text(args.report, _json_line(report_to_dict(report)))
    acc = "undefined" if report.accuracy is None else "%.4f" % report.accuracy
    sys.stderr.write(
        "tp=%d fp=%d fn=%d accuracy=%s proposal_fraction=%.3f\n"
        % (report.tp, report.fp, report.fn, acc, report.proposal_fraction)
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    manifest = load_manifest(args.manifest)
    missing = _missing_images(manifest)
    if missing:
        for path in missing:
            sys.stderr.write("missing image: %s\n" % path)
        return EXIT_INCOMPLETE
    cfg = _pipeline_config(args)
    threads = 1 if args.single_thread else args.threads
    if threads <= 1:
        rows = time_pipeline(manifest, cfg, args.seed, repeat=args.repeat)
    else:
        rows = []
        for _ in range(args.repeat):
            rows.extend(evaluate_dataset(manifest, cfg, args.seed, threads=threads).images)
    lines = ["image,pass,proposal_ms,scoring_ms,nms_ms,selection_ms,total_ms"]
    per_image = len(manifest.entries)
    for i, ev in enumerate(rows):
        t = ev.timings
        lines.append(
            "%s,%d,%.3f,%.3f,%.3f,%.3f,%.3f"
            % (
                ev.image,
                i // per_image if per_image else 0,
                t["proposal"] * 1e3,
                t["scoring"] * 1e3,
                t["nms"] * 1e3,
                t["selection"] * 1e3,
                ev.total_time * 1e3,
            )
        )
    _write_text(args.out, "\n".join(lines) + "\n")
    if rows:
        total = sum(ev.total_time for ev in rows)
        prop = sum(ev.timings["proposal"] for ev in rows)
        for stage in STAGES:
            vals = sorted(ev.timings[stage] for ev in rows)
            n = len(vals)
            med = vals[n // 2] if n % 2 else 0.5 * (vals[n // 2 - 1] + vals[n // 2])
            sys.stderr.write(
                "%s: mean %.3f ms, median %.3f ms\n"
                % (stage, 1e3 * sum(vals) / n, 1e3 * med)
            )
        sys.stderr.write(
            "proposal_fraction=%.3f\n" % (prop / total if total > 0 else 0.0)
        )
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        w_text, h_text = args.size.lower().split("x")
        width, height = int(w_text), int(h_text)
    except ValueError as exc:
        raise ValueError("size must look like 512x512") from exc
    lo_text, _, hi_text = args.objects.partition("..")
    try:
        lo = int(lo_text)
        hi = int(hi_text) if hi_text else lo
    except ValueError as exc:
        raise ValueError("objects must look like LO..HI") from exc
    spec = SynthSpec(
        images=args.images,
        width=width,
        height=height,
        min_objects=lo,
        max_objects=hi,
        n_classes=args.classes,
        texture_density=args.texture_density,
        min_size=args.min_object,
        max_size=args.max_object,
        align=args.align,
        gradient=not args.flat_background,
        seed=args.seed,
    )
    generate_synthetic(args.out_dir, spec)
    sys.stderr.write(
        "wrote %d images + manifest.jsonl under %s\n" % (args.images, args.out_dir)
    )
    return EXIT_OK


def cmd_viz(args) -> int:
    if not 0.0 <= args.sample_fraction <= 1.0:
        raise ValueError("sample-fraction must lie in [0, 1]")
    image = _load_image(args.image)
    ps = load_proposals(args.proposals)
    rng = SplitMix64(args.seed)
    sampled = [r for r in ps.regions if binomial_trial(rng, args.sample_fraction)]
    annotated = draw_regions(image, [(r, 0) for r in sampled])
    with open(args.out, "wb") as f:
        f.write(encode_ppm(annotated))
    sys.stderr.write("drew %d of %d regions\n" % (len(sampled), len(ps.regions)))
    return EXIT_OK


# --- parser wiring ------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(
        prog="kdrp",
        description="Keypoint-density region proposal and detection pipeline.",
    )
    parser.add_argument("--version", action="version", version="kdrp " + __version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser(
        "propose", formatter_class=fmt, help="write region proposals for one image"
    )
    p.add_argument("--image", required=True, help="input PGM/PPM")
    p.add_argument("--regions", type=int, default=2250, help="proposal budget")
    _add_proposer(p)
    p.add_argument("--out", default="-", help="proposal JSON path (- for stdout)")
    p.add_argument(
        "--dump-keypoints",
        default=None,
        metavar="PATH",
        help="also write detected keypoints as JSON",
    )
    _add_common(p)
    p.set_defaults(func=cmd_propose)

    p = sub.add_parser(
        "eval", formatter_class=fmt, help="run the detection pipeline over a dataset"
    )
    p.add_argument("--manifest", required=True, help="JSONL dataset manifest")
    p.add_argument("--budget", type=int, default=2250, help="proposal budget")
    _add_proposer(p)
    p.add_argument(
        "--scorer", default="oracle", help="oracle, random, or file:PATH"
    )
    p.add_argument(
        "--noise", type=float, default=0.0, help="oracle scorer noise amplitude"
    )
    p.add_argument("--nms-iou", type=float, default=0.3, help="NMS IoU alpha")
    p.add_argument(
        "--select", default="threshold:0.88", help="selection: topk:K or threshold:P"
    )
    p.add_argument(
        "--iou-min", type=float, default=0.5, help="matching IoU threshold"
    )
    p.add_argument("--report", default="-", help="report JSON path (- for stdout)")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "bench", formatter_class=fmt, help="time pipeline stages over a dataset"
    )
    p.add_argument("--manifest", required=True, help="JSONL dataset manifest")
    p.add_argument("--budget", type=int, default=2250, help="proposal budget")
    _add_proposer(p)
    p.add_argument(
        "--scorer", default="oracle", help="oracle, random, or file:PATH"
    )
    p.add_argument(
        "--noise", type=float, default=0.0, help="oracle scorer noise amplitude"
    )
    p.add_argument("--nms-iou", type=float, default=0.3, help="NMS IoU alpha")
    p.add_argument(
        "--select", default="threshold:0.88", help="selection: topk:K or threshold:P"
    )
    p.add_argument(
        "--iou-min", type=float, default=0.5, help="matching IoU threshold"
    )
    p.add_argument("--repeat", type=int, default=1, help="timed passes per image")
    p.add_argument(
        "--single-thread",
        action="store_true",
        help="force serial execution for clean stage timings",
    )
    p.add_argument("--out", default="-", help="timing CSV path (- for stdout)")
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser(
        "synth", formatter_class=fmt, help="generate a synthetic dataset"
    )
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--images", type=int, default=8, help="image count")
    p.add_argument("--size", default="512x512", help="image size WxH")
    p.add_argument("--objects", default="0..3", help="objects per image, LO..HI")
    p.add_argument("--classes", type=int, default=3, help="object class count")
    p.add_argument(
        "--texture-density",
        type=float,
        default=0.25,
        help="bright-pixel fraction inside objects",
    )
    p.add_argument("--min-object", type=int, default=32, help="minimum object side")
    p.add_argument("--max-object", type=int, default=96, help="maximum object side")
    p.add_argument(
        "--align",
        type=int,
        default=None,
        help="snap object corners to this pixel multiple",
    )
    p.add_argument(
        "--flat-background",
        action="store_true",
        help="flat background instead of a gentle ramp",
    )
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser(
        "viz", formatter_class=fmt, help="draw a sample of proposals onto the image"
    )
    p.add_argument("--image", required=True, help="input PGM/PPM")
    p.add_argument("--proposals", required=True, help="proposal JSON from propose")
    p.add_argument(
        "--sample-fraction",
        type=float,
        default=0.05,
        help="fraction of regions to draw (binomial per region)",
    )
    p.add_argument("--out", required=True, help="annotated PPM path")
    _add_common(p)
    p.set_defaults(func=cmd_viz)

    return parser


def _collect_actions(parser: _Parser) -> dict:
    # dest -> every action using it; --seed and friends appear once per
    # subcommand and a config value must reach all of them
    actions: dict[str, list] = {}
    stack = [parser]
    seen = set()
    while stack:
        current = stack.pop()
        if id(current) in seen:
            continue
        seen.add(id(current))
        for action in current._actions:
            if isinstance(action, argparse._SubParsersAction):
                stack.extend(action.choices.values())
            elif action.dest not in ("help", "==SUPPRESS=="):
                actions.setdefault(action.dest, []).append(action)
    return actions


def _find_config_path(argv: list[str]) -> str | None:
    for i, arg in enumerate(argv):
        if arg == "--config":
            if i + 1 < len(argv):
                return argv[i + 1]
        elif arg.startswith("--config="):
            return arg[len("--config="):]
    return os.environ.get(CONFIG_ENV) or None


def _apply_config(parser: _Parser, argv: list[str]) -> None:
    path = _find_config_path(argv)
    if not path:
        return
    try:
        with open(path, "r", encoding="utf-8") as f:
            values = json.load(f)
    except OSError as exc:
        parser.exit(EXIT_IO, "kdrp: error: cannot read config %s: %s\n" % (path, exc))
    except ValueError:
        parser.error("config %s is not valid JSON" % path)
    if not isinstance(values, dict):
        parser.error("config %s must hold a JSON object" % path)
    actions = _collect_actions(parser)
    for key, value in values.items():
        dest = key.replace("-", "_")
        matched = actions.get(dest)
        if not matched:
            parser.error("config key %r matches no flag" % key)
        if matched[0].type is not None and isinstance(value, str):
            value = matched[0].type(value)
        # wire the value in as the flag's default: subparsers re-apply their
        # own action defaults over the main namespace, so set_defaults on
        # the top-level parser alone would be ignored
        for action in matched:
            action.default = value


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    _apply_config(parser, list(argv))
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except AttemptBudgetError as exc:
        sys.stderr.write("kdrp: %s\n" % exc)
        return EXIT_EXHAUSTED
    except (PnmError, ManifestError, ScoreTableError) as exc:
        sys.stderr.write("kdrp: %s\n" % exc)
        return EXIT_IO
    except OSError as exc:
        sys.stderr.write("kdrp: %s\n" % exc)
        return EXIT_IO
    except ValueError as exc:
        sys.stderr.write("kdrp: %s\n" % exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Time the compiled kernels against the pure-numpy fallback.

Both backends are imported directly, so this script ignores KDRP_BACKEND.
The workload is one synthetic 640x480 image with speckled objects, the same
shape of input the proposal pipeline sees.

Usage: python benchmarks/bench_backends.py [--repeat N] [--regions K]
"""

import argparse
import time

import numpy as np

from kdrp._kernels import numba_impl, numpy_impl
from kdrp.evaluation import GroundTruthBox
from kdrp.image import Region
from kdrp.keypoints import FastConfig, ShiTomasiConfig, build_index, detect_all
from kdrp.proposal import density_baseline
from kdrp.rng import SplitMix64
from kdrp.synthetic import render_image


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=7, help="timed runs per kernel")
    parser.add_argument("--regions", type=int, default=2250, help="sampler budget")
    args = parser.parse_args()

    rng = SplitMix64(99)
    boxes = [
        GroundTruthBox(Region(40, 40, 96, 96), 1),
        GroundTruthBox(Region(300, 120, 80, 80), 2),
        GroundTruthBox(Region(480, 300, 96, 96), 3),
    ]
    image = render_image(640, 480, boxes, rng)
    px = np.asarray(image.pixels)

    kps = detect_all(image, [FastConfig(), ShiTomasiConfig()])
    index = build_index(image.width, image.height, kps)
    stats = density_baseline(index)
    resp = numpy_impl.shi_tomasi_response(px)
    flat = np.argsort(resp, axis=None)[::-1][:4000]
    ys = (flat // resp.shape[1]).astype(np.int64)
    xs = (flat % resp.shape[1]).astype(np.int64)

    nb = 400
    brng = np.random.default_rng(5)
    nms_boxes = np.stack(
        [
            brng.integers(0, 600, size=nb),
            brng.integers(0, 440, size=nb),
            brng.integers(8, 40, size=nb),
            brng.integers(8, 40, size=nb),
        ],
        axis=1,
    ).astype(np.int64)
    nms_probs = brng.random(nb)

    cases = [
        ("fast_score_map", lambda m: m.fast_score_map(px)),
        ("shi_tomasi_response", lambda m: m.shi_tomasi_response(px)),
        ("greedy_min_distance", lambda m: m.greedy_min_distance(ys, xs, 5.0, 2000)),
        ("nms_keep", lambda m: m.nms_keep(nms_boxes, nms_probs, 0.3)),
        (
            "kdrp_sample",
            lambda m: m.kdrp_sample(
                index.cumulative, image.width, image.height, 16, args.regions,
                1000 * args.regions, stats.mean, stats.std_dev, False,
                image.width * image.height / 256.0, 7,
            ),
        ),
    ]

    print("%d keypoints on the bench image; best of %d runs" % (len(kps), args.repeat))
    print("%-22s %12s %12s %9s" % ("kernel", "numba (ms)", "numpy (ms)", "speedup"))
    for name, call in cases:
        call(numba_impl)  # compile before the clock starts
        t_nb = best_of(lambda: call(numba_impl), args.repeat)
        t_np = best_of(lambda: call(numpy_impl), args.repeat)
        print(
            "%-22s %12.3f %12.3f %8.1fx"
            % (name, t_nb * 1e3, t_np * 1e3, t_np / t_nb if t_nb > 0 else 0.0)
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Kernel backend selection.

The hot kernels exist twice: a numba-jitted module and a pure-numpy module
with bit-identical outputs.  KDRP_BACKEND picks one:

  auto   use numba when it imports, numpy otherwise (default)
  numba  require the jitted backend, fail if numba is unusable
  numpy  force the pure-numpy fallback

The chosen module is re-exported here; ``BACKEND`` names it.
"""

from __future__ import annotations

import os

__all__ = [
    "BACKEND",
    "fast_score_map",
    "shi_tomasi_response",
    "greedy_min_distance",
    "nms_keep",
    "kdrp_sample",
]

_choice = os.environ.get("KDRP_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        "KDRP_BACKEND must be one of auto, numba, numpy; got %r" % _choice
    )

if _choice == "numpy":
    from . import numpy_impl as _impl
elif _choice == "numba":
    from . import numba_impl as _impl
else:
    try:
        from . import numba_impl as _impl
    except ImportError:
        from . import numpy_impl as _impl

BACKEND = _impl.name
fast_score_map = _impl.fast_score_map
shi_tomasi_response = _impl.shi_tomasi_response
greedy_min_distance = _impl.greedy_min_distance
nms_keep = _impl.nms_keep
kdrp_sample = _impl.kdrp_sample

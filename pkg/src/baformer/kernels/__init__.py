"""Hot loop kernels with a numba path and a pure-numpy fallback.

Set ``BAFORMER_NUMBA=0`` before import to force the numpy path; the numba
path is also skipped when numba cannot be imported.
"""

import os

from . import _numpy

BACKEND = "numpy"
if os.environ.get("BAFORMER_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off"):
    try:
        from . import _numba as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _impl = _numpy
else:
    _impl = _numpy

hungarian = _impl.hungarian
levenshtein = _impl.levenshtein
span_winners = _impl.span_winners
span_majority = _impl.span_majority
peak_indices = _impl.peak_indices
nms_indices = _impl.nms_indices
f1_counts = _impl.f1_counts

__all__ = [
    "BACKEND",
    "hungarian",
    "levenshtein",
    "span_winners",
    "span_majority",
    "peak_indices",
    "nms_indices",
    "f1_counts",
]

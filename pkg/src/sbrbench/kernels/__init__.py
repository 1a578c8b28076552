"""Hot-loop kernels with a compiled core and a pure numpy fallback.

The Cython extension is used when it was built; set ``SBRBENCH_PURE=1``
to force the fallback (useful for benchmarking the two side by side, see
``benchmarks/bench_kernels.py``).
"""

import os

from . import _pure

if os.environ.get("SBRBENCH_PURE"):
    _impl = _pure
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = _pure

BACKEND = _impl.BACKEND
accumulate_index_overlap = _impl.accumulate_index_overlap
accumulate_neighbor_scores = _impl.accumulate_neighbor_scores
sgns_update = _impl.sgns_update

__all__ = [
    "BACKEND",
    "accumulate_index_overlap",
    "accumulate_neighbor_scores",
    "sgns_update",
]

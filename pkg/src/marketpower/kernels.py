"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``MARKETPOWER_PURE=1`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("MARKETPOWER_PURE", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
        BACKEND = "python"

solve_dp = _impl.solve_dp
chain_dispatch = _impl.chain_dispatch
mc_on_counts = _impl.mc_on_counts
partition_dp = _impl.partition_dp
segreg_dp = _impl.segreg_dp

__all__ = [
    "BACKEND",
    "solve_dp",
    "chain_dispatch",
    "mc_on_counts",
    "partition_dp",
    "segreg_dp",
]

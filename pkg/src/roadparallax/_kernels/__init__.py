"""Kernel backend selection.

The compiled extension is preferred when importable; set
ROADPARALLAX_BACKEND=numpy to force the reference implementation or
ROADPARALLAX_BACKEND=cython to fail loudly if the extension is missing.
"""

import logging
import os

from . import _ref

_log = logging.getLogger(__name__)
_requested = os.environ.get("ROADPARALLAX_BACKEND", "").strip().lower()
if _requested not in ("", "cython", "numpy"):
    raise ValueError(
        f"ROADPARALLAX_BACKEND must be 'cython' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    _impl = _ref
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "cython":
            raise
        _log.debug("compiled kernels unavailable, using numpy fallback")
        _impl = _ref

BACKEND: str = _impl.BACKEND_NAME
bilinear_gather = _impl.bilinear_gather
sad_block_match = _impl.sad_block_match

# The reference module stays importable for parity tests and benchmarks.
reference = _ref

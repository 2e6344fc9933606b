"""Kernel backend selection: compiled extension if present, numpy otherwise.

Set ``SPIKECONV_BACKEND=python`` to force the numpy fallback (used by the
parity tests and the benchmark), or ``SPIKECONV_BACKEND=compiled`` to insist
on the extension. Both backends are bit-identical; only speed differs.
"""

import os

from . import _kernels_py

_requested = os.environ.get("SPIKECONV_BACKEND", "auto").lower()

if _requested in ("python", "py"):
    _impl = _kernels_py
elif _requested in ("compiled", "c", "auto", ""):
    try:
        from . import _core as _impl
    except ImportError:
        if _requested in ("compiled", "c"):
            raise ImportError(
                "SPIKECONV_BACKEND=compiled but the spikeconv._core extension "
                "is not built; run `pip install -e . --no-build-isolation`"
            ) from None
        _impl = _kernels_py
else:
    raise ValueError(f"unknown SPIKECONV_BACKEND={_requested!r}")

BACKEND = _impl.BACKEND
if_step = _impl.if_step
constant_if_step = _impl.constant_if_step
spicalib_step = _impl.spicalib_step


def backend_name() -> str:
    """Which kernel implementation is active: 'compiled' or 'python'."""
    return BACKEND

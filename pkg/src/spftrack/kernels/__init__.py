"""Hot-kernel backend selection.

The compiled extension (``spftrack.kernels._native``) is preferred; the pure
numpy module is the fallback. Set ``SPFTRACK_BACKEND=python`` or ``=native``
to force one. Both backends are bit-identical, so the choice only affects
speed (see benchmarks/bench_kernels.py).
"""

import os

from . import _numpy

_forced = os.environ.get("SPFTRACK_BACKEND", "").strip().lower()

if _forced in ("python", "numpy"):
    _impl = _numpy
elif _forced == "native":
    from . import _native as _impl
elif _forced == "":
    try:
        from . import _native as _impl
    except ImportError:
        _impl = _numpy
else:
    raise RuntimeError(f"unknown SPFTRACK_BACKEND value {_forced!r}")

BACKEND = _impl.NAME
window_ssd_exponents = _impl.window_ssd_exponents
median_filter_frame = _impl.median_filter_frame


def available_backends():
    """Names of the importable backends, preferred first."""
    names = []
    try:
        from . import _native  # noqa: F401

        names.append("native")
    except ImportError:
        pass
    names.append("numpy")
    return names


def get_backend(name):
    """Return the kernel module for an explicit backend name."""
    if name == "numpy":
        return _numpy
    if name == "native":
        from . import _native

        return _native
    raise ValueError(f"unknown backend {name!r}")

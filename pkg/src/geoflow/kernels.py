"""Backend selection for the flow kernels.

The compiled extension is used when it imports; set ``GEOFLOW_PURE_PYTHON=1``
to force the numpy fallback.  Both backends expose the same functions.
"""

import os
from contextlib import contextmanager

from . import _pykernels

python_backend = _pykernels

try:
    from . import _ckernels as compiled_backend
except ImportError:
    compiled_backend = None

_FUNCTIONS = ("geodesic_accel", "builtin_rhs", "builtin_speed", "builtin_metric",
              "stage_combine")


def set_backend(name: str) -> str:
    """Switch to ``"compiled"`` or ``"python"``; returns the previous name."""
    global BACKEND
    if name == "compiled":
        if compiled_backend is None:
            raise ImportError("compiled kernels are not built; reinstall with Cython available")
        impl = compiled_backend
    elif name == "python":
        impl = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    previous = globals().get("BACKEND")
    for fn in _FUNCTIONS:
        globals()[fn] = getattr(impl, fn)
    BACKEND = name
    return previous


@contextmanager
def use_backend(name: str):
    """Temporarily route all kernel calls through one backend."""
    previous = set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


BACKEND = None
if compiled_backend is not None and os.environ.get("GEOFLOW_PURE_PYTHON", "") in ("", "0"):
    set_backend("compiled")
else:
    set_backend("python")

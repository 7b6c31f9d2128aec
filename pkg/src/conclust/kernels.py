"""Hot-loop kernels: the compiled extension when available, else pure Python.

Set ``CONCLUST_PURE_PYTHON=1`` to force the fallback.
"""

import os
from contextlib import contextmanager

from . import _pykernels

NAMES = ("rgs_canonical", "rgs_join", "rgs_insert", "rgs_remove", "rgs_merge", "rgs_is_singleton",
         "join_center", "join_budget", "connected_balls", "grow_duals")


def available_backends():
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


def set_backend(name):
    """Rebind every kernel to the named backend ("cython" or "python")."""
    global BACKEND
    impl = available_backends().get(name)
    if impl is None:
        raise ValueError(f"backend {name!r} is not available")
    for fn in NAMES:
        globals()[fn] = getattr(impl, fn)
    BACKEND = name


@contextmanager
def backend(name):
    old = BACKEND
    set_backend(name)
    try:
        yield
    finally:
        set_backend(old)


BACKEND = "python"
if os.environ.get("CONCLUST_PURE_PYTHON", "") in ("", "0") and "cython" in available_backends():
    set_backend("cython")
else:
    set_backend("python")

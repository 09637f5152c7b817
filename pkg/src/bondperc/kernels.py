"""Backend selection for the hot loops.

The compiled ``_ckernels`` extension is used when it imports; otherwise, or
when ``BONDPERC_PURE_PYTHON`` is set to a non-empty value, the pure-Python
``_pykernels`` run instead. Both produce identical output for a given seed.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("BONDPERC_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        _impl = _ckernels
        BACKEND = "compiled"

STATUS_OK = _pykernels.STATUS_OK
STATUS_TRUNCATED = _pykernels.STATUS_TRUNCATED
STATUS_RIM = _pykernels.STATUS_RIM


def get_backend(name=None):
    """Return the kernel module for ``name`` ("compiled", "python", or default)."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "compiled":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def simulate(*args, backend=None):
    return get_backend(backend).simulate(*args)


def s1_chain(*args, backend=None):
    return get_backend(backend).s1_chain(*args)


def s2_chain(*args, backend=None):
    return get_backend(backend).s2_chain(*args)

"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and ``SHAPEPBDW_NUMBA`` is not
set to ``0``/``false``/``off``. Both backends are importable directly as
:mod:`.numpy_impl` and :mod:`.numba_impl` for comparison.
"""
import importlib
import os

import numpy as np

from . import numpy_impl

_flag = os.environ.get("SHAPEPBDW_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "off", "no")

numba_impl = None
if _want_numba:
    try:
        numba_impl = importlib.import_module(".numba_impl", __name__)
    except ImportError:  # pragma: no cover - numba missing
        numba_impl = None

BACKEND = "numba" if numba_impl is not None else "numpy"
_impl = numba_impl if numba_impl is not None else numpy_impl


def get_backend(name=None):
    """Return the kernel module for ``name`` ('numba' or 'numpy')."""
    if name is None:
        return _impl
    if name == "numpy":
        return numpy_impl
    if name == "numba":
        if numba_impl is not None:
            return numba_impl
        try:
            return importlib.import_module(".numba_impl", __name__)
        except ImportError as exc:
            raise RuntimeError("numba backend unavailable") from exc
    raise ValueError(f"unknown backend {name!r}")


def p1_gradients(nodes, tris):
    return _impl.p1_gradients(np.ascontiguousarray(nodes, dtype=float),
                              np.ascontiguousarray(tris, dtype=np.int64))


def locate(nodes, tris, origin, cell, nbx, nby, bin_ptr, bin_tris, points, tol):
    return _impl.locate(np.ascontiguousarray(nodes, dtype=float),
                        np.ascontiguousarray(tris, dtype=np.int64),
                        np.asarray(origin, dtype=float), float(cell), int(nbx), int(nby),
                        bin_ptr, bin_tris, np.ascontiguousarray(points, dtype=float),
                        float(tol))


def clip_weights(nodes, tris, origin, s, nvx, nvy):
    return _impl.clip_weights(np.ascontiguousarray(nodes, dtype=float),
                              np.ascontiguousarray(tris, dtype=np.int64),
                              np.asarray(origin, dtype=float), float(s), int(nvx), int(nvy))

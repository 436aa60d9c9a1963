"""Kernel dispatch: compiled Cython kernels when built, numpy fallback otherwise.

Set ``STHG_PURE_PYTHON=1`` to force the fallback at import time, or call
:func:`set_backend` at runtime.
"""

import os
from contextlib import contextmanager

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["native"] = _ckernels

_active = _pykernels if (_ckernels is None or os.environ.get("STHG_PURE_PYTHON") == "1") else _ckernels


def backend_name() -> str:
    return "native" if _active is _ckernels and _ckernels is not None else "python"


def set_backend(name: str) -> None:
    global _active
    if name not in BACKENDS:
        raise ValueError(f"unknown or unavailable kernel backend {name!r}; have {sorted(BACKENDS)}")
    _active = BACKENDS[name]


@contextmanager
def using(name: str):
    prev = backend_name()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def csr_mean(indptr, indices, m):
    return _active.csr_mean(indptr, indices, m)


def csr_mean_backward(indptr, indices, grad_out, n_src):
    return _active.csr_mean_backward(indptr, indices, grad_out, n_src)


def csr_max(indptr, indices, m):
    return _active.csr_max(indptr, indices, m)


def csr_max_backward(arg, grad_out, n_src):
    return _active.csr_max_backward(arg, grad_out, n_src)


def edit_distance(a, b):
    return _active.edit_distance(a, b)

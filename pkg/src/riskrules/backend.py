"""Kernel backend selection.

The solver hot loops exist twice: a numba-compiled version and a plain
numpy version with identical semantics. The env var RISKRULE_BACKEND picks
one ("numba", "numpy", or "auto"); auto takes numba when it imports and
falls back to numpy otherwise. select() allows an in-process override,
which the benchmark uses to time both sides.
"""

from __future__ import annotations

import os

from .errors import DomainError

BACKEND_ENV = "RISKRULE_BACKEND"

_active = None
_modules = {}


def _load(name: str):
    if name not in _modules:
        if name == "numba":
            from . import _kernels_numba as mod
        elif name == "numpy":
            from . import _kernels_numpy as mod
        else:
            raise DomainError(f"unknown backend {name!r}")
        _modules[name] = mod
    return _modules[name]


def _initial() -> str:
    want = os.environ.get(BACKEND_ENV, "auto").strip().lower()
    if want in ("", "auto"):
        try:
            _load("numba")
            return "numba"
        except ImportError:
            return "numpy"
    if want not in ("numba", "numpy"):
        raise DomainError(f"{BACKEND_ENV} must be numba, numpy, or auto, not {want!r}")
    return want


def select(name: str) -> str:
    """Force a backend for this process. Returns the previous choice."""
    global _active
    prev = active()
    _load(name)
    _active = name
    return prev


def active() -> str:
    global _active
    if _active is None:
        _active = _initial()
    return _active


def kernels():
    """Module holding bnb_search / enumerate_paths / greedy_path / path_objective."""
    return _load(active())

"""Training backend selection: compiled kernel when built, NumPy otherwise.

Set LEURN_KERNEL=python or LEURN_KERNEL=c to force one. Both backends share
one contract; they may disagree only by one quantization bin for inputs that
land within a float ulp of a bin boundary.
"""
from __future__ import annotations

import os

from . import _kernel_py
from .errors import ConfigError

try:
    from . import _kernel_c
except ImportError:
    _kernel_c = None

_BACKENDS = {"python": _kernel_py}
if _kernel_c is not None:
    _BACKENDS["c"] = _kernel_c


def get_backend(name: str | None = None):
    """Backend module by name; None picks the default for this install."""
    if name is None or name == "auto":
        forced = os.environ.get("LEURN_KERNEL", "auto")
        if forced != "auto":
            name = forced
        else:
            name = "c" if _kernel_c is not None else "python"
    if name not in _BACKENDS:
        raise ConfigError(
            f"unknown kernel backend {name!r}; available: {sorted(_BACKENDS)}")
    return _BACKENDS[name]


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def active_backend_name() -> str:
    return get_backend(None).NAME

"""Selects the kernel implementation at import time.

The compiled extension is preferred when present; the pure-numpy fallback is
used otherwise.  Set ``VLSF_BACKEND=fallback`` (or ``compiled``) to force a
choice, e.g. for benchmarking or parity testing.
"""

from __future__ import annotations

import os

from . import _kernels_py

_forced = os.environ.get("VLSF_BACKEND", "").strip().lower()

if _forced == "fallback":
    impl = _kernels_py
elif _forced == "compiled":
    from . import _kernels as impl  # raises if the extension was not built
else:
    try:
        from . import _kernels as impl
    except ImportError:
        impl = _kernels_py

BACKEND = impl.NAME
walk_chunk = impl.walk_chunk
max_tail_two_symbol = impl.max_tail_two_symbol


def available_backends():
    """Names of the kernel implementations importable in this environment."""
    names = [_kernels_py.NAME]
    try:
        from . import _kernels

        names.insert(0, _kernels.NAME)
    except ImportError:
        pass
    return names

"""Contact-sampling backends.

The hourly contact kernel dominates runtime, so it exists twice: a compiled
Cython core and a pure NumPy fallback.  Both consume the exact same uniform
stream from the simulation's PCG64 generator (bulk ``random(n)`` equals n
sequential draws), so a run's trajectory is bit-identical regardless of
backend.  Selection happens at import via PANDEMIC_BACKEND: "compiled",
"python" or "auto" (default: compiled when available).
"""

from __future__ import annotations

import os


def get_backend(name: str | None = None):
    name = name or os.environ.get("PANDEMIC_BACKEND", "auto")
    if name not in ("auto", "compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name in ("auto", "compiled"):
        try:
            from . import _core

            return _core
        except ImportError:
            if name == "compiled":
                raise
    from . import pure

    return pure

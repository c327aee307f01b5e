"""Step-kernel backend selection.

The simulation hot loop has two interchangeable implementations: a compiled
Cython kernel (built at install time when a C compiler is available) and a
pure-Python fallback.  The compiled one is picked at import unless it is
missing or ``CERTLQ_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import os

from . import _stepper

STATUS_CHUNK_DONE = _stepper.STATUS_CHUNK_DONE
STATUS_TRIGGER = _stepper.STATUS_TRIGGER
STATUS_BLOWUP = _stepper.STATUS_BLOWUP


def _load_compiled():
    try:
        from . import _stepper_cy  # noqa: PLC0415
    except ImportError:
        return None
    return _stepper_cy


_compiled = _load_compiled()

if os.environ.get("CERTLQ_PURE_PYTHON") == "1" or _compiled is None:
    BACKEND = "python"
    step_chunk = _stepper.step_chunk
else:
    BACKEND = "compiled"
    step_chunk = _compiled.step_chunk


def available_backends() -> dict:
    """Name -> step_chunk callable for every importable backend."""
    out = {"python": _stepper.step_chunk}
    if _compiled is not None:
        out["compiled"] = _compiled.step_chunk
    return out

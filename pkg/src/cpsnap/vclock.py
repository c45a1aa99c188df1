"""Kernel selector: compiled module when built, pure Python otherwise.

Set CPSNAP_PURE_PYTHON=1 to force the fallback.
"""

from __future__ import annotations

import os

from . import _vclock_py

BACKEND = "python"
assign = _vclock_py.assign
first_precedence = _vclock_py.first_precedence

if os.environ.get("CPSNAP_PURE_PYTHON") != "1":
    try:
        from . import _vclock as _compiled
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        assign = _compiled.assign
        first_precedence = _compiled.first_precedence

"""Hot enumeration kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time from ``ABSTRAQ_BACKEND``
(``numba`` or ``numpy``). When unset, numba is used if it imports cleanly.
Both backends take the packed model arrays produced by
:meth:`abstraq.scm.Scm.packed` and return, for every exogenous joint
assignment ``u`` (mixed-radix, last exogenous variable fastest), the
mixed-radix index of the endogenous setting it induces.
"""

import os

from . import _numpy

numpy_propagate = _numpy.propagate

try:
    from . import _numba

    numba_propagate = _numba.propagate
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_propagate = None
    HAVE_NUMBA = False


def _select():
    choice = os.environ.get("ABSTRAQ_BACKEND", "").strip().lower()
    if choice == "numpy":
        return "numpy", numpy_propagate
    if choice not in ("", "numba"):
        raise ValueError(f"ABSTRAQ_BACKEND must be 'numba' or 'numpy', got {choice!r}")
    if HAVE_NUMBA:
        return "numba", numba_propagate
    if choice == "numba":
        raise ImportError("ABSTRAQ_BACKEND=numba but numba is not importable")
    return "numpy", numpy_propagate


BACKEND, propagate = _select()

__all__ = ["BACKEND", "HAVE_NUMBA", "propagate", "numpy_propagate", "numba_propagate"]

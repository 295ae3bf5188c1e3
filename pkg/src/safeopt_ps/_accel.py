"""Optional numba acceleration for the numeric kernels.

The kernels in :mod:`safeopt_ps.kernels` exist twice: an explicit-loop version
compiled with ``numba.njit`` and a vectorised pure-numpy version.  Which one is
bound to the public names is decided once, at import time:

* ``SAFEOPT_PS_NUMBA=0`` (or ``false``/``off``/``no``) forces numpy,
* otherwise numba is used when it can be imported.

Results agree between the two paths to round-off; the test-suite checks this.
"""

import os

_FLAG = os.environ.get("SAFEOPT_PS_NUMBA", "1").strip().lower()
REQUESTED = _FLAG not in ("0", "false", "off", "no")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
ENABLED = REQUESTED and HAVE_NUMBA


def njit(func):
    """Compile ``func`` in nopython mode if numba is importable.

    Compilation happens even when the numpy path is selected so the benchmark
    can compare both; the loop versions are only *bound* when ``ENABLED``.
    """
    if numba is None:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend_name():
    return "numba" if ENABLED else "numpy"

"""Hot ADI sweep kernels with a compiled core and a pure-NumPy fallback.

Both backends implement the same two operations on a complex (n0, n1) field:

* ``sweep_axis0(psi, m_lo, m_d, m_up, solver)``
* ``sweep_axis1(psi, m_lo, m_d, m_up, solver)``

Each applies the tridiagonal "minus" matrix (bands ``m_lo/m_d/m_up``) along
the given axis and then solves the tridiagonal "plus" system prepared by
``make_solver`` in place; one call is one Crank-Nicolson half-substep for
every grid line along that axis.  Results of the two backends agree to
round-off but are not bit-identical (different elimination orders); within
a backend the sweeps are serial and bit-reproducible.

The compiled backend ("cython") is selected by default when the extension
built from ``_ext.pyx`` is importable; use ``benchmarks/bench_kernels.py``
to compare the two.
"""

from __future__ import annotations

import numpy as np

from ..errors import SolverSingular
from . import pure

try:
    from . import _ext  # compiled extension, optional

    HAVE_EXT = True
except ImportError:  # pragma: no cover - depends on build environment
    _ext = None
    HAVE_EXT = False

DEFAULT_BACKEND = "cython" if HAVE_EXT else "numpy"


def thomas_factors(lo: np.ndarray, d: np.ndarray, up: np.ndarray):
    """Prefactored forward-elimination coefficients for a tridiagonal matrix.

    Returns (w, invden) with w_i the modified upper coefficients and
    invden_i the reciprocal pivots.  Raises SolverSingular on a zero pivot.
    """
    n = d.shape[0]
    w = np.zeros(n, dtype=np.complex128)
    invden = np.zeros(n, dtype=np.complex128)
    den = d[0]
    if den == 0:
        raise SolverSingular("zero pivot at row 0")
    invden[0] = 1.0 / den
    w[0] = up[0] * invden[0]
    for i in range(1, n):
        den = d[i] - lo[i] * w[i - 1]
        if den == 0:
            raise SolverSingular(f"zero pivot at row {i}")
        invden[i] = 1.0 / den
        if i < n - 1:
            w[i] = up[i] * invden[i]
    return w, invden


def get_backend(name: str = "auto"):
    """Return the kernel module for ``name`` in {auto, cython, numpy}."""
    if name == "auto":
        name = DEFAULT_BACKEND
    if name == "cython":
        if not HAVE_EXT:
            raise SolverSingular("compiled kernel backend requested but not built")
        return _ext
    if name == "numpy":
        return pure
    raise ValueError(f"unknown backend {name!r}")


def backend_name(module) -> str:
    return "cython" if module is _ext else "numpy"

"""Pure NumPy/SciPy fallback kernels (LAPACK banded solves)."""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded


class Solver:
    """Banded form of the tridiagonal 'plus' matrix for solve_banded."""

    def __init__(self, lo, d, up):
        n = d.shape[0]
        ab = np.zeros((3, n), dtype=np.complex128)
        ab[0, 1:] = up[:-1]
        ab[1, :] = d
        ab[2, :-1] = lo[1:]
        self.ab = ab


def make_solver(lo, d, up, w, invden):
    # w/invden are used by the compiled backend; here LAPACK refactors.
    return Solver(lo, d, up)


def _matvec_axis0(psi, m_lo, m_d, m_up):
    y = m_d[:, None] * psi
    y[1:] += m_lo[1:, None] * psi[:-1]
    y[:-1] += m_up[:-1, None] * psi[1:]
    return y


def _matvec_axis1(psi, m_lo, m_d, m_up):
    y = m_d[None, :] * psi
    y[:, 1:] += m_lo[None, 1:] * psi[:, :-1]
    y[:, :-1] += m_up[None, :-1] * psi[:, 1:]
    return y


def sweep_axis0(psi, m_lo, m_d, m_up, solver):
    y = _matvec_axis0(psi, m_lo, m_d, m_up)
    psi[:, :] = solve_banded((1, 1), solver.ab, y, overwrite_b=True, check_finite=False)


def sweep_axis1(psi, m_lo, m_d, m_up, solver):
    y = _matvec_axis1(psi, m_lo, m_d, m_up)
    sol = solve_banded((1, 1), solver.ab, np.ascontiguousarray(y.T),
                       overwrite_b=True, check_finite=False)
    psi[:, :] = sol.T

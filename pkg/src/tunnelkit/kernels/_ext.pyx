# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled ADI sweep kernels: banded matvec fused with a prefactored
Thomas solve, line by line over the whole 2D field."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef class Solver:
    cdef cnp.complex128_t[::1] lo
    cdef cnp.complex128_t[::1] w
    cdef cnp.complex128_t[::1] invden

    def __init__(self, lo, w, invden):
        self.lo = np.ascontiguousarray(lo, dtype=np.complex128)
        self.w = np.ascontiguousarray(w, dtype=np.complex128)
        self.invden = np.ascontiguousarray(invden, dtype=np.complex128)


def make_solver(lo, d, up, w, invden):
    return Solver(lo, w, invden)


def sweep_axis0(cnp.complex128_t[:, ::1] psi,
                cnp.complex128_t[::1] m_lo,
                cnp.complex128_t[::1] m_d,
                cnp.complex128_t[::1] m_up,
                Solver solver):
    cdef Py_ssize_t n0 = psi.shape[0]
    cdef Py_ssize_t n1 = psi.shape[1]
    cdef Py_ssize_t i, j
    cdef cnp.complex128_t y
    cdef cnp.complex128_t[::1] p_lo = solver.lo
    cdef cnp.complex128_t[::1] w = solver.w
    cdef cnp.complex128_t[::1] invden = solver.invden
    buf = np.empty((2, n1), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] rows = buf
    cdef Py_ssize_t prev = 0, cur = 1, tmp

    # forward: matvec with the original rows, eliminate in place
    for i in range(n0):
        for j in range(n1):
            rows[cur, j] = psi[i, j]
        if i == 0:
            if n0 > 1:
                for j in range(n1):
                    y = m_d[0] * rows[cur, j] + m_up[0] * psi[1, j]
                    psi[0, j] = y * invden[0]
            else:
                for j in range(n1):
                    psi[0, j] = m_d[0] * rows[cur, j] * invden[0]
        elif i < n0 - 1:
            for j in range(n1):
                y = m_lo[i] * rows[prev, j] + m_d[i] * rows[cur, j] + m_up[i] * psi[i + 1, j]
                psi[i, j] = (y - p_lo[i] * psi[i - 1, j]) * invden[i]
        else:
            for j in range(n1):
                y = m_lo[i] * rows[prev, j] + m_d[i] * rows[cur, j]
                psi[i, j] = (y - p_lo[i] * psi[i - 1, j]) * invden[i]
        tmp = prev; prev = cur; cur = tmp

    # back substitution
    for i in range(n0 - 2, -1, -1):
        for j in range(n1):
            psi[i, j] = psi[i, j] - w[i] * psi[i + 1, j]


def sweep_axis1(cnp.complex128_t[:, ::1] psi,
                cnp.complex128_t[::1] m_lo,
                cnp.complex128_t[::1] m_d,
                cnp.complex128_t[::1] m_up,
                Solver solver):
    cdef Py_ssize_t n0 = psi.shape[0]
    cdef Py_ssize_t n1 = psi.shape[1]
    cdef Py_ssize_t i, j
    cdef cnp.complex128_t y, prev_orig, cur_orig
    cdef cnp.complex128_t[::1] p_lo = solver.lo
    cdef cnp.complex128_t[::1] w = solver.w
    cdef cnp.complex128_t[::1] invden = solver.invden

    for i in range(n0):
        prev_orig = 0
        for j in range(n1):
            cur_orig = psi[i, j]
            y = m_d[j] * cur_orig
            if j > 0:
                y = y + m_lo[j] * prev_orig
            if j < n1 - 1:
                y = y + m_up[j] * psi[i, j + 1]
            if j > 0:
                y = y - p_lo[j] * psi[i, j - 1]
            psi[i, j] = y * invden[j]
            prev_orig = cur_orig
        for j in range(n1 - 2, -1, -1):
            psi[i, j] = psi[i, j] - w[j] * psi[i, j + 1]

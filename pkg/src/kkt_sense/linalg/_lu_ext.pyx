# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dense LU kernels (partial pivoting, LAPACK-style pivot vector)."""

from libc.math cimport fabs


def lu_factor_inplace(double[:, ::1] a, Py_ssize_t[::1] piv):
    """Overwrite ``a`` with its unit-lower/upper LU factors.

    ``piv[k]`` is the row swapped with row ``k`` at step ``k``.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j, k, p
    cdef double amax, v, pivot, l, tmp
    for k in range(n):
        p = k
        amax = fabs(a[k, k])
        for i in range(k + 1, n):
            v = fabs(a[i, k])
            if v > amax:
                amax = v
                p = i
        piv[k] = p
        if p != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[p, j]
                a[p, j] = tmp
        pivot = a[k, k]
        if pivot == 0.0:
            continue
        for i in range(k + 1, n):
            l = a[i, k] / pivot
            a[i, k] = l
            if l != 0.0:
                for j in range(k + 1, n):
                    a[i, j] -= l * a[k, j]


def lu_solve_inplace(const double[:, ::1] lu, const Py_ssize_t[::1] piv,
                     double[:, ::1] b, bint trans):
    """Overwrite ``b`` (n x k) with the solution of ``A X = B`` (or ``A^T X = B``)."""
    cdef Py_ssize_t n = lu.shape[0]
    cdef Py_ssize_t nrhs = b.shape[1]
    cdef Py_ssize_t i, j, c, p
    cdef double s, tmp
    if not trans:
        for i in range(n):
            p = piv[i]
            if p != i:
                for c in range(nrhs):
                    tmp = b[i, c]
                    b[i, c] = b[p, c]
                    b[p, c] = tmp
        for c in range(nrhs):
            for i in range(n):
                s = b[i, c]
                for j in range(i):
                    s -= lu[i, j] * b[j, c]
                b[i, c] = s
            for i in range(n - 1, -1, -1):
                s = b[i, c]
                for j in range(i + 1, n):
                    s -= lu[i, j] * b[j, c]
                b[i, c] = s / lu[i, i]
    else:
        for c in range(nrhs):
            # U^T y = b
            for i in range(n):
                s = b[i, c]
                for j in range(i):
                    s -= lu[j, i] * b[j, c]
                b[i, c] = s / lu[i, i]
            # L^T w = y
            for i in range(n - 1, -1, -1):
                s = b[i, c]
                for j in range(i + 1, n):
                    s -= lu[j, i] * b[j, c]
                b[i, c] = s
        for i in range(n - 1, -1, -1):
            p = piv[i]
            if p != i:
                for c in range(nrhs):
                    tmp = b[i, c]
                    b[i, c] = b[p, c]
                    b[p, c] = tmp

"""Pure numpy fallback for the LU kernels; same in-place contract as ``_lu_ext``."""

import numpy as np


def lu_factor_inplace(a, piv):
    n = a.shape[0]
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        piv[k] = p
        if p != k:
            a[[k, p], :] = a[[p, k], :]
        pivot = a[k, k]
        if pivot == 0.0:
            continue
        a[k + 1:, k] /= pivot
        a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:])


def lu_solve_inplace(lu, piv, b, trans):
    n = lu.shape[0]
    if not trans:
        for i in range(n):
            p = piv[i]
            if p != i:
                b[[i, p], :] = b[[p, i], :]
        for i in range(1, n):
            b[i] -= lu[i, :i] @ b[:i]
        for i in range(n - 1, -1, -1):
            b[i] -= lu[i, i + 1:] @ b[i + 1:]
            b[i] /= lu[i, i]
    else:
        for i in range(n):
            b[i] -= lu[:i, i] @ b[:i]
            b[i] /= lu[i, i]
        for i in range(n - 2, -1, -1):
            b[i] -= lu[i + 1:, i] @ b[i + 1:]
        for i in range(n - 1, -1, -1):
            p = piv[i]
            if p != i:
                b[[i, p], :] = b[[p, i], :]

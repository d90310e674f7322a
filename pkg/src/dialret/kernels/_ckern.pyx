# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: corpus-wide softmax scoring and the contrastive
loss with its gradients. Mirrors dialret.kernels._numpy bit-for-bit in
contract (not necessarily in last-ulp rounding)."""

from libc.math cimport exp, log

import numpy as np

BACKEND_NAME = "c"


def softmax_scores(g, Y, double tau):
    cdef double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef double[:, ::1] Ym = np.ascontiguousarray(Y, dtype=np.float64)
    cdef Py_ssize_t n = Ym.shape[0]
    cdef Py_ssize_t d = Ym.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, k
    cdef double acc, zmax, total
    for i in range(n):
        acc = 0.0
        for k in range(d):
            acc += Ym[i, k] * gv[k]
        out[i] = acc / tau
    zmax = out[0]
    for i in range(1, n):
        if out[i] > zmax:
            zmax = out[i]
    total = 0.0
    for i in range(n):
        out[i] = exp(out[i] - zmax)
        total += out[i]
    for i in range(n):
        out[i] /= total
    return out_arr


def pair_losses(F, G):
    cdef double[:, ::1] Fm = np.ascontiguousarray(F, dtype=np.float64)
    cdef double[:, ::1] Gm = np.ascontiguousarray(G, dtype=np.float64)
    cdef Py_ssize_t B = Fm.shape[0]
    cdef Py_ssize_t d = Fm.shape[1]
    Z_arr = np.empty((B, B), dtype=np.float64)
    cdef double[:, ::1] Z = Z_arr
    cdef Py_ssize_t i, j, k
    cdef double acc, m, lse, l_v2t = 0.0, l_t2v = 0.0
    for i in range(B):
        for j in range(B):
            acc = 0.0
            for k in range(d):
                acc += Fm[i, k] * Gm[j, k]
            Z[i, j] = acc
    for i in range(B):
        m = Z[i, 0]
        for j in range(1, B):
            if Z[i, j] > m:
                m = Z[i, j]
        lse = 0.0
        for j in range(B):
            lse += exp(Z[i, j] - m)
        l_v2t += (m + log(lse)) - Z[i, i]
    for j in range(B):
        m = Z[0, j]
        for i in range(1, B):
            if Z[i, j] > m:
                m = Z[i, j]
        lse = 0.0
        for i in range(B):
            lse += exp(Z[i, j] - m)
        l_t2v += (m + log(lse)) - Z[j, j]
    return l_v2t / B, l_t2v / B


def sym_loss_and_grads(F, G):
    cdef double[:, ::1] Fm = np.ascontiguousarray(F, dtype=np.float64)
    cdef double[:, ::1] Gm = np.ascontiguousarray(G, dtype=np.float64)
    cdef Py_ssize_t B = Fm.shape[0]
    cdef Py_ssize_t d = Fm.shape[1]
    Z_arr = np.empty((B, B), dtype=np.float64)
    dZ_arr = np.zeros((B, B), dtype=np.float64)
    dF_arr = np.zeros((B, d), dtype=np.float64)
    dG_arr = np.zeros((B, d), dtype=np.float64)
    cdef double[:, ::1] Z = Z_arr
    cdef double[:, ::1] dZ = dZ_arr
    cdef double[:, ::1] dF = dF_arr
    cdef double[:, ::1] dG = dG_arr
    cdef Py_ssize_t i, j, k
    cdef double acc, m, lse, loss = 0.0, p

    for i in range(B):
        for j in range(B):
            acc = 0.0
            for k in range(d):
                acc += Fm[i, k] * Gm[j, k]
            Z[i, j] = acc

    # rows: v2t direction
    for i in range(B):
        m = Z[i, 0]
        for j in range(1, B):
            if Z[i, j] > m:
                m = Z[i, j]
        lse = 0.0
        for j in range(B):
            lse += exp(Z[i, j] - m)
        loss += (m + log(lse)) - Z[i, i]
        for j in range(B):
            p = exp(Z[i, j] - m) / lse
            dZ[i, j] += p / B
        dZ[i, i] -= 1.0 / B

    # columns: t2v direction
    for j in range(B):
        m = Z[0, j]
        for i in range(1, B):
            if Z[i, j] > m:
                m = Z[i, j]
        lse = 0.0
        for i in range(B):
            lse += exp(Z[i, j] - m)
        loss += (m + log(lse)) - Z[j, j]
        for i in range(B):
            p = exp(Z[i, j] - m) / lse
            dZ[i, j] += p / B
        dZ[j, j] -= 1.0 / B

    for i in range(B):
        for j in range(B):
            for k in range(d):
                dF[i, k] += dZ[i, j] * Gm[j, k]
                dG[j, k] += dZ[i, j] * Fm[i, k]
    return loss / B, dF_arr, dG_arr

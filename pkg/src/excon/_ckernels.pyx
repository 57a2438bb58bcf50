# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the loops in ``_pykernels`` (same signatures)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def max_cross_distance(A, B):
    cdef double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(B, dtype=np.float64)
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0], d = a.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff, dist, best
    out = np.empty(na)
    cdef double[::1] o = out
    with nogil:
        for i in range(na):
            best = -1.0
            for j in range(nb):
                acc = 0.0
                for k in range(d):
                    diff = a[i, k] - b[j, k]
                    acc = acc + diff * diff
                dist = sqrt(acc)
                if dist > best:
                    best = dist
            o[i] = best
    return out


def fluct_fvals(ycs, taus, bint dfa):
    cdef double[::1] y = np.ascontiguousarray(ycs, dtype=np.float64)
    cdef long long[::1] tt = np.ascontiguousarray(taus, dtype=np.int64)
    cdef Py_ssize_t n_t = tt.shape[0], size = y.shape[0]
    cdef Py_ssize_t i, j, k, t, n_buf
    cdef double sumx, sumx2, sumy, sumxy, denom, m, b, r, rmin, rmax, acc, x
    out = np.empty(n_t)
    cdef double[::1] o = out
    with nogil:
        for i in range(n_t):
            t = tt[i]
            n_buf = size // t
            sumx = 0.0
            sumx2 = 0.0
            for k in range(t):
                x = k + 1.0
                sumx = sumx + x
                sumx2 = sumx2 + x * x
            denom = t * sumx2 - sumx * sumx
            acc = 0.0
            for j in range(n_buf):
                sumy = 0.0
                sumxy = 0.0
                for k in range(t):
                    sumy = sumy + y[j * t + k]
                    sumxy = sumxy + (k + 1.0) * y[j * t + k]
                if denom == 0:
                    m = 0.0
                    b = 0.0
                else:
                    m = (t * sumxy - sumx * sumy) / denom
                    b = (sumy * sumx2 - sumx * sumxy) / denom
                rmin = 0.0
                rmax = 0.0
                for k in range(t):
                    r = y[j * t + k] - (m * (k + 1.0) + b)
                    if dfa:
                        acc = acc + r * r
                    else:
                        if k == 0 or r < rmin:
                            rmin = r
                        if k == 0 or r > rmax:
                            rmax = r
                if not dfa:
                    acc = acc + (rmax - rmin) * (rmax - rmin)
            if dfa:
                o[i] = sqrt(acc / (n_buf * t))
            else:
                o[i] = sqrt(acc / n_buf)
    return out


def outlier_stats(ywork, Py_ssize_t n_thresh, double inc):
    cdef double[::1] y = np.ascontiguousarray(ywork, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t j, i, c, lo_k, hi_k, seen
    cdef double th, lo, hi
    counts = np.zeros(n_thresh, dtype=np.int64)
    med = np.empty(n_thresh)
    cdef long long[::1] cnt = counts
    cdef double[::1] md = med
    with nogil:
        for j in range(n_thresh):
            th = j * inc
            c = 0
            for i in range(n):
                if y[i] >= th:
                    c += 1
            cnt[j] = c
            if c == 0:
                md[j] = 0.0 / 0.0
                continue
            lo_k = (c + 1) // 2
            hi_k = c // 2 + 1
            seen = 0
            lo = 0.0
            hi = 0.0
            for i in range(n):
                if y[i] >= th:
                    seen += 1
                    if seen == lo_k:
                        lo = i + 1.0
                    if seen == hi_k:
                        hi = i + 1.0
                        break
            if c % 2 == 1:
                md[j] = lo
            else:
                md[j] = (lo + hi) / 2.0
    return counts, med


def rocket_apply(X, weights, lengths, biases, dilations, paddings, channels):
    cdef double[:, :, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef long long[::1] ln = np.ascontiguousarray(lengths, dtype=np.int64)
    cdef double[::1] bs = np.ascontiguousarray(biases, dtype=np.float64)
    cdef long long[::1] dl = np.ascontiguousarray(dilations, dtype=np.int64)
    cdef long long[::1] pd = np.ascontiguousarray(paddings, dtype=np.int64)
    cdef long long[::1] ch = np.ascontiguousarray(channels, dtype=np.int64)
    cdef Py_ssize_t n_inst = x.shape[0], tau = x.shape[1], n_k = ln.shape[0]
    cdef Py_ssize_t m, k, a, i, j, idx, length, dil, pad, out_len, c, ppv
    cdef double s, mx
    out = np.zeros((n_inst, 2 * n_k))
    cdef double[:, ::1] o = out
    with nogil:
        for m in range(n_inst):
            a = 0
            for k in range(n_k):
                length = ln[k]
                dil = dl[k]
                pad = pd[k]
                c = ch[k]
                out_len = tau + 2 * pad - (length - 1) * dil
                if out_len > 0:
                    ppv = 0
                    mx = 0.0
                    for i in range(out_len):
                        # same accumulation order as the NumPy version
                        s = bs[k]
                        for j in range(length):
                            idx = i + j * dil - pad
                            if idx >= 0 and idx < tau:
                                s = s + w[a + j] * x[m, idx, c]
                            else:
                                s = s + w[a + j] * 0.0
                        if s > 0:
                            ppv += 1
                        if i == 0 or s > mx:
                            mx = s
                    o[m, 2 * k] = ppv / <double>out_len
                    o[m, 2 * k + 1] = mx
                a += length
    return out

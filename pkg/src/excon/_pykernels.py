"""NumPy implementations of the hot loops.

Signatures mirror the compiled ``_ckernels`` module exactly; ``kernels``
picks one at import time.
"""

from __future__ import annotations

import numpy as np


def max_cross_distance(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """For each row of ``A``, the largest Euclidean distance to any row of ``B``.

    Squared differences are accumulated dimension by dimension, left to right,
    so results match a scalar double loop bit for bit.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    out = np.empty(A.shape[0])
    # chunk rows so the (rows, |B|) accumulator stays small
    step = max(1, 262144 // max(1, B.shape[0]))
    for lo in range(0, A.shape[0], step):
        a = A[lo : lo + step]
        acc = np.zeros((a.shape[0], B.shape[0]))
        for j in range(A.shape[1]):
            diff = a[:, j, None] - B[None, :, j]
            acc += diff * diff
        out[lo : lo + step] = np.sqrt(acc).max(axis=1)
    return out


def fluct_fvals(ycs: np.ndarray, taus: np.ndarray, dfa: bool) -> np.ndarray:
    """Detrended fluctuation amplitude of a cumulative sum at each window size."""
    ycs = np.asarray(ycs, dtype=np.float64)
    out = np.empty(len(taus))
    for i, t in enumerate(taus):
        t = int(t)
        n_buf = ycs.size // t
        w = ycs[: n_buf * t].reshape(n_buf, t)
        x = np.arange(1, t + 1, dtype=np.float64)
        sumx, sumx2 = x.sum(), (x * x).sum()
        denom = t * sumx2 - sumx * sumx
        sumy = w.sum(axis=1)
        sumxy = w @ x
        if denom == 0:
            m = np.zeros(n_buf)
            b = np.zeros(n_buf)
        else:
            m = (t * sumxy - sumx * sumy) / denom
            b = (sumy * sumx2 - sumx * sumxy) / denom
        r = w - (m[:, None] * x[None, :] + b[:, None])
        if dfa:
            out[i] = np.sqrt((r * r).sum() / (n_buf * t))
        else:
            rng = r.max(axis=1) - r.min(axis=1)
            out[i] = np.sqrt((rng * rng).sum() / n_buf)
    return out


def outlier_stats(ywork: np.ndarray, n_thresh: int, inc: float):
    """Count and median 1-based position of samples at or above each threshold ``j * inc``."""
    ywork = np.asarray(ywork, dtype=np.float64)
    thresholds = np.arange(n_thresh) * inc
    mask = ywork[None, :] >= thresholds[:, None]
    counts = mask.sum(axis=1)
    cs = np.cumsum(mask, axis=1)
    rows = np.arange(n_thresh)

    def kth(k):
        # 1-based position of the k-th qualifying sample in each row
        return np.argmax(cs >= k[:, None], axis=1) + 1.0

    lo = kth((counts + 1) // 2)
    hi = kth(counts // 2 + 1)
    med = np.where(counts % 2 == 1, lo, (lo + hi) / 2.0)
    med[counts == 0] = np.nan
    del rows
    return counts.astype(np.int64), med


def rocket_apply(X, weights, lengths, biases, dilations, paddings, channels) -> np.ndarray:
    """PPV and max pooling of dilated convolutions; ``X`` is ``(M, tau, N)``."""
    X = np.asarray(X, dtype=np.float64)
    n_inst, tau, _ = X.shape
    n_kernels = len(lengths)
    out = np.zeros((n_inst, 2 * n_kernels))
    a = 0
    for k in range(n_kernels):
        length, dil, pad = int(lengths[k]), int(dilations[k]), int(paddings[k])
        w = weights[a : a + length]
        a += length
        out_len = tau + 2 * pad - (length - 1) * dil
        if out_len <= 0:
            continue
        series = X[:, :, int(channels[k])]
        padded = np.zeros((n_inst, tau + 2 * pad))
        padded[:, pad : pad + tau] = series
        conv = np.full((n_inst, out_len), float(biases[k]))
        for j in range(length):
            conv += w[j] * padded[:, j * dil : j * dil + out_len]
        out[:, 2 * k] = (conv > 0).sum(axis=1) / out_len
        out[:, 2 * k + 1] = conv.max(axis=1)
    return out

"""Deterministic PCA by power iteration with deflation."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def project_pca(vectors, out_dim: int = 2, max_iter: int = 1000, tol: float = 1e-10) -> np.ndarray:
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("PCA needs at least two vectors")
    if out_dim < 1:
        raise DataError("out_dim must be >= 1")
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / X.shape[0]
    d = C.shape[0]
    comps = np.zeros((out_dim, d))
    for k in range(min(out_dim, d)):
        # fixed start vector; the small ramp avoids starting orthogonal to
        # the leading direction in symmetric data
        v = np.ones(d) + np.arange(d) * 1e-3
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(max_iter):
            w = C @ v
            norm = np.linalg.norm(w)
            if norm == 0:
                break
            w /= norm
            done = np.linalg.norm(w - v) < tol
            v, lam = w, norm
            if done:
                break
        if lam <= 1e-12 * max(1.0, np.trace(C)) or not np.isfinite(lam):
            break
        j = int(np.argmax(np.abs(v)))
        if v[j] < 0:
            v = -v
        comps[k] = v
        C = C - lam * np.outer(v, v)
    return Xc @ comps.T

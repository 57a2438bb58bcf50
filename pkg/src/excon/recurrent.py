"""Batched LSTM, GRU and Elman RNN cells with backpropagation through time.

Parameters for one cell live in a dict ``{"W": (G*H, N), "U": (G*H, H), "b": (G*H,)}``
where ``G`` gate blocks are stacked row-wise:

* lstm, G=4, order input, forget, output, candidate;
* gru, G=3, order update, reset, candidate; ``h = z*h_prev + (1-z)*n`` with
  ``n = tanh(W_n x + U_n (r*h_prev) + b_n)``;
* rnn, G=1, ``h = tanh(W x + U h_prev + b)``.

Inputs are batched ``(B, tau, N)``; the initial state is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError, ShapeMismatchError

GATES = {"lstm": 4, "gru": 3, "rnn": 1}


def _check_kind(kind: str) -> int:
    try:
        return GATES[kind]
    except KeyError:
        raise ConfigError(f"unknown cell kind {kind!r}; expected one of {sorted(GATES)}") from None


def sigmoid(a: np.ndarray) -> np.ndarray:
    # tanh form never overflows, unlike 1/(1+exp(-a))
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def init_cell(kind: str, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> dict:
    g = _check_kind(kind)
    if input_dim < 1 or hidden_dim < 1:
        raise ConfigError("input_dim and hidden_dim must be >= 1")
    bound = 1.0 / math.sqrt(hidden_dim)
    W = rng.uniform(-bound, bound, size=(g * hidden_dim, input_dim))
    U = rng.uniform(-bound, bound, size=(g * hidden_dim, hidden_dim))
    b = np.zeros(g * hidden_dim)
    if kind == "lstm":
        b[hidden_dim : 2 * hidden_dim] = 1.0
    return {"W": W, "U": U, "b": b}


def zero_cell(kind: str, input_dim: int, hidden_dim: int) -> dict:
    g = _check_kind(kind)
    return {
        "W": np.zeros((g * hidden_dim, input_dim)),
        "U": np.zeros((g * hidden_dim, hidden_dim)),
        "b": np.zeros(g * hidden_dim),
    }


@dataclass
class CellCache:
    kind: str
    x: np.ndarray
    steps: list = field(default_factory=list)


def cell_forward(kind: str, params: dict, x_seq: np.ndarray, where: str = ""):
    """Run the recurrence; returns ``(h_final (B, H), cache)``.

    A 2-D ``x_seq`` is treated as a batch of one and ``h_final`` is then 1-D.
    """
    g = _check_kind(kind)
    single = x_seq.ndim == 2
    X = x_seq[None] if single else x_seq
    W, U, b = params["W"], params["U"], params["b"]
    H = U.shape[1]
    if X.shape[2] != W.shape[1] or W.shape[0] != g * H:
        raise ShapeMismatchError(f"input dim {X.shape[2]} does not match cell input dim {W.shape[1]}")
    B, tau, _ = X.shape
    # input projections for every step at once
    XW = X @ W.T + b
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = CellCache(kind, X)
    for t in range(tau):
        if kind == "lstm":
            a = XW[:, t] + h @ U.T
            i = sigmoid(a[:, :H])
            f = sigmoid(a[:, H : 2 * H])
            o = sigmoid(a[:, 2 * H : 3 * H])
            gg = np.tanh(a[:, 3 * H :])
            c_new = f * c + i * gg
            tc = np.tanh(c_new)
            h_new = o * tc
            cache.steps.append((h, c, i, f, o, gg, tc))
            c = c_new
        elif kind == "gru":
            a_zr = XW[:, t, : 2 * H] + h @ U[: 2 * H].T
            z = sigmoid(a_zr[:, :H])
            r = sigmoid(a_zr[:, H:])
            n = np.tanh(XW[:, t, 2 * H :] + (r * h) @ U[2 * H :].T)
            h_new = z * h + (1.0 - z) * n
            cache.steps.append((h, z, r, n))
        else:
            h_new = np.tanh(XW[:, t] + h @ U.T)
            cache.steps.append((h, h_new))
        h = h_new
    if not np.all(np.isfinite(h)):
        raise NumericError(f"non-finite hidden state{' at ' + where if where else ''}")
    return (h[0] if single else h), cache


def cell_backward(params: dict, cache: CellCache, dh_final: np.ndarray) -> dict:
    """Gradients of ``sum(dh_final * h_final)`` w.r.t. ``W``, ``U`` and ``b``."""
    kind = cache.kind
    W, U = params["W"], params["U"]
    H = U.shape[1]
    X = cache.x
    dh = dh_final[None] if dh_final.ndim == 1 else dh_final
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(W.shape[0])
    dc = np.zeros_like(dh)
    for t in range(len(cache.steps) - 1, -1, -1):
        x = X[:, t]
        if kind == "lstm":
            h_prev, c_prev, i, f, o, gg, tc = cache.steps[t]
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            da = np.concatenate(
                [
                    dc * gg * i * (1.0 - i),
                    dc * c_prev * f * (1.0 - f),
                    do * o * (1.0 - o),
                    dc * i * (1.0 - gg * gg),
                ],
                axis=1,
            )
            dc = dc * f
            dW += da.T @ x
            dU += da.T @ h_prev
            db += da.sum(axis=0)
            dh = da @ U
        elif kind == "gru":
            h_prev, z, r, n = cache.steps[t]
            dn = dh * (1.0 - z)
            dz = dh * (h_prev - n)
            dh_prev = dh * z
            dan = dn * (1.0 - n * n)
            U_n = U[2 * H :]
            drh = dan @ U_n
            dr = drh * h_prev
            dh_prev = dh_prev + drh * r
            da_zr = np.concatenate([dz * z * (1.0 - z), dr * r * (1.0 - r)], axis=1)
            dW[: 2 * H] += da_zr.T @ x
            dW[2 * H :] += dan.T @ x
            dU[: 2 * H] += da_zr.T @ h_prev
            dU[2 * H :] += dan.T @ (r * h_prev)
            db[: 2 * H] += da_zr.sum(axis=0)
            db[2 * H :] += dan.sum(axis=0)
            dh = dh_prev + da_zr @ U[: 2 * H]
        else:
            h_prev, h_new = cache.steps[t]
            da = dh * (1.0 - h_new * h_new)
            dW += da.T @ x
            dU += da.T @ h_prev
            db += da.sum(axis=0)
            dh = da @ U
    return {"W": dW, "U": dU, "b": db}


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def zeros_like(cls, params: dict) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()}, {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict, grads: dict, state: AdamState, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns new ``(params, state)`` without mutating inputs."""
    if set(grads) != set(params):
        raise ShapeMismatchError(f"gradient keys {sorted(grads)} do not match parameters {sorted(params)}")
    step = state.step + 1
    new_p, new_m, new_v = {}, {}, {}
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ShapeMismatchError(f"gradient {k!r} has shape {g.shape}, parameter has {p.shape}")
        m = beta1 * state.m[k] + (1.0 - beta1) * g
        v = beta2 * state.v[k] + (1.0 - beta2) * (g * g)
        new_p[k] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new_m[k], new_v[k] = m, v
    return new_p, AdamState(new_m, new_v, step)


def global_norm(grads: dict) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_by_global_norm(grads: dict, max_norm: float):
    """Returns ``(clipped grads, pre-clip norm)``."""
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        return {k: g * scale for k, g in grads.items()}, norm
    return grads, norm

"""Bidirectional single-layer LSTM with backpropagation through time.

Gate rows are stacked in the order input, forget, cell, output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import DTYPE, glorot, sigmoid

DIRECTIONS = ("fw", "bw")


def init_bilstm(rng: np.random.Generator, input_dim: int, hidden: int, prefix: str = "lstm") -> dict:
    params = {}
    for d in DIRECTIONS:
        params[f"{prefix}.{d}.W"] = glorot(rng, (4 * hidden, input_dim), fan_in=input_dim, fan_out=hidden)
        params[f"{prefix}.{d}.U"] = glorot(rng, (4 * hidden, hidden), fan_in=hidden, fan_out=hidden)
        b = np.zeros(4 * hidden, dtype=DTYPE)
        b[hidden:2 * hidden] = 1.0
        params[f"{prefix}.{d}.b"] = b
    return params


@dataclass
class _DirTrace:
    x: np.ndarray
    gates: np.ndarray  # (N, 4H) post-nonlinearity i, f, g, o
    c: np.ndarray  # (N + 1, H), row 0 is the zero initial state
    h: np.ndarray  # (N + 1, H)


def _run(x, W, U, b) -> _DirTrace:
    n = x.shape[0]
    H = U.shape[1]
    proj = x @ W.T + b
    c = np.zeros((n + 1, H), dtype=DTYPE)
    h = np.zeros((n + 1, H), dtype=DTYPE)
    gates = np.empty((n, 4 * H), dtype=DTYPE)
    for t in range(n):
        z = proj[t] + U @ h[t]
        gt = gates[t]
        gt[:] = sigmoid(z)
        gt[2 * H:3 * H] = np.tanh(z[2 * H:3 * H])
        c[t + 1] = gt[H:2 * H] * c[t] + gt[:H] * gt[2 * H:3 * H]
        h[t + 1] = gt[3 * H:] * np.tanh(c[t + 1])
    return _DirTrace(x, gates, c, h)


def _back(tr: _DirTrace, dh_out, W, U):
    n, H = dh_out.shape
    dz = np.empty((n, 4 * H), dtype=DTYPE)
    dh_next = np.zeros(H, dtype=DTYPE)
    dc_next = np.zeros(H, dtype=DTYPE)
    for t in range(n - 1, -1, -1):
        i, f, g, o = (tr.gates[t, k * H:(k + 1) * H] for k in range(4))
        tc = np.tanh(tr.c[t + 1])
        dh = dh_out[t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz[t, :H] = dc * g * i * (1.0 - i)
        dz[t, H:2 * H] = dc * tr.c[t] * f * (1.0 - f)
        dz[t, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dz[t, 3 * H:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = U.T @ dz[t]
    dW = dz.T @ tr.x
    dU = dz.T @ tr.h[:-1]
    db = dz.sum(axis=0)
    dx = dz @ W
    return dx, dW, dU, db


@dataclass
class BiLstmTrace:
    fw: _DirTrace
    bw: _DirTrace
    prefix: str


def bilstm_forward(x, params: dict, prefix: str = "lstm") -> tuple[np.ndarray, BiLstmTrace]:
    """Per-position concatenation [left-to-right state ; right-to-left state]."""
    x = np.asarray(x, dtype=DTYPE)
    W = params[f"{prefix}.fw.W"]
    if x.ndim != 2 or x.shape[1] != W.shape[1]:
        raise ValueError(f"BiLSTM expects width {W.shape[1]}, got {x.shape}")
    fw = _run(x, W, params[f"{prefix}.fw.U"], params[f"{prefix}.fw.b"])
    bw = _run(x[::-1], params[f"{prefix}.bw.W"], params[f"{prefix}.bw.U"], params[f"{prefix}.bw.b"])
    out = np.concatenate([fw.h[1:], bw.h[1:][::-1]], axis=1)
    return out, BiLstmTrace(fw, bw, prefix)


def bilstm_backward(trace: BiLstmTrace, grad_out, params: dict) -> tuple[np.ndarray, dict]:
    p = trace.prefix
    H = params[f"{p}.fw.U"].shape[1]
    grad_out = np.asarray(grad_out, dtype=DTYPE)
    grads = {}
    dx = None
    for d, tr, dh in (("fw", trace.fw, grad_out[:, :H]), ("bw", trace.bw, grad_out[:, H:][::-1])):
        dxd, dW, dU, db = _back(tr, dh, params[f"{p}.{d}.W"], params[f"{p}.{d}.U"])
        grads[f"{p}.{d}.W"], grads[f"{p}.{d}.U"], grads[f"{p}.{d}.b"] = dW, dU, db
        dxd = dxd if d == "fw" else dxd[::-1]
        dx = dxd if dx is None else dx + dxd
    return dx, grads

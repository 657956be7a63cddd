"""Linear-chain CRF over K labels with explicit START/END boundary states.

The transition matrix has shape (K+2, K+2): index K is START and K+1 is END.
Only START->label, label->label and label->END entries ever take part in a
path; the rest are inert and always receive zero gradient.
"""

from __future__ import annotations

import numpy as np

from .numerics import DTYPE, log_sum_exp


def start_index(A: np.ndarray) -> int:
    return A.shape[0] - 2


def end_index(A: np.ndarray) -> int:
    return A.shape[0] - 1


def init_transitions(num_labels: int) -> np.ndarray:
    return np.zeros((num_labels + 2, num_labels + 2), dtype=DTYPE)


def _check(V, A, Y=None):
    V = np.asarray(V, dtype=DTYPE)
    if V.ndim != 2 or V.shape[0] < 1:
        raise ValueError(f"emissions must be an N x K matrix with N >= 1, got {V.shape}")
    if A.shape != (V.shape[1] + 2, V.shape[1] + 2):
        raise ValueError(f"transition matrix {A.shape} does not fit {V.shape[1]} labels")
    if Y is not None and len(Y) != V.shape[0]:
        raise ValueError(f"tag sequence length {len(Y)} != emission length {V.shape[0]}")
    return V


def crf_score(V, Y, A) -> float:
    V = _check(V, A, Y)
    y = np.asarray(Y, dtype=int)
    s = A[start_index(A), y[0]] + A[y[-1], end_index(A)]
    s += A[y[:-1], y[1:]].sum() + V[np.arange(len(y)), y].sum()
    return float(s)


def _forward(V, A):
    K = V.shape[1]
    trans = A[:K, :K]
    alpha = np.empty_like(V)
    alpha[0] = A[start_index(A), :K] + V[0]
    for t in range(1, V.shape[0]):
        alpha[t] = log_sum_exp(alpha[t - 1][:, None] + trans, axis=0) + V[t]
    return alpha


def _backward(V, A):
    K = V.shape[1]
    trans = A[:K, :K]
    beta = np.empty_like(V)
    beta[-1] = A[:K, end_index(A)]
    for t in range(V.shape[0] - 2, -1, -1):
        beta[t] = log_sum_exp(trans + (V[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def crf_log_partition(V, A) -> float:
    V = _check(V, A)
    alpha = _forward(V, A)
    return log_sum_exp(alpha[-1] + A[:V.shape[1], end_index(A)])


def crf_marginals(V, A):
    """Per-position label marginals (N x K) and pairwise marginals ((N-1) x K x K)."""
    V = _check(V, A)
    K = V.shape[1]
    alpha, beta = _forward(V, A), _backward(V, A)
    log_z = log_sum_exp(alpha[-1] + A[:K, end_index(A)])
    unary = np.exp(alpha + beta - log_z)
    pair = np.exp(alpha[:-1, :, None] + A[:K, :K][None] + (V[1:] + beta[1:])[:, None, :] - log_z)
    return unary, pair, log_z


def crf_nll(V, Y, A) -> tuple[float, np.ndarray, np.ndarray]:
    """Negative log-likelihood of ``Y`` and its gradients w.r.t. emissions and transitions."""
    V = _check(V, A, Y)
    y = np.asarray(Y, dtype=int)
    K = V.shape[1]
    st, en = start_index(A), end_index(A)
    unary, pair, log_z = crf_marginals(V, A)
    loss = log_z - crf_score(V, y, A)

    dV = unary.copy()
    dV[np.arange(len(y)), y] -= 1.0
    dA = np.zeros_like(A)
    dA[:K, :K] = pair.sum(axis=0)
    np.subtract.at(dA, (y[:-1], y[1:]), 1.0)
    dA[st, :K] = unary[0]
    dA[st, y[0]] -= 1.0
    dA[:K, en] = unary[-1]
    dA[y[-1], en] -= 1.0
    return max(loss, 0.0), dV, dA


def viterbi_decode(V, A) -> list[int]:
    """Highest-scoring label sequence; ties go to the smallest label index."""
    V = _check(V, A)
    N, K = V.shape
    trans = A[:K, :K]
    delta = A[start_index(A), :K] + V[0]
    back = np.zeros((N, K), dtype=int)
    for t in range(1, N):
        cand = delta[:, None] + trans
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(K)] + V[t]
    last = int(np.argmax(delta + A[:K, end_index(A)]))
    path = [last]
    for t in range(N - 1, 0, -1):
        last = int(back[t, last])
        path.append(last)
    return path[::-1]

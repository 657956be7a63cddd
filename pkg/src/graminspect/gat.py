"""Multi-head graph attention with a hand-written backward pass.

Interior layers concatenate head outputs; the last layer averages heads
before its activation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ACTIVATIONS, DTYPE, glorot, leaky_relu_grad, masked_softmax


class StaleTraceError(RuntimeError):
    pass


@dataclass
class GatLayerParams:
    W: np.ndarray  # (heads, out_dim, in_dim)
    a: np.ndarray  # (heads, 2 * out_dim); first half scores the centre node, second the neighbour
    mode: str = "concat"
    activation: str = "elu"
    slope: float = 0.2

    def __post_init__(self):
        if self.W.ndim != 3 or self.a.shape != (self.W.shape[0], 2 * self.W.shape[1]):
            raise ValueError(f"inconsistent GAT shapes W{self.W.shape} a{self.a.shape}")
        if self.mode not in ("concat", "average"):
            raise ValueError(f"unknown GAT mode {self.mode!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def heads(self) -> int:
        return self.W.shape[0]

    @property
    def in_dim(self) -> int:
        return self.W.shape[2]

    @property
    def out_dim(self) -> int:
        return self.W.shape[1]

    @property
    def output_width(self) -> int:
        return self.heads * self.out_dim if self.mode == "concat" else self.out_dim


def init_gat_layer(rng: np.random.Generator, in_dim: int, out_dim: int, heads: int,
                   mode: str = "concat", activation: str = "elu", slope: float = 0.2) -> GatLayerParams:
    W = glorot(rng, (heads, out_dim, in_dim))
    a = glorot(rng, (heads, 2 * out_dim), fan_in=2 * out_dim, fan_out=1)
    return GatLayerParams(W, a, mode, activation, slope)


@dataclass
class GatTrace:
    params: GatLayerParams
    f: np.ndarray
    mask: np.ndarray
    z: np.ndarray  # (heads, N, out) projected features
    raw: np.ndarray  # (heads, N, N) pre-LeakyReLU logits
    alpha: np.ndarray  # (heads, N, N)
    agg: np.ndarray  # (heads, N, out) attention-weighted sums
    pre: np.ndarray  # activation input: agg (concat) or its head mean (average)
    stamp: tuple[float, float]


def _stamp(params: GatLayerParams) -> tuple[float, float]:
    return float(params.W.sum()), float(params.a.sum())


def _check(f: np.ndarray, mask: np.ndarray, params: GatLayerParams) -> None:
    if f.ndim != 2 or f.shape[1] != params.in_dim:
        raise ValueError(f"feature width {f.shape[-1]} != layer input width {params.in_dim}")
    if mask.shape != (f.shape[0], f.shape[0]):
        raise ValueError(f"graph has {mask.shape[0]} nodes, features have {f.shape[0]} rows")


def _logits(f, params):
    out = params.out_dim
    z = np.einsum("ni,moi->mno", f, params.W)
    s_self = np.einsum("mno,mo->mn", z, params.a[:, :out])
    s_nbr = np.einsum("mno,mo->mn", z, params.a[:, out:])
    raw = s_self[:, :, None] + s_nbr[:, None, :]
    return z, raw, np.where(raw >= 0, raw, params.slope * raw)


def gat_attention(f, graph, params: GatLayerParams, head: int) -> np.ndarray:
    """Attention coefficients of one head; row i is a distribution over the neighbours of i."""
    f = np.asarray(f, dtype=DTYPE)
    mask = _mask(graph)
    _check(f, mask, params)
    _, _, logits = _logits(f, params)
    return masked_softmax(logits[head], mask)


def _mask(graph) -> np.ndarray:
    return graph.adjacency if hasattr(graph, "adjacency") else np.asarray(graph, dtype=bool)


def gat_forward(f, graph, params: GatLayerParams) -> tuple[np.ndarray, GatTrace]:
    f = np.asarray(f, dtype=DTYPE)
    mask = _mask(graph)
    _check(f, mask, params)
    z, raw, logits = _logits(f, params)
    alpha = masked_softmax(logits, mask[None, :, :])
    agg = alpha @ z
    act = ACTIVATIONS[params.activation][0]
    if params.mode == "concat":
        pre = agg
        out = act(agg).transpose(1, 0, 2).reshape(f.shape[0], -1)
    else:
        pre = agg.mean(axis=0)
        out = act(pre)
    return out, GatTrace(params, f, mask, z, raw, alpha, agg, pre, _stamp(params))


def gat_backward(trace: GatTrace, grad_out) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (features, W, a) of the forward map, given dLoss/dOutput."""
    p = trace.params
    if _stamp(p) != trace.stamp:
        raise StaleTraceError("GAT parameters changed since the forward pass")
    heads, n, out = trace.z.shape
    grad_out = np.asarray(grad_out, dtype=DTYPE)
    dact = ACTIVATIONS[p.activation][1]
    if p.mode == "concat":
        dagg = grad_out.reshape(n, heads, out).transpose(1, 0, 2) * dact(trace.pre)
    else:
        dpre = grad_out * dact(trace.pre)
        dagg = np.broadcast_to(dpre / heads, (heads, n, out))
    alpha, z = trace.alpha, trace.z
    dalpha = dagg @ z.transpose(0, 2, 1)
    dz = alpha.transpose(0, 2, 1) @ dagg
    dlogit = alpha * (dalpha - np.sum(alpha * dalpha, axis=2, keepdims=True))
    draw = dlogit * leaky_relu_grad(trace.raw, p.slope)
    ds_self = draw.sum(axis=2)
    ds_nbr = draw.sum(axis=1)
    a_self, a_nbr = p.a[:, :out], p.a[:, out:]
    da = np.concatenate([np.einsum("mn,mno->mo", ds_self, z),
                         np.einsum("mn,mno->mo", ds_nbr, z)], axis=1)
    dz = dz + ds_self[:, :, None] * a_self[:, None, :] + ds_nbr[:, :, None] * a_nbr[:, None, :]
    dW = np.einsum("mno,ni->moi", dz, trace.f)
    df = np.einsum("mno,moi->ni", dz, p.W)
    return df, dW, da


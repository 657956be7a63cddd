"""The three tagging pipelines and their backward passes.

A: embeddings -> GAT over the dependency graph -> [embeddings ; GAT] -> BiLSTM -> emissions
B: [embeddings ; frozen contextual features] -> BiLSTM -> emissions
C: embeddings -> GAT over the lexicon graph -> emissions (node classification)

Emissions always feed the CRF over the nine BIO labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..corpus import NUM_LABELS
from ..crf import crf_nll, init_transitions
from ..gat import GatLayerParams, GatTrace, gat_backward, gat_forward
from ..numerics import DTYPE, dropout_mask, glorot, split_rngs
from .config import ModelConfig
from .lstm import BiLstmTrace, bilstm_backward, bilstm_forward, init_bilstm


class MissingInputError(ValueError):
    pass


def lstm_input_width(config: ModelConfig) -> int:
    if config.variant == "A":
        return config.embed_dim + config.gat_output_width
    return config.embed_dim + config.frozen_dim


def init_params(config: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    rng_embed, rng_gat, rng_lstm, rng_out = split_rngs(seed, 4)
    params = {"embed": rng_embed.normal(0.0, 0.1, size=(len(config.vocab), config.embed_dim))}
    if config.uses_graph:
        width = config.embed_dim
        for l, (dim, heads) in enumerate(zip(config.gat_dims, config.gat_heads)):
            params[f"gat{l}.W"] = glorot(rng_gat, (heads, dim, width))
            params[f"gat{l}.a"] = glorot(rng_gat, (heads, 2 * dim), fan_in=2 * dim, fan_out=1)
            width = dim * heads if l < len(config.gat_dims) - 1 else dim
    if config.uses_lstm:
        params.update(init_bilstm(rng_lstm, lstm_input_width(config), config.lstm_hidden))
        feat = 2 * config.lstm_hidden
    else:
        feat = config.gat_output_width
    params["out.W"] = glorot(rng_out, (NUM_LABELS, feat))
    params["out.b"] = np.zeros(NUM_LABELS, dtype=DTYPE)
    params["crf.A"] = init_transitions(NUM_LABELS)
    return params


def gat_layers(config: ModelConfig, params: dict) -> list[GatLayerParams]:
    last = len(config.gat_dims) - 1
    return [GatLayerParams(params[f"gat{l}.W"], params[f"gat{l}.a"],
                           mode="concat" if l < last else "average",
                           activation="elu" if l < last else config.gat_final_activation,
                           slope=config.leaky_slope)
            for l in range(len(config.gat_dims))]


@dataclass
class PipelineTrace:
    ids: np.ndarray
    encoder: np.ndarray
    gat_traces: list[GatTrace] = field(default_factory=list)
    gat_out: np.ndarray | None = None
    concat: np.ndarray | None = None
    lstm: BiLstmTrace | None = None
    lstm_out: np.ndarray | None = None
    features: np.ndarray | None = None  # input to the emission projection
    emissions: np.ndarray | None = None
    masks: dict[str, np.ndarray | None] = field(default_factory=dict)


def _drop(x, rng, rate, masks, key):
    m = dropout_mask(rng, x.shape, rate) if rng is not None else None
    masks[key] = m
    return x if m is None else x * m


def model_forward(params: dict, config: ModelConfig, ids, graph=None, frozen=None,
                  rng: np.random.Generator | None = None, dropout: float = 0.0):
    """Emissions (N x 9) and the trace needed for the backward pass.

    Dropout is applied only when ``rng`` is given (training mode).
    """
    ids = np.asarray(ids, dtype=int)
    n = len(ids)
    if n < 1:
        raise ValueError("empty sentence")
    if config.uses_graph and graph is None:
        raise MissingInputError(f"variant {config.variant} needs a character graph")
    if config.variant == "B":
        if frozen is None:
            raise MissingInputError("variant B needs frozen contextual features")
        frozen = np.asarray(frozen, dtype=DTYPE)
        if frozen.shape != (n, config.frozen_dim):
            raise ValueError(f"frozen features {frozen.shape} != ({n}, {config.frozen_dim})")
    masks: dict = {}
    h = _drop(params["embed"][ids], rng, dropout, masks, "encoder")
    tr = PipelineTrace(ids, h, masks=masks)

    if config.uses_graph:
        g = h
        for layer in gat_layers(config, params):
            g, gt = gat_forward(g, graph, layer)
            tr.gat_traces.append(gt)
        g = _drop(g, rng, dropout, masks, "gat")
        tr.gat_out = g

    if config.uses_lstm:
        side = tr.gat_out if config.variant == "A" else frozen
        tr.concat = np.concatenate([h, side], axis=1)
        s, tr.lstm = bilstm_forward(tr.concat, params)
        tr.lstm_out = _drop(s, rng, dropout, masks, "lstm")
        tr.features = tr.lstm_out
    else:
        tr.features = tr.gat_out

    tr.emissions = tr.features @ params["out.W"].T + params["out.b"]
    return tr.emissions, tr


def model_backward(params: dict, config: ModelConfig, tr: PipelineTrace, dV) -> dict[str, np.ndarray]:
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    dV = np.asarray(dV, dtype=DTYPE)
    grads["out.W"] = dV.T @ tr.features
    grads["out.b"] = dV.sum(axis=0)
    dfeat = dV @ params["out.W"]
    dh = np.zeros_like(tr.encoder)

    if config.uses_lstm:
        if tr.masks.get("lstm") is not None:
            dfeat = dfeat * tr.masks["lstm"]
        dconcat, g_lstm = bilstm_backward(tr.lstm, dfeat, params)
        grads.update(g_lstm)
        E = config.embed_dim
        dh += dconcat[:, :E]
        dgat = dconcat[:, E:] if config.variant == "A" else None
    else:
        dgat = dfeat

    if config.uses_graph:
        if tr.masks.get("gat") is not None:
            dgat = dgat * tr.masks["gat"]
        for l in range(len(tr.gat_traces) - 1, -1, -1):
            dgat, dW, da = gat_backward(tr.gat_traces[l], dgat)
            grads[f"gat{l}.W"] = dW
            grads[f"gat{l}.a"] = da
        dh += dgat

    if tr.masks.get("encoder") is not None:
        dh = dh * tr.masks["encoder"]
    np.add.at(grads["embed"], tr.ids, dh)
    return grads


def sentence_loss(params: dict, config: ModelConfig, ids, tags, graph=None, frozen=None,
                  rng=None, dropout: float = 0.0, with_grad: bool = True):
    """CRF negative log-likelihood of ``tags`` and (optionally) gradients for every tensor."""
    V, tr = model_forward(params, config, ids, graph, frozen, rng, dropout)
    loss, dV, dA = crf_nll(V, tags, params["crf.A"])
    if not with_grad:
        return loss, None
    grads = model_backward(params, config, tr, dV)
    grads["crf.A"] = dA
    return loss, grads

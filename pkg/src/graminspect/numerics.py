"""Double-precision kernels shared by the learned modules.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence``; child streams are derived with ``SeedSequence.spawn`` so
that workers never share a stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

DTYPE = np.float64


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def split_rngs(seed: int, k: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(k)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def log_sum_exp(v, axis=None):
    v = np.asarray(v, dtype=DTYPE)
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty vector")
    m = np.max(v, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(v - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def masked_softmax(logits, mask, axis=-1):
    """Softmax restricted to ``mask``; masked-out entries come back as exact zeros."""
    logits = np.asarray(logits, dtype=DTYPE)
    mask = np.asarray(mask, dtype=bool)
    if not np.all(np.any(mask, axis=axis)):
        raise ValueError("masked_softmax needs at least one kept entry per row")
    shifted = np.where(mask, logits, -np.inf)
    shifted = shifted - np.max(shifted, axis=axis, keepdims=True)
    e = np.where(mask, np.exp(shifted), 0.0)
    return e / np.sum(e, axis=axis, keepdims=True)


def leaky_relu(x, slope=0.2):
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky slope must lie in (0, 1), got {slope}")
    if np.ndim(x) == 0:
        return float(x) if x >= 0 else slope * float(x)
    x = np.asarray(x, dtype=DTYPE)
    return np.where(x >= 0, x, slope * x)


def leaky_relu_grad(x, slope=0.2):
    return np.where(x >= 0, 1.0, slope)


def elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(x):
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def sigmoid(x):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=DTYPE)))


ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    "identity": (lambda x: x, lambda x: np.ones_like(x)),
    "elu": (elu, elu_grad),
    "tanh": (np.tanh, lambda x: 1.0 - np.tanh(x) ** 2),
}


def glorot(rng: np.random.Generator, shape, fan_in=None, fan_out=None) -> np.ndarray:
    fan_in = shape[-1] if fan_in is None else fan_in
    fan_out = shape[-2] if fan_out is None and len(shape) > 1 else (fan_out or 1)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(DTYPE)


def dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray | None:
    """Inverted-dropout multiplier, or None when dropout is inactive."""
    if rate <= 0.0:
        return None
    if rate >= 1.0:
        raise ValueError("dropout rate must be < 1")
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


# -- finite differences -------------------------------------------------------

@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    worst: tuple[str, tuple[int, ...]] | None
    analytic: float = 0.0
    numeric: float = 0.0
    checked: int = 0

    def __str__(self):
        status = "ok" if self.passed else "FAILED"
        where = f" at {self.worst[0]}{list(self.worst[1])}" if self.worst else ""
        return (f"gradient check {status}: max rel err {self.max_rel_error:.3e}{where} "
                f"(analytic {self.analytic:.6g}, numeric {self.numeric:.6g}, {self.checked} coords)")


def relative_error(a: float, n: float, floor: float = 1e-6) -> float:
    return abs(a - n) / max(abs(a), abs(n), floor)


def finite_diff_check(f: Callable[[], float], params: Mapping[str, np.ndarray],
                      analytic: Mapping[str, np.ndarray], h: float = 1e-5, tol: float = 1e-4,
                      max_coords: int | None = None, rng: np.random.Generator | None = None,
                      floor: float = 1e-6) -> GradCheckReport:
    """Compare ``analytic`` against central differences of ``f``.

    ``f`` takes no arguments and reads ``params`` in place; each probed
    coordinate is perturbed by ±h and restored. ``max_coords`` limits the
    probe to a random subset per tensor.
    """
    worst = None
    max_err = 0.0
    worst_pair = (0.0, 0.0)
    checked = 0
    for name in sorted(params):
        p = params[name]
        g = np.asarray(analytic[name])
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        coords = list(np.ndindex(*p.shape))
        if max_coords is not None and len(coords) > max_coords:
            rng = rng or make_rng(0)
            pick = rng.choice(len(coords), size=max_coords, replace=False)
            coords = [coords[i] for i in sorted(pick)]
        for idx in coords:
            orig = p[idx]
            p[idx] = orig + h
            fp = f()
            p[idx] = orig - h
            fm = f()
            p[idx] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise FloatingPointError(f"non-finite objective probing {name}{list(idx)}")
            num = (fp - fm) / (2 * h)
            err = relative_error(float(g[idx]), num, floor)
            checked += 1
            if err > max_err or worst is None:
                max_err, worst, worst_pair = err, (name, idx), (float(g[idx]), num)
    return GradCheckReport(max_err < tol, max_err, worst, worst_pair[0], worst_pair[1], checked)


# -- Adam ---------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray],
              state: AdamState) -> None:
    """Bias-corrected Adam update, applied in place to ``params`` and ``state``."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name in sorted(grads):
        p, g = params[name], grads[name]
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch for {name}: {p.shape} vs {g.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        if state.lr != 0.0:
            p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)

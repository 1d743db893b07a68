"""Dense attention primitives shared by the encoder, attention and decoders.

Everything here works on float64 numpy arrays and is side-effect free.
"""
from __future__ import annotations

import math

import numpy as np


def _as_logits(logits) -> np.ndarray:
    x = np.asarray(logits, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty distribution")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite logit")
    return x


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    x = _as_logits(logits)
    z = np.exp(x - x.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    x = _as_logits(logits)
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def logsumexp(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    top = x.max()
    return float(top + np.log(np.exp(x - top).sum()))


def scaled_dot_attention(query, keys, values):
    """Single-query scaled dot-product attention.

    Parameters
    ----------
    query : (d,) array
    keys : (n, d) array
    values : (n, d_v) array

    Returns
    -------
    context : (d_v,) array
        ``weights @ values``.
    weights : (n,) array
        ``softmax(keys @ query / sqrt(d))``.
    """
    q = np.asarray(query, dtype=np.float64)
    k = np.asarray(keys, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if q.ndim != 1 or k.ndim != 2 or v.ndim != 2:
        raise ValueError("attention expects a vector query and matrix keys/values")
    if k.shape[1] != q.shape[0]:
        raise ValueError(f"query dim {q.shape[0]} != key dim {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ValueError(f"{k.shape[0]} keys but {v.shape[0]} values")
    weights = softmax(k @ q / math.sqrt(q.shape[0]))
    return weights @ v, weights


def batched_attention(queries, keys, values, mask=None):
    """Attention for a stack of queries: (..., n_q, d) x (..., n_k, d).

    ``mask`` (broadcastable to the score shape) marks positions that may be
    attended; masked-out scores are excluded from the softmax.
    """
    d = queries.shape[-1]
    scores = queries @ np.swapaxes(keys, -1, -2) / math.sqrt(d)
    if mask is not None:
        scores = np.where(mask, scores, -np.inf)
    scores = scores - scores.max(axis=-1, keepdims=True)
    w = np.exp(scores)
    w /= w.sum(axis=-1, keepdims=True)
    return w @ values, w


def sinusoidal_position_encoding(length: int, dim: int) -> np.ndarray:
    """(length, dim) table; even columns sin(p / 10000^(2k/dim)), odd cos."""
    if dim % 2:
        raise ValueError(f"position encoding dim must be even, got {dim}")
    if length < 1:
        raise ValueError("position encoding length must be >= 1")
    pos = np.arange(length, dtype=np.float64)[:, None]
    rates = np.power(10000.0, np.arange(0, dim, 2, dtype=np.float64) / dim)
    table = np.empty((length, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(pos / rates)
    table[:, 1::2] = np.cos(pos / rates)
    return table


def layer_norm(x, gamma, beta, eps: float = 1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gamma + beta

"""Phrase-level CPN attention and context purification."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .cpn_encoder import ContextBank
from .numerics import batched_attention, scaled_dot_attention


@dataclass(frozen=True)
class AttentionProjection:
    """Query/key projections of a single-head attention module.

    Values are the key-side embeddings themselves, so the context vector is a
    convex combination of bank rows.
    """

    wq: np.ndarray  # (d_att, d_query)
    wk: np.ndarray  # (d_att, d_key)

    def __post_init__(self):
        if self.wq.shape[0] != self.wk.shape[0]:
            raise ValueError(f"query/key projections disagree: {self.wq.shape} vs {self.wk.shape}")

    @property
    def query_dim(self) -> int:
        return self.wq.shape[1]

    @property
    def key_dim(self) -> int:
        return self.wk.shape[1]

    def arrays(self, prefix: str) -> dict:
        return {f"{prefix}.wq": self.wq, f"{prefix}.wk": self.wk}

    @classmethod
    def from_arrays(cls, arrays, prefix):
        return cls(np.asarray(arrays[f"{prefix}.wq"], dtype=np.float64),
                   np.asarray(arrays[f"{prefix}.wk"], dtype=np.float64))

    @classmethod
    def identity(cls, dim: int) -> "AttentionProjection":
        return cls(np.eye(dim), np.eye(dim))

    @classmethod
    def random(cls, rng, att_dim, query_dim, key_dim, scale=1.0):
        return cls(rng.normal(0, scale / np.sqrt(query_dim), size=(att_dim, query_dim)),
                   rng.normal(0, scale / np.sqrt(key_dim), size=(att_dim, key_dim)))

    def attend(self, query, keys, values=None):
        """``(context, weights)`` for one query against rows of ``keys``."""
        query = np.asarray(query, dtype=np.float64)
        keys = np.asarray(keys, dtype=np.float64)
        if query.shape != (self.query_dim,):
            raise ValueError(f"query dim {query.shape} does not match projection input {self.query_dim}")
        if keys.ndim != 2 or keys.shape[1] != self.key_dim:
            raise ValueError(f"key rows must have dim {self.key_dim}, got {keys.shape}")
        _, weights = scaled_dot_attention(self.wq @ query, keys @ self.wk.T, keys)
        vals = keys if values is None else values
        return weights @ vals, weights

    def attend_all(self, queries, keys):
        """Weights (n_q, n_k) and contexts (n_q, d_key) for a stack of queries."""
        queries = np.asarray(queries, dtype=np.float64)
        if queries.ndim != 2 or queries.shape[1] != self.query_dim:
            raise ValueError(f"queries must be (n, {self.query_dim}), got {queries.shape}")
        ctx, w = batched_attention(queries @ self.wq.T, keys @ self.wk.T, keys)
        return ctx, w


@dataclass(frozen=True)
class AttentionRecord:
    step: int
    weights: np.ndarray  # (N + 1,), entry 0 is the no-bias weight
    context: np.ndarray  # raw m_i


@dataclass(frozen=True)
class PurifyConfig:
    k: int = 2

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("purification k must be >= 1")


def phrase_attention(query, bank: ContextBank, proj: AttentionProjection, step: int = 0) -> AttentionRecord:
    """Attend from acoustic embedding ``query`` over the bank's phrase embeddings."""
    if len(bank) == 0:
        raise ValueError("empty context bank")
    context, weights = proj.attend(query, bank.phrase_embeddings)
    return AttentionRecord(step, weights, context)


def phrase_attention_all(queries, bank: ContextBank, proj: AttentionProjection) -> list:
    """One ``AttentionRecord`` per row of ``queries`` (first decoding pass)."""
    if len(bank) == 0:
        raise ValueError("empty context bank")
    if len(queries) == 0:
        return []
    ctx, w = proj.attend_all(queries, bank.phrase_embeddings)
    return [AttentionRecord(i, w[i], ctx[i]) for i in range(w.shape[0])]


def select_top(weights, k: int) -> np.ndarray:
    """Indices of the ``k`` largest weights, largest first, ties to lower index."""
    return kernels.topk_desc(np.asarray(weights, dtype=np.float64), k)


def purify_weights(weights, k: int):
    """``(selected indices, re-normalized weights)``; k beyond the length clamps."""
    w = np.asarray(weights, dtype=np.float64)
    idx = select_top(w, k)
    picked = w[idx]
    return idx, picked / picked.sum()


def purify(record: AttentionRecord, bank: ContextBank, cfg: PurifyConfig) -> np.ndarray:
    """Purified context: re-normalized top-k weights over their phrase embeddings.

    The no-bias entry competes for the k slots like any phrase.
    """
    idx, renorm = purify_weights(record.weights, cfg.k)
    return renorm @ bank.phrase_embeddings[idx]

"""Fine-grained contextual knowledge selection.

Hard top-M phrase selection on averaged phrase attention, followed by
token-level attention over the tokens of the surviving phrases.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .biasing import AttentionProjection
from .cpn_encoder import ContextBank


class SelectionMode(str, Enum):
    GLOBAL = "global"
    LOCAL = "local"


@dataclass(frozen=True)
class SelectionConfig:
    m: int = 5
    mode: SelectionMode = SelectionMode.GLOBAL
    q: int = 5

    def __post_init__(self):
        object.__setattr__(self, "mode", SelectionMode(self.mode))
        if self.m < 1:
            raise ValueError("selection m must be >= 1")
        if self.mode is SelectionMode.LOCAL and self.q < 1:
            raise ValueError("local window q must be >= 1")


@dataclass(frozen=True)
class TokenKeySet:
    """Keys/values for token attention.

    Row 0 is the token-level no-bias option; the remaining rows are the
    tokens of the selected phrases in selection order. ``origin[r]`` is the
    ``(list index, token position)`` that produced row ``r``.
    """

    rows: np.ndarray
    origin: tuple

    def __len__(self) -> int:
        return self.rows.shape[0]


def average_attention(history, mode, q: int, current_step: int) -> np.ndarray:
    """Average phrase-attention weights over the history.

    ``global`` averages every record; ``local`` averages records whose step
    lies in ``[current_step - q + 1, current_step]`` (fewer at the start).
    """
    if not history:
        raise ValueError("empty attention history")
    mode = SelectionMode(mode)
    if mode is SelectionMode.GLOBAL:
        rows = [r.weights for r in history]
    else:
        lo = current_step - q + 1
        rows = [r.weights for r in history if lo <= r.step <= current_step]
        if not rows:
            raise ValueError(f"no attention records in window ending at step {current_step}")
    return np.mean(np.stack(rows), axis=0)


def select_phrases(averaged, m: int) -> np.ndarray:
    """List indices (1..N) of the ``m`` phrases with the highest averaged weight.

    The no-bias weight at position 0 is ignored; ties go to the lower index.
    """
    a = np.asarray(averaged, dtype=np.float64)
    return kernels.topk_desc(a[1:], m) + 1


def build_token_keys(selected, bank: ContextBank) -> TokenKeySet:
    """Token embeddings plus their phrase embedding, no-bias row first."""
    rows = [bank.no_bias_token + bank.phrase_embeddings[0]]
    origin = [(0, 0)]
    for n in selected:
        n = int(n)
        tok = bank.token_embeddings[n]
        rows.extend(tok + bank.phrase_embeddings[n])
        origin.extend((n, j) for j in range(tok.shape[0]))
    return TokenKeySet(np.vstack(rows), tuple(origin))


def token_attention(query, keys: TokenKeySet, proj: AttentionProjection):
    """``(g, weights)``: token-level context vector and its attention weights."""
    return proj.attend(query, keys.rows)


@dataclass(frozen=True)
class FinecoStep:
    step: int
    selected: tuple
    origin: tuple
    weights: np.ndarray
    context: np.ndarray


def fineco_contexts(queries, records, bank: ContextBank, proj: AttentionProjection,
                    cfg: SelectionConfig) -> list:
    """Second decoding pass: one ``FinecoStep`` per token-level acoustic query."""
    out = []
    global_avg = None
    if cfg.mode is SelectionMode.GLOBAL and records:
        global_avg = average_attention(records, cfg.mode, cfg.q, len(records) - 1)
    for i, query in enumerate(queries):
        avg = global_avg if global_avg is not None else average_attention(records, cfg.mode, cfg.q, i)
        selected = select_phrases(avg, cfg.m)
        keys = build_token_keys(selected, bank)
        g, w = token_attention(query, keys, proj)
        out.append(FinecoStep(i, tuple(int(s) for s in selected), keys.origin, w, g))
    return out

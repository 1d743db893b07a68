"""Biasing-list preprocessing and the CPN phrase encoder."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .numerics import sinusoidal_position_encoding
from .transformer import SanLayer, run_stack, stack_arrays, stack_from_arrays
from .vocab import NO_BIAS


@dataclass(frozen=True)
class Phrase:
    tokens: tuple
    display: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError("phrase must contain at least one token")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class BiasingList:
    """Session-level phrase list. Entry 0 is always the no-bias option."""

    phrases: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "phrases", tuple(self.phrases))

    def __len__(self) -> int:
        """Number of real phrases N (the no-bias entry is not counted)."""
        return len(self.phrases)

    def entry(self, index: int) -> Phrase:
        """Phrase at list index ``index``; index 0 is not a real phrase."""
        if index == 0:
            raise IndexError("index 0 is the no-bias entry")
        return self.phrases[index - 1]

    def extend(self, extra) -> "BiasingList":
        return BiasingList(self.phrases + tuple(extra))


def prepare_phrase(raw: Phrase, ext_id) -> Phrase:
    """Prepend the ``<EXT>`` token used to read out the phrase embedding."""
    return Phrase((ext_id,) + raw.tokens, raw.display)


def no_bias_phrase(no_bias_id) -> Phrase:
    return Phrase((no_bias_id,), NO_BIAS)


@dataclass(frozen=True)
class CpnEncoderWeights:
    embedding: np.ndarray  # (V + 2, d): ASR tokens, <EXT>, <NO-BIAS>
    layers: tuple
    heads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        for layer in self.layers:
            if layer.dim != self.dim:
                raise ValueError(f"encoder layer dim {layer.dim} != embedding dim {self.dim}")

    @property
    def dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0] - 2

    @property
    def ext_id(self) -> int:
        return self.vocab_size

    @property
    def no_bias_id(self) -> int:
        return self.vocab_size + 1

    def arrays(self, prefix: str = "cpn_encoder") -> dict:
        out = {f"{prefix}.embedding": self.embedding}
        out.update(stack_arrays(self.layers, prefix))
        return out

    @classmethod
    def from_arrays(cls, arrays, count, heads, prefix="cpn_encoder"):
        return cls(np.asarray(arrays[f"{prefix}.embedding"], dtype=np.float64),
                   stack_from_arrays(arrays, prefix, count, heads), heads)

    @classmethod
    def random(cls, rng, vocab_size, dim, ff_dim, num_layers, heads=1, scale=1.0):
        return cls(rng.normal(0.0, 1.0, size=(vocab_size + 2, dim)),
                   tuple(SanLayer.random(rng, dim, ff_dim, heads, scale) for _ in range(num_layers)),
                   heads)


@dataclass(frozen=True)
class ContextBank:
    """Encoder outputs for one biasing list.

    ``phrase_embeddings[n]`` is the ``<EXT>`` output of entry ``n`` (row 0 is
    the no-bias entry); ``token_embeddings[n]`` holds one row per token of
    entry ``n``.
    """

    phrase_embeddings: np.ndarray
    token_embeddings: tuple

    def __len__(self) -> int:
        return self.phrase_embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.phrase_embeddings.shape[1]

    @property
    def no_bias_token(self) -> np.ndarray:
        return self.token_embeddings[0][0]

    def subset(self, indices) -> "ContextBank":
        """Bank restricted to the given entries (row 0 of the result is indices[0])."""
        idx = list(indices)
        return ContextBank(self.phrase_embeddings[idx], tuple(self.token_embeddings[i] for i in idx))


def encode_list(blist: BiasingList, weights: CpnEncoderWeights, use_position: bool) -> ContextBank:
    """Encode the no-bias entry and every phrase of ``blist``.

    Each entry is run through the encoder on its own (no cross-phrase
    attention); entries of equal length are batched together.
    """
    V = weights.vocab_size
    entries = [prepare_phrase(no_bias_phrase(weights.no_bias_id), weights.ext_id)]
    for n, phrase in enumerate(blist.phrases, 1):
        bad = [t for t in phrase.tokens if not 0 <= t < V]
        if bad:
            name = phrase.display or " ".join(map(str, phrase.tokens))
            raise ValueError(f"phrase {n} ({name!r}) has token ids outside the vocabulary: {bad}")
        entries.append(prepare_phrase(phrase, weights.ext_id))

    by_len = defaultdict(list)
    for n, entry in enumerate(entries):
        by_len[len(entry)].append(n)

    d = weights.dim
    phrase_emb = np.empty((len(entries), d))
    token_emb = [None] * len(entries)
    for length, members in sorted(by_len.items()):
        ids = np.array([entries[n].tokens for n in members], dtype=np.int64)
        x = weights.embedding[ids]
        if use_position:
            x = x + sinusoidal_position_encoding(length, d)
        out = run_stack(weights.layers, x)
        for row, n in enumerate(members):
            phrase_emb[n] = out[row, 0]
            token_emb[n] = out[row, 1:].copy()
    return ContextBank(phrase_emb, tuple(token_emb))

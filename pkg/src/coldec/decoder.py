"""CPN decoder, ASR probability sources and collaborative beam search."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from . import kernels
from .biasing import PurifyConfig
from .fineco import SelectionConfig
from .numerics import log_softmax, sinusoidal_position_encoding
from .transformer import SanLayer, run_stack, stack_arrays, stack_from_arrays
from .vocab import HASH


class DecodeError(RuntimeError):
    """Failure inside a decode step; ``step`` is the CIF step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class DecodeConfig:
    lam: float = 1.0
    beam: int = 10
    fineco_enabled: bool = False
    purify_enabled: bool = False
    position_enabled: bool = False
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    purify: PurifyConfig = field(default_factory=PurifyConfig)
    no_bias_neutral: bool = False
    # feed the purified m_i to the CPN decoder even when FineCoS is on
    purify_with_fineco: bool = True

    def __post_init__(self):
        if self.beam < 1:
            raise ValueError("beam must be >= 1")
        if not self.lam >= 0:
            raise ValueError("lambda must be >= 0")


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple
    score: float
    cpn_tokens: tuple = ()


# --------------------------------------------------------------------------
# CPN decoder


@dataclass(frozen=True)
class CpnDecoderWeights:
    w_in: np.ndarray  # (d_dec, d_acoustic + d_cpn), applied to [c_i; m_i]
    layers: tuple
    out_proj: np.ndarray  # (V + 1, d_dec)
    out_bias: np.ndarray  # (V + 1,)
    out_proj_g: np.ndarray | None = None  # (V + 1, d_cpn); the g_i half of the projection
    heads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        d = self.w_in.shape[0]
        for layer in self.layers:
            if layer.dim != d:
                raise ValueError(f"CPN decoder layer dim {layer.dim} != input projection dim {d}")
        if self.out_proj.shape[1] != d or self.out_bias.shape != (self.out_proj.shape[0],):
            raise ValueError("CPN output projection inconsistent with decoder dim")
        if self.out_proj_g is not None and self.out_proj_g.shape[0] != self.out_proj.shape[0]:
            raise ValueError("token-attention projection rows must match the CPN vocabulary")

    @property
    def dim(self) -> int:
        return self.w_in.shape[0]

    @property
    def output_size(self) -> int:
        return self.out_proj.shape[0]

    @property
    def supports_fineco(self) -> bool:
        return self.out_proj_g is not None

    def arrays(self, prefix: str = "cpn_decoder") -> dict:
        out = {f"{prefix}.w_in": self.w_in, f"{prefix}.out_proj": self.out_proj,
               f"{prefix}.out_bias": self.out_bias}
        if self.out_proj_g is not None:
            out[f"{prefix}.out_proj_g"] = self.out_proj_g
        out.update(stack_arrays(self.layers, prefix))
        return out

    @classmethod
    def from_arrays(cls, arrays, count, heads, prefix="cpn_decoder"):
        g = arrays.get(f"{prefix}.out_proj_g")
        return cls(np.asarray(arrays[f"{prefix}.w_in"], dtype=np.float64),
                   stack_from_arrays(arrays, prefix, count, heads),
                   np.asarray(arrays[f"{prefix}.out_proj"], dtype=np.float64),
                   np.asarray(arrays[f"{prefix}.out_bias"], dtype=np.float64),
                   None if g is None else np.asarray(g, dtype=np.float64), heads)

    @classmethod
    def random(cls, rng, vocab_size, acoustic_dim, cpn_dim, dim, ff_dim, num_layers,
               heads=1, fineco=True):
        def mat(r, c, s=1.0):
            return rng.normal(0.0, s / np.sqrt(c), size=(r, c))

        return cls(mat(dim, acoustic_dim + cpn_dim),
                   tuple(SanLayer.random(rng, dim, ff_dim, heads) for _ in range(num_layers)),
                   mat(vocab_size + 1, dim, 2.0), np.zeros(vocab_size + 1),
                   mat(vocab_size + 1, cpn_dim, 2.0) if fineco else None, heads)


@dataclass(frozen=True)
class CpnState:
    """Per-layer inputs seen so far; ``step`` is the next position."""

    inputs: tuple = ()
    step: int = 0

    @classmethod
    def initial(cls, weights: CpnDecoderWeights) -> "CpnState":
        return cls(tuple(np.zeros((0, weights.dim)) for _ in weights.layers), 0)


def cpn_step(c, m, g, state: CpnState, weights: CpnDecoderWeights, step: int | None = None):
    """One CPN decoder step.

    The decoder consumes ``[c; m]``; its output state is combined with the
    token-level context ``g`` (when given) in the output projection. Returns
    ``(log-probabilities over ASR vocab + "#", new state)``.
    """
    if step is not None and step != state.step:
        raise DecodeError(f"CPN state is at step {state.step}, asked for step {step}", step)
    if len(state.inputs) != len(weights.layers):
        raise DecodeError(f"CPN state has {len(state.inputs)} layers, weights have {len(weights.layers)}",
                          state.step)
    x = np.concatenate([np.asarray(c, dtype=np.float64), np.asarray(m, dtype=np.float64)])
    if x.shape[0] != weights.w_in.shape[1]:
        raise DecodeError(f"CPN input dim {x.shape[0]} != expected {weights.w_in.shape[1]}", state.step)
    h = weights.w_in @ x
    new_inputs = []
    for layer, past in zip(weights.layers, state.inputs):
        hist = np.vstack([past, h[None, :]])
        new_inputs.append(hist)
        h = layer.forward_last(hist)
    logits = weights.out_proj @ h + weights.out_bias
    if g is not None:
        if weights.out_proj_g is None:
            raise DecodeError("token-level context given but the CPN decoder has no FineCoS projection",
                              state.step)
        logits = logits + weights.out_proj_g @ np.asarray(g, dtype=np.float64)
    return log_softmax(logits), CpnState(tuple(new_inputs), state.step + 1)


def run_cpn_decoder(acoustic, contexts, token_contexts, weights: CpnDecoderWeights) -> np.ndarray:
    """CPN log-probabilities (I, V + 1) for a whole utterance."""
    state = CpnState.initial(weights)
    rows = []
    for i in range(len(acoustic)):
        g = None if token_contexts is None else token_contexts[i]
        logp, state = cpn_step(acoustic[i], contexts[i], g, state, weights, step=i)
        rows.append(logp)
    return np.array(rows).reshape(len(rows), weights.output_size)


# --------------------------------------------------------------------------
# ASR probability sources


class ProbabilitySource(Protocol):
    vocab_size: int

    def log_probs(self, acoustic: np.ndarray, prefix: Sequence[int]) -> np.ndarray:
        """Log-probabilities over the ASR vocabulary for step ``len(prefix)``."""


class ScriptedSource:
    """Fixed per-step log-probability table, optionally overridden per prefix.

    ``overrides`` maps a prefix tuple to a replacement row; it lets tests
    build prefix-dependent sources without a neural model.
    """

    def __init__(self, table, overrides=None):
        self.table = np.asarray(table, dtype=np.float64)
        if self.table.ndim != 2:
            raise ValueError("scripted table must be (steps, vocab)")
        self.vocab_size = self.table.shape[1]
        self.overrides = {tuple(k): np.asarray(v, dtype=np.float64) for k, v in (overrides or {}).items()}

    def log_probs(self, acoustic, prefix):
        i = len(prefix)
        if i >= self.table.shape[0]:
            raise IndexError(f"scripted source has {self.table.shape[0]} steps, asked for step {i}")
        row = self.overrides.get(tuple(prefix))
        return self.table[i] if row is None else row


@dataclass(frozen=True)
class AsrDecoderWeights:
    embedding: np.ndarray  # (V + 1, d); row V is the start symbol
    w_in: np.ndarray  # (d, d_acoustic)
    layers: tuple
    out_proj: np.ndarray  # (V, d)
    out_bias: np.ndarray
    heads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def vocab_size(self) -> int:
        return self.out_proj.shape[0]

    def arrays(self, prefix: str = "asr_decoder") -> dict:
        out = {f"{prefix}.embedding": self.embedding, f"{prefix}.w_in": self.w_in,
               f"{prefix}.out_proj": self.out_proj, f"{prefix}.out_bias": self.out_bias}
        out.update(stack_arrays(self.layers, prefix))
        return out

    @classmethod
    def from_arrays(cls, arrays, count, heads, prefix="asr_decoder"):
        f = lambda k: np.asarray(arrays[f"{prefix}.{k}"], dtype=np.float64)  # noqa: E731
        return cls(f("embedding"), f("w_in"), stack_from_arrays(arrays, prefix, count, heads),
                   f("out_proj"), f("out_bias"), heads)

    @classmethod
    def random(cls, rng, vocab_size, acoustic_dim, dim, ff_dim, num_layers, heads=1):
        return cls(rng.normal(0, 1.0, size=(vocab_size + 1, dim)),
                   rng.normal(0, 1.0 / np.sqrt(acoustic_dim), size=(dim, acoustic_dim)),
                   tuple(SanLayer.random(rng, dim, ff_dim, heads) for _ in range(num_layers)),
                   rng.normal(0, 3.0 / np.sqrt(dim), size=(vocab_size, dim)),
                   np.zeros(vocab_size), heads)


class SanAsrSource:
    """Small causal SAN decoder driven by CIF embeddings and the token prefix.

    Position ``t`` receives ``W_in c_t + emb(previous token) + PE(t)``. The
    source is stateless and safe to share between threads.
    """

    def __init__(self, weights: AsrDecoderWeights):
        self.weights = weights
        self.vocab_size = weights.vocab_size

    def log_probs(self, acoustic, prefix):
        w = self.weights
        L = len(prefix) + 1
        prev = np.array([w.vocab_size] + list(prefix), dtype=np.int64)
        x = acoustic[:L] @ w.w_in.T + w.embedding[prev]
        x = x + sinusoidal_position_encoding(L, x.shape[1])
        h = run_stack(w.layers, x[None], causal=True)[0, -1]
        return log_softmax(w.out_proj @ h + w.out_bias)


# --------------------------------------------------------------------------
# Search


def cpn_token_scores(cpn_logp: np.ndarray, no_bias_neutral: bool = False) -> np.ndarray:
    """Map CPN log-probabilities (I, V + 1) to per-ASR-token scores (I, V).

    By default token v scores ``log P_c(v)`` and ``#`` is left out. With
    ``no_bias_neutral`` the ``#`` mass is spread evenly over the vocabulary.
    """
    tok = cpn_logp[:, :-1]
    if not no_bias_neutral:
        return tok
    V = tok.shape[1]
    return np.log(np.exp(tok) + np.exp(cpn_logp[:, -1:]) / V)


def collaborative_beam_search(acoustic, asr: ProbabilitySource, cpn_scores=None, lam: float = 0.0,
                              beam: int = 10, cpn_logp=None) -> Hypothesis:
    """Beam search with per-step increment ``log P(v) + lam * cpn_scores[i, v]``.

    There is one step per CIF embedding. Hypotheses are kept in
    lexicographic order so that flattened candidate indices order ties by
    token sequence. ``cpn_logp`` (I, V + 1), when given, only feeds the
    per-step CPN argmax recorded on the result.
    """
    acoustic = np.asarray(acoustic, dtype=np.float64)
    I = acoustic.shape[0]
    V = asr.vocab_size
    if cpn_scores is not None and cpn_scores.shape != (I, V):
        raise ValueError(f"CPN scores shape {cpn_scores.shape} != ({I}, {V})")
    hyps = [()]
    scores = np.zeros(1)
    for i in range(I):
        incr = np.empty((len(hyps), V))
        for h, prefix in enumerate(hyps):
            try:
                lp = np.asarray(asr.log_probs(acoustic, prefix), dtype=np.float64)
            except Exception as exc:
                raise DecodeError(f"probability source failed at step {i}: {exc}", i) from exc
            if lp.shape != (V,) or np.any(np.isnan(lp)):
                raise DecodeError(f"probability source returned invalid row at step {i}", i)
            # lam == 0 skips the CPN term so that 0 * -inf cannot leak in
            incr[h] = lp if cpn_scores is None or lam == 0 else lp + lam * cpn_scores[i]
        flat = (scores[:, None] + incr).ravel()
        keep = np.sort(kernels.topk_desc(flat, beam))
        hyps = [hyps[j // V] + (int(j % V),) for j in keep]
        scores = flat[keep]
    best = int(kernels.topk_desc(scores, 1)[0])
    cpn_tokens = ()
    if cpn_logp is not None:
        cpn_tokens = tuple(int(t) for t in np.argmax(cpn_logp, axis=1))
    return Hypothesis(hyps[best], float(scores[best]), cpn_tokens)


def make_cpn_target(reference: Sequence, phrase: Sequence, hash_token=HASH) -> list:
    """Keep tokens covered by any occurrence of ``phrase``; others become ``#``."""
    ref = list(reference)
    p = list(phrase)
    n = len(p)
    keep = [False] * len(ref)
    if n:
        first = p[0]
        for s in range(len(ref) - n + 1):
            if ref[s] == first and ref[s:s + n] == p:
                for t in range(s, s + n):
                    keep[t] = True
    return [tok if k else hash_token for tok, k in zip(ref, keep)]

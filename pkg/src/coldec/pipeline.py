"""Per-utterance decoding: CIF -> phrase attention -> purification / FineCoS -> search."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .biasing import phrase_attention_all, purify
from .cif import AcousticSequence, TailPolicy, integrate_and_fire
from .cpn_encoder import BiasingList, ContextBank, encode_list
from .decoder import (DecodeConfig, Hypothesis, collaborative_beam_search, cpn_token_scores,
                      run_cpn_decoder)
from .fineco import fineco_contexts
from .model import Model


@dataclass(frozen=True)
class UtteranceResult:
    hypothesis: Hypothesis
    tokens: tuple  # token strings
    text: str
    cpn: tuple  # per-step CPN argmax as token strings ("#" for no bias)
    fineco: tuple = ()  # FinecoStep diagnostics when FineCoS ran


def encode_session(model: Model, blist: BiasingList, cfg: DecodeConfig) -> ContextBank:
    return encode_list(blist, model.cpn_encoder, use_position=cfg.position_enabled)


def contextualize(model: Model, queries: np.ndarray, bank: ContextBank, cfg: DecodeConfig):
    """CPN log-probabilities (I, V + 1) and FineCoS diagnostics for one utterance."""
    records = phrase_attention_all(queries, bank, model.phrase_attention)
    raw = [r.context for r in records]
    if cfg.purify_enabled and (cfg.purify_with_fineco or not cfg.fineco_enabled):
        contexts = [purify(r, bank, cfg.purify) for r in records]
    else:
        contexts = raw
    steps = ()
    g = None
    if cfg.fineco_enabled:
        if not model.cpn_decoder.supports_fineco:
            raise ValueError("model has no FineCoS output projection (cpn_decoder.out_proj_g)")
        steps = tuple(fineco_contexts(queries, records, bank, model.token_attention, cfg.selection))
        g = [s.context for s in steps]
    logp = run_cpn_decoder(queries, contexts, g, model.cpn_decoder)
    return logp, steps


def decode_utterance(model: Model, acoustic: AcousticSequence, bank: ContextBank | None, asr,
                     cfg: DecodeConfig, threshold: float = 1.0,
                     tail_policy: TailPolicy | str = TailPolicy.FIRE_IF_HALF) -> UtteranceResult:
    """Decode one utterance. ``bank=None`` runs the bare ASR source (no CPN)."""
    queries = integrate_and_fire(acoustic, threshold, tail_policy).embeddings
    if bank is None:
        hyp = collaborative_beam_search(queries, asr, None, 0.0, cfg.beam)
        steps = ()
    else:
        logp, steps = contextualize(model, queries, bank, cfg)
        hyp = collaborative_beam_search(queries, asr, cpn_token_scores(logp, cfg.no_bias_neutral),
                                        cfg.lam, cfg.beam, cpn_logp=logp)
    vocab = model.vocab
    return UtteranceResult(
        hyp,
        tuple(vocab.token(t) for t in hyp.tokens),
        vocab.detokenize(hyp.tokens),
        tuple(vocab.cpn_token(t) for t in hyp.cpn_tokens),
        steps,
    )

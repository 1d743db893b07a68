"""Toy bundle with a planted rare phrase.

The ASR table slightly prefers a misspelling ("marivox") at one step while
the acoustic embedding at that step points at the biasing phrase
"marivaux". The CPN weights are set by hand so that the CPN predicts the
phrase token wherever phrase attention lands on it, so biasing (lambda > 0)
is what recovers the phrase.
"""
from __future__ import annotations

from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from .biasing import AttentionProjection
from .cpn_encoder import CpnEncoderWeights, encode_list
from .decoder import AsrDecoderWeights, CpnDecoderWeights
from .cif import AcousticSequence
from .files import AcousticRecord, phrases_to_biasing_list, write_acoustic, write_corpus, write_phrase_lines
from .model import Model
from .transformer import SanLayer
from .vocab import Vocabulary

POOL_WORDS = ("blue", "stone", "river", "north", "glass", "tower", "ember", "field", "lantern", "copper")
WORDS = ("the", "plays", "of", "marivaux", "marivox", "sometimes", "as", "chiaroscurists",
         "kioscurists", "a", "quiet", "evening", "at", "home", "she", "read", "letter", "twice")

BIAS_PHRASES = ("marivaux", "chiaroscurists")

# (reference, per-step (ASR-preferred token, probability of the correct token) overrides)
UTTERANCES = {
    "utt1": ("the plays of marivaux", {3: ("marivox", 0.40)}),
    "utt2": ("sometimes as chiaroscurists", {2: ("kioscurists", 0.42)}),
    "utt3": ("she read the letter twice", {}),
}

DIM = 16
ATTN_SHARPNESS = 2.0
CPN_GAIN = 2.0


def toy_vocab() -> Vocabulary:
    return Vocabulary(WORDS + POOL_WORDS)


def _unit(v):
    return v / np.linalg.norm(v)


def build_toy_model(seed: int = 0) -> Model:
    rng = np.random.default_rng(seed)
    vocab = toy_vocab()
    V = len(vocab)
    encoder = CpnEncoderWeights.random(rng, V, DIM, 2 * DIM, num_layers=1, scale=2.0)
    bias = phrases_to_biasing_list(BIAS_PHRASES, vocab)
    bank = encode_list(bias, encoder, use_position=False)

    # pass-through block: h = LN(LN(x))
    layer = replace(SanLayer.zeros(DIM, 2 * DIM), ln1_g=np.ones(DIM), ln2_g=np.ones(DIM))
    w_in = np.hstack([np.zeros((DIM, DIM)), np.eye(DIM)])  # read the context half only
    out_proj = np.zeros((V + 1, DIM))
    out_proj_g = np.zeros((V + 1, DIM))
    out_proj[vocab.hash_id] = CPN_GAIN * _unit(bank.phrase_embeddings[0])
    out_proj_g[vocab.hash_id] = CPN_GAIN * _unit(bank.no_bias_token + bank.phrase_embeddings[0])
    for n, phrase in enumerate(bias.phrases, 1):
        tok = phrase.tokens[0]
        out_proj[tok] = CPN_GAIN * _unit(bank.phrase_embeddings[n])
        out_proj_g[tok] = CPN_GAIN * _unit(bank.token_embeddings[n][0] + bank.phrase_embeddings[n])
    cpn_decoder = CpnDecoderWeights(w_in, (layer,), out_proj, np.zeros(V + 1), out_proj_g)
    # token keys of the planted phrases are mapped onto their phrase embeddings,
    # so token attention agrees with phrase attention on the fixture queries
    token_keys = np.vstack([bank.no_bias_token + bank.phrase_embeddings[0]]
                           + [bank.token_embeddings[n][0] + bank.phrase_embeddings[n]
                              for n in range(1, len(bank))])
    wk = (np.linalg.pinv(token_keys) @ bank.phrase_embeddings).T
    token_attention = AttentionProjection(np.eye(DIM), wk)
    asr = AsrDecoderWeights.random(rng, V, DIM, DIM, 2 * DIM, 1)
    return Model(vocab, encoder, AttentionProjection.identity(DIM), token_attention, cpn_decoder, asr)


def build_toy_inputs(model: Model, seed: int = 0):
    """``(acoustic records, references, bias lines, pool lines)`` for the toy model."""
    rng = np.random.default_rng(seed + 1)
    vocab = model.vocab
    V = len(vocab)
    bias = phrases_to_biasing_list(BIAS_PHRASES, vocab)
    bank = encode_list(bias, model.cpn_encoder, use_position=False)
    target_of = {p.tokens[0]: n for n, p in enumerate(bias.phrases, 1)}

    records = []
    refs = {}
    for utt, (text, confusions) in UTTERANCES.items():
        ids = vocab.encode(text)
        refs[utt] = text
        frames, weights, table = [], [], []
        for i, tok in enumerate(ids):
            entry = target_of.get(tok, 0)
            c = ATTN_SHARPNESS * bank.phrase_embeddings[entry]
            jitter = rng.normal(0, 0.05, size=DIM)
            frames += [c + jitter, c - jitter]
            weights += [0.5, 0.5]
            probs = np.full(V, 0.02 / (V - 2))
            if i in confusions:
                wrong, p_right = confusions[i]
                probs[tok] = p_right
                probs[vocab.id(wrong)] = 0.98 - p_right
            else:
                probs[tok] = 0.96
                probs[vocab.id(POOL_WORDS[i % len(POOL_WORDS)])] = 0.02
            table.append(np.log(probs / probs.sum()))
        frames.append(rng.normal(0, 0.1, size=DIM))
        weights.append(0.2)  # tail below half the threshold: dropped
        records.append(AcousticRecord(utt, AcousticSequence(np.array(frames), np.array(weights)),
                                      np.array(table)))
    pool = [f"{a} {b}" for a in POOL_WORDS for b in POOL_WORDS if a != b]
    return records, refs, list(BIAS_PHRASES), pool


def write_toy_bundle(out_dir, seed: int = 0) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = build_toy_model(seed)
    records, refs, bias, pool = build_toy_inputs(model, seed)
    paths = toy_paths(out)
    model.save(paths["model"])
    write_acoustic(paths["acoustic"], records)
    write_corpus(paths["refs"], refs)
    write_phrase_lines(paths["bias"], bias)
    write_phrase_lines(paths["pool"], pool)
    return paths


def toy_paths(root=None) -> dict:
    """Paths of the bundle files under ``root`` (default: the shipped copy)."""
    if root is None:
        root = Path(str(resources.files("coldec") / "data" / "toy"))
    root = Path(root)
    return {"model": root / "model.json", "acoustic": root / "acoustic.json",
            "refs": root / "refs.tsv", "bias": root / "bias.txt", "pool": root / "pool.txt"}

import numpy as np

from coldec.decoder import DecodeConfig, ScriptedSource, SanAsrSource
from coldec.fineco import SelectionConfig
from coldec.files import phrases_to_biasing_list
from coldec.fixture import BIAS_PHRASES, UTTERANCES
from coldec.pipeline import decode_utterance, encode_session


def decode_all(model, records, cfg, bank=True):
    blist = phrases_to_biasing_list(BIAS_PHRASES, model.vocab)
    b = encode_session(model, blist, cfg) if bank else None
    return {r.utt_id: decode_utterance(model, r.sequence, b, ScriptedSource(r.asr_log_probs), cfg)
            for r in records}


def test_bias_recovers_planted_words(toy_model, toy_inputs):
    records, refs, _, _ = toy_inputs
    out = decode_all(toy_model, records, DecodeConfig(lam=1.0, beam=4))
    for utt, res in out.items():
        assert res.text == refs[utt]


def test_no_bias_keeps_confusions(toy_model, toy_inputs):
    records, refs, _, _ = toy_inputs
    out = decode_all(toy_model, records, DecodeConfig(lam=0.0, beam=4))
    assert "marivox" in out["utt1"].text


def test_cpn_argmax_marks_phrase_steps(toy_model, toy_inputs):
    records, refs, _, _ = toy_inputs
    res = decode_all(toy_model, records, DecodeConfig(lam=1.0))["utt1"]
    words = refs["utt1"].split()
    for w, c in zip(words, res.cpn):
        assert c == (w if w in BIAS_PHRASES else "#")


def test_fineco_diagnostics(toy_model, toy_inputs):
    records, refs, _, _ = toy_inputs
    cfg = DecodeConfig(lam=1.0, fineco_enabled=True, purify_enabled=True,
                       selection=SelectionConfig(m=1))
    res = decode_all(toy_model, records, cfg)["utt1"]
    assert len(res.fineco) == len(res.tokens)
    assert all(len(s.selected) == 1 for s in res.fineco)
    assert res.text == refs["utt1"]


def test_san_source_runs(toy_model, toy_inputs):
    records, _, _, _ = toy_inputs
    cfg = DecodeConfig(lam=1.0, beam=2)
    blist = phrases_to_biasing_list(BIAS_PHRASES, toy_model.vocab)
    bank = encode_session(toy_model, blist, cfg)
    res = decode_utterance(toy_model, records[0].sequence, bank, SanAsrSource(toy_model.asr_decoder), cfg)
    assert len(res.tokens) == len(UTTERANCES["utt1"][0].split())
    assert np.isfinite(res.hypothesis.score)

import json

import numpy as np
import pytest

from coldec.fixture import toy_paths
from coldec.model import Model, ModelFormatError, random_model
from coldec.vocab import Vocabulary, join_pieces

TOKENS = ("a", "b", "en@@", "ni@@", "s", "to")


def test_roundtrip(tmp_path):
    m = random_model(TOKENS, seed=3, encoder_layers=2, heads=2)
    path = tmp_path / "m.json"
    m.save(path)
    back = Model.load(path)
    assert back.vocab == m.vocab
    for k, v in m.arrays().items():
        assert np.array_equal(back.arrays()[k], v), k


def test_weight_names():
    names = set(random_model(TOKENS).arrays())
    for key in ("cpn_encoder.embedding", "cpn_encoder.layers.0.wq", "phrase_attention.wq",
                "phrase_attention.wk", "token_attention.wq", "cpn_decoder.w_in", "cpn_decoder.out_proj",
                "cpn_decoder.out_bias", "cpn_decoder.out_proj_g", "asr_decoder.embedding"):
        assert key in names


def test_header_ids():
    h = random_model(TOKENS).header()
    assert (h["vocab_size"], h["ext_id"], h["no_bias_id"], h["hash_id"]) == (6, 6, 7, 6)


def test_bad_header_rejected(tmp_path):
    doc = random_model(TOKENS).to_json()
    doc["header"]["ext_id"] = 99
    with pytest.raises(ModelFormatError, match="ext_id"):
        Model.from_json(doc)


def test_missing_array_rejected():
    doc = random_model(TOKENS).to_json()
    del doc["weights"]["token_attention.wk"]
    with pytest.raises(ModelFormatError, match="token_attention.wk"):
        Model.from_json(doc)


def test_wrong_format_and_json(tmp_path):
    with pytest.raises(ModelFormatError):
        Model.from_json({"format": "other"})
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ModelFormatError):
        Model.load(p)


def test_shipped_toy_model_loads():
    m = Model.load(toy_paths()["model"])
    assert "marivaux" in m.vocab
    json.loads(toy_paths()["acoustic"].read_text())


def test_vocab_reserved_and_duplicates():
    with pytest.raises(ValueError):
        Vocabulary(("a", "#"))
    with pytest.raises(ValueError):
        Vocabulary(("a", "a"))


def test_vocab_encode_pieces():
    v = Vocabulary(TOKENS)
    assert v.encode("ennis to") == [2, 3, 4, 5]
    assert v.encode("en@@ ni@@ s") == [2, 3, 4]
    assert v.detokenize([2, 3, 4, 5]) == "ennis to"
    assert v.cpn_token(v.hash_id) == "#"
    with pytest.raises(ValueError, match="zzz"):
        v.encode("zzz")


def test_join_pieces():
    assert join_pieces(["en@@", "ni@@", "s", "to"]) == "ennis to"

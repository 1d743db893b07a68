"""Model bundle and its JSON weight file.

File layout::

    {
      "format": "coldec-model", "version": 1,
      "header": {"vocab_size": V, "ext_id": V, "no_bias_id": V + 1, "hash_id": V,
                 "acoustic_dim": .., "cpn_dim": .., "attention_dim": ..,
                 "cpn_decoder_dim": .., "asr_decoder_dim": ..,
                 "cpn_encoder_layers": .., "cpn_decoder_layers": .., "asr_decoder_layers": ..,
                 "heads": ..},
      "vocab": ["tok", ...],
      "weights": {"cpn_encoder.embedding": [[..]], "cpn_encoder.layers.0.wq": .., ...}
    }

Weight array names are listed in the README.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .biasing import AttentionProjection
from .cpn_encoder import CpnEncoderWeights
from .decoder import AsrDecoderWeights, CpnDecoderWeights
from .vocab import Vocabulary

FORMAT = "coldec-model"
VERSION = 1


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Model:
    vocab: Vocabulary
    cpn_encoder: CpnEncoderWeights
    phrase_attention: AttentionProjection
    token_attention: AttentionProjection
    cpn_decoder: CpnDecoderWeights
    asr_decoder: AsrDecoderWeights | None = None

    def __post_init__(self):
        V = len(self.vocab)
        if self.cpn_encoder.vocab_size != V:
            raise ModelFormatError(f"encoder embedding covers {self.cpn_encoder.vocab_size} tokens, vocab has {V}")
        if self.cpn_decoder.output_size != V + 1:
            raise ModelFormatError(f"CPN output size {self.cpn_decoder.output_size} != vocab + 1 ({V + 1})")
        d_c = self.cpn_encoder.dim
        for name in ("phrase_attention", "token_attention"):
            proj = getattr(self, name)
            if proj.key_dim != d_c or proj.query_dim != self.acoustic_dim:
                raise ModelFormatError(f"{name} projections do not match acoustic/CPN dims")
        if self.cpn_decoder.w_in.shape[1] != self.acoustic_dim + d_c:
            raise ModelFormatError("CPN decoder input must take [acoustic; context]")
        if self.asr_decoder is not None and self.asr_decoder.vocab_size != V:
            raise ModelFormatError("ASR decoder output size does not match the vocabulary")

    @property
    def acoustic_dim(self) -> int:
        return self.phrase_attention.query_dim

    def header(self) -> dict:
        h = self.vocab.header()
        h.update(
            acoustic_dim=self.acoustic_dim,
            cpn_dim=self.cpn_encoder.dim,
            attention_dim=self.phrase_attention.wq.shape[0],
            cpn_decoder_dim=self.cpn_decoder.dim,
            cpn_encoder_layers=len(self.cpn_encoder.layers),
            cpn_decoder_layers=len(self.cpn_decoder.layers),
            heads=self.cpn_encoder.heads,
            cpn_decoder_heads=self.cpn_decoder.heads,
        )
        if self.asr_decoder is not None:
            h.update(asr_decoder_dim=self.asr_decoder.w_in.shape[0],
                     asr_decoder_layers=len(self.asr_decoder.layers),
                     asr_decoder_heads=self.asr_decoder.heads)
        return h

    def arrays(self) -> dict:
        out = {}
        out.update(self.cpn_encoder.arrays())
        out.update(self.phrase_attention.arrays("phrase_attention"))
        out.update(self.token_attention.arrays("token_attention"))
        out.update(self.cpn_decoder.arrays())
        if self.asr_decoder is not None:
            out.update(self.asr_decoder.arrays())
        return out

    def to_json(self) -> dict:
        return {"format": FORMAT, "version": VERSION, "header": self.header(),
                "vocab": list(self.vocab.tokens),
                "weights": {k: np.asarray(v).tolist() for k, v in sorted(self.arrays().items())}}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def from_json(cls, doc: dict) -> "Model":
        if doc.get("format") != FORMAT:
            raise ModelFormatError(f"not a {FORMAT} file")
        if doc.get("version") != VERSION:
            raise ModelFormatError(f"unsupported model version {doc.get('version')}")
        header = doc["header"]
        vocab = Vocabulary(tuple(doc["vocab"]))
        for key, expected in vocab.header().items():
            if header.get(key) != expected:
                raise ModelFormatError(f"header {key}={header.get(key)} but vocabulary implies {expected}")
        arrays = doc["weights"]
        try:
            heads = header.get("heads", 1)
            asr = None
            if "asr_decoder_layers" in header:
                asr = AsrDecoderWeights.from_arrays(arrays, header["asr_decoder_layers"],
                                                    header.get("asr_decoder_heads", 1))
            return cls(
                vocab,
                CpnEncoderWeights.from_arrays(arrays, header["cpn_encoder_layers"], heads),
                AttentionProjection.from_arrays(arrays, "phrase_attention"),
                AttentionProjection.from_arrays(arrays, "token_attention"),
                CpnDecoderWeights.from_arrays(arrays, header["cpn_decoder_layers"],
                                              header.get("cpn_decoder_heads", 1)),
                asr,
            )
        except KeyError as exc:
            raise ModelFormatError(f"missing weight array {exc}") from None

    @classmethod
    def load(cls, path) -> "Model":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_json(doc)


def random_model(vocab, seed: int = 0, acoustic_dim: int = 8, cpn_dim: int = 8,
                 attention_dim: int = 8, decoder_dim: int = 8, ff_dim: int = 16,
                 encoder_layers: int = 1, decoder_layers: int = 1, asr_layers: int = 1,
                 heads: int = 1) -> Model:
    """Untrained model with deterministic random weights (tests and demos)."""
    rng = np.random.default_rng(seed)
    if not isinstance(vocab, Vocabulary):
        vocab = Vocabulary(tuple(vocab))
    V = len(vocab)
    return Model(
        vocab,
        CpnEncoderWeights.random(rng, V, cpn_dim, ff_dim, encoder_layers, heads),
        AttentionProjection.random(rng, attention_dim, acoustic_dim, cpn_dim, scale=2.0),
        AttentionProjection.random(rng, attention_dim, acoustic_dim, cpn_dim, scale=2.0),
        CpnDecoderWeights.random(rng, V, acoustic_dim, cpn_dim, decoder_dim, ff_dim,
                                 decoder_layers, heads),
        AsrDecoderWeights.random(rng, V, acoustic_dim, decoder_dim, ff_dim, asr_layers, heads),
    )

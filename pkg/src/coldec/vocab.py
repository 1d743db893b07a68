"""Shared token vocabulary.

ASR tokens occupy ids ``0..V-1``. Reserved ids are placed right after them:

* encoder input space: ``<EXT>`` = V, ``<NO-BIAS>`` = V + 1
* CPN output space: ``#`` = V

Subword pieces that continue into the next piece end in ``@@``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

EXT = "<EXT>"
NO_BIAS = "<NO-BIAS>"
HASH = "#"
CONTINUATION = "@@"


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        for reserved in (EXT, NO_BIAS, HASH):
            if reserved in tokens:
                raise ValueError(f"reserved token {reserved!r} may not appear in the ASR vocabulary")
        index = {tok: i for i, tok in enumerate(tokens)}
        if len(index) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def ext_id(self) -> int:
        return len(self.tokens)

    @property
    def no_bias_id(self) -> int:
        return len(self.tokens) + 1

    @property
    def hash_id(self) -> int:
        return len(self.tokens)

    def header(self) -> dict:
        return {"vocab_size": len(self), "ext_id": self.ext_id,
                "no_bias_id": self.no_bias_id, "hash_id": self.hash_id}

    def id(self, token: str) -> int:
        return self._index[token]

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def _split_word(self, word: str) -> list:
        # greedy longest-match over continuation pieces, final piece bare
        pieces = []
        rest = word
        while rest:
            if rest in self._index:
                pieces.append(self._index[rest])
                return pieces
            for end in range(len(rest) - 1, 0, -1):
                piece = rest[:end] + CONTINUATION
                if piece in self._index:
                    pieces.append(self._index[piece])
                    rest = rest[end:]
                    break
            else:
                raise KeyError(word)
        return pieces

    def encode(self, text: str) -> list:
        """Token ids for whitespace-separated ``text``.

        Items that are already vocabulary tokens (``en@@``) are taken as is;
        other words are split greedily into ``@@`` pieces.
        """
        ids = []
        for item in text.split():
            try:
                ids.extend(self._split_word(item))
            except KeyError:
                raise ValueError(f"cannot tokenize {item!r} with the model vocabulary") from None
        return ids

    def token(self, idx: int) -> str:
        return self.tokens[idx]

    def cpn_token(self, idx: int) -> str:
        return HASH if idx == self.hash_id else self.tokens[idx]

    def detokenize(self, ids) -> str:
        return join_pieces(self.tokens[i] for i in ids)


def join_pieces(pieces) -> str:
    """``["en@@", "ni@@", "s", "to"]`` -> ``"ennis to"``."""
    return " ".join(pieces).replace(CONTINUATION + " ", "").replace(CONTINUATION, "")

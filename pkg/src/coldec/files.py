"""Readers and writers for the on-disk formats.

* corpus / hypothesis text: one utterance per line, ``utt_id<TAB>text``
* biasing list and distractor pool: one phrase per line, UTF-8
* acoustic input: JSON object keyed by utterance id, each value
  ``{"frames": [[...], ...], "weights": [...], "asr_log_probs": [[...], ...]?}``
* decode output: JSON lines, one record per utterance, sorted by id
* evaluation report: JSON object
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cif import AcousticSequence
from .cpn_encoder import BiasingList, Phrase


class InputError(ValueError):
    """A malformed input file; the message names the file and record."""


def read_corpus(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if "\t" in line:
            utt, text = line.split("\t", 1)
        else:
            utt, _, text = line.strip().partition(" ")
        utt = utt.strip()
        if utt in out:
            raise InputError(f"{path}:{lineno}: duplicate utterance id {utt!r}")
        out[utt] = text.strip()
    return out


def read_text_lines(path) -> list:
    """Plain-text training corpus: the text column of TSV lines, or whole lines."""
    lines = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            lines.append(line.split("\t", 1)[1] if "\t" in line else line)
    return lines


def write_corpus(path, texts: dict) -> None:
    Path(path).write_text("".join(f"{k}\t{texts[k]}\n" for k in sorted(texts)), encoding="utf-8")


def read_phrase_lines(path) -> list:
    return [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip()]


def write_phrase_lines(path, phrases) -> None:
    Path(path).write_text("".join(f"{p}\n" for p in phrases), encoding="utf-8")


def phrases_to_biasing_list(lines, vocab, source="<list>") -> BiasingList:
    phrases = []
    for lineno, text in enumerate(lines, 1):
        try:
            ids = vocab.encode(text)
        except ValueError as exc:
            raise InputError(f"{source}:{lineno}: {exc}") from None
        if not ids:
            raise InputError(f"{source}:{lineno}: empty phrase")
        phrases.append(Phrase(tuple(ids), text))
    return BiasingList(tuple(phrases))


@dataclass(frozen=True)
class AcousticRecord:
    utt_id: str
    sequence: AcousticSequence
    asr_log_probs: np.ndarray | None = None


def read_acoustic(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: expected an object keyed by utterance id")
    out = {}
    for utt, rec in doc.items():
        try:
            seq = AcousticSequence(np.asarray(rec["frames"], dtype=np.float64),
                                   np.asarray(rec["weights"], dtype=np.float64))
            table = rec.get("asr_log_probs")
            table = None if table is None else np.asarray(table, dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path}: utterance {utt!r}: {exc}") from None
        out[utt] = AcousticRecord(utt, seq, table)
    return out


def write_acoustic(path, records) -> None:
    doc = {}
    for rec in sorted(records, key=lambda r: r.utt_id):
        item = {"frames": rec.sequence.frames.tolist(), "weights": rec.sequence.weights.tolist()}
        if rec.asr_log_probs is not None:
            item["asr_log_probs"] = rec.asr_log_probs.tolist()
        doc[rec.utt_id] = item
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def decode_record(utt_id, result) -> dict:
    return {"utt_id": utt_id, "tokens": list(result.tokens), "text": result.text,
            "cpn": list(result.cpn), "score": result.hypothesis.score}


def write_jsonl(path, records) -> None:
    Path(path).write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records),
                          encoding="utf-8")


def read_hypotheses(path) -> dict:
    """Hypothesis texts from decode output (JSON lines) or a TSV corpus file."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        out = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if line.strip():
                try:
                    rec = json.loads(line)
                    out[rec["utt_id"]] = rec["text"]
                except (json.JSONDecodeError, KeyError) as exc:
                    raise InputError(f"{path}:{lineno}: bad decode record ({exc})") from None
        return out
    return read_corpus(path)

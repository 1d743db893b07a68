"""Biasing-list construction, distractors, n-gram sampling and evaluation metrics."""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import kernels


class FrequencyTable:
    """Case-folded word counts over a training-text corpus."""

    def __init__(self, counts=None):
        self.counts = Counter(counts or {})

    @classmethod
    def from_texts(cls, texts) -> "FrequencyTable":
        counts = Counter()
        for text in texts:
            counts.update(normalize_words(text))
        return cls(counts)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def most_common(self, n: int) -> list:
        """Top ``n`` words; equal counts are ordered alphabetically."""
        ranked = sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return [w for w, _ in ranked[:n]]


def normalize_words(text: str) -> list:
    return text.casefold().split()


def count_letters(word: str) -> int:
    return sum("a" <= ch <= "z" for ch in word.casefold())


def build_biasing_list(references, freq: FrequencyTable, top_common: int = 20000,
                       min_letters: int = 5) -> list:
    """Rare words from ``references`` in order of first appearance.

    A word qualifies when it is outside the ``top_common`` most frequent
    training words and has at least ``min_letters`` letters a-z.
    """
    if top_common < 1:
        raise ValueError("top_common must be >= 1")
    common = set(freq.most_common(top_common))
    seen = set()
    out = []
    for text in references:
        for word in normalize_words(text):
            if word in seen:
                continue
            seen.add(word)
            if word not in common and count_letters(word) >= min_letters:
                out.append(word)
    return out


def inject_distractors(phrases, pool, count: int, seed: int = 0) -> list:
    """Append ``count`` pool phrases drawn without replacement.

    For a fixed seed the draws for a smaller count are a prefix of those for
    a larger one, so sweeps over counts nest.
    """
    phrases = list(phrases)
    pool = list(dict.fromkeys(pool))
    overlap = set(phrases) & set(pool)
    if overlap:
        raise ValueError(f"distractor pool overlaps the biasing list: {sorted(map(str, overlap))[:5]}")
    if count < 0:
        raise ValueError("distractor count must be >= 0")
    if count > len(pool):
        raise ValueError(f"distractor pool has {len(pool)} phrases, {count} requested")
    order = list(pool)
    random.Random(seed).shuffle(order)
    return phrases + order[:count]


@dataclass(frozen=True)
class SamplerConfig:
    min_order: int = 1
    max_order: int = 3
    discard_probability: float = 0.3
    draws: int = 1

    def __post_init__(self):
        if not 1 <= self.min_order <= self.max_order:
            raise ValueError("n-gram orders must satisfy 1 <= min <= max")
        if not 0.0 <= self.discard_probability <= 1.0:
            raise ValueError("discard probability must lie in [0, 1]")


def ngram_candidates(reference, min_order: int, max_order: int) -> list:
    ref = tuple(reference)
    return [ref[s:s + n] for n in range(min_order, max_order + 1)
            for s in range(len(ref) - n + 1)]


def sample_ngram_phrases(reference, cfg: SamplerConfig, seed=0) -> list:
    """Draw ``cfg.draws`` n-grams uniformly from the candidates; each draw is
    then discarded with ``cfg.discard_probability``."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    cands = ngram_candidates(reference, cfg.min_order, cfg.max_order)
    if not cands:
        return []
    kept = []
    for _ in range(cfg.draws):
        pick = cands[rng.randrange(len(cands))]
        if rng.random() >= cfg.discard_probability:
            kept.append(pick)
    return kept


def edit_distance(hyp, ref) -> int:
    """Levenshtein distance between two token (or character) sequences."""
    ids = {}
    a = [ids.setdefault(t, len(ids)) for t in hyp]
    b = [ids.setdefault(t, len(ids)) for t in ref]
    return kernels.edit_distance(a, b)


def error_rate(hyp, ref) -> float:
    """Edit distance over reference length.

    An empty reference yields ``len(hyp)`` (every token is an insertion,
    divided by 1).
    """
    d = edit_distance(hyp, ref)
    return d / max(len(ref), 1)


def corpus_error_rate(pairs) -> float:
    """Total edits over total reference length for ``(hyp, ref)`` pairs."""
    edits = 0
    length = 0
    for hyp, ref in pairs:
        edits += edit_distance(hyp, ref)
        length += len(ref)
    return edits / max(length, 1)


def count_occurrences(seq, phrase) -> int:
    """Occurrences of ``phrase`` in ``seq``; overlapping matches count."""
    seq = tuple(seq)
    phrase = tuple(phrase)
    n = len(phrase)
    if n == 0:
        return 0
    return sum(1 for s in range(len(seq) - n + 1) if seq[s:s + n] == phrase)


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    hits: int
    misses: int
    false_alarms: int
    per_phrase: dict = field(default_factory=dict)
    wer: float | None = None
    cer: float | None = None

    def to_json(self) -> dict:
        return {
            "wer": self.wer, "cer": self.cer,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "hits": self.hits, "misses": self.misses, "false_alarms": self.false_alarms,
            "per_phrase": {k: dict(zip(("hits", "misses", "false_alarms"), v))
                           for k, v in self.per_phrase.items()},
        }


def f1_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def phrase_prf(hyps, refs, phrases) -> EvalReport:
    """Occurrence-level precision/recall/F1 of biasing phrases.

    For every utterance and phrase, ``min(ref count, hyp count)`` occurrences
    are hits, the rest of the reference occurrences are misses and the rest
    of the hypothesis occurrences are false alarms. Precision (recall) is 1
    when there are no hypothesis (reference) occurrences at all.
    """
    hyps = list(hyps)
    refs = list(refs)
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses for {len(refs)} references")
    per = {}
    # duplicate phrases are counted once
    for phrase in dict.fromkeys(tuple(p) for p in phrases):
        h_tot = m_tot = f_tot = 0
        for hyp, ref in zip(hyps, refs):
            r = count_occurrences(ref, phrase)
            h = count_occurrences(hyp, phrase)
            hit = min(r, h)
            h_tot += hit
            m_tot += r - hit
            f_tot += h - hit
        per[" ".join(map(str, phrase))] = (h_tot, m_tot, f_tot)
    hits = sum(v[0] for v in per.values())
    misses = sum(v[1] for v in per.values())
    fas = sum(v[2] for v in per.values())
    p = hits / (hits + fas) if hits + fas else 1.0
    r = hits / (hits + misses) if hits + misses else 1.0
    return EvalReport(p, r, f1_score(p, r), hits, misses, fas, per)


def read_librispeech_transcripts(root) -> dict:
    """``{utterance id: text}`` from every ``*.trans.txt`` below ``root``."""
    out = {}
    for path in sorted(Path(root).rglob("*.trans.txt")):
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                utt, _, text = line.partition(" ")
                out[utt] = text
    return out

"""Collocation detection: adjacent pairs merged into ``a_b`` tokens, two passes for trigrams."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

DEFAULT_MIN_COUNT = 5
DEFAULT_THRESHOLD = 10.0
JOINER = "_"


@dataclass(frozen=True)
class PhraseModel:
    bigrams: dict[tuple[str, str], float]
    trigrams: dict[tuple[str, str], float]
    min_count: int = DEFAULT_MIN_COUNT
    threshold: float = DEFAULT_THRESHOLD

    def merges(self, table: dict[tuple[str, str], float]) -> frozenset[tuple[str, str]]:
        return frozenset(p for p, s in table.items() if s > self.threshold)

    def to_json(self) -> dict:
        def dump(table):
            return [{"pair": list(p), "score": s} for p, s in sorted(table.items())]
        return {"min_count": self.min_count, "threshold": self.threshold,
                "bigrams": dump(self.bigrams), "trigrams": dump(self.trigrams)}


def score_pairs(docs: Sequence[Sequence[str]], min_count: int) -> dict[tuple[str, str], float]:
    """``(count(a,b) - min_count) * V / (count(a) * count(b))`` for every pair seen at least ``min_count`` times."""
    unigrams: Counter = Counter()
    pairs: Counter = Counter()
    for doc in docs:
        unigrams.update(doc)
        pairs.update(zip(doc, doc[1:]))
    vocab = len(unigrams)
    return {
        (a, b): (n - min_count) * vocab / (unigrams[a] * unigrams[b])
        for (a, b), n in pairs.items() if n >= min_count
    }


def _merge(doc: Sequence[str], merges: frozenset) -> list[str]:
    out = []
    i = 0
    while i < len(doc):
        if i + 1 < len(doc) and (doc[i], doc[i + 1]) in merges:
            out.append(doc[i] + JOINER + doc[i + 1])
            i += 2
        else:
            out.append(doc[i])
            i += 1
    return out


def detect_phrases(docs: Sequence[Sequence[str]], min_count: int = DEFAULT_MIN_COUNT,
                   threshold: float = DEFAULT_THRESHOLD) -> PhraseModel:
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if math.isnan(threshold):
        raise ValueError("threshold must be a number")
    bigrams = score_pairs(docs, min_count)
    first = PhraseModel(bigrams, {}, min_count, threshold)
    merged = [_merge(d, first.merges(bigrams)) for d in docs]
    return PhraseModel(bigrams, score_pairs(merged, min_count), min_count, threshold)


def apply_phrases(pm: PhraseModel, docs: Sequence[Sequence[str]]) -> list[list[str]]:
    """Greedy left-to-right merging, bigram table first, then the second-pass table."""
    first, second = pm.merges(pm.bigrams), pm.merges(pm.trigrams)
    return [_merge(_merge(d, first), second) for d in docs]

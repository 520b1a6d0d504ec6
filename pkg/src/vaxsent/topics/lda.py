"""Bag-of-words dictionary, collapsed Gibbs LDA, UMass coherence and topic reports."""
from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

import numba
import numpy as np

from ..corpus import Dataset, SentimentLabel

DEFAULT_TOP_N = 30


class TopicError(ValueError):
    pass


@dataclass(frozen=True)
class Dictionary:
    id2token: tuple[str, ...]
    collection_frequency: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "token2id", {t: i for i, t in enumerate(self.id2token)})

    def __len__(self) -> int:
        return len(self.id2token)

    def to_bow(self, doc: Sequence[str]) -> list[tuple[int, int]]:
        return to_bow(self, doc)


BowDoc = list[tuple[int, int]]


def build_dictionary(docs: Sequence[Sequence[str]]) -> Dictionary:
    """Ids in order of first appearance."""
    cf: Counter = Counter()
    for doc in docs:
        cf.update(doc)
    if not cf:
        raise TopicError("empty corpus")
    tokens = tuple(cf)  # Counter keeps insertion order
    return Dictionary(tokens, tuple(cf[t] for t in tokens))


def to_bow(d: Dictionary, doc: Sequence[str]) -> BowDoc:
    counts = Counter(d.token2id[t] for t in doc if t in d.token2id)
    return sorted(counts.items())


# -- collapsed Gibbs sampling ---------------------------------------------------

@numba.njit(cache=True)
def _sweep(words, docs, z, ndk, nkw, nk, alpha, beta, vbeta, uniforms):
    n_topics = nk.shape[0]
    p = np.empty(n_topics)
    for i in range(words.shape[0]):
        w, d, k = words[i], docs[i], z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        total = 0.0
        for t in range(n_topics):
            total += (ndk[d, t] + alpha) * (nkw[t, w] + beta) / (nk[t] + vbeta)
            p[t] = total
        u = uniforms[i] * total
        k = 0
        while k < n_topics - 1 and p[k] <= u:
            k += 1
        z[i] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


@dataclass(frozen=True)
class LdaModel:
    """Final sampler state plus post-burn-in averages of the count matrices."""

    K: int
    alpha: float
    beta: float
    topic_term_counts: np.ndarray
    doc_topic_counts: np.ndarray
    topic_term_mean: np.ndarray
    doc_topic_mean: np.ndarray
    iterations: int
    burn_in: int
    seed: int

    @property
    def vocabulary_size(self) -> int:
        return self.topic_term_counts.shape[1]

    def topic_term_distribution(self) -> np.ndarray:
        phi = self.topic_term_mean + self.beta
        return phi / phi.sum(axis=1, keepdims=True)

    def doc_topic_distribution(self) -> np.ndarray:
        theta = self.doc_topic_mean + self.alpha
        return theta / theta.sum(axis=1, keepdims=True)


SweepCallback = Callable[[int, np.ndarray, np.ndarray], None]


def lda_gibbs(docs: Sequence[BowDoc], K: int, alpha: float | None = None, beta: float = 0.01,
              iterations: int = 200, burn_in: int = 50, seed: int = 0,
              vocabulary_size: int | None = None, callback: SweepCallback | None = None) -> LdaModel:
    """Single-chain collapsed Gibbs sampler; ``alpha`` defaults to 50/K.

    ``callback(sweep, doc_topic_counts, topic_term_counts)`` runs after every sweep.
    """
    if K < 2:
        raise TopicError("K must be >= 2")
    if iterations <= burn_in or burn_in < 0:
        raise TopicError("iterations must exceed burn_in")
    alpha = 50.0 / K if alpha is None else float(alpha)
    if alpha <= 0 or beta <= 0:
        raise TopicError("priors must be positive")
    word_list, doc_list = [], []
    for d, bow in enumerate(docs):
        for w, c in bow:
            word_list.extend([w] * c)
            doc_list.extend([d] * c)
    if not word_list:
        raise TopicError("degenerate corpus: every document is empty")
    words = np.asarray(word_list, dtype=np.int64)
    doc_ids = np.asarray(doc_list, dtype=np.int64)
    V = int(words.max()) + 1 if vocabulary_size is None else vocabulary_size
    if V <= words.max():
        raise TopicError("term id outside the vocabulary")
    distinct = np.unique(words).size
    if distinct < K:
        warnings.warn(f"corpus has {distinct} distinct terms for {K} topics", stacklevel=2)

    rng = np.random.default_rng(seed)
    D, n = len(docs), words.size
    z = rng.integers(0, K, size=n).astype(np.int64)
    ndk = np.zeros((D, K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndk, (doc_ids, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)

    acc_dk = np.zeros((D, K))
    acc_kw = np.zeros((K, V))
    for it in range(iterations):
        _sweep(words, doc_ids, z, ndk, nkw, nk, alpha, beta, V * beta, rng.random(n))
        if callback is not None:
            callback(it, ndk, nkw)
        if it >= burn_in:
            acc_dk += ndk
            acc_kw += nkw
    samples = iterations - burn_in
    return LdaModel(K, alpha, beta, nkw.copy(), ndk.copy(), acc_kw / samples, acc_dk / samples,
                    iterations, burn_in, seed)


# -- coherence ------------------------------------------------------------------

def umass_pair(co_df: int, df: int) -> float:
    return math.log((co_df + 1) / df)


def _top_ids(phi_row: np.ndarray, n: int) -> list[int]:
    # highest probability first, ties to the smaller id
    return sorted(range(phi_row.size), key=lambda w: (-phi_row[w], w))[:n]


@dataclass(frozen=True)
class Coherence:
    per_topic: tuple[float, ...]
    mean: float


def coherence_umass(m: LdaModel, docs: Sequence[BowDoc], top_n: int = 10) -> Coherence:
    """Mean over ordered top-term pairs of ``ln((D(wi, wj) + 1) / D(wj))``, i ranked below j."""
    if top_n < 2:
        raise TopicError("top_n must be >= 2")
    doc_sets = [frozenset(w for w, _ in bow) for bow in docs]
    phi = m.topic_term_distribution()
    df_cache: dict[int, int] = {}

    def df(w):
        if w not in df_cache:
            df_cache[w] = sum(1 for s in doc_sets if w in s)
        return df_cache[w]

    per_topic = []
    for k in range(m.K):
        top = _top_ids(phi[k], top_n)
        kept = [w for w in top if df(w) > 0]
        if len(kept) < len(top):
            warnings.warn(f"topic {k}: {len(top) - len(kept)} top terms never occur; excluded", stacklevel=2)
        scores = [umass_pair(sum(1 for s in doc_sets if wi in s and wj in s), df(wj))
                  for i, wi in enumerate(kept) for wj in kept[:i]]
        per_topic.append(math.fsum(scores) / len(scores) if scores else 0.0)
    return Coherence(tuple(per_topic), math.fsum(per_topic) / len(per_topic))


def select_topic_count(docs: Sequence[BowDoc], candidates: Sequence[int], top_n: int = 10,
                       **lda_params) -> tuple[int, dict[int, float], dict[int, LdaModel]]:
    """Fit each candidate K with the same seed; highest mean coherence wins, ties to the smaller K."""
    if not candidates:
        raise TopicError("no topic-count candidates")
    models, scores = {}, {}
    for K in sorted(set(candidates)):
        models[K] = lda_gibbs(docs, K, **lda_params)
        scores[K] = coherence_umass(models[K], docs, top_n).mean
    best = min(scores, key=lambda K: (-scores[K], K))
    return best, scores, models


# -- reports ----------------------------------------------------------------------

@dataclass(frozen=True)
class TopicSummary:
    id: int
    prevalence: float
    terms: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class TopicReport:
    chosen_k: int
    coherence_by_k: dict[int, float]
    topics: tuple[TopicSummary, ...]
    corpus_top_terms: tuple[tuple[str, int], ...]

    def to_json(self) -> dict:
        return {
            "chosen_k": self.chosen_k,
            "coherence_by_k": {str(k): v for k, v in sorted(self.coherence_by_k.items())},
            "topics": [
                {"id": t.id, "prevalence": t.prevalence,
                 "terms": [{"term": w, "prob": p} for w, p in t.terms]}
                for t in self.topics
            ],
            "corpus_top_terms": [{"term": w, "count": c} for w, c in self.corpus_top_terms],
        }

    def to_text(self, n: int = 10) -> str:
        lines = [f"{'Topic':<6}{'Share':>7}  Terms"]
        for t in self.topics:
            words = ", ".join(w for w, _ in t.terms[:n])
            lines.append(f"{t.id + 1:<6}{t.prevalence * 100:>6.1f}%  {words}")
        lines.append(f"{'All':<6}{'':>7}  " + ", ".join(w for w, _ in self.corpus_top_terms[:n]))
        return "\n".join(lines) + "\n"


def top_terms(m: LdaModel, dictionary: Dictionary, n: int = DEFAULT_TOP_N,
              coherence_by_k: dict[int, float] | None = None) -> TopicReport:
    if n < 1:
        raise TopicError("n must be >= 1")
    if n > len(dictionary):
        warnings.warn(f"n={n} exceeds vocabulary size {len(dictionary)}; clamped", stacklevel=2)
        n = len(dictionary)
    phi = m.topic_term_distribution()
    mass = m.doc_topic_mean.sum(axis=0)
    prevalence = mass / mass.sum()
    topics = tuple(
        TopicSummary(k, float(prevalence[k]),
                     tuple((dictionary.id2token[w], float(phi[k, w])) for w in _top_ids(phi[k], n)))
        for k in range(m.K)
    )
    ranked = sorted(range(len(dictionary)), key=lambda w: (-dictionary.collection_frequency[w], w))[:n]
    corpus = tuple((dictionary.id2token[w], dictionary.collection_frequency[w]) for w in ranked)
    return TopicReport(m.K, dict(coherence_by_k or {}), topics, corpus)


def misclassified(test: Dataset, predictions: Sequence[SentimentLabel]) -> Dataset:
    gold = test.labels
    if len(gold) != len(predictions):
        raise TopicError(f"length mismatch: {len(gold)} records vs {len(predictions)} predictions")
    keep = [i for i, (g, p) in enumerate(zip(gold, predictions)) if g != p]
    return test.subset(keep, name=f"{test.name}-misclassified")

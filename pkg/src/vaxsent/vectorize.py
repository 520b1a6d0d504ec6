"""Capped vocabulary, smoothed TF-IDF weighting and sparse document vectors."""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import SentimentLabel

FORMAT_VERSION = 1
DEFAULT_MAX_FEATURES = 5000


class VectorizeError(ValueError):
    pass


@dataclass(frozen=True)
class SparseVector:
    """Sorted ``(index, value)`` entries of a ``dimension``-long vector; zeros are not stored."""

    indices: tuple[int, ...]
    values: tuple[float, ...]
    dimension: int

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise VectorizeError("indices and values differ in length")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise VectorizeError("indices must be strictly increasing")
        if self.indices and (self.indices[0] < 0 or self.indices[-1] >= self.dimension):
            raise VectorizeError("index out of range")
        if any(v == 0.0 for v in self.values):
            raise VectorizeError("zero entries must not be stored")

    @classmethod
    def from_dict(cls, entries: dict[int, float], dimension: int) -> "SparseVector":
        items = sorted((i, float(v)) for i, v in entries.items() if v != 0.0)
        return cls(tuple(i for i, _ in items), tuple(v for _, v in items), dimension)

    @classmethod
    def from_dense(cls, dense) -> "SparseVector":
        dense = np.asarray(dense, dtype=float).ravel()
        nz = np.flatnonzero(dense)
        return cls(tuple(int(i) for i in nz), tuple(float(dense[i]) for i in nz), dense.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[list(self.indices)] = self.values
        return out

    def dot(self, other: "SparseVector") -> float:
        if self.dimension != other.dimension:
            raise VectorizeError(f"dimension mismatch: {self.dimension} vs {other.dimension}")
        a = dict(zip(self.indices, self.values))
        return math.fsum(a[i] * v for i, v in zip(other.indices, other.values) if i in a)

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def to_json(self) -> dict:
        return {"indices": list(self.indices), "values": list(self.values)}


def stack(vectors: Sequence[SparseVector], dimension: int | None = None) -> sp.csr_matrix:
    """Rows of a CSR matrix, one per vector."""
    if dimension is None:
        if not vectors:
            raise VectorizeError("cannot infer dimension of an empty batch")
        dimension = vectors[0].dimension
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for v in vectors:
        if v.dimension != dimension:
            raise VectorizeError(f"dimension mismatch: {v.dimension} vs {dimension}")
        indices.extend(v.indices)
        data.extend(v.values)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(vectors), dimension),
    )


def unstack(matrix: sp.spmatrix) -> list[SparseVector]:
    m = sp.csr_matrix(matrix)
    m.sort_indices()
    out = []
    for r in range(m.shape[0]):
        lo, hi = m.indptr[r], m.indptr[r + 1]
        vals = m.data[lo:hi]
        keep = vals != 0.0
        out.append(SparseVector(tuple(int(i) for i in m.indices[lo:hi][keep]),
                                tuple(float(v) for v in vals[keep]), m.shape[1]))
    return out


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    document_frequency: tuple[int, ...]
    max_features: int

    def __post_init__(self):
        if len(self.terms) > self.max_features:
            raise VectorizeError("vocabulary exceeds max_features")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self._index

    def index(self, term: str) -> int:
        return self._index[term]

    def get(self, term: str, default=None):
        return self._index.get(term, default)


def build_vocabulary(docs: Iterable[Sequence[str]], max_features: int = DEFAULT_MAX_FEATURES) -> Vocabulary:
    """Keep the ``max_features`` most frequent terms (ties to the lexicographically smaller)."""
    if max_features < 1:
        raise VectorizeError("max_features must be >= 1")
    freq: Counter = Counter()
    dfreq: Counter = Counter()
    for doc in docs:
        freq.update(doc)
        dfreq.update(set(doc))
    if not freq:
        raise VectorizeError("empty corpus")
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:max_features]
    terms = tuple(sorted(t for t, _ in ranked))
    return Vocabulary(terms, tuple(dfreq[t] for t in terms), max_features)


@dataclass(frozen=True)
class TfIdfModel:
    vocabulary: Vocabulary
    idf: tuple[float, ...]
    l2_normalize: bool = True

    def __post_init__(self):
        if len(self.idf) != len(self.vocabulary):
            raise VectorizeError("idf length differs from vocabulary size")
        if any(not w > 0 for w in self.idf):
            raise VectorizeError("idf weights must be positive")

    @property
    def dimension(self) -> int:
        return len(self.vocabulary)

    def transform(self, doc: Sequence[str]) -> SparseVector:
        return tfidf_transform(self, doc)

    def transform_many(self, docs: Iterable[Sequence[str]]) -> list[SparseVector]:
        return [tfidf_transform(self, d) for d in docs]

    def to_json(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "max_features": self.vocabulary.max_features,
            "terms": list(self.vocabulary.terms),
            "document_frequency": list(self.vocabulary.document_frequency),
            "idf": list(self.idf),
            "l2_normalize": self.l2_normalize,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TfIdfModel":
        if obj.get("version") != FORMAT_VERSION:
            raise VectorizeError(f"unsupported vectorizer version {obj.get('version')!r}")
        try:
            vocab = Vocabulary(tuple(obj["terms"]),
                               tuple(obj.get("document_frequency") or [0] * len(obj["terms"])),
                               int(obj["max_features"]))
            return cls(vocab, tuple(float(x) for x in obj["idf"]), bool(obj["l2_normalize"]))
        except (KeyError, TypeError) as exc:
            raise VectorizeError(f"corrupt vectorizer document: {exc}") from None

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "TfIdfModel":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise VectorizeError(f"corrupt vectorizer file {path}: {exc.msg}") from None
        return cls.from_json(obj)


def tfidf_fit(docs: Sequence[Sequence[str]], vocab: Vocabulary, l2_normalize: bool = True) -> TfIdfModel:
    """Smoothed idf: ``ln((1 + N) / (1 + df)) + 1`` with df counted over ``docs``."""
    n = len(docs)
    df = Counter()
    for doc in docs:
        df.update(t for t in set(doc) if t in vocab)
    idf = tuple(math.log((1 + n) / (1 + df[t])) + 1.0 for t in vocab.terms)
    return TfIdfModel(vocab, idf, l2_normalize)


def tfidf_transform(m: TfIdfModel, doc: Sequence[str]) -> SparseVector:
    counts = Counter(i for i in (m.vocabulary.get(t) for t in doc) if i is not None)
    entries = {i: c * m.idf[i] for i, c in counts.items()}
    if m.l2_normalize and entries:
        norm = math.sqrt(math.fsum(v * v for v in entries.values()))
        entries = {i: v / norm for i, v in entries.items()}
    return SparseVector.from_dict(entries, m.dimension)


def encode_label(label: SentimentLabel) -> int:
    return int(SentimentLabel(label))


def decode_label(code: int) -> SentimentLabel:
    if isinstance(code, bool) or int(code) != code or code not in (0, 1, 2):
        raise VectorizeError(f"label code {code!r} outside {{0, 1, 2}}")
    return SentimentLabel(int(code))

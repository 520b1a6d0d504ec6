"""Loading, de-duplication, summaries and stratified splits of labelled tweets."""
from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np


class CorpusError(ValueError):
    pass


class SentimentLabel(IntEnum):
    NEGATIVE = 0
    NEUTRAL = 1
    POSITIVE = 2

    @classmethod
    def parse(cls, value: str) -> "SentimentLabel":
        key = value.strip().lower()
        aliases = {"-": "negative", "0": "neutral", "+": "positive"}
        key = aliases.get(key, key)
        try:
            return cls[key.upper()]
        except KeyError:
            raise CorpusError(f"unknown label value {value!r}") from None

    @property
    def text(self) -> str:
        return self.name.lower()


LABELS = tuple(SentimentLabel)


@dataclass(frozen=True)
class Tweet:
    id: str
    text: str
    created_at: str | None = None

    def __post_init__(self):
        if not self.id:
            raise CorpusError("tweet id must be non-empty")
        if not self.text.strip():
            raise CorpusError(f"tweet {self.id!r} has empty text")


@dataclass(frozen=True)
class LabeledTweet:
    tweet: Tweet
    label: SentimentLabel | None = None

    @property
    def id(self) -> str:
        return self.tweet.id

    @property
    def text(self) -> str:
        return self.tweet.text

    def to_record(self) -> dict:
        rec = {"id": self.tweet.id, "text": self.tweet.text}
        if self.label is not None:
            rec["label"] = self.label.text
        if self.tweet.created_at is not None:
            rec["created_at"] = self.tweet.created_at
        return rec


@dataclass(frozen=True)
class Dataset:
    records: tuple[LabeledTweet, ...]
    name: str = "dataset"

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for rec in self.records:
            if rec.id in seen:
                raise CorpusError(f"duplicate id {rec.id!r} in dataset {self.name!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def texts(self) -> list[str]:
        return [r.text for r in self.records]

    @property
    def labels(self) -> list[SentimentLabel]:
        missing = [r.id for r in self.records if r.label is None]
        if missing:
            raise CorpusError(f"unlabelled record {missing[0]!r} ({len(missing)} in total)")
        return [r.label for r in self.records]

    def subset(self, indices, name: str | None = None) -> "Dataset":
        return Dataset(tuple(self.records[i] for i in indices), name or self.name)


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(not 0.0 < f < 1.0 for f in fracs):
            raise CorpusError("split fractions must lie in (0, 1)")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise CorpusError("fractions must sum to 1")


@dataclass(frozen=True)
class ClassDistribution:
    counts: dict[SentimentLabel, int]
    fractions: dict[SentimentLabel, float] = field(compare=False)


def _record_from_mapping(row: dict, where: str) -> LabeledTweet:
    ident = row.get("id")
    text = row.get("text")
    if ident is None or text is None:
        raise CorpusError(f"{where}: record needs 'id' and 'text' fields")
    raw_label = row.get("label")
    label = None
    if raw_label is not None and str(raw_label).strip() != "":
        try:
            label = SentimentLabel.parse(str(raw_label))
        except CorpusError:
            raise CorpusError(f"{where}: unknown label value {raw_label!r}") from None
    created = row.get("created_at") or None
    try:
        tweet = Tweet(str(ident), str(text), created)
    except CorpusError as exc:
        raise CorpusError(f"{where}: {exc}") from None
    return LabeledTweet(tweet, label)


def load_corpus(path, format: str | None = None) -> Dataset:
    """Read a JSONL or CSV file of ``id,text[,label][,created_at]`` records.

    The format is inferred from the suffix when not given. Errors name the
    offending line.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"no such file: {path}")
    fmt = (format or path.suffix.lstrip(".")).lower()
    records: list[LabeledTweet] = []
    with path.open(encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
                if not isinstance(row, dict):
                    raise CorpusError(f"line {lineno}: expected a JSON object")
                records.append(_record_from_mapping(row, f"line {lineno}"))
        elif fmt == "csv":
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"id", "text"} <= set(reader.fieldnames):
                raise CorpusError("CSV header must contain id,text[,label]")
            for row in reader:
                records.append(_record_from_mapping(row, f"line {reader.line_num}"))
        else:
            raise CorpusError(f"unsupported corpus format {fmt!r}")
    if not records:
        raise CorpusError("empty dataset")
    return Dataset(tuple(records), name=path.stem)


def write_corpus(d: Dataset, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in d.records:
            fh.write(json.dumps(rec.to_record(), ensure_ascii=False) + "\n")
    return path


def dedupe(d: Dataset) -> Dataset:
    """Keep the first record for every exact raw text, preserving order."""
    seen: set[str] = set()
    kept = []
    for rec in d.records:
        if rec.text in seen:
            continue
        seen.add(rec.text)
        kept.append(rec)
    return Dataset(tuple(kept), d.name)


def class_distribution(d: Dataset) -> ClassDistribution:
    labels = d.labels
    if not labels:
        raise CorpusError("empty dataset")
    counts = Counter(labels)
    total = len(labels)
    counts = {lab: counts.get(lab, 0) for lab in LABELS}
    fractions = {lab: c / total for lab, c in counts.items()}
    return ClassDistribution(counts, fractions)


def _allocate(n: int, fracs: tuple[float, ...]) -> list[int]:
    # largest-remainder rounding keeps every part within one record of n*frac
    exact = [n * f for f in fracs]
    sizes = [math.floor(x) for x in exact]
    order = sorted(range(len(fracs)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def _allocate_table(class_sizes: list[int], fracs: tuple[float, ...]) -> list[list[int]]:
    """Round the class x split table so rows sum to class sizes and columns to split sizes.

    Every cell stays below one record away from its exact share. Start from
    floors and hand out the leftover units greedily (largest row deficit first,
    to the columns with the largest remaining deficit), which always succeeds
    for a table of this shape.
    """
    exact = [[n * f for f in fracs] for n in class_sizes]
    table = [[math.floor(x) for x in row] for row in exact]
    col_need = [t - sum(row[j] for row in table)
                for j, t in enumerate(_allocate(sum(class_sizes), fracs))]
    row_need = [n - sum(row) for n, row in zip(class_sizes, table)]
    for i in sorted(range(len(table)), key=lambda i: (-row_need[i], i)):
        cols = sorted(range(len(fracs)),
                      key=lambda j: (-col_need[j], -(exact[i][j] - table[i][j]), j))
        for j in cols[: row_need[i]]:
            table[i][j] += 1
            col_need[j] -= 1
    return table


def stratified_split(d: Dataset, s: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Per-class shuffled split into train/val/test; original order kept inside each part."""
    labels = d.labels
    fracs = (s.train_frac, s.val_frac, s.test_frac)
    rng = np.random.default_rng(s.seed)
    groups = []
    for lab in LABELS:
        members = [i for i, l in enumerate(labels) if l == lab]
        if not members:
            continue
        if len(members) < 3:
            raise CorpusError(f"class {lab.text} has {len(members)} records; need at least 3")
        groups.append([members[i] for i in rng.permutation(len(members))])
    table = _allocate_table([len(g) for g in groups], fracs)
    parts: list[list[int]] = [[], [], []]
    for shuffled, sizes in zip(groups, table):
        start = 0
        for part, size in zip(parts, sizes):
            part.extend(shuffled[start : start + size])
            start += size
    names = ("train", "val", "test")
    return tuple(d.subset(sorted(p), f"{d.name}-{n}") for p, n in zip(parts, names))

"""Synthetic labelled tweets for demos and end-to-end tests.

Every class owns a disjoint set of cue words; each tweet mixes shared filler
with cues of its own class at a fixed rate, plus the usual tweet debris
(mentions, hashtags, links, emojis, slang).
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import Dataset, LabeledTweet, SentimentLabel, Tweet, write_corpus

DEFAULT_SIZE = 300
DEFAULT_CUE_RATE = 0.3
# class shares of the bundled corpus
DEFAULT_SHARES = (0.317, 0.361, 0.322)

CUES = {
    SentimentLabel.NEGATIVE: (
        "refuse", "dangerous", "poison", "scam", "never", "forced", "toxic", "lies",
        "reject", "untested", "harmful", "coverup", "mandate", "distrust", "rushed",
    ),
    SentimentLabel.NEUTRAL: (
        "wondering", "maybe", "unsure", "waiting", "undecided", "questions", "considering",
        "hesitant", "later", "thinking", "researching", "pondering", "curious", "perhaps", "deciding",
    ),
    SentimentLabel.POSITIVE: (
        "grateful", "protected", "relieved", "thankful", "excited", "safe", "proud",
        "happy", "science", "hope", "finally", "booster", "heroes", "recommend", "amazing",
    ),
}

FILLER = (
    "vaccine", "covid", "jab", "dose", "shot", "clinic", "nurse", "doctor", "pfizer", "moderna",
    "appointment", "today", "week", "family", "friends", "news", "people", "government", "arm",
    "pharmacy", "second", "first", "queue", "line", "centre", "health", "rollout", "variant",
    "the", "my", "is", "a", "about", "and", "with", "for", "this", "just", "got", "going", "to",
)

DEBRIS = ("@user", "#covidvaccine", "#vaccine", "https://t.co/demo", "😀", "🙄", "💉", "2day", "gr8", "vaxxed")


def generate_demo(n: int = DEFAULT_SIZE, seed: int = 0, cue_rate: float = DEFAULT_CUE_RATE,
                  shares: tuple[float, float, float] = DEFAULT_SHARES, length: tuple[int, int] = (8, 18)) -> Dataset:
    if n < 3:
        raise ValueError("need at least 3 tweets")
    if not 0.0 < cue_rate <= 1.0:
        raise ValueError("cue_rate must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    counts = np.floor(np.asarray(shares) / sum(shares) * n).astype(int)
    counts[np.argsort(-(np.asarray(shares) * n - counts), kind="stable")[: n - counts.sum()]] += 1
    labels = np.repeat(np.arange(3), counts)
    labels = labels[rng.permutation(n)]
    records = []
    for i, lab in enumerate(labels):
        label = SentimentLabel(int(lab))
        cues = CUES[label]
        words = []
        for _ in range(int(rng.integers(length[0], length[1] + 1))):
            pool = cues if rng.random() < cue_rate else FILLER
            words.append(pool[int(rng.integers(len(pool)))])
        if not any(w in cues for w in words):
            words[int(rng.integers(len(words)))] = cues[int(rng.integers(len(cues)))]
        if rng.random() < 0.5:
            words.insert(int(rng.integers(len(words) + 1)), DEBRIS[int(rng.integers(len(DEBRIS)))])
        text = " ".join(words)
        text = text[0].upper() + text[1:]
        if rng.random() < 0.4:
            text += "!" * int(rng.integers(1, 4))
        day = 1 + i % 28
        records.append(LabeledTweet(Tweet(f"demo-{i:04d}", text, f"2021-03-{day:02d}T12:00:00Z"), label))
    return Dataset(tuple(records), name="demo")


def write_demo(path, n: int = DEFAULT_SIZE, seed: int = 0, cue_rate: float = DEFAULT_CUE_RATE) -> Path:
    return write_corpus(generate_demo(n, seed, cue_rate), path)


def bundled_demo_path() -> Path:
    return Path(str(resources.files("vaxsent") / "data" / "demo_corpus.jsonl"))

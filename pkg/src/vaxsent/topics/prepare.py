"""Tweet cleanup for topic modelling: stripping, stopwords and a rule-based lemmatizer."""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from ..normalize import LexiconSet, _EMOJI_UNIT, _HASHTAG_MARK, _MENTION, _URL, default_lexicons, expand_contractions

MIN_TOKEN_LENGTH = 2

_EMOJI = re.compile(_EMOJI_UNIT)
_VOWELS = set("aeiou")


def _data_path(name: str) -> Path:
    return Path(str(resources.files("vaxsent") / "data" / name))


def load_stopwords(path=None) -> frozenset[str]:
    path = _data_path("stopwords.txt") if path is None else Path(path)
    words = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


def load_lemma_exceptions(path=None) -> dict[str, str]:
    path = _data_path("lemma_exceptions.tsv") if path is None else Path(path)
    table = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise ValueError(f"{path}:{lineno}: expected 2 tab-separated columns")
        table[cols[0].strip().lower()] = cols[1].strip().lower()
    return table


# -- lemmatizer ---------------------------------------------------------------

def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of vowel-consonant sequences in ``stem``."""
    forms = "".join("c" if _is_consonant(stem, i) else "v" for i in range(len(stem)))
    return len(re.findall(r"v+c+", forms))


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_cvc(stem: str) -> bool:
    return (len(stem) >= 3 and _is_consonant(stem, -3) and not _is_consonant(stem, -2)
            and _is_consonant(stem, -1) and stem[-1] not in "wxy")


def _repair(stem: str) -> str:
    # after stripping -ed/-ing: restore a dropped e or undo a doubled consonant
    if stem.endswith(("at", "bl", "iz")):
        return stem + "e"
    if len(stem) >= 2 and stem[-1] == stem[-2] and _is_consonant(stem, -1) and stem[-1] not in "lsz":
        return stem[:-1]
    if _measure(stem) == 1 and _ends_cvc(stem):
        return stem + "e"
    # English words rarely end in v or c, or in a vowel + z
    if stem[-1] in "vc" or (stem[-1] == "z" and not _is_consonant(stem, -2)):
        return stem + "e"
    return stem


def lemmatize(token: str, exceptions: Mapping[str, str]) -> str:
    if token in exceptions:
        return exceptions[token]
    if not token.isalpha() or len(token) <= 3:
        return token
    if token.endswith("ies") and len(token) > 4:
        return token[:-3] + "y"
    if token.endswith("sses"):
        return token[:-2]
    if token.endswith(("ches", "shes", "xes", "zzes")):
        return token[:-2]
    if token.endswith("s") and not token.endswith(("ss", "us", "is", "'s")):
        return token[:-1]
    if token.endswith("eed"):
        return token
    for suffix in ("ing", "ed"):
        if token.endswith(suffix):
            stem = token[: -len(suffix)]
            if len(stem) >= 2 and _has_vowel(stem):
                if suffix == "ed" and stem.endswith("i"):
                    return stem[:-1] + "y"
                return _repair(stem)
            return token
    return token


# -- tweet cleanup ------------------------------------------------------------

@dataclass(frozen=True)
class LdaPreprocessor:
    stopwords: frozenset[str]
    exceptions: Mapping[str, str]
    lexicons: LexiconSet

    def __call__(self, text: str) -> list[str]:
        text = expand_contractions(text, self.lexicons)
        text = _URL.sub(" ", text)
        text = _MENTION.sub(" ", text)
        text = _HASHTAG_MARK.sub(" ", text)
        text = _EMOJI.sub(" ", text)
        text = "".join(" " if unicodedata.category(ch)[0] in "PSC" else ch for ch in text)
        out = []
        for tok in text.lower().split():
            if tok in self.stopwords:
                continue
            lemma = lemmatize(tok, self.exceptions)
            if len(lemma) >= MIN_TOKEN_LENGTH and lemma not in self.stopwords:
                out.append(lemma)
        return out


@lru_cache(maxsize=1)
def default_preprocessor() -> LdaPreprocessor:
    return LdaPreprocessor(load_stopwords(), load_lemma_exceptions(), default_lexicons())


def prepare_for_lda(tweets: Iterable[str], stopwords=None, lemma_rules=None) -> list[list[str]]:
    """Token lists ready for phrase detection; file arguments replace the bundled lists."""
    if stopwords is None and lemma_rules is None:
        prep = default_preprocessor()
    else:
        prep = LdaPreprocessor(load_stopwords(stopwords), load_lemma_exceptions(lemma_rules), default_lexicons())
    return [prep(t) for t in tweets]

"""Lexical and semantic tweet normalization driven by emoji/slang/contraction lexicons.

The two modes share most of their rules. Lexical mode lowercases, drops
punctuation, strips long numbers and replaces emojis with a description of
what they depict. Semantic mode keeps case, punctuation and numerals and
replaces emojis with a sentence carrying the emotion the emoji expresses.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

DELETE = "DELETE"
PLACEHOLDER_USER = "atUser"
PLACEHOLDER_URL = "url"


class LexiconError(ValueError):
    pass


class NormalizationMode(str, Enum):
    LEXICAL = "lexical"
    SEMANTIC = "semantic"


@dataclass(frozen=True)
class LexiconSet:
    """Rewrite tables. A gloss of ``None`` means the emoji is deleted in that mode."""

    emoji_map: Mapping[str, tuple[str | None, str | None]]
    slang_map_lexical: Mapping[str, str]
    slang_map_semantic: Mapping[str, str]
    contraction_map: Mapping[str, str]
    _patterns: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("emoji_map", "slang_map_lexical", "slang_map_semantic", "contraction_map"):
            table = getattr(self, name)
            if any(not k for k in table):
                raise LexiconError(f"{name} has an empty key")
            object.__setattr__(self, name, MappingProxyType(dict(table)))

    def emoji_gloss(self, cluster: str, mode: NormalizationMode) -> str | None:
        entry = self.emoji_map.get(cluster) or self.emoji_map.get(_strip_selectors(cluster))
        if entry is None:
            return None
        return entry[0] if mode is NormalizationMode.LEXICAL else entry[1]

    def pattern(self, name: str) -> re.Pattern:
        pats = self._patterns
        if name not in pats:
            pats[name] = self._compile(name)
        return pats[name]

    def _compile(self, name: str) -> re.Pattern:
        if name == "emoji":
            keys = sorted(self.emoji_map, key=lambda k: (-len(k), k))
            alts = "|".join(re.escape(k) for k in keys)
            return re.compile(f"(?:{alts}|{_EMOJI_UNIT})" if alts else _EMOJI_UNIT)
        if name == "contraction":
            keys = sorted(self.contraction_map, key=lambda k: (-len(k), k))
            alts = "|".join(re.escape(k).replace("'", _APOSTROPHES) for k in keys)
            return re.compile(rf"(?<![\w'’])(?:{alts})(?![\w'’])", re.IGNORECASE)
        table = self.slang_map_lexical if name == "slang_lexical" else self.slang_map_semantic
        keys = sorted(table, key=lambda k: (-len(k), k))
        alts = "|".join(re.escape(k) for k in keys) or r"(?!x)x"
        return re.compile(rf"(?<![\w.'’])(?:{alts})(?![\w'’]|\.\w)", re.IGNORECASE)


@dataclass(frozen=True)
class NormalizedText:
    mode: NormalizationMode
    text: str
    tokens: tuple[str, ...]


# -- emoji detection ---------------------------------------------------------

_EMOJI_BASE = (
    "[\U0001F000-\U0001FAFF☀-➿⌀-⏿⬀-⯿←-⇿"
    "■-◿⤴⤵〰〽㊗㊙©®‼⁉™ℹⓂ]"
)
_EMOJI_MOD = "[︎️⃣\U0001F3FB-\U0001F3FF]"
_EMOJI_UNIT = f"(?:{_EMOJI_BASE}{_EMOJI_MOD}*(?:‍{_EMOJI_BASE}{_EMOJI_MOD}*)*)"
_SELECTORS = re.compile("[︎️‍⃣]")
_APOSTROPHES = "['’‘ʼ`]"


def _strip_selectors(s: str) -> str:
    return s.replace("︎", "").replace("️", "")


# -- structural patterns -----------------------------------------------------

_URL = re.compile(r"\S*(?:[Hh][Tt][Tt][Pp]|[Ww][Ww][Ww]\.)\S*")
_HASHTAG_MARK = re.compile(r"#+(?=[\w@])")
_MENTION = re.compile(r"(?<![\w@])@+\w+")
_MENTION_RUN = re.compile(r"(?<![\w@])@+\w+(?:\s*@+\w+)*")
_PLACEHOLDER = re.compile(rf"((?<!\w){PLACEHOLDER_USER}(?!\w))")
_WORD = re.compile(r"\w+")
_ORDINAL = re.compile(r"(\d+)(?:st|nd|rd|th)")
# standalone numbers up to this many digits survive lexical integer removal
_MAX_KEPT_DIGITS = 2


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


# -- lexicon files -----------------------------------------------------------

def _read_tsv(path, ncols: int) -> list[tuple[int, list[str]]]:
    rows = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = [c.strip() for c in line.split("\t")]
        if len(cols) != ncols:
            raise LexiconError(f"{path}:{lineno}: expected {ncols} tab-separated columns, got {len(cols)}")
        if not cols[0]:
            raise LexiconError(f"{path}:{lineno}: empty key")
        rows.append((lineno, cols))
    return rows


def _unique(rows, path, key=lambda k: k):
    table = {}
    for lineno, cols in rows:
        k = key(cols[0])
        if k in table:
            raise LexiconError(f"{path}:{lineno}: duplicate key {cols[0]!r}")
        table[k] = cols[1:]
    return table


def load_lexicons(emoji_path, slang_path, contraction_path) -> LexiconSet:
    """Load the three TSV lexicon files (``#`` starts a comment line)."""
    emoji_rows = _unique(_read_tsv(emoji_path, 3), emoji_path)
    emoji_map = {k: tuple(None if g == DELETE else g for g in v) for k, v in emoji_rows.items()}
    slang = _unique(_read_tsv(slang_path, 3), slang_path, key=str.lower)
    contractions = _unique(
        _read_tsv(contraction_path, 2), contraction_path,
        key=lambda k: re.sub(_APOSTROPHES, "'", k.lower()),
    )
    return LexiconSet(
        emoji_map=emoji_map,
        slang_map_lexical={k: v[0] for k, v in slang.items()},
        slang_map_semantic={k: v[1] for k, v in slang.items()},
        contraction_map={k: v[0] for k, v in contractions.items()},
    )


def bundled_lexicon_paths() -> tuple[Path, Path, Path]:
    base = resources.files("vaxsent") / "data"
    return (Path(str(base / "emoji.tsv")), Path(str(base / "slang.tsv")),
            Path(str(base / "contractions.tsv")))


@lru_cache(maxsize=1)
def default_lexicons() -> LexiconSet:
    return load_lexicons(*bundled_lexicon_paths())


# -- rule steps --------------------------------------------------------------

def expand_contractions(text: str, lex: LexiconSet) -> str:
    def repl(m: re.Match) -> str:
        found = m.group(0)
        expansion = lex.contraction_map[re.sub(_APOSTROPHES, "'", found.lower())]
        if found[0].isupper():
            expansion = expansion[0].upper() + expansion[1:]
        return expansion

    return lex.pattern("contraction").sub(repl, text)


def _lower_keep_placeholders(text: str) -> str:
    parts = _PLACEHOLDER.split(text)
    return "".join(p if p == PLACEHOLDER_USER else p.lower() for p in parts)


def _strip_integers(text: str, keep: Mapping[str, str]) -> str:
    def repl(m: re.Match) -> str:
        word = m.group(0)
        if not any(ch.isdigit() for ch in word) or word in keep:
            return word
        ordinal = _ORDINAL.fullmatch(word)
        digits = ordinal.group(1) if ordinal else word
        if digits.isdigit():
            return digits if len(digits) <= _MAX_KEPT_DIGITS else ""
        return "".join(ch for ch in word if not ch.isdigit())

    return _WORD.sub(repl, text)


def _collapse_emoji_repeats(text: str, lex: LexiconSet) -> str:
    emoji = lex.pattern("emoji").pattern
    rep = re.compile(f"(?P<e>{emoji})(?:\\s*(?P=e))+")
    return rep.sub(lambda m: m.group("e"), text)


def _replace_emojis(text: str, lex: LexiconSet, mode: NormalizationMode) -> str:
    def repl(m: re.Match) -> str:
        gloss = lex.emoji_gloss(m.group(0), mode)
        return f" {gloss} " if gloss else " "

    text = lex.pattern("emoji").sub(repl, text)
    return _SELECTORS.sub(" ", text)


def _replace_slang(text: str, lex: LexiconSet, mode: NormalizationMode) -> str:
    if mode is NormalizationMode.LEXICAL:
        table, pat = lex.slang_map_lexical, lex.pattern("slang_lexical")
    else:
        table, pat = lex.slang_map_semantic, lex.pattern("slang_semantic")
    return pat.sub(lambda m: table[m.group(0).lower()], text)


def _strip_punctuation(text: str) -> str:
    return "".join(" " if _is_punct(ch) else ch for ch in text)


def _squash(text: str) -> str:
    return " ".join(text.split())


# -- public API --------------------------------------------------------------

def tokenize(text: str, mode: NormalizationMode) -> list[str]:
    """Whitespace split; semantic mode also peels leading/trailing punctuation runs.

    >>> tokenize("the t!!", NormalizationMode.SEMANTIC)
    ['the', 't', '!!']
    """
    words = text.split()
    if NormalizationMode(mode) is NormalizationMode.LEXICAL:
        return words
    tokens = []
    for w in words:
        start, end = 0, len(w)
        while start < end and _is_punct(w[start]):
            start += 1
        if start == end:
            tokens.append(w)
            continue
        while _is_punct(w[end - 1]):
            end -= 1
        if start:
            tokens.append(w[:start])
        tokens.append(w[start:end])
        if end < len(w):
            tokens.append(w[end:])
    return tokens


def normalize_lexical(raw: str, lex: LexiconSet | None = None) -> NormalizedText:
    lex = lex or default_lexicons()
    t = expand_contractions(raw, lex)
    t = _lower_keep_placeholders(t)
    t = _strip_integers(t, lex.slang_map_lexical)
    t = _HASHTAG_MARK.sub(" ", t)
    t = _URL.sub(f" {PLACEHOLDER_URL} ", t)
    t = _MENTION_RUN.sub(f" {PLACEHOLDER_USER} ", t)
    t = _collapse_emoji_repeats(t, lex)
    t = _strip_punctuation_keep_emoji(t, lex)
    t = _replace_emojis(t, lex, NormalizationMode.LEXICAL)
    # symbols the emoji pattern does not cover
    t = _strip_punctuation(t)
    t = _replace_slang(t, lex, NormalizationMode.LEXICAL)
    t = _squash(t)
    return NormalizedText(NormalizationMode.LEXICAL, t, tuple(tokenize(t, NormalizationMode.LEXICAL)))


def _strip_punctuation_keep_emoji(text: str, lex: LexiconSet) -> str:
    out, pos = [], 0
    for m in lex.pattern("emoji").finditer(text):
        out.append(_strip_punctuation(text[pos:m.start()]))
        out.append(m.group(0))
        pos = m.end()
    out.append(_strip_punctuation(text[pos:]))
    return "".join(out)


def normalize_semantic(raw: str, lex: LexiconSet | None = None) -> NormalizedText:
    lex = lex or default_lexicons()
    t = expand_contractions(raw, lex)
    t = _HASHTAG_MARK.sub(" ", t)
    t = _URL.sub(" ", t)
    counter = iter(range(1, len(t) + 1))
    t = _MENTION.sub(lambda m: f"Name{next(counter)}", t)
    t = _collapse_emoji_repeats(t, lex)
    t = _replace_emojis(t, lex, NormalizationMode.SEMANTIC)
    t = _replace_slang(t, lex, NormalizationMode.SEMANTIC)
    t = _squash(t)
    return NormalizedText(NormalizationMode.SEMANTIC, t, tuple(tokenize(t, NormalizationMode.SEMANTIC)))


def normalize(raw: str, mode: NormalizationMode | str, lex: LexiconSet | None = None) -> NormalizedText:
    if NormalizationMode(mode) is NormalizationMode.LEXICAL:
        return normalize_lexical(raw, lex)
    return normalize_semantic(raw, lex)

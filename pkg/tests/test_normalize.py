import re
import unicodedata

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuzz import PIECES, fuzz_strings
from vaxsent.normalize import (
    DELETE,
    LexiconError,
    NormalizationMode,
    bundled_lexicon_paths,
    default_lexicons,
    load_lexicons,
    normalize,
    normalize_lexical,
    normalize_semantic,
    tokenize,
)

LEX, SEM = NormalizationMode.LEXICAL, NormalizationMode.SEMANTIC

EMOJI_GOLDENS = [
    ("😀", "grinning face", "I am happy about this!"),
    ("🤨", "face with raised eyebrow", "I am serious about this."),
    ("🙄", "face with rolling eyes", "I do not take this seriously."),
    ("😤", "face with steam from nose", "I am angry at this!"),
    ("😰", "anxious face with sweat", "I do not like this."),
    ("🤢", "nauseated face", "I am disgusted by this!"),
    ("😎", "smiling face with sunglasses", "I am proud of this!"),
    ("💩", "pile of poo", "This is nonsense!"),
    ("💔", "broken heart", "I am sad about this!"),
    ("💤", "zzz", "I am asleep!"),
    ("💢", "anger symbol", "I am angry about this!"),
]

# (input, lexical, semantic); the repeated-emoji row uses the bundled lexicon's gloss
RULE_GOLDENS = [
    ("https://host/location", "url", ""),
    ("vaxxed 2day", "vaxxed today", "vaccinated today"),
    ("#word", "word", "word"),
    ("@USER1 @USER2", "atUser", "Name1 Name2"),
    ("HeLlO", "hello", "HeLlO"),
    ("30th covid19 2021", "30 covid", "30th covid19 2021"),
    ("it’s can’t", "it is cannot", "it is cannot"),
    ("💤💤💤 the t!!", "zzz the t", "I am asleep! the t!!"),
    ("i r ded", "i r ded", "i r ded"),
]

LEXICAL_FORBIDDEN = re.compile(r"[A-Z!?.,;:'\"#@]")


@pytest.mark.parametrize("emoji, lexical, semantic", EMOJI_GOLDENS)
def test_emoji_goldens_lexical(emoji, lexical, semantic):
    out = normalize_lexical(emoji)
    assert out.text == lexical
    assert list(out.tokens) == lexical.split()


@pytest.mark.parametrize("emoji, lexical, semantic", EMOJI_GOLDENS)
def test_emoji_goldens_semantic(emoji, lexical, semantic):
    assert normalize_semantic(emoji).text == semantic


@pytest.mark.parametrize("raw, lexical, semantic", RULE_GOLDENS)
def test_rule_goldens_lexical(raw, lexical, semantic):
    assert normalize_lexical(raw).text == lexical


@pytest.mark.parametrize("raw, lexical, semantic", RULE_GOLDENS)
def test_rule_goldens_semantic(raw, lexical, semantic):
    assert normalize_semantic(raw).text == semantic


def test_repetition_with_spaces_between_emojis():
    assert normalize_lexical("💤 💤 💤 the t!!").text == "zzz the t"
    assert normalize_semantic("💤 💤 💤 the t!!").text == "I am asleep! the t!!"


def test_soccer_ball_deleted_in_both_modes():
    assert normalize_lexical("goal ⚽ now").text == "goal now"
    assert normalize_semantic("goal ⚽ now").text == "goal now"


def test_unknown_emoji_deleted():
    assert normalize_lexical("ok 🦄").text == "ok"
    assert normalize_semantic("ok 🦄!").text == "ok !"


def test_mentions_numbered_per_tweet():
    assert normalize_semantic("@a hi @b and @c").text == "Name1 hi Name2 and Name3"
    assert normalize_lexical("@a hi @b and @c").text == "atUser hi atUser and atUser"


def test_emoji_map_entries_loaded():
    lex = default_lexicons()
    assert lex.emoji_map["😀"] == ("grinning face", "I am happy about this!")
    assert lex.emoji_map["⚽"] == (None, None)
    assert lex.slang_map_semantic["vaxxed"] == "vaccinated"
    assert lex.slang_map_lexical["2day"] == "today"
    assert lex.contraction_map["can't"] == "cannot"


def _write_lexicons(tmp_path, emoji_rows, slang_rows=("2day\ttoday\ttoday",), contr_rows=("can't\tcannot",)):
    e, s, c = tmp_path / "e.tsv", tmp_path / "s.tsv", tmp_path / "c.tsv"
    e.write_text("# comment\n" + "\n".join(emoji_rows) + "\n", encoding="utf-8")
    s.write_text("\n".join(slang_rows) + "\n", encoding="utf-8")
    c.write_text("\n".join(contr_rows) + "\n", encoding="utf-8")
    return e, s, c


def test_load_custom_lexicons(tmp_path):
    lex = load_lexicons(*_write_lexicons(tmp_path, ["😀\tgrinning face\tI am happy about this!", f"⚽\t{DELETE}\t{DELETE}"]))
    assert normalize("😀 ⚽", LEX, lex).text == "grinning face"
    assert normalize("😀 ⚽", SEM, lex).text == "I am happy about this!"


def test_duplicate_emoji_key_rejected(tmp_path):
    paths = _write_lexicons(tmp_path, ["😀\ta\tb", "😀\tc\td"])
    with pytest.raises(LexiconError, match="😀"):
        load_lexicons(*paths)


def test_wrong_column_count_rejected(tmp_path):
    paths = _write_lexicons(tmp_path, ["😀\tonly two"])
    with pytest.raises(LexiconError):
        load_lexicons(*paths)


def test_bundled_paths_exist():
    assert all(p.is_file() for p in bundled_lexicon_paths())


def test_tokenize_examples():
    assert tokenize("it is cannot", LEX) == ["it", "is", "cannot"]
    assert tokenize("t!!", SEM) == ["t", "!!"]
    assert tokenize("", LEX) == [] and tokenize("", SEM) == []
    assert tokenize("(wow)...", SEM) == ["(", "wow", ")..."]


def test_mode_accepts_strings():
    assert normalize("HeLlO", "lexical").text == "hello"
    assert normalize("HeLlO", "semantic").mode is SEM


def _check_invariants(raw):
    lex = normalize_lexical(raw)
    sem = normalize_semantic(raw)
    # idempotence
    assert normalize_lexical(lex.text) == lex, raw
    assert normalize_semantic(sem.text) == sem, raw
    # lexical character class, the user placeholder aside
    assert not LEXICAL_FORBIDDEN.search(lex.text.replace("atUser", "")), raw
    assert not any(unicodedata.category(ch)[0] in "PS" for ch in lex.text), raw
    for out in (lex, sem):
        assert all(t and t == t.strip() for t in out.tokens)
        assert re.sub(r"\s", "", "".join(out.tokens)) == re.sub(r"\s", "", out.text)
        assert "  " not in out.text and out.text == out.text.strip()
    assert "http" not in sem.text.lower()
    for emoji in default_lexicons().emoji_map:
        assert emoji not in sem.text and emoji not in lex.text
    # determinism
    assert normalize_lexical(raw) == lex and normalize_semantic(raw) == sem


@given(st.lists(st.sampled_from(PIECES + [" ", "  ", "\n"]), max_size=15).map("".join))
def test_invariants_on_tweet_pieces(raw):
    _check_invariants(raw)


@given(st.text(max_size=40))
def test_invariants_on_arbitrary_text(raw):
    _check_invariants(raw)


def test_invariants_on_seeded_fuzz():
    for raw in fuzz_strings(300, seed=11):
        _check_invariants(raw)

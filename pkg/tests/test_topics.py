import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import matched_overlap, two_topic_corpus
from vaxsent.corpus import Dataset, LabeledTweet, SentimentLabel, Tweet
from vaxsent.topics import (
    TopicError,
    apply_phrases,
    build_dictionary,
    coherence_umass,
    detect_phrases,
    lda_gibbs,
    lemmatize,
    load_lemma_exceptions,
    load_stopwords,
    misclassified,
    prepare_for_lda,
    select_topic_count,
    to_bow,
    top_terms,
    umass_pair,
)
from vaxsent.topics.lda import LdaModel

NEG, NEU, POS = SentimentLabel.NEGATIVE, SentimentLabel.NEUTRAL, SentimentLabel.POSITIVE


def fit_two_topic(seed, **kw):
    docs, truth = two_topic_corpus(seed)
    d = build_dictionary(docs)
    bows = [to_bow(d, doc) for doc in docs]
    return d, bows, truth, lda_gibbs(bows, 2, seed=seed, **kw)


# -- preparation -------------------------------------------------------------------------

def test_prepare_examples():
    assert prepare_for_lda(["The vaccines aren’t working!! #fail https://x.y"]) == [["vaccine", "work", "fail"]]
    assert prepare_for_lda([""]) == [[]]
    assert prepare_for_lda(["running runs ran"]) == [["run", "run", "run"]]


def test_prepare_drops_mentions_emojis_and_short_tokens():
    out = prepare_for_lda(["@user Got my 2nd dose 💉 x y today!!!"])[0]
    assert all(len(t) >= 2 for t in out)
    assert "user" not in out and "💉" not in out
    assert "dose" in out


def test_bundled_resources():
    stop = load_stopwords()
    assert {"the", "and", "is"} <= stop
    assert 250 <= len(stop) <= 450
    exc = load_lemma_exceptions()
    assert exc["ran"] == "run"
    assert len(exc) >= 200


def test_custom_stopwords_and_rules(tmp_path):
    sw = tmp_path / "stop.txt"
    sw.write_text("vaccine\n")
    rules = tmp_path / "lemma.tsv"
    rules.write_text("jabs\tinjection\n")
    assert prepare_for_lda(["the vaccine jabs"], stopwords=sw, lemma_rules=rules) == [["the", "injection"]]


@pytest.mark.parametrize("word,lemma", [
    ("vaccines", "vaccine"), ("parties", "party"), ("classes", "class"), ("boxes", "box"),
    ("working", "work"), ("stopped", "stop"), ("hoping", "hope"), ("worried", "worry"),
    ("virus", "virus"), ("news", "news"), ("children", "child"), ("went", "go"), ("ran", "run"),
])
def test_lemmatize(word, lemma):
    assert lemmatize(word, load_lemma_exceptions()) == lemma


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=12))
def test_lemmatize_never_empties(word):
    out = lemmatize(word, load_lemma_exceptions())
    assert out and out.isalpha()


# -- phrases -----------------------------------------------------------------------------

def _side_effect_docs():
    docs = [["side", "effects", f"w{i}"] for i in range(10)]
    docs += [["side", "note"], ["effects", "vary"]]
    return docs


def test_side_effects_merged():
    docs = _side_effect_docs()
    pm = detect_phrases(docs, min_count=2, threshold=0.5)
    # count(side,effects)=10, count(side)=count(effects)=11, V=14
    assert pm.bigrams[("side", "effects")] == pytest.approx((10 - 2) * 14 / (11 * 11), abs=1e-12)
    assert set(pm.bigrams) == {("side", "effects")}
    out = apply_phrases(pm, docs)
    assert any("side_effects" in d for d in out)


def test_infinite_threshold_is_identity():
    docs = _side_effect_docs()
    pm = detect_phrases(docs, min_count=1, threshold=math.inf)
    assert apply_phrases(pm, docs) == [list(d) for d in docs]


def test_second_pass_builds_trigram():
    docs = [["side", "effects", "serious"] for _ in range(10)] + [["side"], ["effects"], ["serious"]]
    pm = detect_phrases(docs, min_count=2, threshold=0.1)
    assert ("side_effects", "serious") in pm.trigrams
    out = apply_phrases(pm, docs)
    assert out[0] == ["side_effects_serious"]


def test_scored_pairs_meet_min_count():
    rng = np.random.default_rng(0)
    docs = [list(rng.choice(list("abcdef"), size=6)) for _ in range(40)]
    pm = detect_phrases(docs, min_count=4, threshold=0.0)
    from collections import Counter
    pairs = Counter(p for d in docs for p in zip(d, d[1:]))
    assert all(pairs[p] >= 4 for p in pm.bigrams)


def test_phrase_min_count_validated():
    with pytest.raises(ValueError):
        detect_phrases([["a"]], min_count=0)


# -- dictionary --------------------------------------------------------------------------

def test_dictionary_examples():
    d = build_dictionary([["a", "b"], ["b"]])
    assert d.token2id == {"a": 0, "b": 1}
    assert to_bow(d, ["b", "b"]) == [(1, 2)]
    assert to_bow(d, ["z", "a"]) == [(0, 1)]
    assert d.collection_frequency == (1, 2)


@given(st.lists(st.lists(st.sampled_from("abcdefgh"), max_size=6), min_size=1, max_size=8))
def test_dictionary_bijection(docs):
    if not any(docs):
        with pytest.raises(TopicError):
            build_dictionary(docs)
        return
    d = build_dictionary(docs)
    assert sorted(d.token2id.values()) == list(range(len(d)))
    assert all(d.token2id[d.id2token[i]] == i for i in range(len(d)))
    for doc in docs:
        bow = to_bow(d, doc)
        assert [w for w, _ in bow] == sorted(w for w, _ in bow)
        assert sum(c for _, c in bow) == len(doc) and all(c >= 1 for _, c in bow)


def test_empty_corpus_rejected():
    with pytest.raises(TopicError):
        build_dictionary([[], []])


# -- Gibbs sampler -----------------------------------------------------------------------

def test_single_token_corpus():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = lda_gibbs([[(0, 1)]], 2, iterations=400, burn_in=50, seed=1, vocabulary_size=3)
    theta = m.doc_topic_distribution()[0]
    assert theta == pytest.approx([0.5, 0.5], abs=0.1)
    phi = m.topic_term_distribution()
    # whichever topic holds the token puts nearly all its mass on it
    assert phi[:, 0].max() > 0.9


def test_preconditions():
    bows = [[(0, 2), (1, 1)]]
    with pytest.raises(TopicError):
        lda_gibbs(bows, 2, iterations=50, burn_in=50)
    with pytest.raises(TopicError):
        lda_gibbs(bows, 1)
    with pytest.raises(TopicError, match="empty"):
        lda_gibbs([[], []], 2)
    with pytest.raises(TopicError):
        lda_gibbs(bows, 2, beta=0.0)


def test_default_alpha():
    with pytest.warns(UserWarning, match="distinct terms"):
        m = lda_gibbs([[(0, 1), (1, 1)]], 5, iterations=3, burn_in=1)
    assert m.alpha == 10.0 and m.beta == 0.01


def test_two_topic_recovery_single_seed():
    d, bows, truth, m = fit_two_topic(0)
    phi = m.topic_term_distribution()
    tops = [{d.id2token[w] for w in np.argsort(-phi[k])[:10]} for k in range(2)]
    assert min(matched_overlap(tops, truth)) >= 8


@settings(max_examples=15)
@given(st.lists(st.lists(st.integers(0, 9), max_size=8), min_size=1, max_size=6),
       st.integers(2, 4), st.integers(0, 1000))
def test_count_conservation_every_sweep(docs, K, seed):
    bows = [sorted((w, doc.count(w)) for w in set(doc)) for doc in docs]
    if not any(bows):
        return
    lengths = np.array([len(doc) for doc in docs])
    term_totals = np.bincount([w for doc in docs for w in doc], minlength=10)

    def check(sweep, ndk, nkw):
        assert np.all(ndk >= 0) and np.all(nkw >= 0)
        assert np.array_equal(ndk.sum(axis=1), lengths)
        assert np.array_equal(nkw.sum(axis=1), ndk.sum(axis=0))
        assert np.array_equal(nkw.sum(axis=0), term_totals)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = lda_gibbs(bows, K, iterations=12, burn_in=4, seed=seed, vocabulary_size=10, callback=check)
    assert np.allclose(m.topic_term_distribution().sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(m.doc_topic_distribution().sum(axis=1), 1.0, atol=1e-9)


def test_deterministic():
    a = fit_two_topic(3, iterations=60, burn_in=10)[3]
    b = fit_two_topic(3, iterations=60, burn_in=10)[3]
    assert np.array_equal(a.topic_term_counts, b.topic_term_counts)
    assert np.array_equal(a.doc_topic_counts, b.doc_topic_counts)
    c = fit_two_topic(3, iterations=60, burn_in=10)
    c = lda_gibbs(c[1], 2, iterations=60, burn_in=10, seed=4)
    assert not np.array_equal(a.doc_topic_mean, c.doc_topic_mean)


# -- coherence ---------------------------------------------------------------------------

def _fixed_model(phi_rows):
    counts = np.asarray(phi_rows, dtype=float)
    K, V = counts.shape
    return LdaModel(K, 0.1, 1e-9, counts.astype(np.int64), np.ones((1, K), dtype=np.int64), counts,
                    np.ones((1, K)), 2, 1, 0)


def test_umass_pair_arithmetic():
    assert umass_pair(10, 10) == pytest.approx(math.log(11 / 10), abs=1e-12)
    assert umass_pair(0, 10) == pytest.approx(math.log(1 / 10), abs=1e-12)


def test_coherence_on_constructed_counts():
    # term 0 and 1 always together in 10 docs; term 2 alone in 10 others
    together = [[(0, 1), (1, 1)]] * 10
    alone = [[(2, 1)]] * 10
    docs = together + alone
    m = _fixed_model([[5, 4, 0], [0, 0, 5]])
    c = coherence_umass(m, docs, top_n=2)
    assert c.per_topic[0] == pytest.approx(math.log(11 / 10), abs=1e-9)
    # second topic: ranks term 2 then term 0 (ties to smaller id); never co-occur
    assert c.per_topic[1] == pytest.approx(math.log(1 / 10), abs=1e-9)
    assert c.mean == pytest.approx((math.log(1.1) + math.log(0.1)) / 2, abs=1e-9)


def test_coherence_excludes_unseen_terms():
    m = _fixed_model([[5, 4, 1], [1, 1, 5]])
    with pytest.warns(UserWarning, match="never occur"):
        c = coherence_umass(m, [[(0, 1), (1, 1)]] * 3, top_n=3)
    assert c.per_topic[0] == pytest.approx(math.log(4 / 3), abs=1e-9)


def test_coherence_top_n_validated():
    with pytest.raises(TopicError):
        coherence_umass(_fixed_model([[1, 1], [1, 1]]), [[(0, 1)]], top_n=1)


def test_coherence_document_order_invariant():
    _, bows, _, m = fit_two_topic(1, iterations=60, burn_in=10)
    perm = np.random.default_rng(0).permutation(len(bows))
    assert coherence_umass(m, bows).mean == pytest.approx(coherence_umass(m, [bows[i] for i in perm]).mean,
                                                          abs=1e-12)


def test_select_topic_count():
    docs, _ = two_topic_corpus(0)
    d = build_dictionary(docs)
    bows = [to_bow(d, doc) for doc in docs]
    best, scores, models = select_topic_count(bows, [2, 4, 8], seed=0)
    assert best == 2 and set(scores) == {2, 4, 8} and set(models) == {2, 4, 8}
    best, scores, _ = select_topic_count(bows, [5], seed=0)
    assert best == 5 and list(scores) == [5]
    with pytest.raises(TopicError):
        select_topic_count(bows, [])


# -- reports -----------------------------------------------------------------------------

def test_top_terms_report():
    d, bows, truth, m = fit_two_topic(2)
    rep = top_terms(m, d, n=10, coherence_by_k={2: -1.0})
    assert sum(t.prevalence for t in rep.topics) == pytest.approx(1.0, abs=1e-9)
    tops = [{w for w, _ in t.terms} for t in rep.topics]
    assert sorted(matched_overlap(tops, truth)) == [10, 10] or min(matched_overlap(tops, truth)) >= 8
    for t in rep.topics:
        probs = [p for _, p in t.terms]
        assert probs == sorted(probs, reverse=True)
    one = top_terms(m, d, n=1)
    phi = m.topic_term_distribution()
    assert [t.terms[0][0] for t in one.topics] == [d.id2token[int(np.argmax(phi[k]))] for k in range(2)]
    doc = rep.to_json()
    assert set(doc) == {"chosen_k", "coherence_by_k", "topics", "corpus_top_terms"}
    assert doc["coherence_by_k"] == {"2": -1.0}
    assert rep.to_text().splitlines()[-1].startswith("All")


def test_top_terms_clamps_and_defaults():
    d, bows, _, m = fit_two_topic(0, iterations=20, burn_in=5)
    with pytest.warns(UserWarning, match="clamped"):
        rep = top_terms(m, d, n=100)
    assert all(len(t.terms) == len(d) for t in rep.topics)
    with pytest.warns(UserWarning):
        rep = top_terms(m, d)
    assert len(rep.topics[0].terms) == len(d) == 20
    with pytest.raises(TopicError):
        top_terms(m, d, n=0)


def _dataset(labels):
    return Dataset(tuple(LabeledTweet(Tweet(f"t{i}", f"text {i}", "2021-01-01T00:00:00Z"), lab)
                         for i, lab in enumerate(labels)), name="test")


def test_misclassified():
    gold = [POS, POS, NEG, NEG, NEU, NEU]
    pred = [POS, POS, NEG, NEU, NEU, NEU]
    ds = _dataset(gold)
    out = misclassified(ds, pred)
    assert len(out.records) == 1 and out.records[0].tweet.id == "t3" and out.records[0].label == NEG
    assert misclassified(ds, gold).records == ()
    wrong = [NEU, NEU, POS, POS, POS, POS]
    assert misclassified(ds, wrong).records == ds.records
    with pytest.raises(TopicError):
        misclassified(ds, pred[:-1])

"""Topic modelling of tweet subsets."""
from .lda import (
    DEFAULT_TOP_N,
    Coherence,
    Dictionary,
    LdaModel,
    TopicError,
    TopicReport,
    TopicSummary,
    build_dictionary,
    coherence_umass,
    lda_gibbs,
    misclassified,
    select_topic_count,
    to_bow,
    top_terms,
    umass_pair,
)
from .phrases import PhraseModel, apply_phrases, detect_phrases
from .prepare import lemmatize, load_lemma_exceptions, load_stopwords, prepare_for_lda

__all__ = [
    "DEFAULT_TOP_N", "Coherence", "Dictionary", "LdaModel", "PhraseModel", "TopicError", "TopicReport",
    "TopicSummary", "apply_phrases", "build_dictionary", "coherence_umass", "detect_phrases", "lda_gibbs",
    "lemmatize", "load_lemma_exceptions", "load_stopwords", "misclassified", "prepare_for_lda",
    "select_topic_count", "to_bow", "top_terms", "umass_pair",
]

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vaxsent.corpus import SentimentLabel
from vaxsent.svm import KernelSpec, SvmHyperParams
from vaxsent.tune import (
    Categorical,
    Continuous,
    Integer,
    SearchSpace,
    Trial,
    TrialLedger,
    TuneError,
    best_trial,
    cross_val_f1,
    params_to_hyperparams,
    random_search,
    smbo_search,
    stratified_folds,
    svm_default_space,
)
from vaxsent.tune import _split

GAMMA_BOWL = lambda p: -(math.log10(p["gamma"]) + 1.0) ** 2  # noqa: E731


def test_default_space_covers_both_tables():
    space = svm_default_space()
    assert space.contains({"kernel": "rbf", "gamma": 0.1, "C": 4.0})
    for g in (1e-4, 1e-3):
        for c in (1e-4, 1e-3):
            for k in ("rbf", "linear"):
                assert space.contains({"kernel": k, "gamma": g, "C": c})
    assert space.params["gamma"].scale == space.params["C"].scale == "log10"


def test_space_validation():
    with pytest.raises(TuneError):
        Continuous(1.0, 1.0)
    with pytest.raises(TuneError):
        Continuous(0.0, 1.0, "log10")
    with pytest.raises(TuneError):
        Categorical(())
    with pytest.raises(TuneError):
        Integer(3, 2)


mixed_space = SearchSpace({
    "kernel": Categorical(("rbf", "linear")),
    "gamma": Continuous(1e-4, 1.0, "log10"),
    "x": Continuous(-2.0, 3.0),
    "n": Integer(1, 5),
})


@given(st.integers(0, 2**32))
def test_samples_inside_bounds(seed):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        assert mixed_space.contains(mixed_space.sample(rng))


def test_log_sampling_is_uniform_in_log_domain():
    rng = np.random.default_rng(0)
    space = SearchSpace({"g": Continuous(1e-4, 1.0, "log10")})
    logs = np.array([math.log10(space.sample(rng)["g"]) for _ in range(4000)])
    assert abs(np.mean(logs) + 2.0) < 0.05
    assert abs(np.mean(logs < -3) - 0.25) < 0.03


def test_budget_one_is_the_seeded_sample():
    trials = random_search(mixed_space, lambda p: 0.0, 1, seed=5)
    assert len(trials) == 1
    assert trials[0].params == mixed_space.sample(np.random.default_rng(5))


def test_random_search_deterministic():
    a = random_search(mixed_space, lambda p: p["x"], 10, seed=3)
    b = random_search(mixed_space, lambda p: p["x"], 10, seed=3)
    assert [(t.params, t.score) for t in a] == [(t.params, t.score) for t in b]


def test_random_search_finds_gamma_bowl():
    hits = 0
    for seed in range(10):
        best = best_trial(random_search(svm_default_space(), GAMMA_BOWL, 50, seed))
        hits += 0.01 <= best.params["gamma"] <= 1.0
    assert hits >= 9


def test_budget_validation():
    with pytest.raises(TuneError):
        random_search(mixed_space, lambda p: 0.0, 0, seed=0)
    with pytest.raises(TuneError):
        smbo_search(mixed_space, lambda p: 0.0, 5, seed=0, init=1)
    with pytest.raises(TuneError):
        smbo_search(mixed_space, lambda p: 0.0, 5, seed=0, init=6)


def test_smbo_with_budget_equal_init_is_random_search():
    a = random_search(mixed_space, lambda p: p["x"], 8, seed=2)
    b = smbo_search(mixed_space, lambda p: p["x"], 8, seed=2, init=8)
    assert [t.params for t in a] == [t.params for t in b]


@given(st.integers(0, 2**32), st.integers(2, 6), st.integers(0, 6))
def test_smbo_prefix_matches_random(seed, init, extra):
    objective = lambda p: -abs(p["x"] - 0.5) + (p["kernel"] == "rbf")  # noqa: E731
    a = random_search(mixed_space, objective, init, seed)
    b = smbo_search(mixed_space, objective, init + extra, seed, init=init)
    assert [t.params for t in b[:init]] == [t.params for t in a]
    assert len(b) == init + extra
    assert all(mixed_space.contains(t.params) for t in b)


def test_smbo_beats_random_on_unimodal_objective():
    space = SearchSpace({"x": Continuous(-5.0, 5.0)})
    objective = lambda p: -(p["x"] - 1.3) ** 2  # noqa: E731
    smbo = [max(t.score for t in smbo_search(space, objective, 40, s, init=8)) for s in range(20)]
    rand = [max(t.score for t in random_search(space, objective, 40, s)) for s in range(20)]
    assert np.mean(smbo) >= np.mean(rand)


def test_smbo_prefers_the_better_category():
    space = SearchSpace({"c": Categorical(("a", "b"))})
    shares = []
    for seed in range(10):
        trials = smbo_search(space, lambda p: 1.0 if p["c"] == "a" else 0.0, 30, seed, init=8)
        shares.append(np.mean([t.params["c"] == "a" for t in trials[8:]]))
    assert np.mean(shares) >= 0.8


def test_failed_objective_recorded_and_search_continues():
    def objective(p):
        if p["x"] > 1.0:
            raise RuntimeError("boom")
        return p["x"]

    for search in (lambda: random_search(mixed_space, objective, 15, 0),
                   lambda: smbo_search(mixed_space, objective, 15, 0, init=5)):
        trials = search()
        assert len(trials) == 15
        failed = [t for t in trials if t.status == "failed"]
        assert failed and all(t.score == -math.inf and "boom" in t.error for t in failed)
        assert best_trial(trials).status == "ok"


def test_failed_trials_never_good():
    trials = [Trial({"x": 0.0}, -math.inf, 0, status="failed"), Trial({"x": 1.0}, 0.2, 0),
              Trial({"x": 2.0}, -math.inf, 0, status="failed")]
    good, bad = _split(trials)
    assert [t.params["x"] for t in good] == [1.0]
    assert len(bad) == 2


def test_nan_objective_counts_as_failure():
    trials = random_search(mixed_space, lambda p: float("nan"), 3, 0)
    assert all(t.status == "failed" for t in trials)
    with pytest.raises(TuneError):
        best_trial(trials)


def test_ledger_round_trip_and_resume(tmp_path):
    path = tmp_path / "trials.jsonl"
    objective = lambda p: -abs(p["x"])  # noqa: E731
    first = smbo_search(mixed_space, objective, 7, seed=4, init=4, ledger=TrialLedger(path))
    history = TrialLedger(path).read()
    assert [t.params for t in history] == [t.params for t in first]
    calls = []

    def counting(p):
        calls.append(p)
        return objective(p)

    resumed = smbo_search(mixed_space, counting, 12, seed=4, init=4, history=history, ledger=TrialLedger(path))
    straight = smbo_search(mixed_space, objective, 12, seed=4, init=4)
    assert [t.params for t in resumed] == [t.params for t in straight]
    assert len(calls) == 5
    assert len(TrialLedger(path).read()) == 12


def test_ledger_mismatch_detected(tmp_path):
    history = [Trial({"x": 9.0, "kernel": "rbf", "gamma": 0.1, "n": 1}, 0.0, 0)]
    with pytest.raises(TuneError, match="does not match"):
        random_search(mixed_space, lambda p: 0.0, 3, seed=0, history=history)


def test_ledger_rejects_garbage(tmp_path):
    p = tmp_path / "t.jsonl"
    p.write_text('{"params": {}, "score": 1, "seed": 0}\nnot json\n')
    with pytest.raises(TuneError, match=":2:"):
        TrialLedger(p).read()


def test_failed_trial_json_uses_null_score(tmp_path):
    t = Trial({"x": 1}, -math.inf, 0, 1.0, "failed", "err")
    doc = t.to_json()
    assert doc["score"] is None
    assert Trial.from_json(doc).score == -math.inf


def test_params_to_hyperparams():
    hp = params_to_hyperparams({"kernel": "rbf", "gamma": 0.1, "C": 4.0})
    assert hp == SvmHyperParams(C=4.0, kernel=KernelSpec("rbf", 0.1))
    assert params_to_hyperparams({"kernel": "linear", "gamma": 0.1, "C": 1.0}).kernel.gamma is None


# -- cross-validation -------------------------------------------------------------------

def _labels(n_per_class):
    return [SentimentLabel(i % 3) for i in range(3 * n_per_class)]


@given(st.lists(st.integers(2, 12), min_size=2, max_size=3), st.integers(2, 4), st.integers(0, 1000))
def test_folds_partition_and_stratify(sizes, k, seed):
    labels = [SentimentLabel(c) for c, n in enumerate(sizes) for _ in range(n)]
    if min(sizes) < k:
        with pytest.raises(TuneError):
            stratified_folds(labels, k, seed)
        return
    folds = stratified_folds(labels, k, seed)
    allidx = np.concatenate(folds)
    assert sorted(allidx.tolist()) == list(range(len(labels)))
    for c, n in enumerate(sizes):
        per = [sum(1 for i in f if labels[i] == c) for f in folds]
        assert max(per) - min(per) <= 1


def test_cross_val_separable_is_perfect():
    cues = {0: "bad", 1: "meh", 2: "good"}
    labels = _labels(10)
    docs = [[cues[int(l)], "the", "vaccine"] for l in labels]
    assert cross_val_f1(docs, labels, SvmHyperParams(), k=5, seed=0) == 1.0
    assert cross_val_f1(docs, labels, SvmHyperParams(C=1.0, kernel=KernelSpec("linear")), k=3, seed=1) == 1.0


def test_cross_val_shuffled_labels_near_chance():
    scores = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        vocab = [f"w{i}" for i in range(40)]
        docs = [[vocab[j] for j in rng.integers(0, 40, 8)] for _ in range(150)]
        labels = _labels(50)
        labels = [labels[i] for i in rng.permutation(150)]
        scores.append(cross_val_f1(docs, labels, SvmHyperParams(), k=5, seed=seed))
    assert abs(np.mean(scores) - 1 / 3) <= 0.1


def test_cross_val_k_too_large():
    labels = _labels(3)
    with pytest.raises(TuneError, match="fewer than k"):
        cross_val_f1([["a"]] * 9, labels, SvmHyperParams(), k=4)
    with pytest.raises(TuneError):
        cross_val_f1([["a"]] * 9, labels, SvmHyperParams(), k=1)

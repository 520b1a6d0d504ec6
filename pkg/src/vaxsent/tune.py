"""Random and tree-structured Parzen hyperparameter search over declared spaces."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import ndtr

from .corpus import SentimentLabel
from .evaluation import weighted_f1
from .svm import KernelSpec, SvmHyperParams, train_multiclass
from .vectorize import build_vocabulary, stack, tfidf_fit


class TuneError(ValueError):
    pass


@dataclass(frozen=True)
class Categorical:
    choices: tuple

    def __post_init__(self):
        if not self.choices:
            raise TuneError("categorical choices must be non-empty")
        object.__setattr__(self, "choices", tuple(self.choices))

    def sample(self, rng: np.random.Generator):
        return self.choices[int(rng.integers(len(self.choices)))]

    def contains(self, v) -> bool:
        return v in self.choices


@dataclass(frozen=True)
class Continuous:
    lo: float
    hi: float
    scale: str = "linear"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise TuneError("continuous range needs lo < hi")
        if self.scale not in ("linear", "log10"):
            raise TuneError(f"unknown scale {self.scale!r}")
        if self.scale == "log10" and self.lo <= 0:
            raise TuneError("log10 scale needs a positive lower bound")

    # internal coordinates: log10(value) for log-scaled ranges
    @property
    def bounds(self) -> tuple[float, float]:
        if self.scale == "log10":
            return math.log10(self.lo), math.log10(self.hi)
        return self.lo, self.hi

    def to_internal(self, v: float) -> float:
        return math.log10(v) if self.scale == "log10" else float(v)

    def from_internal(self, u: float) -> float:
        lo, hi = self.bounds
        u = min(max(u, lo), hi)
        v = 10.0 ** u if self.scale == "log10" else u
        return min(max(v, self.lo), self.hi)

    def sample(self, rng: np.random.Generator) -> float:
        lo, hi = self.bounds
        return self.from_internal(rng.uniform(lo, hi))

    def contains(self, v) -> bool:
        return self.lo <= v <= self.hi


@dataclass(frozen=True)
class Integer:
    lo: int
    hi: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise TuneError("integer range needs lo < hi")

    @property
    def bounds(self) -> tuple[float, float]:
        return self.lo - 0.5, self.hi + 0.5

    def to_internal(self, v) -> float:
        return float(v)

    def from_internal(self, u: float) -> int:
        return int(min(max(round(u), self.lo), self.hi))

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.lo, self.hi + 1))

    def contains(self, v) -> bool:
        return self.lo <= v <= self.hi and int(v) == v


ParamSpec = Categorical | Continuous | Integer


@dataclass(frozen=True)
class SearchSpace:
    params: Mapping[str, ParamSpec]

    def sample(self, rng: np.random.Generator) -> dict:
        return {name: spec.sample(rng) for name, spec in self.params.items()}

    def contains(self, params: Mapping) -> bool:
        return set(params) == set(self.params) and all(
            spec.contains(params[name]) for name, spec in self.params.items())


def svm_default_space() -> SearchSpace:
    """Kernel choice plus log-scaled gamma and C ranges wide enough to hold the usual optimum."""
    return SearchSpace({
        "kernel": Categorical(("rbf", "linear")),
        "gamma": Continuous(1e-4, 1.0, "log10"),
        "C": Continuous(1e-4, 10.0, "log10"),
    })


def params_to_hyperparams(params: Mapping, **extra) -> SvmHyperParams:
    kind = params.get("kernel", "rbf")
    kernel = KernelSpec(kind, float(params["gamma"]) if kind == "rbf" else None)
    return SvmHyperParams(C=float(params["C"]), kernel=kernel, **extra)


@dataclass
class Trial:
    params: dict
    score: float
    seed: int
    duration_ms: float = 0.0
    status: str = "ok"
    error: str | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        if d["error"] is None:
            del d["error"]
        if not math.isfinite(d["score"]):
            d["score"] = None
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Trial":
        score = d.get("score")
        return cls(dict(d["params"]), -math.inf if score is None else float(score), int(d["seed"]),
                   float(d.get("duration_ms", 0.0)), d.get("status", "ok"), d.get("error"))


class TrialLedger:
    """Append-only JSONL record of trials."""

    def __init__(self, path):
        self.path = Path(path)

    def append(self, trial: Trial) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(trial.to_json(), sort_keys=True) + "\n")

    def read(self) -> list[Trial]:
        if not self.path.exists():
            return []
        trials = []
        for lineno, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), start=1):
            if line.strip():
                try:
                    trials.append(Trial.from_json(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise TuneError(f"{self.path}:{lineno}: bad trial record ({exc})") from None
        return trials


Objective = Callable[[dict], float]


class _Runner:
    """Evaluates (or replays) trials in order and keeps the history."""

    def __init__(self, objective: Objective, seed: int, history: Sequence[Trial] | None,
                 ledger: TrialLedger | None):
        self.objective = objective
        self.seed = seed
        self.replay = list(history or [])
        self.ledger = ledger
        self.trials: list[Trial] = []

    def run(self, params: dict) -> Trial:
        n = len(self.trials)
        if n < len(self.replay):
            trial = self.replay[n]
            if trial.params != params:
                raise TuneError(f"resumed trial {n} does not match the search: {trial.params} != {params}")
        else:
            start = time.perf_counter()
            try:
                score = float(self.objective(dict(params)))
                if math.isnan(score):
                    raise TuneError("objective returned NaN")
                trial = Trial(dict(params), score, self.seed)
            except Exception as exc:  # a failed objective is recorded, the search goes on
                trial = Trial(dict(params), -math.inf, self.seed, status="failed", error=repr(exc))
            trial.duration_ms = (time.perf_counter() - start) * 1000.0
            if self.ledger is not None:
                self.ledger.append(trial)
        self.trials.append(trial)
        return trial


def random_search(space: SearchSpace, objective: Objective, budget: int, seed: int,
                  history: Sequence[Trial] | None = None, ledger: TrialLedger | None = None) -> list[Trial]:
    if budget < 1:
        raise TuneError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    runner = _Runner(objective, seed, history, ledger)
    for _ in range(budget):
        runner.run(space.sample(rng))
    return runner.trials


# -- tree-structured Parzen estimator ---------------------------------------

def _split(trials: Sequence[Trial]) -> tuple[list[Trial], list[Trial]]:
    """Upper half of the finite scores is "good"; failures are always "bad"."""
    ok = [t for t in trials if math.isfinite(t.score)]
    ranked = sorted(range(len(ok)), key=lambda i: (-ok[i].score, i))
    n_good = max(1, len(ok) // 2) if ok else 0
    good_ids = set(ranked[:n_good])
    good = [ok[i] for i in sorted(good_ids)]
    bad = [ok[i] for i in range(len(ok)) if i not in good_ids]
    bad += [t for t in trials if not math.isfinite(t.score)]
    return good, bad


class _Parzen1D:
    """Truncated-Gaussian mixture on a bounded interval with a uniform prior component."""

    def __init__(self, points: Sequence[float], lo: float, hi: float):
        self.lo, self.hi = lo, hi
        width = hi - lo
        pts = np.sort(np.asarray(points, dtype=float))
        self.mu = pts
        if pts.size:
            ext = np.concatenate(([lo], pts, [hi]))
            gaps = np.maximum(pts - ext[:-2], ext[2:] - pts)
            self.sigma = np.clip(gaps, width / min(100.0, 1.0 + pts.size), width)
        else:
            self.sigma = np.empty(0)
        # prior weight equals one kernel's weight
        self.w_prior = 1.0 / (pts.size + 1)
        self.w = np.full(pts.size, 1.0 / (pts.size + 1))
        self.mass = ndtr((hi - self.mu) / self.sigma) - ndtr((lo - self.mu) / self.sigma) if pts.size else None

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        out = np.empty(n)
        for k in range(n):
            c = int(rng.integers(self.mu.size + 1))
            if c == self.mu.size:
                out[k] = rng.uniform(self.lo, self.hi)
                continue
            while True:
                v = rng.normal(self.mu[c], self.sigma[c])
                if self.lo <= v <= self.hi:
                    out[k] = v
                    break
        return out

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        dens = np.full(x.shape, self.w_prior / (self.hi - self.lo))
        if self.mu.size:
            z = (x[:, None] - self.mu[None, :]) / self.sigma[None, :]
            comp = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi) * self.mass)
            dens = dens + comp @ self.w
        return np.log(dens)


def _categorical_probs(values, choices) -> np.ndarray:
    counts = np.array([sum(1 for v in values if v == c) for c in choices], dtype=float)
    return (counts + 1.0) / (counts.sum() + len(choices))


def _tpe_propose(space: SearchSpace, trials: Sequence[Trial], rng: np.random.Generator,
                 n_candidates: int) -> dict:
    good, bad = _split(trials)
    cands = [dict() for _ in range(n_candidates)]
    score = np.zeros(n_candidates)
    for name, spec in space.params.items():
        if isinstance(spec, Categorical):
            pl = _categorical_probs([t.params[name] for t in good], spec.choices)
            pg = _categorical_probs([t.params[name] for t in bad], spec.choices)
            picks = rng.choice(len(spec.choices), size=n_candidates, p=pl)
            for c, k in zip(cands, picks):
                c[name] = spec.choices[int(k)]
            score += np.log(pl[picks]) - np.log(pg[picks])
        else:
            lo, hi = spec.bounds
            l = _Parzen1D([spec.to_internal(t.params[name]) for t in good], lo, hi)
            g = _Parzen1D([spec.to_internal(t.params[name]) for t in bad], lo, hi)
            xs = l.sample(rng, n_candidates)
            for c, u in zip(cands, xs):
                c[name] = spec.from_internal(float(u))
            internal = np.array([spec.to_internal(c[name]) for c in cands])
            score += l.logpdf(internal) - g.logpdf(internal)
    return cands[int(np.argmax(score))]


def smbo_search(space: SearchSpace, objective: Objective, budget: int, seed: int, init: int = 8,
                n_candidates: int = 24, history: Sequence[Trial] | None = None,
                ledger: TrialLedger | None = None) -> list[Trial]:
    """Sequential model-based search: ``init`` random trials, then the candidate
    (out of ``n_candidates`` drawn from the good-trial density) with the
    largest good/bad density ratio.
    """
    if init < 2:
        raise TuneError("init must be >= 2")
    if budget < init:
        raise TuneError("budget must be >= init")
    rng = np.random.default_rng(seed)
    runner = _Runner(objective, seed, history, ledger)
    for _ in range(init):
        runner.run(space.sample(rng))
    for _ in range(budget - init):
        runner.run(_tpe_propose(space, runner.trials, rng, n_candidates))
    return runner.trials


def best_trial(trials: Sequence[Trial]) -> Trial:
    ok = [t for t in trials if math.isfinite(t.score)]
    if not ok:
        raise TuneError("no successful trial")
    return max(ok, key=lambda t: t.score)  # first of equal scores wins


# -- cross-validated objective ----------------------------------------------

def stratified_folds(labels: Sequence[SentimentLabel], k: int, seed: int) -> list[np.ndarray]:
    """Test-index arrays of ``k`` folds; each class is dealt round-robin after a seeded shuffle."""
    if k < 2:
        raise TuneError("need at least 2 folds")
    labels = [int(l) for l in labels]
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in sorted(set(labels)):
        members = np.array([i for i, l in enumerate(labels) if l == cls])
        if members.size < k:
            raise TuneError(f"class {SentimentLabel(cls).text} has {members.size} records, fewer than k={k}")
        members = members[rng.permutation(members.size)]
        for pos, idx in enumerate(members):
            folds[(pos + offset) % k].append(int(idx))
        offset += members.size
    return [np.array(sorted(f)) for f in folds]


def cross_val_f1(docs: Sequence[Sequence[str]], labels: Sequence[SentimentLabel], hp: SvmHyperParams,
                 k: int = 5, seed: int = 0, max_features: int = 5000, l2_normalize: bool = True) -> float:
    """Mean weighted F1 over stratified folds; the vectorizer is refit on every fold's training part."""
    if len(docs) != len(labels):
        raise TuneError("docs and labels differ in length")
    labels = [SentimentLabel(l) for l in labels]
    folds = stratified_folds(labels, k, seed)
    scores = []
    for n, test_idx in enumerate(folds):
        test_set = set(test_idx.tolist())
        train_idx = [i for i in range(len(docs)) if i not in test_set]
        train_docs = [docs[i] for i in train_idx]
        vocab = build_vocabulary(train_docs, max_features)
        model_tfidf = tfidf_fit(train_docs, vocab, l2_normalize)
        x_train = stack(model_tfidf.transform_many(train_docs), model_tfidf.dimension)
        x_test = stack(model_tfidf.transform_many(docs[i] for i in test_idx), model_tfidf.dimension)
        model = train_multiclass(x_train, [labels[i] for i in train_idx], hp, seed=seed + 101 * n)
        scores.append(weighted_f1([labels[i] for i in test_idx], model.predict_many(x_test)))
    return float(np.mean(scores))


def svm_objective(docs, labels, k: int = 5, seed: int = 0, max_features: int = 5000,
                  l2_normalize: bool = True, **hp_extra) -> Objective:
    def objective(params: dict) -> float:
        hp = params_to_hyperparams(params, **hp_extra)
        return cross_val_f1(docs, labels, hp, k, seed, max_features, l2_normalize)
    return objective

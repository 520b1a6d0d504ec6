"""Config-driven end-to-end run: ingest through topic reports, with a reproducibility manifest."""
from __future__ import annotations

import configparser
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .corpus import Dataset, SplitSpec, class_distribution, dedupe, load_corpus, stratified_split, write_corpus
from .demo import bundled_demo_path
from .evaluation import classification_report, confusion_matrix
from .normalize import LexiconSet, NormalizationMode, bundled_lexicon_paths, load_lexicons, normalize
from .svm import KernelSpec, SvmHyperParams, SvmModel, train_multiclass
from .topics import (
    apply_phrases,
    build_dictionary,
    detect_phrases,
    misclassified,
    prepare_for_lda,
    select_topic_count,
    to_bow,
    top_terms,
)
from .tune import TrialLedger, best_trial, params_to_hyperparams, random_search, smbo_search, svm_default_space, svm_objective
from .vectorize import TfIdfModel, build_vocabulary, stack, tfidf_fit

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_STAGE_FAILED = 3

STAGES = ("ingest", "dedupe", "normalize", "split", "vectorize", "train", "evaluate", "topics")
MANIFEST = "manifest.json"


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class TuneSettings:
    enabled: bool = False
    searcher: str = "smbo"
    budget: int = 50
    init: int = 10
    folds: int = 5
    resume: bool = False


@dataclass(frozen=True)
class LdaSettings:
    source: str = "misclassified"
    min_docs: int = 10
    k_candidates: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8)
    alpha: float | None = None
    beta: float = 0.01
    iterations: int = 200
    burn_in: int = 50
    top_n: int = 30
    coherence_top_n: int = 10
    phrase_min_count: int = 5
    phrase_threshold: float = 10.0
    stopwords: str | None = None
    lemma_rules: str | None = None


@dataclass(frozen=True)
class PipelineConfig:
    data_path: str
    data_format: str | None = None
    dedupe: bool = True
    mode: NormalizationMode = NormalizationMode.LEXICAL
    emoji_lexicon: str | None = None
    slang_lexicon: str | None = None
    contraction_lexicon: str | None = None
    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1
    max_features: int = 5000
    l2_normalize: bool = True
    # "all" fits the vocabulary and idf on every record, leaking test statistics
    fit_on: str = "train"
    svm: SvmHyperParams = field(default_factory=SvmHyperParams)
    tune: TuneSettings = field(default_factory=TuneSettings)
    lda: LdaSettings = field(default_factory=LdaSettings)
    seed: int = 0
    output_dir: str = "vaxsent-out"

    def to_json(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        d["svm"] = {"C": self.svm.C, "kernel": self.svm.kernel.kind, "gamma": self.svm.kernel.gamma,
                    "kkt_tolerance": self.svm.kkt_tolerance, "max_iterations": self.svm.max_iterations}
        d["lda"]["k_candidates"] = list(self.lda.k_candidates)
        return d

    def config_hash(self) -> str:
        # the output location does not change what is computed
        d = self.to_json()
        del d["output_dir"]
        return _sha256(json.dumps(d, sort_keys=True).encode())

    def validate(self) -> None:
        for label, p in (("data path", self.data_path), ("emoji lexicon", self.emoji_lexicon),
                         ("slang lexicon", self.slang_lexicon), ("contraction lexicon", self.contraction_lexicon),
                         ("stopword list", self.lda.stopwords), ("lemma rules", self.lda.lemma_rules)):
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{label} not found: {p}")
        if self.max_features < 1:
            raise ConfigError("max_features must be >= 1")
        if not math.isclose(self.train_frac + self.val_frac + self.test_frac, 1.0, abs_tol=1e-9):
            raise ConfigError("split fractions must sum to 1")
        if self.fit_on not in ("train", "all"):
            raise ConfigError(f"vectorize fit_on must be 'train' or 'all', not {self.fit_on!r}")
        if self.tune.searcher not in ("smbo", "random"):
            raise ConfigError(f"unknown searcher {self.tune.searcher!r}")
        if self.tune.budget < 1 or self.tune.folds < 2:
            raise ConfigError("tune budget must be >= 1 and folds >= 2")
        if self.tune.searcher == "smbo" and self.tune.enabled and not 2 <= self.tune.init <= self.tune.budget:
            raise ConfigError("smbo needs 2 <= init <= budget")
        if self.lda.source not in ("misclassified", "test"):
            raise ConfigError(f"unknown lda source {self.lda.source!r}")
        if not self.lda.k_candidates or min(self.lda.k_candidates) < 2:
            raise ConfigError("lda k_candidates must be integers >= 2")
        if self.lda.iterations <= self.lda.burn_in:
            raise ConfigError("lda iterations must exceed burn_in")


# -- INI loading -------------------------------------------------------------------

_DEFAULT = PipelineConfig(data_path="")


def _getters(cp: configparser.ConfigParser):
    def get(section, key, conv=str, default=None):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key).strip()
        if raw == "":
            return default
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None
    return get


def _bool(raw: str) -> bool:
    v = raw.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.replace(",", " ").split())


def config_from_parser(cp: configparser.ConfigParser, base_dir: Path | None = None) -> PipelineConfig:
    get = _getters(cp)

    def path(section, key):
        p = get(section, key)
        if p is None:
            return None
        p = Path(p).expanduser()
        return str(p if p.is_absolute() or base_dir is None else base_dir / p)

    d, t, l, s = _DEFAULT, TuneSettings(), LdaSettings(), SvmHyperParams()
    try:
        kind = get("svm", "kernel", default=s.kernel.kind)
        gamma = get("svm", "gamma", float, s.kernel.gamma if s.kernel.gamma is not None else 0.1)
        svm = SvmHyperParams(
            C=get("svm", "C", float, s.C),
            kernel=KernelSpec(kind, gamma if kind == "rbf" else None),
            kkt_tolerance=get("svm", "tolerance", float, s.kkt_tolerance),
            max_iterations=get("svm", "max_iterations", int, s.max_iterations),
        )
        mode = NormalizationMode(get("normalize", "mode", default=d.mode.value))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    tune = TuneSettings(
        enabled=get("tune", "enabled", _bool, t.enabled),
        searcher=get("tune", "searcher", default=t.searcher),
        budget=get("tune", "budget", int, t.budget),
        init=get("tune", "init", int, t.init),
        folds=get("tune", "folds", int, t.folds),
        resume=get("tune", "resume", _bool, t.resume),
    )
    lda = LdaSettings(
        source=get("lda", "source", default=l.source),
        min_docs=get("lda", "min_docs", int, l.min_docs),
        k_candidates=get("lda", "k_candidates", _ints, l.k_candidates),
        alpha=get("lda", "alpha", float, l.alpha),
        beta=get("lda", "beta", float, l.beta),
        iterations=get("lda", "iterations", int, l.iterations),
        burn_in=get("lda", "burn_in", int, l.burn_in),
        top_n=get("lda", "top_n", int, l.top_n),
        coherence_top_n=get("lda", "coherence_top_n", int, l.coherence_top_n),
        phrase_min_count=get("lda", "phrase_min_count", int, l.phrase_min_count),
        phrase_threshold=get("lda", "phrase_threshold", float, l.phrase_threshold),
        stopwords=path("lda", "stopwords"),
        lemma_rules=path("lda", "lemma_rules"),
    )
    cfg = PipelineConfig(
        data_path=path("data", "path") or str(bundled_demo_path()),
        data_format=get("data", "format"),
        dedupe=get("data", "dedupe", _bool, d.dedupe),
        mode=mode,
        emoji_lexicon=path("normalize", "emoji"),
        slang_lexicon=path("normalize", "slang"),
        contraction_lexicon=path("normalize", "contractions"),
        train_frac=get("split", "train", float, d.train_frac),
        val_frac=get("split", "val", float, d.val_frac),
        test_frac=get("split", "test", float, d.test_frac),
        max_features=get("vectorize", "max_features", int, d.max_features),
        l2_normalize=get("vectorize", "l2_normalize", _bool, d.l2_normalize),
        fit_on=get("vectorize", "fit_on", default=d.fit_on),
        svm=svm,
        tune=tune,
        lda=lda,
        seed=get("run", "seed", int, d.seed),
        output_dir=path("run", "output") or d.output_dir,
    )
    cfg.validate()
    return cfg


def load_config(path=None, overrides: Mapping[str, str] | None = None) -> PipelineConfig:
    """Read an INI file (``None`` means all defaults); ``overrides`` maps ``section.key`` to a value."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";",))
    cp.optionxform = str  # keep "C" distinct from "c"
    base = None
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        base = path.parent
    for dotted, value in (overrides or {}).items():
        section, sep, key = dotted.partition(".")
        if not sep or not key:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, str(value))
    return config_from_parser(cp, base)


# -- helpers -----------------------------------------------------------------------------

def stage_seed(master: int, index: int) -> int:
    """Per-stage seed: first 32-bit word of ``SeedSequence([master, index])``."""
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _dump_json(obj, path: Path) -> Path:
    path.write_text(json.dumps(obj, indent=1, ensure_ascii=False, sort_keys=False) + "\n", encoding="utf-8")
    return path


def _dump_jsonl(rows, path: Path) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")
    return path


def artifact_digest(path: Path) -> str:
    """sha256 of a file; trial ledgers are hashed without their wall-clock durations."""
    if path.name == "trials.jsonl":
        lines = []
        for line in path.read_text(encoding="utf-8").splitlines():
            rec = json.loads(line)
            rec.pop("duration_ms", None)
            lines.append(json.dumps(rec, sort_keys=True))
        return _sha256("\n".join(lines).encode())
    return _sha256(path.read_bytes())


def lexicons_for(cfg: PipelineConfig) -> LexiconSet:
    emoji, slang, contr = bundled_lexicon_paths()
    return load_lexicons(cfg.emoji_lexicon or emoji, cfg.slang_lexicon or slang, cfg.contraction_lexicon or contr)


# -- the run ----------------------------------------------------------------------------------

@dataclass
class _State:
    raw: Dataset | None = None
    data: Dataset | None = None
    tokens: dict[str, list[str]] = field(default_factory=dict)
    train: Dataset | None = None
    val: Dataset | None = None
    test: Dataset | None = None
    vectorizer: TfIdfModel | None = None
    model: SvmModel | None = None
    test_predictions: list | None = None


@dataclass(frozen=True)
class PipelineResult:
    exit_code: int
    manifest_path: Path
    manifest: dict


class _Pipeline:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.lex = lexicons_for(cfg)
        self.state = _State()

    def _docs(self, d: Dataset) -> list[list[str]]:
        return [self.state.tokens[r.id] for r in d.records]

    def _matrix(self, d: Dataset):
        return stack(self.state.vectorizer.transform_many(self._docs(d)), self.state.vectorizer.dimension)

    def ingest(self, seed: int) -> list[Path]:
        self.state.raw = load_corpus(self.cfg.data_path, self.cfg.data_format)
        dist = class_distribution(self.state.raw)
        summary = {"records": len(self.state.raw.records), "source": Path(self.cfg.data_path).name,
                   "class_counts": {k.text: v for k, v in dist.counts.items()}}
        return [_dump_json(summary, self.out / "ingest.json")]

    def dedupe(self, seed: int) -> list[Path]:
        self.state.data = dedupe(self.state.raw) if self.cfg.dedupe else self.state.raw
        return [write_corpus(self.state.data, self.out / "corpus.jsonl")]

    def normalize(self, seed: int) -> list[Path]:
        rows = []
        for rec in self.state.data.records:
            nt = normalize(rec.text, self.cfg.mode, self.lex)
            self.state.tokens[rec.id] = list(nt.tokens)
            rows.append({"id": rec.id, "text": nt.text, "tokens": list(nt.tokens)})
        return [_dump_jsonl(rows, self.out / "normalized.jsonl")]

    def split(self, seed: int) -> list[Path]:
        spec = SplitSpec(self.cfg.train_frac, self.cfg.val_frac, self.cfg.test_frac, seed)
        self.state.train, self.state.val, self.state.test = stratified_split(self.state.data, spec)
        doc = {name: [r.id for r in d.records]
               for name, d in (("train", self.state.train), ("val", self.state.val), ("test", self.state.test))}
        return [_dump_json(doc, self.out / "split.json")]

    def vectorize(self, seed: int) -> list[Path]:
        fit_docs = self._docs(self.state.train if self.cfg.fit_on == "train" else self.state.data)
        vocab = build_vocabulary(fit_docs, self.cfg.max_features)
        self.state.vectorizer = tfidf_fit(fit_docs, vocab, self.cfg.l2_normalize)
        return [self.state.vectorizer.save(self.out / "vectorizer.json")]

    def train(self, seed: int) -> list[Path]:
        hp = self.cfg.svm
        outputs = []
        if self.cfg.tune.enabled:
            hp, paths = self._tune(seed)
            outputs += paths
        self.state.model = train_multiclass(self._matrix(self.state.train), self.state.train.labels, hp, seed)
        outputs.append(self.state.model.save(self.out / "model.json"))
        return outputs

    def _tune(self, seed: int):
        t = self.cfg.tune
        ledger_path = self.out / "trials.jsonl"
        history = TrialLedger(ledger_path).read() if t.resume else []
        if not t.resume and ledger_path.exists():
            ledger_path.unlink()
        objective = svm_objective(self._docs(self.state.train), self.state.train.labels, k=t.folds, seed=seed,
                                  max_features=self.cfg.max_features, l2_normalize=self.cfg.l2_normalize,
                                  kkt_tolerance=self.cfg.svm.kkt_tolerance,
                                  max_iterations=self.cfg.svm.max_iterations)
        # a resumed ledger is already on disk; only new trials are appended
        ledger = TrialLedger(ledger_path)
        space = svm_default_space()
        if t.searcher == "smbo":
            trials = smbo_search(space, objective, t.budget, seed, init=t.init, history=history, ledger=ledger)
        else:
            trials = random_search(space, objective, t.budget, seed, history=history, ledger=ledger)
        best = best_trial(trials)
        summary = {"searcher": t.searcher, "budget": t.budget, "folds": t.folds,
                   "best": {"params": best.params, "score": best.score},
                   "failed_trials": sum(1 for x in trials if x.status != "ok")}
        hp = params_to_hyperparams(best.params, kkt_tolerance=self.cfg.svm.kkt_tolerance,
                                   max_iterations=self.cfg.svm.max_iterations)
        return hp, [ledger_path, _dump_json(summary, self.out / "tune.json")]

    def evaluate(self, seed: int) -> list[Path]:
        outputs = []
        for name, d in (("val", self.state.val), ("test", self.state.test)):
            pred = self.state.model.predict_many(self._matrix(d))
            report = classification_report(confusion_matrix(d.labels, pred))
            outputs.append(_dump_json(report.to_json(), self.out / f"report_{name}.json"))
            if name == "test":
                self.state.test_predictions = pred
                outputs.append(self.out / "report_test.txt")
                outputs[-1].write_text(report.to_text(f"test split, {self.cfg.mode.value} normalization"),
                                       encoding="utf-8")
                rows = [{"id": r.id, "gold": r.label.text, "pred": p.text} for r, p in zip(d.records, pred)]
                outputs.append(_dump_jsonl(rows, self.out / "predictions.jsonl"))
        return outputs

    def topics(self, seed: int) -> list[Path]:
        l = self.cfg.lda
        wrong = misclassified(self.state.test, self.state.test_predictions)
        outputs = [write_corpus(wrong, self.out / "misclassified.jsonl")]
        source, subset = "misclassified", wrong
        if l.source == "test" or len(wrong.records) < l.min_docs:
            source, subset = "test", self.state.test
        docs = prepare_for_lda(subset.texts, l.stopwords, l.lemma_rules)
        phrases = detect_phrases(docs, l.phrase_min_count, l.phrase_threshold)
        docs = apply_phrases(phrases, docs)
        dictionary = build_dictionary(docs)
        bows = [to_bow(dictionary, d) for d in docs]
        coh_n = min(l.coherence_top_n, len(dictionary))
        best, scores, models = select_topic_count(
            bows, l.k_candidates, top_n=max(coh_n, 2), alpha=l.alpha, beta=l.beta, iterations=l.iterations,
            burn_in=l.burn_in, seed=seed, vocabulary_size=len(dictionary))
        report = top_terms(models[best], dictionary, min(l.top_n, len(dictionary)), scores)
        doc = {"source": source, "documents": len(docs), "misclassified": len(wrong.records), **report.to_json()}
        outputs.append(_dump_json(doc, self.out / "topics.json"))
        outputs.append(self.out / "topics.txt")
        outputs[-1].write_text(report.to_text(), encoding="utf-8")
        return outputs


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """Run every stage in order; the first failure stops the run and marks the manifest FAILED."""
    cfg.validate()
    pipe = _Pipeline(cfg)
    pipe.out.mkdir(parents=True, exist_ok=True)
    manifest = {"config_hash": cfg.config_hash(), "master_seed": cfg.seed, "status": "OK", "stages": []}
    _dump_json(cfg.to_json() | {"output_dir": "."}, pipe.out / "config.json")
    exit_code = EXIT_OK
    for index, name in enumerate(STAGES):
        seed = stage_seed(cfg.seed, index)
        entry = {"name": name, "status": "OK", "seed": seed, "output_paths": [], "sha256": {}}
        log.info("stage %s (seed %d)", name, seed)
        try:
            paths = getattr(pipe, name)(seed)
        except Exception as exc:
            entry["status"] = "FAILED"
            entry["error"] = f"{type(exc).__name__}: {exc}"
            manifest["status"] = "FAILED"
            manifest["failed_stage"] = name
            manifest["stages"].append(entry)
            log.error("stage %s failed: %s", name, exc)
            exit_code = EXIT_STAGE_FAILED
            break
        for p in paths:
            rel = str(p.relative_to(pipe.out))
            entry["output_paths"].append(rel)
            entry["sha256"][rel] = artifact_digest(p)
        manifest["stages"].append(entry)
    path = _dump_json(manifest, pipe.out / MANIFEST)
    return PipelineResult(exit_code, path, manifest)

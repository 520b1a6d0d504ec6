"""Command-line entry point: ``vaxsent <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import corpus, demo, evaluation, pipeline, topics, tune
from .corpus import CorpusError, Dataset, LabeledTweet, SplitSpec, Tweet
from .normalize import LexiconError, NormalizationMode, load_lexicons, bundled_lexicon_paths, normalize
from .svm import KernelSpec, SvmError, SvmHyperParams, load_model, train_multiclass
from .vectorize import TfIdfModel, VectorizeError, build_vocabulary, stack, tfidf_fit

EXIT_OK, EXIT_INVALID, EXIT_FAILED = pipeline.EXIT_OK, pipeline.EXIT_INVALID, pipeline.EXIT_STAGE_FAILED

# errors caused by bad input rather than a crash
_INPUT_ERRORS = (CorpusError, LexiconError, VectorizeError, SvmError, evaluation.EvaluationError,
                 tune.TuneError, topics.TopicError, pipeline.ConfigError, FileNotFoundError)


def _read_texts(path: Path) -> Dataset:
    """JSONL/CSV corpora load as usual; any other file is one raw tweet per non-empty line."""
    if path.suffix.lower() in (".jsonl", ".csv"):
        return corpus.load_corpus(path)
    if not path.is_file():
        raise CorpusError(f"no such file: {path}")
    lines = [l for l in path.read_text(encoding="utf-8").splitlines() if l.strip()]
    if not lines:
        raise CorpusError("empty dataset")
    return Dataset(tuple(LabeledTweet(Tweet(str(i + 1), t)) for i, t in enumerate(lines)), name=path.stem)


def _lexicons(args):
    emoji, slang, contr = bundled_lexicon_paths()
    return load_lexicons(args.emoji or emoji, args.slang or slang, args.contractions or contr)


def _tokens(d: Dataset, mode, lex) -> list[list[str]]:
    return [list(normalize(t, mode, lex).tokens) for t in d.texts]


def _emit(obj, out: Path | None) -> None:
    text = json.dumps(obj, indent=1, ensure_ascii=False) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


# -- subcommands --------------------------------------------------------------

def cmd_ingest(args) -> int:
    d = corpus.load_corpus(args.input, args.format)
    before = len(d.records)
    if not args.keep_duplicates:
        d = corpus.dedupe(d)
    corpus.write_corpus(d, args.out)
    dist = corpus.class_distribution(d) if all(r.label is not None for r in d.records) else None
    summary = {"read": before, "written": len(d.records)}
    if dist is not None:
        summary["class_fractions"] = {k.text: round(v, 4) for k, v in dist.fractions.items()}
    print(json.dumps(summary))
    return EXIT_OK


def cmd_normalize(args) -> int:
    d = _read_texts(args.input)
    lex = _lexicons(args)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for rec in d.records:
            nt = normalize(rec.text, args.mode, lex)
            row = {"id": rec.id, "text": nt.text, "tokens": list(nt.tokens)}
            if rec.label is not None:
                row["label"] = rec.label.text
            out.write(json.dumps(row, ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_split(args) -> int:
    d = corpus.load_corpus(args.input)
    parts = corpus.stratified_split(d, SplitSpec(args.train, args.val, args.test, args.seed))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "val", "test"), parts):
        corpus.write_corpus(part, args.out_dir / f"{name}.jsonl")
    print(json.dumps({name: len(p.records) for name, p in zip(("train", "val", "test"), parts)}))
    return EXIT_OK


def _hyperparams(args) -> SvmHyperParams:
    kernel = KernelSpec(args.kernel, args.gamma if args.kernel == "rbf" else None)
    return SvmHyperParams(C=args.C, kernel=kernel, kkt_tolerance=args.tolerance)


def cmd_train(args) -> int:
    d = corpus.load_corpus(args.input)
    labels = d.labels
    lex = _lexicons(args)
    docs = _tokens(d, args.mode, lex)
    vec = tfidf_fit(docs, build_vocabulary(docs, args.max_features))
    model = train_multiclass(stack(vec.transform_many(docs), vec.dimension), labels, _hyperparams(args), args.seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    vec.save(args.out_dir / "vectorizer.json")
    model.save(args.out_dir / "model.json")
    _emit({"mode": NormalizationMode(args.mode).value}, args.out_dir / "meta.json")
    print(f"trained on {len(labels)} records, {vec.dimension} features -> {args.out_dir}")
    return EXIT_OK


def cmd_tune(args) -> int:
    d = corpus.load_corpus(args.input)
    labels = d.labels
    docs = _tokens(d, args.mode, _lexicons(args))
    objective = tune.svm_objective(docs, labels, k=args.folds, seed=args.seed, max_features=args.max_features)
    ledger = tune.TrialLedger(args.ledger)
    history = ledger.read() if args.resume else []
    if not args.resume and args.ledger.exists():
        args.ledger.unlink()
    space = tune.svm_default_space()
    if args.searcher == "smbo":
        trials = tune.smbo_search(space, objective, args.budget, args.seed, init=args.init,
                                  history=history, ledger=ledger)
    else:
        trials = tune.random_search(space, objective, args.budget, args.seed, history=history, ledger=ledger)
    best = tune.best_trial(trials)
    print(json.dumps({"best_params": best.params, "best_score": best.score, "trials": len(trials)}))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    d = corpus.load_corpus(args.input)
    meta_path = args.model_dir / "meta.json"
    mode = args.mode or (json.loads(meta_path.read_text())["mode"] if meta_path.exists() else "lexical")
    vec = TfIdfModel.load(args.model_dir / "vectorizer.json")
    model = load_model(args.model_dir / "model.json")
    docs = _tokens(d, mode, _lexicons(args))
    pred = model.predict_many(stack(vec.transform_many(docs), vec.dimension))
    report = evaluation.classification_report(evaluation.confusion_matrix(d.labels, pred))
    if args.json:
        _emit(report.to_json(), args.out)
    else:
        sys.stdout.write(report.to_text())
        if args.out:
            _emit(report.to_json(), args.out)
    if args.predictions:
        with open(args.predictions, "w", encoding="utf-8") as fh:
            for r, p in zip(d.records, pred):
                fh.write(json.dumps({"id": r.id, "gold": r.label.text, "pred": p.text}) + "\n")
    return EXIT_OK


def cmd_agreement(args) -> int:
    path = None if args.fixture == "table3" else args.fixture
    rep = evaluation.fixture_agreement(args.alt, path)
    print(json.dumps(rep.to_json(), indent=1))
    return EXIT_OK


def cmd_topics(args) -> int:
    d = _read_texts(args.input)
    if args.predictions:
        pred = {}
        for line in Path(args.predictions).read_text(encoding="utf-8").splitlines():
            row = json.loads(line)
            pred[row["id"]] = corpus.SentimentLabel.parse(row["pred"])
        missing = [r.id for r in d.records if r.id not in pred]
        if missing:
            raise CorpusError(f"no prediction for {len(missing)} records, e.g. {missing[0]!r}")
        d = topics.misclassified(d, [pred[r.id] for r in d.records])
    docs = topics.prepare_for_lda(d.texts, args.stopwords, args.lemma_rules)
    docs = topics.apply_phrases(topics.detect_phrases(docs, args.min_count, args.threshold), docs)
    dictionary = topics.build_dictionary(docs)
    bows = [topics.to_bow(dictionary, doc) for doc in docs]
    best, scores, models = topics.select_topic_count(
        bows, args.k, top_n=max(2, min(args.coherence_top_n, len(dictionary))), alpha=args.alpha, beta=args.beta,
        iterations=args.iterations, burn_in=args.burn_in, seed=args.seed, vocabulary_size=len(dictionary))
    report = topics.top_terms(models[best], dictionary, min(args.top_n, len(dictionary)), scores)
    sys.stdout.write(report.to_text())
    if args.out:
        _emit(report.to_json(), args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    overrides = dict(kv.split("=", 1) for kv in args.set)
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if args.output is not None:
        overrides["run.output"] = str(args.output)
    cfg = pipeline.load_config(args.config, overrides)
    result = pipeline.run_pipeline(cfg)
    for st in result.manifest["stages"]:
        print(f"{st['name']:<10} {st['status']}" + (f"  {st['error']}" if "error" in st else ""))
    print(f"manifest: {result.manifest_path}")
    return result.exit_code


def cmd_generate_demo(args) -> int:
    demo.write_demo(args.out, args.n, args.seed, args.cue_rate)
    print(f"wrote {args.n} tweets to {args.out}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def _add_lexicon_args(p):
    p.add_argument("--emoji", type=Path, help="emoji lexicon TSV (default: bundled)")
    p.add_argument("--slang", type=Path, help="slang lexicon TSV (default: bundled)")
    p.add_argument("--contractions", type=Path, help="contraction lexicon TSV (default: bundled)")


def _add_svm_args(p):
    p.add_argument("--kernel", choices=("rbf", "linear"), default="rbf")
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("-C", "--C", dest="C", type=float, default=4.0)
    p.add_argument("--tolerance", type=float, default=1e-3)


def _override(raw: str) -> str:
    if "=" not in raw:
        raise argparse.ArgumentTypeError("expected section.key=value")
    return raw


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vaxsent", description="Tweet sentiment and topic pipeline.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    modes = [m.value for m in NormalizationMode]

    p = sub.add_parser("ingest", help="load a corpus, drop duplicate texts, write JSONL")
    p.add_argument("input", type=Path)
    p.add_argument("--format", choices=("jsonl", "csv"))
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--keep-duplicates", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("normalize", help="normalize tweets (JSONL/CSV, or one tweet per line)")
    p.add_argument("input", type=Path)
    p.add_argument("--mode", choices=modes, default="lexical")
    p.add_argument("--out", type=Path)
    _add_lexicon_args(p)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("split", help="stratified train/val/test split")
    p.add_argument("input", type=Path)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--train", type=float, default=0.8)
    p.add_argument("--val", type=float, default=0.1)
    p.add_argument("--test", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="fit vectorizer and SVM on a labelled corpus")
    p.add_argument("input", type=Path)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--mode", choices=modes, default="lexical")
    p.add_argument("--max-features", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    _add_svm_args(p)
    _add_lexicon_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="search SVM hyperparameters by cross-validated weighted F1")
    p.add_argument("input", type=Path)
    p.add_argument("--ledger", type=Path, default=Path("trials.jsonl"))
    p.add_argument("--resume", action="store_true", help="replay the ledger before continuing")
    p.add_argument("--searcher", choices=("smbo", "random"), default="smbo")
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--init", type=int, default=10)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--mode", choices=modes, default="lexical")
    p.add_argument("--max-features", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    _add_lexicon_args(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="score a trained model on a labelled corpus")
    p.add_argument("input", type=Path)
    p.add_argument("--model-dir", type=Path, required=True)
    p.add_argument("--mode", choices=modes)
    p.add_argument("--out", type=Path, help="write the JSON report here")
    p.add_argument("--json", action="store_true", help="print JSON instead of the text table")
    p.add_argument("--predictions", type=Path)
    _add_lexicon_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("agreement", help="agreement between hand labels and an alternate labeler")
    p.add_argument("--fixture", default="table3", help="'table3' for the bundled fixture, or a TSV path")
    p.add_argument("--alt", default="vader")
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("topics", help="LDA topics of a corpus, or of its misclassified records")
    p.add_argument("input", type=Path)
    p.add_argument("--predictions", type=Path, help="predictions JSONL; keeps only misclassified records")
    p.add_argument("-k", type=int, nargs="+", default=[2, 3, 4, 5, 6, 7, 8])
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--burn-in", type=int, default=50)
    p.add_argument("--top-n", type=int, default=topics.DEFAULT_TOP_N)
    p.add_argument("--coherence-top-n", type=int, default=10)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--threshold", type=float, default=10.0)
    p.add_argument("--stopwords", type=Path)
    p.add_argument("--lemma-rules", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_topics)

    p = sub.add_parser("run", help="run the whole pipeline from an INI config")
    p.add_argument("--config", type=Path)
    p.add_argument("--set", action="append", default=[], type=_override, metavar="SECTION.KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", type=Path)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("generate-demo", help="write the synthetic labelled corpus")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n", type=int, default=demo.DEFAULT_SIZE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cue-rate", type=float, default=demo.DEFAULT_CUE_RATE)
    p.set_defaults(func=cmd_generate_demo)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``adrtag <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 invalid input or configuration,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import importlib.resources as _res
import json
import logging
import sys
from pathlib import Path

from .corpus import compute_stats, filter_discontinuous, load_corpus, read_annotations, write_annotations
from .embeddings import kmeans, save_vectors, train_cbow
from .evaluation import MatchMode, format_report, format_summary, mention_prf
from .exceptions import AdrTagError, ConfigurationError, ValidationError
from .pipeline import PRESETS, RunConfig, TaggingSystem, corpus_sentences, evaluate_predictions, run_pipeline, \
    stage_plan, train_system
from .structure import SplitStrategy, dump_structure, parse_structure, split_document
from .tokenization import tokenize_text

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def bundled_corpus_path() -> Path:
    """Directory of the small annotated fixture corpus shipped with the package."""
    return Path(str(_res.files("adrtag").joinpath("data").joinpath("fixture_corpus")))


# ---------------------------------------------------------------------------
# subcommands


def cmd_parse(args) -> int:
    paths = []
    for p in map(Path, args.paths):
        paths += sorted(p.glob("*.txt")) if p.is_dir() else [p]
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
    for p in paths:
        with open(p, encoding="utf-8", newline="") as fh:
            text = fh.read()
        doc = parse_structure(text)
        if args.units:
            units = split_document(doc, SplitStrategy(args.units))
            body = json.dumps([{"start": u.start, "end": u.end, "kind": u.kind, "text": u.text}
                               for u in units], indent=2, ensure_ascii=False) + "\n"
        else:
            body = dump_structure(doc)
        if args.out:
            (Path(args.out) / f"{p.stem}.json").write_text(body, encoding="utf-8")
        else:
            sys.stdout.write(body)
    return EXIT_OK


def cmd_stats(args) -> int:
    docs = load_corpus(args.corpus)
    docs, dropped = filter_discontinuous(docs)
    stats = compute_stats(docs, tokenize_text)
    sys.stdout.write(f"documents: {len(docs)}  discontinuous dropped: {dropped}\n")
    sys.stdout.write(stats.format_table())
    return EXIT_OK


def cmd_embed(args) -> int:
    docs = load_corpus(args.corpus, require_annotations=False)
    kw = dict(dim=args.dim, window=args.window, negatives=args.negatives, min_count=args.min_count,
              epochs=args.epochs, learning_rate=args.learning_rate)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = train_cbow(corpus_sentences(docs, lemmatize=True), seed=args.seed, **kw)
    save_vectors(target, out / "target.vec")
    clusters = kmeans(target, k=min(args.clusters, len(target)), seed=args.seed)
    clusters.save(out / "clusters.tsv")
    if args.generic:
        generic = train_cbow(corpus_sentences(docs, lemmatize=False), seed=args.seed + 1, **kw)
        save_vectors(generic, out / "generic.vec")
    sys.stdout.write(f"vocabulary {len(target)}, dim {target.dim}, clusters {clusters.k}\n")
    return EXIT_OK


def _config(args, default_preset="run1") -> RunConfig:
    if getattr(args, "config", None):
        cfg = RunConfig.from_ini(args.config)
        if args.preset:
            cfg = RunConfig.from_ini(args.config, RunConfig.from_preset(args.preset))
    else:
        cfg = RunConfig.from_preset(args.preset or default_preset)
    changes = {}
    if getattr(args, "corpus", None):
        changes["corpus"] = Path(args.corpus)
    if getattr(args, "out", None):
        changes["output_dir"] = Path(args.out)
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "jobs", None) is not None:
        changes["jobs"] = args.jobs
    return dataclasses.replace(cfg, **changes)


def cmd_train(args) -> int:
    cfg = _config(args).validate()
    train = filter_discontinuous(load_corpus(cfg.corpus))[0]
    val = filter_discontinuous(load_corpus(args.validation))[0] if args.validation else []
    system = train_system(cfg, train, val)
    system.save(args.out)
    sys.stdout.write(f"trained {', '.join(sorted(system.models))} on {len(train)} documents\n")
    return EXIT_OK


def cmd_tag(args) -> int:
    system = TaggingSystem.load(args.models)
    docs = load_corpus(args.corpus, require_annotations=False)
    predictions = system.tag(docs, args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for doc in predictions:
        write_annotations(out / f"{doc.doc_id}.ann", doc.annotations)
    sys.stdout.write(f"tagged {len(predictions)} documents\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    gold = filter_discontinuous(load_corpus(args.gold))[0]
    pred = []
    for doc in gold:
        ann = Path(args.pred) / f"{doc.doc_id}.ann"
        if not ann.exists():
            raise ValidationError(f"no prediction file for document {doc.doc_id}")
        pred.append(doc.with_annotations(read_annotations(ann, doc.text, doc.doc_id)))
    scores = evaluate_predictions(gold, pred)
    if args.mode != "both":
        g = {d.doc_id: list(d.annotations) for d in gold}
        p = {d.doc_id: list(d.annotations) for d in pred}
        scores = {f"mention-{args.mode}": mention_prf(g, p, MatchMode(args.mode)), "token": scores["token"]}
    sys.stdout.write(format_report(scores))
    if args.summary:
        Path(args.summary).write_text(format_summary(scores), encoding="utf-8")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    if cfg.corpus is None:
        cfg = dataclasses.replace(cfg, corpus=bundled_corpus_path())
    cfg.validate()
    if args.dry_run:
        sys.stdout.write(stage_plan(cfg))
        return EXIT_OK
    if cfg.output_dir is None:
        raise ConfigurationError("no output directory: pass --out or set [output] dir")
    result = run_pipeline(cfg)
    sys.stdout.write(result.report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="adrtag", description="Adverse drug reaction tagging for drug label text.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("parse", help="dump the structural element tree of documents")
    s.add_argument("paths", nargs="+", help="text files or corpus directories")
    s.add_argument("--units", choices=[x.value for x in SplitStrategy],
                   help="emit text units of a splitting strategy instead of the tree")
    s.add_argument("--out", help="write one JSON file per document here")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("stats", help="mention and token counts per entity class")
    s.add_argument("corpus")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("embed", help="train CBOW embeddings and k-means word clusters")
    s.add_argument("corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--dim", type=int, default=200)
    s.add_argument("--window", type=int, default=5)
    s.add_argument("--negatives", type=int, default=5)
    s.add_argument("--min-count", type=int, default=2)
    s.add_argument("--epochs", type=int, default=5)
    s.add_argument("--learning-rate", type=float, default=0.025)
    s.add_argument("--clusters", type=int, default=50)
    s.add_argument("--generic", action="store_true", help="also train a surface-form model")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_embed)

    def run_options(s, out_required):
        s.add_argument("--preset", choices=sorted(PRESETS))
        s.add_argument("--config", help="INI run configuration")
        s.add_argument("--corpus")
        s.add_argument("--out", required=out_required)
        s.add_argument("--seed", type=int)
        s.add_argument("--jobs", type=int)

    s = sub.add_parser("train", help="fit the configured taggers on an annotated corpus")
    run_options(s, True)
    s.add_argument("--validation", help="annotated corpus for early stopping")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("tag", help="annotate documents with a trained system")
    s.add_argument("--models", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_tag)

    s = sub.add_parser("eval", help="score predicted annotations against gold")
    s.add_argument("--gold", required=True)
    s.add_argument("--pred", required=True)
    s.add_argument("--mode", choices=[m.value for m in MatchMode] + ["both"], default="both")
    s.add_argument("--summary", help="write tab-separated scores here")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("run", help="split, train, tag and evaluate end to end")
    run_options(s, False)
    s.add_argument("--dry-run", action="store_true", help="print the resolved stage plan only")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "command", None) == "train" and not (args.corpus or args.config):
        parser.error("train needs --corpus or --config")
    try:
        return args.func(args)
    except (ConfigurationError, ValidationError) as exc:
        print(f"adrtag: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"adrtag: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (AdrTagError, OSError) as exc:
        print(f"adrtag: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Command line interface.

Exit codes: 0 success, 1 runtime failure (one JSON line on stderr), 2 usage.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .corpus import Corpus, ingest_documents
from .evaluation import (agreement, annotation_export, annotation_import, evaluate_run,
                         load_dataset, machine_annotations)
from .pipeline import PRESETS, ConfigurationError, SeekStrategy, write_run, read_answers
from .retrieval import (Bm25Params, HierarchicalRetriever, InvertedIndex, LexicalOverlapScorer,
                        build_index)

logger = logging.getLogger("citerag")


def _path(args, p: str | None) -> Path | None:
    if p is None:
        return None
    q = Path(p)
    return q if q.is_absolute() else Path(args.workdir) / q


def _load_config(args, extra: dict | None = None):
    from .config import RunConfig

    overrides: dict = dict(extra or {})
    pipeline: dict = {}
    if getattr(args, "preset", None):
        pipeline["preset"] = args.preset
    if getattr(args, "strategy", None):
        pipeline["seek_strategy"] = args.strategy
    if getattr(args, "workers", None):
        pipeline["workers"] = args.workers
    if pipeline:
        overrides["pipeline"] = pipeline
    if getattr(args, "transcripts", None):
        overrides.setdefault("llm", {})["transcripts"] = args.transcripts
    if getattr(args, "llm_mode", None):
        overrides.setdefault("llm", {})["mode"] = args.llm_mode
    config_path = _path(args, args.config) if args.config else None
    return RunConfig.load(config_path, overrides, workdir=str(Path(args.workdir).resolve()))


# -------------------------------------------------------------- commands

def cmd_ingest(args) -> dict:
    stats = ingest_documents(_path(args, args.source), _path(args, args.corpus))
    return {"document_count": stats.document_count, "rejected_count": stats.rejected_count,
            "byte_size": stats.byte_size}


def cmd_index(args) -> dict:
    corpus = Corpus(_path(args, args.corpus))
    index = build_index(corpus, include_title=not args.no_title, stem=args.stem)
    index.save(_path(args, args.index))
    return {"documents": index.n_docs, "terms": len(index.vocab), "avgdl": index.avgdl}


def cmd_search(args) -> dict:
    index = InvertedIndex.load(_path(args, args.index))
    params = Bm25Params(args.k1, args.b)
    if args.rerank:
        corpus = Corpus(_path(args, args.corpus))
        retriever = HierarchicalRetriever(index, corpus, LexicalOverlapScorer(index.stem),
                                          max(args.depth, args.n), params, strict=True)
        hits = retriever.retrieve(args.query, args.n)
    else:
        hits = index.search(args.query, args.n, params)
    return {"query": args.query,
            "hits": [{"rank": h.rank, "doc_id": h.doc_id, "score": h.score} for h in hits]}


def cmd_answer(args) -> dict:
    from .config import Services
    from .evaluation.datasets import QAItem
    from .answer import PolarAnswer

    services = Services(_load_config(args))
    result = services.pipeline().run(QAItem("cli", args.question, PolarAnswer.UNKNOWN))
    return result.answer.to_record()


def _dataset(config, args):
    name = getattr(args, "dataset_name", None) or config.dataset.get("name")
    path = getattr(args, "dataset_path", None) or config.dataset.get("path")
    if not name or not path:
        raise ConfigurationError("dataset name and path are required")
    return load_dataset(name, config.path(path))


def cmd_run(args) -> dict:
    from .config import Services

    extra = {}
    if args.out:
        extra["output"] = args.out
    config = _load_config(args, extra)
    items = _dataset(config, args)
    if args.limit:
        items = items[:args.limit]
    services = Services(config)
    pipeline = services.pipeline()
    results, errors = pipeline.run_many(items)
    out = config.path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    snap = config.to_dict()
    snap["dataset"] = {"name": args.dataset_name or config.dataset.get("name"),
                       "path": args.dataset_path or config.dataset.get("path")}
    (out / "config.json").write_text(json.dumps(snap, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    write_run(out, results, errors, pipeline.counters)
    if errors and config.pipeline.fail_fast:
        raise errors[0]
    return {"run_dir": str(out), "answered": sum(r is not None for r in results),
            "failed": len(errors), "counters": dict(sorted(pipeline.counters.items()))}


def cmd_eval(args) -> dict:
    from .config import Services

    run_dir = _path(args, args.run)
    if not args.config:
        args.config = str(run_dir / "config.json")
    extra = {}
    if args.precision_mode:
        extra["evaluation"] = {"precision_mode": args.precision_mode}
    config = _load_config(args, extra)
    items = _dataset(config, args)
    services = Services(config)
    answers = read_answers(run_dir)
    answered = {a.question_id for a in answers}
    items = [i for i in items if i.question_id in answered] if args.answered_only else items
    report = evaluate_run(answers, items, services.judge, services.corpus,
                          config=config.reproducibility_fields(),
                          precision_mode=config.evaluation.precision_mode,
                          judge_workers=config.evaluation.judge_workers)
    report.write(run_dir)
    print(report.table(), file=sys.stderr)
    return {"report": str(run_dir / "eval_report.json"), "aggregates": report.aggregates}


def cmd_kappa(args) -> dict:
    human = annotation_import(_path(args, args.human))
    machine = annotation_import(_path(args, args.machine))
    return agreement(human, machine, binary_precision=args.binary_precision)


def cmd_annotate(args) -> dict:
    if args.action == "import":
        rows = annotation_import(_path(args, args.file))
        return {"rows": len(rows)}
    from .config import Services

    run_dir = _path(args, args.run)
    if not args.config:
        args.config = str(run_dir / "config.json")
    services = Services(_load_config(args))
    answers = read_answers(run_dir)
    out = _path(args, args.out)
    if args.action == "export":
        return {"rows": annotation_export(answers, services.corpus, out), "file": str(out)}
    rows = machine_annotations(answers, services.judge, services.corpus, out)
    return {"rows": len(rows), "file": str(out)}


def cmd_serve(args) -> dict:
    from .config import Services
    from .service import serve

    services = Services(_load_config(args))
    serve(services.pipeline(), args.host, args.port)
    return {}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="citerag", description=__doc__.splitlines()[0])
    p.add_argument("--workdir", default=".", help="root for relative paths")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="validate and store a JSON-lines corpus")
    s.add_argument("--source", required=True)
    s.add_argument("--corpus", required=True, help="corpus directory to create")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("index", help="build the BM25 index for a corpus")
    s.add_argument("--corpus", required=True)
    s.add_argument("--index", required=True)
    s.add_argument("--no-title", action="store_true", help="index abstracts only")
    s.add_argument("--stem", action="store_true", help="strip plural endings")
    s.set_defaults(func=cmd_index)

    s = sub.add_parser("search", help="debug retrieval")
    s.add_argument("query")
    s.add_argument("--index", required=True)
    s.add_argument("--corpus", help="needed with --rerank")
    s.add_argument("-n", type=int, default=10)
    s.add_argument("--rerank", action="store_true", help="rerank with the lexical scorer")
    s.add_argument("--depth", type=int, default=100)
    s.add_argument("--k1", type=float, default=0.9)
    s.add_argument("--b", type=float, default=0.4)
    s.set_defaults(func=cmd_search)

    def pipeline_flags(s):
        s.add_argument("--config", help="YAML or JSON run config")
        s.add_argument("--preset", choices=sorted(PRESETS))
        s.add_argument("--strategy", choices=[x.value for x in SeekStrategy])
        s.add_argument("--transcripts", help="transcript store path")
        s.add_argument("--llm-mode", choices=["live", "record", "replay"])

    s = sub.add_parser("answer", help="answer one question")
    s.add_argument("question")
    pipeline_flags(s)
    s.set_defaults(func=cmd_answer)

    s = sub.add_parser("run", help="run a pipeline over a dataset")
    pipeline_flags(s)
    s.add_argument("--dataset-name", choices=["bioasq_yn", "pubmedqa"])
    s.add_argument("--dataset-path")
    s.add_argument("--out", help="run directory")
    s.add_argument("--limit", type=int)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("eval", help="score a run directory")
    s.add_argument("--run", required=True)
    s.add_argument("--config", help="defaults to the run's config snapshot")
    s.add_argument("--dataset-name", choices=["bioasq_yn", "pubmedqa"])
    s.add_argument("--dataset-path")
    s.add_argument("--precision-mode", choices=["micro", "statement"])
    s.add_argument("--answered-only", action="store_true")
    s.add_argument("--transcripts")
    s.add_argument("--llm-mode", choices=["live", "record", "replay"])
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("kappa", help="agreement between two annotation files")
    s.add_argument("--human", required=True)
    s.add_argument("--machine", required=True)
    s.add_argument("--binary-precision", action="store_true",
                   help="collapse full/partial for precision rows")
    s.set_defaults(func=cmd_kappa)

    s = sub.add_parser("annotate", help="annotation export / import / machine judging")
    s.add_argument("action", choices=["export", "import", "judge"])
    s.add_argument("--run")
    s.add_argument("--out")
    s.add_argument("--file")
    s.add_argument("--config")
    s.add_argument("--transcripts")
    s.add_argument("--llm-mode", choices=["live", "record", "replay"])
    s.set_defaults(func=cmd_annotate)

    s = sub.add_parser("serve", help="HTTP endpoint for cited answers")
    pipeline_flags(s)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8080)
    s.set_defaults(func=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "annotate":
        needed = {"export": ("run", "out"), "judge": ("run", "out"), "import": ("file",)}
        missing = [f"--{n}" for n in needed[args.action] if not getattr(args, n)]
        if missing:
            parser.print_usage(sys.stderr)
            print(f"citerag annotate {args.action}: missing {', '.join(missing)}",
                  file=sys.stderr)
            return 2
    if args.command == "search" and args.rerank and not args.corpus:
        parser.print_usage(sys.stderr)
        print("citerag search: --rerank needs --corpus", file=sys.stderr)
        return 2
    try:
        result = args.func(args)
    except Exception as exc:
        logger.debug("command failed", exc_info=True)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    if result:
        print(json.dumps(result, indent=2, ensure_ascii=False))
    return 0


if __name__ == "__main__":
    sys.exit(main())

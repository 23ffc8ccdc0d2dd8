"""``newsflow`` command-line entry point.

Every command accepts ``--config F`` and ``--verbose``. When a config is
given it is loaded and validated before anything else happens. Commands
print JSON results on stdout; failures print a single ``newsflow: error:``
line on stderr and exit with status 1 (2 for usage errors).
"""
import argparse
import json
import logging
import os
import sys
import threading
from pathlib import Path

from .config import ConfigError, load_config

log = logging.getLogger("newsflow")


class CliError(Exception):
    pass


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2, sort_keys=True, ensure_ascii=False)
    sys.stdout.write("\n")


def _need_config(args) -> dict:
    if args.cfg is None:
        raise CliError(f"{args.command}: --config is required")
    return args.cfg


def _read_jsonl(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise CliError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
    return rows


# -- builders from config -------------------------------------------------------------------

def _gazetteer(cfg):
    from .linking import load_gazetteer
    el = cfg["entity_linking"]
    if el["gazetteer_path"] is None:
        return None
    return load_gazetteer(el["gazetteer_path"], legal_suffixes=el["legal_suffixes"],
                          cue_words=el["cue_words"], max_ngram=el["max_ngram"])


def _classifier(cfg):
    from .events import EventClassifier
    ev = cfg["events"]
    path = ev["models_path"]
    if path is None or not any(Path(path).glob("*.json")):
        log.warning("no event models found; items will carry no events")
        return None
    return EventClassifier.load(path, ev["thresholds"])


def build_stages(cfg):
    from .cleanse import QualityThresholds
    from .pipeline import Stages
    cl, dd, el = cfg["cleanse"], cfg["dedup"], cfg["entity_linking"]
    return Stages(
        thresholds=QualityThresholds(cl["min_length"], cl["min_density"], cl["require_title"]),
        block_density=cl["block_density"],
        quant_rate=dd["quant_rate"],
        min_quant=dd["min_quant"],
        min_profile_terms=dd["min_profile_terms"],
        gazetteer=_gazetteer(cfg),
        el_threshold=el["threshold"],
        el_lambda=tuple(el["lambda"]),
        include_generic=el["include_generic"],
        classifier=_classifier(cfg),
    )


def _state(cfg, name):
    os.makedirs(cfg["state_path"], exist_ok=True)
    return os.path.join(cfg["state_path"], name)


def _queue(cfg):
    from .pipeline import WorkQueue
    return WorkQueue(_state(cfg, "queue.db"), cfg["visibility_timeout_ms"] / 1000.0)


def _store(cfg):
    from .pipeline import ChunkStore
    return ChunkStore(cfg["chunk_store_path"], max_items=cfg["max_chunk_items"])


def _labels(cfg, args):
    if args.data:
        return args.data
    labels = cfg["events"]["labels_path"] if cfg else None
    if labels is None:
        raise CliError(f"{args.command}: give --data or set events.labels_path in the config")
    return os.path.join(labels, f"{args.category}.jsonl")


def _train_kwargs(cfg):
    from .events.features import DEFAULT_STOPWORDS
    ev = cfg["events"] if cfg else {"l2": 1e-4, "epochs": 200, "learning_rate": 0.5,
                                    "stopwords": None}
    stop = DEFAULT_STOPWORDS if ev["stopwords"] is None else frozenset(ev["stopwords"])
    return {"l2": ev["l2"], "epochs": ev["epochs"], "learning_rate": ev["learning_rate"],
            "stopwords": stop}


# -- commands ----------------------------------------------------------------------------------

def cmd_ingest(args):
    from .pipeline import ingest
    cfg = _need_config(args)
    size = args.chunk_size or cfg["max_chunk_items"]
    keys = ingest(args.path, _store(cfg), chunk_size=size, compress=args.compress)
    _emit({"chunks": keys})


def cmd_coordinator(args):
    from .pipeline import run_coordinator
    cfg = _need_config(args)
    interval = cfg["poll_interval_ms"] / 1000.0
    run_coordinator(_store(cfg), _queue(cfg), _state(cfg, "watermark.json"),
                    _state(cfg, "coordinator.lock"), interval, max_ticks=args.max_ticks)


def cmd_worker(args):
    from .dedup import SqliteRegister
    from .index import NewsIndex
    from .pipeline import run_workers
    cfg = _need_config(args)
    concurrency = args.concurrency or cfg["worker_concurrency"]
    if concurrency < 1:
        raise CliError("worker: --concurrency must be >= 1")
    stages = build_stages(cfg)
    os.makedirs(os.path.dirname(cfg["dedup"]["register_path"]), exist_ok=True)
    os.makedirs(os.path.dirname(cfg["index_path"]), exist_ok=True)
    register = SqliteRegister(cfg["dedup"]["register_path"])
    index = NewsIndex(cfg["index_path"])
    try:
        report = run_workers(_queue(cfg), _store(cfg), stages, index, register, concurrency,
                             until_idle=args.until_idle,
                             poll_interval=cfg["poll_interval_ms"] / 1000.0)
    finally:
        register.close()
    _emit({"processed": report.processed, "duplicates": report.duplicates,
           "rejected": report.rejected, "indexed": len(index)})


def cmd_serve(args):
    from .index import NewsIndex, serve
    cfg = _need_config(args)
    host = args.host or cfg["serve"]["host"]
    port = cfg["serve"]["port"] if args.port is None else args.port
    srv = serve(NewsIndex(cfg["index_path"]), port, host, background=True, follow=True)
    print(f"listening on http://{host}:{srv.port}", flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        srv.stop()


def cmd_train(args):
    from .events import EventClassifier, check_category, fit_text_model, load_labeled
    cfg = args.cfg
    check_category(args.category)
    docs = load_labeled(_labels(cfg, args))
    tau = (cfg["events"]["thresholds"].get(args.category, 0.5) if cfg else 0.5)
    model = fit_text_model([d.text for d in docs], [d.label for d in docs], args.category,
                           decision_threshold=tau, **_train_kwargs(cfg))
    out = args.out or (cfg["events"]["models_path"] if cfg else None)
    if out is None:
        raise CliError("train: give --out or set events.models_path in the config")
    EventClassifier({args.category: model}).save(out)
    _emit({"category": args.category, "documents": len(docs),
           "positives": sum(d.label for d in docs),
           "model": os.path.join(out, f"{args.category}.json")})


def cmd_cv(args):
    from .events import check_category, cross_validate, load_labeled
    check_category(args.category)
    docs = load_labeled(_labels(args.cfg, args))
    report = cross_validate(docs, args.folds, args.seed, args.category,
                            **_train_kwargs(args.cfg))
    out = report.to_json()
    if not args.verbose:
        del out["folds"]
    _emit(out)


def cmd_expand(args):
    from .events import expand_seeds, load_word2vec_text
    seeds = [w for w in Path(args.seeds).read_text(encoding="utf-8").split() if w]
    if not seeds:
        raise CliError(f"{args.seeds}: no seed words")
    result = expand_seeds(seeds, load_word2vec_text(args.embeddings), args.topk)
    _emit({"neighbours": {s: [[w, c] for w, c in ns] for s, ns in result.neighbours.items()},
           "missing": list(result.missing)})


def cmd_retrieve(args):
    from .events import BooleanQuery, boolean_retrieve, sample_training_pool
    query = BooleanQuery.parse(Path(args.query).read_text(encoding="utf-8"))
    corpus = {}
    for row in _read_jsonl(args.corpus):
        if "doc_id" not in row or "text" not in row:
            raise CliError(f"{args.corpus}: every record needs doc_id and text")
        corpus[str(row["doc_id"])] = str(row["text"])
    matches = boolean_retrieve(query, corpus)
    sample = sample_training_pool(matches, args.sample, args.seed)
    _emit({"matches": len(matches), "sample": sample})


def _dev_scores(rows, args):
    """(confidence, gold) pairs; rows without a confidence are scored with the
    gazetteer against the document text from ``--docs``."""
    from .linking import (check_lambda, confidence_of, context_similarity, doc_term_vector,
                          ner_company_score, spot_mentions, _vector_norm)
    pending = [r for r in rows if r.get("confidence") is None]
    texts, cached = {}, {}
    if pending:
        if args.cfg is None or args.docs is None:
            raise CliError("tune-threshold: rows without confidence need --docs and a config "
                           "with entity_linking.gazetteer_path")
        gaz = _gazetteer(args.cfg)
        if gaz is None:
            raise CliError("tune-threshold: entity_linking.gazetteer_path is not set")
        lam = check_lambda(tuple(args.cfg["entity_linking"]["lambda"]))
        texts = {str(r["doc_id"]): str(r["text"]) for r in _read_jsonl(args.docs)}
    out = []
    for n, r in enumerate(rows, 1):
        try:
            gold = r["gold"]
            if not isinstance(gold, bool):
                raise TypeError("gold must be true or false")
            conf = r.get("confidence")
            if conf is None:
                doc_id = str(r["doc_id"])
                if doc_id not in texts:
                    raise KeyError(f"doc {doc_id!r} not in --docs")
                if doc_id not in cached:
                    text = texts[doc_id]
                    vec = doc_term_vector(text, gaz.idf)
                    cached[doc_id] = (text, spot_mentions(text, gaz), vec, _vector_norm(vec))
                text, mentions, vec, norm = cached[doc_id]
                start, end = int(r["start"]), int(r["end"])
                # exact span first, else a spotted mention overlapping it (the
                # dev set may or may not include a legal suffix in the span)
                hits = sorted(mentions, key=lambda m: (m.start, m.end) != (start, end))
                m = next((m for m in hits if m.start < end and start < m.end), None)
                conf = 0.0
                if m is not None:
                    ner = ner_company_score(text, m, gaz)
                    for entry, commonness in gaz.candidates(m.matched_alias.split()):
                        if entry.entity_id == r["entity_id"]:
                            sim = context_similarity(entry, vec, norm,
                                                     gaz.context_norm(entry.entity_id))
                            conf = confidence_of(commonness, sim, ner, lam)
                else:
                    log.warning("row %d: span not spotted by the linker, confidence 0", n)
            out.append((float(conf), gold))
        except (KeyError, TypeError, ValueError) as exc:
            raise CliError(f"{args.dev}:{n}: bad dev-set row: {exc}") from exc
    return out


def cmd_tune_threshold(args):
    from .linking import tune_threshold
    report = tune_threshold(_dev_scores(_read_jsonl(args.dev), args), args.beta)
    out = {"threshold": report.threshold, "precision": report.precision,
           "recall": report.recall, "f_beta": report.f_beta, "beta": report.beta}
    if args.verbose:
        out["sweep"] = [list(row) for row in report.sweep]
    _emit(out)


def cmd_query(args):
    from .index import NewsIndex, QueryRequest
    cfg = _need_config(args)
    params = {k: v for k, v in (("q", args.q), ("company", args.company), ("event", args.event),
                                ("from", args.from_), ("to", args.to), ("page", args.page),
                                ("size", args.size)) if v is not None}
    if args.include_duplicates:
        params["include_duplicates"] = "true"
    if args.include_low_quality:
        params["include_low_quality"] = "true"
    req = QueryRequest.from_params({k: str(v) for k, v in params.items()})
    _emit(NewsIndex(cfg["index_path"]).search(req).to_json())


def cmd_gen_corpus(args):
    from .corpus import gen_corpus
    from .events import CATEGORIES, check_category
    cats = args.categories.split(",") if args.categories else list(CATEGORIES)
    for c in cats:
        check_category(c)
    manifest = gen_corpus(args.out, size=args.size, categories=cats,
                          duplicate_rate=args.duplicate_rate, seed=args.seed,
                          chunk_size=args.chunk_size,
                          docs_per_category=args.docs_per_category)
    # a ready-to-use config pointing at the generated files
    cfg_path = os.path.join(args.out, "config.json")
    with open(cfg_path, "w", encoding="utf-8") as fh:
        json.dump({"chunk_store_path": "chunks", "index_path": "state/index.jsonl",
                   "state_path": "state", "poll_interval_ms": 1000,
                   "entity_linking": {"gazetteer_path": "gazetteer.jsonl"},
                   "events": {"models_path": "models", "labels_path": "labels"}},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit({"out": args.out, "config": cfg_path, "items": manifest["size"],
           "duplicates": len(manifest["duplicates"]), "chunks": len(manifest["chunk_keys"])})


# -- parser ----------------------------------------------------------------------------------

def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="F", help="JSON config file")
    common.add_argument("--verbose", action="store_true", help="debug logging and detail")

    p = argparse.ArgumentParser(prog="newsflow", description="Business-news stream processor.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_, description=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("ingest", cmd_ingest, "split an item file (JSONL, optionally .gz) into chunks")
    sp.add_argument("path", help="item file, one raw news record per line")
    sp.add_argument("--chunk-size", type=_positive_int, metavar="N",
                    help="items per chunk (default: max_chunk_items)")
    sp.add_argument("--compress", action="store_true", help="write gzip-compressed chunks")

    sp = add("coordinator", cmd_coordinator, "poll the chunk store and enqueue work orders")
    sp.add_argument("--max-ticks", type=_positive_int, metavar="N",
                    help="stop after N polls (default: run forever)")

    sp = add("worker", cmd_worker, "process work orders into the index")
    sp.add_argument("--concurrency", type=_positive_int, metavar="N",
                    help="worker threads (default: worker_concurrency)")
    sp.add_argument("--until-idle", action="store_true",
                    help="exit once the queue is drained instead of polling")

    sp = add("serve", cmd_serve, "serve GET /news and GET /health over HTTP")
    sp.add_argument("--host", help="bind address (default: serve.host)")
    sp.add_argument("--port", type=int, help="port (default: serve.port; 0 picks a free one)")

    sp = add("train", cmd_train, "train one event category model")
    sp.add_argument("--category", required=True, metavar="C")
    sp.add_argument("--data", metavar="PATH",
                    help="labeled JSONL (default: <events.labels_path>/<C>.jsonl)")
    sp.add_argument("--out", metavar="DIR", help="model directory (default: events.models_path)")

    sp = add("cv", cmd_cv, "stratified k-fold cross validation of one category")
    sp.add_argument("--category", required=True, metavar="C")
    sp.add_argument("--data", metavar="PATH",
                    help="labeled JSONL (default: <events.labels_path>/<C>.jsonl)")
    sp.add_argument("--folds", type=int, default=3, metavar="K")
    sp.add_argument("--seed", type=int, default=0, metavar="S")

    sp = add("expand", cmd_expand, "nearest words to seed terms in an embedding space")
    sp.add_argument("--seeds", required=True, metavar="FILE", help="whitespace-separated seeds")
    sp.add_argument("--embeddings", required=True, metavar="FILE", help="word2vec text format")
    sp.add_argument("--topk", type=_positive_int, default=10, metavar="K")

    sp = add("retrieve", cmd_retrieve, "boolean retrieval and a seeded training-pool sample")
    sp.add_argument("--query", required=True, metavar="FILE", help="one AND-group per line")
    sp.add_argument("--corpus", required=True, metavar="PATH", help="JSONL of {doc_id, text}")
    sp.add_argument("--sample", type=int, default=100, metavar="N")
    sp.add_argument("--seed", type=int, default=0, metavar="S")

    sp = add("tune-threshold", cmd_tune_threshold, "pick the F-beta optimal linking threshold")
    sp.add_argument("--dev", required=True, metavar="FILE", help="annotated dev-set JSONL")
    sp.add_argument("--docs", metavar="FILE",
                    help="JSONL of {doc_id, text}, needed for rows without confidence")
    sp.add_argument("--beta", type=_positive_float, default=0.5, metavar="B")

    sp = add("query", cmd_query, "search the index from the command line")
    sp.add_argument("--q", metavar="TEXT", help="full-text query")
    sp.add_argument("--company", metavar="ID")
    sp.add_argument("--event", metavar="CATEGORY")
    sp.add_argument("--from", dest="from_", metavar="DATE", help="RFC 3339 date or timestamp")
    sp.add_argument("--to", metavar="DATE", help="RFC 3339 date or timestamp")
    sp.add_argument("--include-duplicates", action="store_true")
    sp.add_argument("--include-low-quality", action="store_true")
    sp.add_argument("--page", type=int, metavar="N")
    sp.add_argument("--size", type=int, metavar="N")

    sp = add("gen-corpus", cmd_gen_corpus, "write a deterministic synthetic corpus and config")
    sp.add_argument("--out", required=True, metavar="DIR")
    sp.add_argument("--size", type=int, default=1000, metavar="N")
    sp.add_argument("--categories", metavar="LIST", help="comma-separated (default: all)")
    sp.add_argument("--duplicate-rate", type=float, default=0.1, metavar="R")
    sp.add_argument("--seed", type=int, default=0, metavar="S")
    sp.add_argument("--chunk-size", type=_positive_int, default=1000, metavar="N")
    sp.add_argument("--docs-per-category", type=int, default=200, metavar="N")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        args.cfg = load_config(args.config) if args.config else None
        args.func(args)
    except KeyboardInterrupt:
        return 130
    except (CliError, ConfigError, ValueError, OSError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"newsflow: error: {msg}", file=sys.stderr)
        if args.verbose:
            log.debug("traceback", exc_info=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

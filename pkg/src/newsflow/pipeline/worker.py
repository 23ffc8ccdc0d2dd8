"""Worker side: turn one chunk into index documents, and the worker loop."""
import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Optional, Tuple

from ..cleanse import QualityThresholds, RawNewsItem, compute_measures, extract_content
from ..dedup import build_profile, check_and_record, dedup_code
from ..index import IndexedDoc, NewsIndex
from ..linking import DEFAULT_LAMBDA, Gazetteer, annotate
from .chunks import ChunkStore, DataChunk
from .queue import WorkOrder, WorkQueue

log = logging.getLogger(__name__)


class WorkerCrash(BaseException):
    """Raised by fault-injection hooks to model a process dying mid-chunk.

    A BaseException so that no ``except Exception`` on the way up swallows it.
    """


@dataclass(frozen=True)
class ProcessReport:
    processed: int = 0
    duplicates: int = 0
    rejected: int = 0

    def __add__(self, other):
        return ProcessReport(self.processed + other.processed,
                             self.duplicates + other.duplicates,
                             self.rejected + other.rejected)


def _utcnow():
    return datetime.now(timezone.utc)


@dataclass
class Stages:
    """Configured cleanse -> dedup -> entity-link -> classify chain."""
    thresholds: QualityThresholds = field(default_factory=QualityThresholds)
    block_density: float = 0.25
    quant_rate: float = 0.01
    min_quant: int = 2
    min_profile_terms: int = 4
    gazetteer: Optional[Gazetteer] = None
    el_threshold: float = 0.0
    el_lambda: Tuple[float, float, float] = DEFAULT_LAMBDA
    include_generic: bool = False
    classifier: Optional[object] = None
    clock: Callable[[], datetime] = _utcnow

    def enrich(self, raw: RawNewsItem, register) -> IndexedDoc:
        clean = extract_content(raw, self.block_density)
        quality = compute_measures(clean, raw, self.thresholds)
        profile = build_profile(clean.body, self.quant_rate, self.min_quant)
        if len(profile.entries) >= max(1, self.min_profile_terms):
            verdict = check_and_record(register, dedup_code(profile), clean.item_id)
        else:
            # a profile this small carries no identity; stubs would all collide
            verdict = None
        text = f"{clean.title}\n\n{clean.body}" if clean.title else clean.body
        annotations = ()
        if self.gazetteer is not None:
            best = {}
            for a in annotate(text, self.gazetteer, self.el_threshold, self.el_lambda,
                              self.include_generic):
                best[a.entity_id] = max(best.get(a.entity_id, 0.0), a.confidence)
            annotations = tuple(sorted(best.items()))
        events = ()
        if self.classifier is not None:
            events = tuple(sorted(self.classifier.classify(text)))
        return IndexedDoc(
            item_id=clean.item_id,
            title=clean.title,
            body=clean.body,
            source_name=raw.source_name,
            source_url=raw.source_url,
            published_at=raw.fetched_at,
            is_good=quality.is_good,
            is_duplicate=bool(verdict and verdict.is_duplicate),
            duplicate_of=verdict.original_item_id if verdict else None,
            annotations=annotations,
            events=events,
            indexed_at=self.clock(),
        )


def process_chunk(chunk: DataChunk, stages: Stages, index: NewsIndex, register,
                  fault: Optional[Callable[[str, int], None]] = None) -> ProcessReport:
    """Enrich every item of a chunk and upsert the results.

    ``processed`` counts indexed items (duplicates included), ``duplicates``
    the subset flagged as such, ``rejected`` malformed records; so
    processed + rejected == len(chunk). ``fault(point, i)`` is a test hook.
    Items are handled in chunk order because dedup verdicts depend on it.
    """
    docs, rejected, dups = [], 0, 0
    for i, line in enumerate(chunk.lines):
        if fault is not None:
            fault("item", i)
        if line.item is None:
            log.warning("chunk %s line %d rejected: %s", chunk.key, line.lineno, line.error)
            rejected += 1
            continue
        doc = stages.enrich(line.item, register)
        dups += doc.is_duplicate
        docs.append(doc)
    if fault is not None:
        fault("index", len(docs))
    index.upsert_many(docs)
    return ProcessReport(len(docs), dups, rejected)


def handle_order(order: WorkOrder, store: ChunkStore, stages: Stages, index: NewsIndex,
                 register, queue: WorkQueue, fault=None) -> ProcessReport:
    chunk = store.read_chunk(order.chunk_key)
    report = process_chunk(chunk, stages, index, register, fault)
    if fault is not None:
        fault("ack", 0)
    queue.ack(order.order_id)
    log.info("order %s (chunk %s, attempt %d): %s", order.order_id, order.chunk_key,
             order.attempt, report)
    return report


def run_workers(queue: WorkQueue, store: ChunkStore, stages: Stages, index: NewsIndex,
                register, concurrency: int = 4, until_idle: bool = False,
                poll_interval: float = 1.0, stop: Optional[threading.Event] = None
                ) -> ProcessReport:
    """Run ``concurrency`` worker threads sharing the index writer handle.

    With ``until_idle`` each thread exits once the queue has no visible order
    and no other thread is busy; otherwise they poll until ``stop`` is set.
    """
    if concurrency < 1:
        raise ValueError("concurrency must be >= 1")
    stop = stop or threading.Event()
    totals = [ProcessReport()]
    busy = [0]
    lock = threading.Lock()

    def loop():
        while not stop.is_set():
            try:
                with lock:
                    order = queue.dequeue()
                    if order is not None:
                        busy[0] += 1
                    elif until_idle and busy[0] == 0:
                        return
            except Exception as exc:
                log.error("dequeue failed: %s", exc)
                order = None
            if order is None:
                stop.wait(poll_interval if not until_idle else 0.01)
                continue
            try:
                report = handle_order(order, store, stages, index, register, queue)
                with lock:
                    totals[0] = totals[0] + report
            except Exception as exc:
                # leave the order leased; it is redelivered after the timeout
                log.error("order %s failed (attempt %d): %s", order.order_id, order.attempt, exc)
            finally:
                with lock:
                    busy[0] -= 1

    threads = [threading.Thread(target=loop, name=f"worker-{i}") for i in range(concurrency)]
    for t in threads:
        t.start()
    try:
        for t in threads:
            while t.is_alive():
                t.join(0.2)
    except KeyboardInterrupt:
        stop.set()
        for t in threads:
            t.join()
    return totals[0]

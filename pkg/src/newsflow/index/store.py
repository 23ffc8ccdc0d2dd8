"""In-process faceted inverted index with an append-only on-disk log.

One writer lock guards every mutation and every search, so each search sees
a consistent snapshot. Persistence is a JSON-lines log of upserted
documents; replaying it (last record per id wins) rebuilds the index.
"""
import json
import math
import os
import threading
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta, timezone
from typing import Dict, List, Optional, Tuple

from ..cleanse import format_timestamp, parse_timestamp
from ..textutil import tokenize

K1 = 1.2
B = 0.75
TITLE_WEIGHT = 2
MAX_PAGE_SIZE = 100


class QueryError(ValueError):
    """A malformed search request (HTTP 400)."""


class IndexStorageError(OSError):
    """Persisting the index failed; the in-memory state is unchanged."""


@dataclass(frozen=True)
class IndexedDoc:
    item_id: str
    title: str
    body: str
    source_name: str
    published_at: datetime
    is_good: bool
    is_duplicate: bool
    annotations: Tuple[Tuple[str, float], ...] = ()
    events: Tuple[Tuple[str, float], ...] = ()
    indexed_at: Optional[datetime] = None
    duplicate_of: Optional[str] = None
    source_url: str = ""

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "title": self.title,
            "body": self.body,
            "source_name": self.source_name,
            "source_url": self.source_url,
            "published_at": format_timestamp(self.published_at),
            "is_good": self.is_good,
            "is_duplicate": self.is_duplicate,
            "duplicate_of": self.duplicate_of,
            "annotations": [[e, c] for e, c in self.annotations],
            "events": [[c, p] for c, p in self.events],
            "indexed_at": None if self.indexed_at is None else format_timestamp(self.indexed_at),
        }

    @classmethod
    def from_json(cls, d: dict) -> "IndexedDoc":
        return cls(
            item_id=d["item_id"],
            title=d["title"],
            body=d["body"],
            source_name=d["source_name"],
            published_at=parse_timestamp(d["published_at"]),
            is_good=bool(d["is_good"]),
            is_duplicate=bool(d["is_duplicate"]),
            annotations=tuple((e, float(c)) for e, c in d.get("annotations", ())),
            events=tuple((c, float(p)) for c, p in d.get("events", ())),
            indexed_at=None if d.get("indexed_at") is None else parse_timestamp(d["indexed_at"]),
            duplicate_of=d.get("duplicate_of"),
            source_url=d.get("source_url", ""),
        )

    def summary(self, score=None) -> dict:
        return {
            "item_id": self.item_id,
            "title": self.title,
            "source_name": self.source_name,
            "published_at": format_timestamp(self.published_at),
            "annotations": [{"entity_id": e, "confidence": c} for e, c in self.annotations],
            "events": [{"category": c, "probability": p} for c, p in self.events],
            "score": score,
        }

    @property
    def companies(self):
        return {e for e, _ in self.annotations}

    @property
    def categories(self):
        return {c for c, _ in self.events}

    @property
    def month(self):
        return self.published_at.strftime("%Y-%m")


def _parse_bool(name, value):
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise QueryError(f"{name} must be a boolean, got {value!r}")


def _parse_date(name, value, end_of_day=False):
    if value is None or isinstance(value, datetime):
        return value
    text = str(value).strip()
    try:
        if len(text) == 10:
            d = date.fromisoformat(text)
            ts = datetime.combine(d, time.min, tzinfo=timezone.utc)
            return ts + timedelta(days=1, microseconds=-1) if end_of_day else ts
        return parse_timestamp(text)
    except ValueError as exc:
        raise QueryError(f"{name} is not an RFC 3339 date: {value!r}") from exc


@dataclass(frozen=True)
class QueryRequest:
    q: Optional[str] = None
    company: Optional[str] = None
    event: Optional[str] = None
    from_: Optional[datetime] = None
    to: Optional[datetime] = None
    include_duplicates: bool = False
    include_low_quality: bool = False
    page: int = 0
    size: int = 10

    def __post_init__(self):
        if not 0 <= self.size <= MAX_PAGE_SIZE:
            raise QueryError(f"size must be in [0, {MAX_PAGE_SIZE}]")
        if self.page < 0:
            raise QueryError("page must be >= 0")

    @classmethod
    def from_params(cls, params: Dict[str, str]) -> "QueryRequest":
        known = {"q", "company", "event", "from", "to", "include_duplicates",
                 "include_low_quality", "page", "size"}
        unknown = set(params) - known
        if unknown:
            raise QueryError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        try:
            page = int(params.get("page", 0))
            size = int(params.get("size", 10))
        except ValueError as exc:
            raise QueryError("page and size must be integers") from exc
        return cls(
            q=params.get("q") or None,
            company=params.get("company") or None,
            event=params.get("event") or None,
            from_=_parse_date("from", params.get("from") or None),
            to=_parse_date("to", params.get("to") or None, end_of_day=True),
            include_duplicates=_parse_bool("include_duplicates",
                                           params.get("include_duplicates", False)),
            include_low_quality=_parse_bool("include_low_quality",
                                            params.get("include_low_quality", False)),
            page=page,
            size=size,
        )


@dataclass
class QueryResponse:
    total: int
    hits: List[dict]
    facets: Dict[str, Dict[str, int]] = field(default_factory=dict)

    def to_json(self):
        return {"total": self.total, "hits": self.hits, "facets": self.facets}


def bm25_term(tf, df, n_docs, dl, avgdl, k1=K1, b=B):
    """BM25 contribution of one query term (Lucene-style non-negative idf)."""
    if tf <= 0:
        return 0.0
    idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
    return idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl))


def doc_term_stats(title: str, body: str):
    """Weighted term frequencies and length; title tokens count twice."""
    title_toks = tokenize(title)
    body_toks = tokenize(body)
    tf = Counter(body_toks)
    for t in title_toks:
        tf[t] += TITLE_WEIGHT
    return tf, TITLE_WEIGHT * len(title_toks) + len(body_toks)


def query_terms(q: Optional[str]) -> List[str]:
    return list(dict.fromkeys(tokenize(q))) if q else []


def facet_counts(docs) -> Dict[str, Dict[str, int]]:
    company, event, source, month = Counter(), Counter(), Counter(), Counter()
    for d in docs:
        company.update(d.companies)
        event.update(d.categories)
        source[d.source_name] += 1
        month[d.month] += 1
    return {"company": dict(sorted(company.items())), "event": dict(sorted(event.items())),
            "source": dict(sorted(source.items())), "month": dict(sorted(month.items()))}


def passes_filters(doc: IndexedDoc, req: QueryRequest) -> bool:
    if doc.is_duplicate and not req.include_duplicates:
        return False
    if not doc.is_good and not req.include_low_quality:
        return False
    if req.company is not None and req.company not in doc.companies:
        return False
    if req.event is not None and req.event not in doc.categories:
        return False
    if req.from_ is not None and doc.published_at < req.from_:
        return False
    if req.to is not None and doc.published_at > req.to:
        return False
    return True


class NewsIndex:
    def __init__(self, path=None):
        self.path = None if path is None else os.fspath(path)
        self._docs: Dict[str, IndexedDoc] = {}
        self._tf: Dict[str, Counter] = {}
        self._dl: Dict[str, int] = {}
        self._postings: Dict[str, Dict[str, int]] = {}
        self._total_dl = 0
        self._offset = 0  # bytes of the log already applied (complete lines only)
        self._inode = None
        self._lock = threading.RLock()
        if self.path is not None and os.path.exists(self.path):
            self._replay()

    # -- writes --------------------------------------------------------------

    def upsert(self, doc: IndexedDoc):
        self.upsert_many([doc])

    def upsert_many(self, docs):
        """Insert or replace documents. The log is written and synced first;
        if that fails the log is truncated back and memory is left untouched."""
        with self._lock:
            # re-delivering an unchanged document is a no-op, whatever its indexed_at
            docs = [d for d in docs if not self._same_content(d)]
            if not docs:
                return
            if self.path is not None:
                self._append([json.dumps(d.to_json(), sort_keys=True, ensure_ascii=False)
                              for d in docs])
            for d in docs:
                self._apply(d)

    def _same_content(self, doc):
        old = self._docs.get(doc.item_id)
        return old is not None and replace(old, indexed_at=doc.indexed_at) == doc

    def _append(self, lines):
        data = "".join(line + "\n" for line in lines).encode("utf-8")
        try:
            with open(self.path, "ab") as fh:
                size = fh.tell()
                if size and size > self._offset and not self._ends_with_newline(size):
                    # a torn line left by a crashed writer: never glue onto it
                    data = b"\n" + data
                try:
                    fh.write(data)
                    fh.flush()
                    os.fsync(fh.fileno())
                except OSError:
                    fh.truncate(size)
                    raise
        except OSError as exc:
            raise IndexStorageError(f"cannot persist index to {self.path}: {exc}") from exc
        if self._offset == size:
            self._offset = size + len(data)

    def _ends_with_newline(self, size):
        with open(self.path, "rb") as fh:
            fh.seek(size - 1)
            return fh.read(1) == b"\n"

    def _apply(self, doc):
        old = self._docs.get(doc.item_id)
        if old is not None:
            for t in self._tf[doc.item_id]:
                posting = self._postings[t]
                del posting[doc.item_id]
                if not posting:
                    del self._postings[t]
            self._total_dl -= self._dl[doc.item_id]
        tf, dl = doc_term_stats(doc.title, doc.body)
        self._docs[doc.item_id] = doc
        self._tf[doc.item_id] = tf
        self._dl[doc.item_id] = dl
        self._total_dl += dl
        for t, c in tf.items():
            self._postings.setdefault(t, {})[doc.item_id] = c

    def compact(self):
        """Rewrite the log with one record per document."""
        if self.path is None:
            return
        with self._lock:
            tmp = self.path + ".tmp"
            try:
                with open(tmp, "w", encoding="utf-8") as fh:
                    fh.write(self.dump())
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, self.path)
                st = os.stat(self.path)
                self._offset, self._inode = st.st_size, st.st_ino
            except OSError as exc:
                raise IndexStorageError(f"cannot compact index {self.path}: {exc}") from exc

    def _replay(self):
        with open(self.path, "rb") as fh:
            self._inode = os.fstat(fh.fileno()).st_ino
            fh.seek(self._offset)
            data = fh.read()
        end = data.rfind(b"\n") + 1  # an unterminated tail is not applied (yet)
        for line in data[:end].split(b"\n"):
            line = line.strip()
            if not line:
                continue
            try:
                self._apply(IndexedDoc.from_json(json.loads(line)))
            except (UnicodeDecodeError, json.JSONDecodeError, KeyError):
                # a torn line from a crash mid-append
                continue
        self._offset += end

    def refresh(self) -> int:
        """Apply records appended to the log by another process.

        Returns the number of documents that were not in the index before."""
        if self.path is None or not os.path.exists(self.path):
            return 0
        with self._lock:
            st = os.stat(self.path)
            if st.st_ino != self._inode or st.st_size < self._offset:
                # compacted (replaced) underneath us: rebuild from scratch
                for table in (self._docs, self._tf, self._dl, self._postings):
                    table.clear()
                self._total_dl = self._offset = 0
            n = len(self._docs)
            self._replay()
            return len(self._docs) - n

    # -- reads ---------------------------------------------------------------

    def __len__(self):
        with self._lock:
            return len(self._docs)

    def get(self, item_id) -> Optional[IndexedDoc]:
        with self._lock:
            return self._docs.get(item_id)

    def docs(self) -> List[IndexedDoc]:
        with self._lock:
            return [self._docs[k] for k in sorted(self._docs)]

    def dump(self) -> str:
        """Canonical serialization: one sorted-key JSON line per doc, by item_id."""
        with self._lock:
            return "".join(json.dumps(d.to_json(), sort_keys=True, ensure_ascii=False) + "\n"
                           for d in self.docs())

    def score(self, item_id, terms) -> float:
        with self._lock:
            n_docs = len(self._docs)
            avgdl = self._total_dl / n_docs if n_docs else 0.0
            tf = self._tf[item_id]
            dl = self._dl[item_id]
            s = 0.0
            for t in terms:
                if t in tf:
                    s += bm25_term(tf[t], len(self._postings[t]), n_docs, dl, avgdl)
            return s

    def search(self, req: QueryRequest) -> QueryResponse:
        with self._lock:
            terms = query_terms(req.q)
            if terms:
                cand = set()
                for t in terms:
                    cand.update(self._postings.get(t, ()))
                matched = [self._docs[i] for i in cand if passes_filters(self._docs[i], req)]
                scored = [(self.score(d.item_id, terms), d) for d in matched]
                scored.sort(key=lambda p: (-p[0], p[1].item_id))
            else:
                scored = [(None, d) for d in self._docs.values() if passes_filters(d, req)]
                scored.sort(key=lambda p: p[1].item_id)
                scored.sort(key=lambda p: p[1].published_at, reverse=True)
            start = req.page * req.size
            hits = [d.summary(s) for s, d in scored[start:start + req.size]]
            return QueryResponse(len(scored), hits, facet_counts(d for _, d in scored))

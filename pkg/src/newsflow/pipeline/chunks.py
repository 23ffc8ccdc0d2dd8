"""Chunk store (a directory of JSONL files named by key) and the watermark."""
import gzip
import json
import logging
import os
import re
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import List, Optional, Union

from ..cleanse import RawNewsItem, RecordError, format_timestamp, parse_timestamp

log = logging.getLogger(__name__)

DEFAULT_MAX_ITEMS = 1000
_KEY = re.compile(r"^\d{8}T\d{12}Z-[A-Za-z0-9_]+-\d{8}$")
_PRODUCER = re.compile(r"^[A-Za-z0-9_]+$")


class ChunkStoreError(OSError):
    """The chunk store could not be read or written (retryable)."""


def make_chunk_key(created: datetime, producer: str, seq: int) -> str:
    """``YYYYmmddTHHMMSSffffffZ-<producer>-<seq:08d>``; sorts by creation time."""
    if not _PRODUCER.match(producer):
        raise ValueError(f"producer id must be alphanumeric/underscore: {producer!r}")
    if not 0 <= seq < 10 ** 8:
        raise ValueError("sequence number out of range")
    ts = created.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    return f"{ts}-{producer}-{seq:08d}"


def is_chunk_key(key: str) -> bool:
    return bool(_KEY.match(key))


@dataclass(frozen=True)
class ChunkLine:
    """One line of a chunk: either a parsed item or the reason it was rejected."""
    lineno: int
    item: Optional[RawNewsItem] = None
    error: Optional[str] = None


@dataclass(frozen=True)
class DataChunk:
    key: str
    lines: tuple

    @property
    def items(self) -> List[RawNewsItem]:
        return [ln.item for ln in self.lines if ln.item is not None]

    def __len__(self):
        return len(self.lines)


def parse_chunk_lines(text: str):
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(ChunkLine(n, item=RawNewsItem.from_record(json.loads(line))))
        except (json.JSONDecodeError, RecordError) as exc:
            out.append(ChunkLine(n, error=str(exc)))
    return tuple(out)


class ChunkStore:
    def __init__(self, path, max_items: int = DEFAULT_MAX_ITEMS):
        self.path = os.fspath(path)
        self.max_items = max_items
        os.makedirs(self.path, exist_ok=True)

    def _file(self, key):
        plain = os.path.join(self.path, key)
        return plain if os.path.exists(plain) else plain + ".gz"

    def list_keys(self) -> List[str]:
        try:
            names = os.listdir(self.path)
        except OSError as exc:
            raise ChunkStoreError(f"cannot list chunk store {self.path}: {exc}") from exc
        keys = {n[:-3] if n.endswith(".gz") else n for n in names}
        return sorted(k for k in keys if is_chunk_key(k))

    def write_chunk(self, records: List[Union[str, dict, RawNewsItem]], producer: str, seq: int,
                    created: Optional[datetime] = None, compress=False) -> str:
        if not records:
            raise ValueError("a chunk must contain at least one item")
        if len(records) > self.max_items:
            raise ValueError(f"chunk has {len(records)} items, limit is {self.max_items}")
        created = created or datetime.now(timezone.utc)
        key = make_chunk_key(created, producer, seq)
        lines = []
        for r in records:
            if isinstance(r, str):  # pre-serialized line, passed through verbatim
                lines.append(r.rstrip("\n"))
                continue
            rec = r.to_record() if isinstance(r, RawNewsItem) else r
            lines.append(json.dumps(rec, ensure_ascii=False, sort_keys=True))
        data = ("\n".join(lines) + "\n").encode("utf-8")
        if compress:
            data = gzip.compress(data, mtime=0)
        target = os.path.join(self.path, key + (".gz" if compress else ""))
        # write-then-rename so a lister never sees a partial chunk
        fd, tmp = tempfile.mkstemp(dir=self.path, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return key

    def read_chunk(self, key: str) -> DataChunk:
        path = self._file(key)
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise ChunkStoreError(f"cannot read chunk {key}: {exc}") from exc
        if path.endswith(".gz"):
            raw = gzip.decompress(raw)
        return DataChunk(key, parse_chunk_lines(raw.decode("utf-8", errors="replace")))


@dataclass(frozen=True)
class Watermark:
    last_key: str = ""
    persisted_at: Optional[datetime] = None

    def to_json(self):
        return {"last_key": self.last_key,
                "persisted_at": None if self.persisted_at is None
                else format_timestamp(self.persisted_at)}


def load_watermark(path) -> Watermark:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except FileNotFoundError:
        return Watermark()
    ts = d.get("persisted_at")
    return Watermark(d.get("last_key", ""), None if ts is None else parse_timestamp(ts))


def save_watermark(path, wm: Watermark):
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(wm.to_json(), fh)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def list_new_chunks(store: ChunkStore, watermark: Watermark) -> List[str]:
    return [k for k in store.list_keys() if k > watermark.last_key]


def read_item_lines(path):
    """Non-blank lines of a JSONL item file (optionally gzip-compressed)."""
    path = os.fspath(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        return [ln.rstrip("\n") for ln in fh if ln.strip()]


def ingest(path, store: ChunkStore, chunk_size: int = DEFAULT_MAX_ITEMS, producer="ingest",
           compress=False, created: Optional[datetime] = None) -> List[str]:
    """Split an item file into chunks. Lines are copied verbatim, so malformed
    records reach the workers and are counted as rejected there."""
    if not 1 <= chunk_size <= store.max_items:
        raise ValueError(f"chunk_size must be in [1, {store.max_items}]")
    lines = read_item_lines(path)
    created = created or datetime.now(timezone.utc)
    return [store.write_chunk(lines[i:i + chunk_size], producer, seq, created, compress)
            for seq, i in enumerate(range(0, len(lines), chunk_size))]

"""Put-if-absent register mapping dedup codes to the first item seen.

``SqliteRegister`` is the persistent one: SQLite in WAL mode gives the
exclusive-writer lock and the write-ahead log, and ``BEGIN IMMEDIATE``
serialises every check so verdicts follow one total order even across
processes. ``MemoryRegister`` offers the same contract in-process.
"""
import logging
import sqlite3
import threading
from dataclasses import dataclass
from typing import Optional

log = logging.getLogger(__name__)


class RegisterUnavailable(RuntimeError):
    """The register could not be reached; the caller may retry."""


@dataclass(frozen=True)
class DedupVerdict:
    is_duplicate: bool
    original_item_id: Optional[str] = None


class MemoryRegister:
    def __init__(self):
        self._codes = {}
        self._lock = threading.Lock()

    def put_if_absent(self, code: str, item_id: str) -> str:
        """Store ``item_id`` under ``code`` unless taken; return the holder."""
        with self._lock:
            return self._codes.setdefault(code, item_id)

    def get(self, code):
        with self._lock:
            return self._codes.get(code)

    def __len__(self):
        with self._lock:
            return len(self._codes)

    def close(self):
        pass


class SqliteRegister:
    def __init__(self, path, timeout: float = 30.0):
        self.path = str(path)
        self.timeout = timeout
        self._local = threading.local()
        self._all = []
        self._all_lock = threading.Lock()
        conn = self._conn()
        with conn:
            conn.execute(
                "CREATE TABLE IF NOT EXISTS codes (code TEXT PRIMARY KEY, item_id TEXT NOT NULL)"
            )

    def _conn(self):
        conn = getattr(self._local, "conn", None)
        if conn is None:
            try:
                conn = sqlite3.connect(self.path, timeout=self.timeout, isolation_level=None,
                                       check_same_thread=False)
                conn.execute("PRAGMA journal_mode=WAL")
                conn.execute("PRAGMA synchronous=NORMAL")
            except sqlite3.Error as exc:
                raise RegisterUnavailable(str(exc)) from exc
            self._local.conn = conn
            with self._all_lock:
                self._all.append(conn)
        return conn

    def put_if_absent(self, code: str, item_id: str) -> str:
        try:
            conn = self._conn()
            conn.execute("BEGIN IMMEDIATE")
            try:
                conn.execute("INSERT OR IGNORE INTO codes (code, item_id) VALUES (?, ?)",
                             (code, item_id))
                (holder,) = conn.execute("SELECT item_id FROM codes WHERE code = ?",
                                         (code,)).fetchone()
                conn.execute("COMMIT")
            except BaseException:
                conn.execute("ROLLBACK")
                raise
        except sqlite3.Error as exc:
            raise RegisterUnavailable(str(exc)) from exc
        return holder

    def get(self, code):
        row = self._conn().execute("SELECT item_id FROM codes WHERE code = ?", (code,)).fetchone()
        return row[0] if row else None

    def __len__(self):
        return self._conn().execute("SELECT COUNT(*) FROM codes").fetchone()[0]

    def close(self):
        with self._all_lock:
            for conn in self._all:
                conn.close()
            self._all.clear()
        self._local = threading.local()


def check_and_record(register, code: str, item_id: str) -> DedupVerdict:
    """Record ``code`` for ``item_id`` and report whether someone got there first.

    A re-check by the item that originally recorded the code is not a
    duplicate, so reprocessing a chunk is harmless. If the register is
    unreachable the item passes as unique (fail open).
    """
    try:
        holder = register.put_if_absent(code, item_id)
    except RegisterUnavailable as exc:
        log.warning("dedup register unavailable, passing %s as unique: %s", item_id, exc)
        return DedupVerdict(False, None)
    if holder == item_id:
        return DedupVerdict(False, None)
    return DedupVerdict(True, holder)

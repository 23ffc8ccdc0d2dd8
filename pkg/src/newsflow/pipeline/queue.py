"""Durable at-least-once work queue on SQLite.

An order is hidden from other consumers while its lease is live
(``lease_until > now``). An expired lease makes it visible again; the next
dequeue hands it out with ``attempt + 1``. Orders are committed to disk
before the enqueue call returns.
"""
import logging
import os
import sqlite3
import threading
import time
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Iterable, List, Optional

log = logging.getLogger(__name__)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS orders (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    order_id TEXT NOT NULL UNIQUE,
    chunk_key TEXT NOT NULL,
    enqueued_at REAL NOT NULL,
    deliveries INTEGER NOT NULL DEFAULT 0,
    lease_until REAL
)
"""


class QueueUnavailable(RuntimeError):
    """The queue database could not be reached (retryable)."""


@dataclass(frozen=True)
class WorkOrder:
    order_id: str
    chunk_key: str
    attempt: int
    enqueued_at: datetime
    lease_until: Optional[float] = None


class WorkQueue:
    def __init__(self, path, visibility_timeout: float = 300.0,
                 clock: Callable[[], float] = time.time):
        if visibility_timeout <= 0:
            raise ValueError("visibility_timeout must be positive")
        self.path = os.fspath(path)
        self.visibility_timeout = float(visibility_timeout)
        self.clock = clock
        self._local = threading.local()
        self._conns = []
        self._conns_lock = threading.Lock()
        with self._tx() as con:
            con.execute(_SCHEMA)

    def _conn(self):
        con = getattr(self._local, "con", None)
        if con is None:
            try:
                con = sqlite3.connect(self.path, timeout=30.0, isolation_level=None,
                                      check_same_thread=False)
                con.execute("PRAGMA journal_mode=WAL")
                con.execute("PRAGMA synchronous=FULL")
            except sqlite3.Error as exc:
                raise QueueUnavailable(f"cannot open queue {self.path}: {exc}") from exc
            self._local.con = con
            with self._conns_lock:
                self._conns.append(con)
        return con

    class _Tx:
        def __init__(self, q):
            self.q = q

        def __enter__(self):
            try:
                self.con = self.q._conn()
                self.con.execute("BEGIN IMMEDIATE")
            except sqlite3.Error as exc:
                raise QueueUnavailable(str(exc)) from exc
            return self.con

        def __exit__(self, et, ev, tb):
            try:
                self.con.execute("COMMIT" if et is None else "ROLLBACK")
            except sqlite3.Error as exc:
                if et is None:
                    raise QueueUnavailable(str(exc)) from exc
            if isinstance(ev, sqlite3.Error):
                raise QueueUnavailable(str(ev)) from ev
            return False

    def _tx(self):
        return self._Tx(self)

    def enqueue(self, chunk_key: str) -> WorkOrder:
        return self.enqueue_many([chunk_key])[0]

    def enqueue_many(self, chunk_keys: Iterable[str]) -> List[WorkOrder]:
        """Enqueue all keys in one transaction, in the given order."""
        now = self.clock()
        out = []
        with self._tx() as con:
            for key in chunk_keys:
                oid = uuid.uuid4().hex
                con.execute("INSERT INTO orders(order_id, chunk_key, enqueued_at) VALUES (?,?,?)",
                            (oid, key, now))
                out.append(WorkOrder(oid, key, 1, _utc(now)))
        return out

    def dequeue(self) -> Optional[WorkOrder]:
        """Lease the oldest visible order, or return None."""
        now = self.clock()
        with self._tx() as con:
            row = con.execute(
                "SELECT seq, order_id, chunk_key, enqueued_at, deliveries FROM orders "
                "WHERE lease_until IS NULL OR lease_until <= ? ORDER BY seq LIMIT 1",
                (now,)).fetchone()
            if row is None:
                return None
            seq, oid, key, enq, deliveries = row
            lease = now + self.visibility_timeout
            con.execute("UPDATE orders SET deliveries = ?, lease_until = ? WHERE seq = ?",
                        (deliveries + 1, lease, seq))
        return WorkOrder(oid, key, deliveries + 1, _utc(enq), lease)

    def ack(self, order_id: str) -> bool:
        """Remove an order for good. Unknown or already-acked ids are a no-op."""
        with self._tx() as con:
            removed = con.execute("DELETE FROM orders WHERE order_id = ?", (order_id,)).rowcount
        if not removed:
            log.warning("ack for unknown order %s ignored", order_id)
        return bool(removed)

    def __len__(self):
        return self._conn().execute("SELECT COUNT(*) FROM orders").fetchone()[0]

    def visible_count(self) -> int:
        return self._conn().execute(
            "SELECT COUNT(*) FROM orders WHERE lease_until IS NULL OR lease_until <= ?",
            (self.clock(),)).fetchone()[0]

    def orders(self) -> List[WorkOrder]:
        rows = self._conn().execute(
            "SELECT order_id, chunk_key, deliveries, enqueued_at, lease_until FROM orders "
            "ORDER BY seq").fetchall()
        return [WorkOrder(o, k, max(d, 1), _utc(e), lu) for o, k, d, e, lu in rows]

    def close(self):
        with self._conns_lock:
            for con in self._conns:
                try:
                    con.close()
                except sqlite3.Error:
                    pass
            self._conns.clear()
        self._local = threading.local()


def _utc(ts: float) -> datetime:
    return datetime.fromtimestamp(ts, tz=timezone.utc)


# module-level verbs mirroring the operation names
def dequeue_order(queue: WorkQueue) -> Optional[WorkOrder]:
    return queue.dequeue()


def ack_order(queue: WorkQueue, order_id: str) -> None:
    queue.ack(order_id)

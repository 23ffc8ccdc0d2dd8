"""Coordinator: poll the chunk store and enqueue one work order per new chunk."""
import fcntl
import logging
import os
import time
from datetime import datetime, timezone
from typing import Callable, Optional, Tuple

from .chunks import ChunkStore, Watermark, list_new_chunks, load_watermark, save_watermark
from .queue import WorkQueue

log = logging.getLogger(__name__)


class CoordinatorLocked(RuntimeError):
    """Another coordinator already holds the lock file."""


class CoordinatorLock:
    """Exclusive advisory lock held for the coordinator's lifetime."""

    def __init__(self, path):
        self.path = os.fspath(path)
        self._fh = None

    def acquire(self):
        fh = open(self.path, "a+")
        try:
            fcntl.flock(fh.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError as exc:
            fh.close()
            raise CoordinatorLocked(f"coordinator lock {self.path} is held elsewhere") from exc
        fh.seek(0)
        fh.truncate()
        fh.write(str(os.getpid()))
        fh.flush()
        self._fh = fh
        return self

    def release(self):
        if self._fh is not None:
            fcntl.flock(self._fh.fileno(), fcntl.LOCK_UN)
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self.acquire()

    def __exit__(self, *exc):
        self.release()


def coordinator_tick(store: ChunkStore, queue: WorkQueue, watermark_path,
                     after_enqueue: Optional[Callable[[], None]] = None
                     ) -> Tuple[int, Watermark]:
    """Enqueue every chunk newer than the watermark, then persist the watermark.

    A failure in listing or enqueueing leaves the watermark untouched. A crash
    between enqueue and persist re-enqueues the same chunks on the next tick;
    idempotent processing absorbs that. ``after_enqueue`` is a test hook that
    runs in exactly that window.
    """
    wm = load_watermark(watermark_path)
    keys = list_new_chunks(store, wm)
    if not keys:
        return 0, wm
    queue.enqueue_many(keys)
    if after_enqueue is not None:
        after_enqueue()
    new_wm = Watermark(max(keys[-1], wm.last_key), datetime.now(timezone.utc))
    save_watermark(watermark_path, new_wm)
    log.info("enqueued %d chunk(s), watermark -> %s", len(keys), new_wm.last_key)
    return len(keys), new_wm


def run_coordinator(store: ChunkStore, queue: WorkQueue, watermark_path, lock_path,
                    poll_interval: float, max_ticks: Optional[int] = None,
                    sleep: Callable[[float], None] = time.sleep):
    with CoordinatorLock(lock_path):
        ticks = 0
        while max_ticks is None or ticks < max_ticks:
            try:
                coordinator_tick(store, queue, watermark_path)
            except Exception as exc:  # keep polling; the next tick retries
                log.error("coordinator tick failed: %s", exc)
            ticks += 1
            if max_ticks is None or ticks < max_ticks:
                sleep(poll_interval)

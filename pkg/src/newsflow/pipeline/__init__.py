"""Chunk store, coordinator, durable work queue and workers."""
from .chunks import (DEFAULT_MAX_ITEMS, ChunkStore, ChunkStoreError, DataChunk, Watermark,
                     ingest, is_chunk_key, list_new_chunks, load_watermark, make_chunk_key,
                     save_watermark)
from .coordinator import CoordinatorLock, CoordinatorLocked, coordinator_tick, run_coordinator
from .queue import QueueUnavailable, WorkOrder, WorkQueue, ack_order, dequeue_order
from .worker import (ProcessReport, Stages, WorkerCrash, handle_order, process_chunk,
                     run_workers)

__all__ = [
    "DEFAULT_MAX_ITEMS", "ChunkStore", "ChunkStoreError", "CoordinatorLock", "CoordinatorLocked",
    "DataChunk", "ProcessReport", "QueueUnavailable", "Stages", "Watermark", "WorkOrder",
    "WorkQueue", "WorkerCrash", "ack_order", "coordinator_tick", "dequeue_order", "handle_order",
    "ingest", "is_chunk_key", "list_new_chunks", "load_watermark", "make_chunk_key",
    "process_chunk", "run_coordinator", "run_workers", "save_watermark",
]

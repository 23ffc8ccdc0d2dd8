"""Crash-injection harness: drive coordinator and workers on a simulated clock.

A *plan* says where things go wrong: the coordinator may die between
enqueueing and persisting its watermark, and individual deliveries may
crash at an item, just before the index write or just before the ack, or
stall past the visibility timeout so that another worker picks up the
same order while the first is still busy. A crashed worker loses all
in-memory state; the index and the dedup register are reopened from disk.
"""
import os
import random
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Dict, Optional, Tuple

from ..dedup import SqliteRegister
from ..index import NewsIndex
from .chunks import ChunkStore
from .coordinator import coordinator_tick
from .queue import WorkQueue
from .worker import Stages, WorkerCrash, handle_order

FIXED_INDEXED_AT = datetime(2020, 1, 1, tzinfo=timezone.utc)


class CoordinatorCrash(BaseException):
    pass


class SimClock:
    def __init__(self, t0: float = 1_000_000.0):
        self.t = t0

    def __call__(self) -> float:
        return self.t

    def advance(self, dt: float):
        self.t += dt


@dataclass
class CrashPlan:
    coordinator_crash: bool = False
    # delivery number (1-based, global) -> (kind, point, item index)
    # kind is "crash" or "stall"; point is "item", "index" or "ack"
    deliveries: Dict[int, Tuple[str, str, int]] = field(default_factory=dict)
    # after a crash, let the lease expire before the next dequeue
    expire_immediately: bool = True

    @classmethod
    def random(cls, rng: random.Random, n_chunks: int, chunk_len: int,
               crash_rate: float = 0.5) -> "CrashPlan":
        plan = cls(coordinator_crash=rng.random() < 0.5,
                   expire_immediately=rng.random() < 0.5)
        horizon = 2 * n_chunks + 2
        for d in range(1, horizon + 1):
            if rng.random() < crash_rate:
                kind = "stall" if rng.random() < 0.25 else "crash"
                point = rng.choice(("item", "item", "index", "ack"))
                plan.deliveries[d] = (kind, point, rng.randrange(max(chunk_len, 1)))
        if not plan.deliveries and not plan.coordinator_crash:
            plan.deliveries[1] = ("crash", "item", rng.randrange(max(chunk_len, 1)))
        return plan


@dataclass
class HarnessResult:
    dump: str
    deliveries: int
    crashes: int
    stalls: int
    enqueued: int


class _Run:
    def __init__(self, chunk_dir, state_dir, stages: Stages, plan: CrashPlan,
                 visibility_timeout: float, register_factory=SqliteRegister):
        os.makedirs(state_dir, exist_ok=True)
        self.store = ChunkStore(chunk_dir)
        self.state_dir = state_dir
        self.clock = SimClock()
        self.vt = visibility_timeout
        self.queue = WorkQueue(os.path.join(state_dir, "queue.db"), visibility_timeout,
                               self.clock)
        self.stages = stages
        self.plan = plan
        self.deliveries = self.crashes = self.stalls = self.enqueued = 0
        self.register_factory = register_factory
        self._registers = []
        self._open()

    def _open(self):
        # a fresh worker process: index replayed from disk, new register connection.
        # Handles of a stalled (still running) worker stay open until close().
        self.index = NewsIndex(os.path.join(self.state_dir, "index.jsonl"))
        self.register = self.register_factory(os.path.join(self.state_dir, "register.db"))
        self._registers.append(self.register)

    def coordinate(self):
        wm_path = os.path.join(self.state_dir, "watermark.json")

        def die():
            raise CoordinatorCrash()

        if self.plan.coordinator_crash:
            try:
                coordinator_tick(self.store, self.queue, wm_path, after_enqueue=die)
            except CoordinatorCrash:
                self.enqueued += len(self.queue)
        n, _ = coordinator_tick(self.store, self.queue, wm_path)
        self.enqueued += n

    def deliver(self) -> bool:
        order = self.queue.dequeue()
        if order is None:
            return False
        self.deliveries += 1
        spec = self.plan.deliveries.get(self.deliveries)
        if spec is None:
            fault = None
        else:
            kind, point, at = spec

            def fault(p, i, kind=kind, point=point, at=at):
                if p != point or (p == "item" and i != at):
                    return
                if kind == "crash":
                    raise WorkerCrash()
                # stall: the lease runs out and a second worker takes the same order
                self.stalls += 1
                self.clock.advance(self.vt + 1)
                self.deliver()

        try:
            handle_order(order, self.store, self.stages, self.index, self.register, self.queue,
                         fault)
        except WorkerCrash:
            self.crashes += 1
            self._open()
            if self.plan.expire_immediately:
                self.clock.advance(self.vt + 1)
        return True

    def drain(self):
        while len(self.queue):
            if not self.deliver():
                self.clock.advance(self.vt + 1)

    def close(self):
        for reg in self._registers:
            reg.close()
        self.queue.close()


def run_schedule(chunk_dir, state_dir, stages: Stages, plan: Optional[CrashPlan] = None,
                 visibility_timeout: float = 60.0, register_factory=SqliteRegister
                 ) -> HarnessResult:
    """Process every chunk under ``plan`` and return the final on-disk index.

    ``register_factory(path)`` opens the dedup register for each (re)started
    worker; tests swap in deliberately broken registers.
    """
    stages = replace(stages, clock=lambda: FIXED_INDEXED_AT)
    run = _Run(chunk_dir, state_dir, stages, plan or CrashPlan(), visibility_timeout,
               register_factory)
    try:
        run.coordinate()
        run.drain()
    finally:
        run.close()
    dump = NewsIndex(os.path.join(state_dir, "index.jsonl")).dump()
    return HarnessResult(dump, run.deliveries, run.crashes, run.stalls, run.enqueued)

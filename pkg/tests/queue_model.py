"""Reference model for the work queue, driven by random simulated-clock schedules."""
import random

from newsflow.pipeline import WorkQueue
from newsflow.pipeline.harness import SimClock


def queue_schedule(path, seed, n_ops=40, timeout=10.0):
    """Random enqueue/dequeue/ack/advance schedule checked against a reference model.

    Returns (double_leases, missed_redeliveries, redeliveries)."""
    rng = random.Random(seed)
    clock = SimClock()
    q = WorkQueue(path, timeout, clock)
    model = []  # [order_id, lease_until or None, deliveries] in enqueue order
    leases = {}  # order_id -> lease end of the last grant
    held = []
    double, missed, redelivered = 0, 0, 0
    for _ in range(n_ops):
        op = rng.random()
        now = clock()
        if op < 0.25:
            o = q.enqueue(f"k{rng.randrange(1000)}")
            model.append([o.order_id, None, 0])
        elif op < 0.65:
            visible = [m for m in model if m[1] is None or m[1] <= now]
            got = q.dequeue()
            if not visible:
                assert got is None
                continue
            if got is None:
                missed += 1
                continue
            head = visible[0]
            assert got.order_id == head[0]
            if got.order_id in leases and leases[got.order_id] > now:
                double += 1
            if head[2] >= 1:
                redelivered += 1
            head[1], head[2] = now + timeout, head[2] + 1
            assert got.attempt == head[2]
            leases[got.order_id] = now + timeout
            held.append(got.order_id)
        elif op < 0.8 and held:
            oid = held.pop(rng.randrange(len(held)))
            q.ack(oid)
            model = [m for m in model if m[0] != oid]
        else:
            clock.advance(rng.choice((0.5, 3.0, timeout - 0.5, timeout, 2 * timeout)))
    assert [m[0] for m in model] == [o.order_id for o in q.orders()]
    q.close()
    return double, missed, redelivered

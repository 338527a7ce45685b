"""Deterministic discrete-event core: virtual clock, ordered event queue, seeded streams.

Events are totally ordered by (fire_at, seq) where seq is a monotone insertion
counter, so simultaneous events pop in FIFO order and every run with the same
seed and inputs replays an identical dispatch sequence.
"""

import hashlib
import heapq
import random


class SimulationError(Exception):
    """Fatal model violation (e.g. scheduling into the past)."""


class Event:
    """A scheduled occurrence. The object doubles as its cancellation handle."""

    __slots__ = ("fire_at", "seq", "kind", "target", "fn", "args", "cancelled")

    def __init__(self, fire_at, seq, kind, target, fn, args):
        self.fire_at = fire_at
        self.seq = seq
        self.kind = kind
        self.target = target
        self.fn = fn
        self.args = args
        self.cancelled = False

    def __lt__(self, other):
        return (self.fire_at, self.seq) < (other.fire_at, other.seq)

    def __repr__(self):
        return f"Event({self.fire_at:.6f}, #{self.seq}, {self.kind}, target={self.target})"


class Simulator:
    """Single-threaded virtual-time event loop.

    One instance owns one simulation; instances share nothing, so whole
    simulations can run in parallel processes.
    """

    def __init__(self, record_dispatch=False):
        self._queue = []
        self._now = 0.0
        self._seq = 0
        self.dispatch_log = [] if record_dispatch else None

    def now(self):
        return self._now

    def schedule(self, fire_at, kind, fn, *args, target=None):
        """Enqueue fn(*args) to run at fire_at. Returns the event as a handle."""
        if fire_at < self._now:
            raise SimulationError(
                f"schedule at t={fire_at} is in the past (now={self._now})"
            )
        ev = Event(fire_at, self._seq, kind, target, fn, args)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def schedule_in(self, delay, kind, fn, *args, target=None):
        return self.schedule(self._now + delay, kind, fn, *args, target=target)

    def cancel(self, event):
        """Remove a pending event. True if it was pending, False if it already
        fired or was already cancelled. Cancelled events stay in the heap and
        are skipped on pop (lazy deletion)."""
        if event.cancelled or event.fn is None:
            return False
        event.cancelled = True
        return True

    def run_until(self, t_end):
        """Dispatch all events with fire_at <= t_end in (fire_at, seq) order.

        The clock lands exactly on t_end. Returns the number of events
        dispatched (cancelled events are skipped and not counted)."""
        if t_end < self._now:
            raise SimulationError(f"run_until({t_end}) is in the past (now={self._now})")
        queue = self._queue
        processed = 0
        log = self.dispatch_log
        while queue and queue[0].fire_at <= t_end:
            ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            self._now = ev.fire_at
            fn = ev.fn
            ev.fn = None  # marks "already fired" for cancel()
            if log is not None:
                log.append((ev.fire_at, ev.seq, ev.kind, ev.target))
            fn(*ev.args)
            processed += 1
        self._now = t_end
        return processed

    def pending_count(self):
        return sum(1 for ev in self._queue if not ev.cancelled)


def derive_rng(master_seed, stream_name):
    """Stable per-concern RNG stream keyed off the master seed.

    Derivation goes through SHA-256 so it is identical on every platform and
    adding draws to one stream never perturbs another."""
    digest = hashlib.sha256(f"{master_seed}:{stream_name}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def rng_uniform(rng, lo, hi):
    """Uniform draw in [lo, hi); degenerate lo == hi returns lo."""
    if lo > hi:
        raise SimulationError(f"rng_uniform bounds reversed: [{lo}, {hi})")
    return lo + (hi - lo) * rng.random()

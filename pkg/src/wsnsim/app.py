"""Application layer: sensor reporting, field sectioning, proxy selection,
and the proxy relay toward the sink.

A Message survives the proxy relay with its id and creation time intact, so
the end-to-end delay always spans origin to final sink. Sources are gated by
transport readiness: a sensor skips a reporting tick when its connection has
not drained the previous report, which is the flow-control coupling that
keeps generated/delivered accounting honest under congestion.
"""

import math
from dataclasses import dataclass

from .engine import rng_uniform


class TopologyError(Exception):
    """Scenario cannot be laid out (e.g. a quadrant with no candidate node)."""


@dataclass
class Message:
    msg_id: int
    origin: int
    created_at: float
    size_bytes: int
    delivered_at: float = None
    proxy_arrived_at: float = None
    proxy_departed_at: float = None


def section_of(x, y, side):
    """Quadrant index 0..3; boundary coordinates fall to the lower index."""
    mid = side / 2.0
    return (1 if x > mid else 0) + (2 if y > mid else 0)


def assign_sections(positions, side):
    """Freeze each node's quadrant from its position (taken at t=0)."""
    return {nid: section_of(x, y, side) for nid, (x, y) in positions.items()}


def section_centroids(side):
    q = side / 4.0
    return [(q, q), (3 * q, q), (q, 3 * q), (3 * q, 3 * q)]


def select_proxies(mode, sections, positions, side, sink_pos, sink_id):
    """Pick one proxy per quadrant.

    "middle" takes the node nearest the quadrant centroid; "sink_neighbor"
    the node nearest the sink. Ties break to the lowest node id; the sink
    itself is never a candidate. Raises TopologyError on an empty quadrant."""
    centroids = section_centroids(side)
    chosen = {}
    for sec in range(4):
        target = centroids[sec] if mode == "middle" else sink_pos
        best = None
        for nid in sorted(k for k in positions if k != sink_id):
            if sections[nid] != sec:
                continue
            x, y = positions[nid]
            d = math.hypot(x - target[0], y - target[1])
            if best is None or d < best[0]:
                best = (d, nid)
        if best is None:
            raise TopologyError(f"quadrant {sec} has no proxy candidate")
        chosen[sec] = best[1]
    return chosen


class MessageChannel:
    """Maps whole messages onto a connection's byte stream.

    The writer appends (stream_end, message) marks; the reader side fires
    on_message exactly when the in-order delivered prefix crosses a mark.
    A connection reset discards marks for data that will never arrive."""

    def __init__(self, conn, on_message):
        self.conn = conn
        self.on_message = on_message
        self._marks = []
        self._head = 0
        conn.receiver.on_advance = self._advance
        conn.on_reset.append(self._on_reset)

    def ready(self):
        return self.conn.sender.ready_for_message()

    def write_message(self, msg):
        _start, end = self.conn.sender.write(msg.size_bytes)
        self._marks.append((end, msg))

    def _advance(self, old, new):
        marks = self._marks
        while self._head < len(marks) and marks[self._head][0] <= new:
            msg = marks[self._head][1]
            self._head += 1
            self.on_message(msg)
        if self._head > 256:
            del marks[:self._head]
            self._head = 0

    def _on_reset(self):
        self._marks = []
        self._head = 0


class SensorSource:
    """Emits one fixed-size report every interval, first tick jittered
    uniformly inside one interval. Skips the tick when the transport has not
    drained the previous report (flow control back to the source)."""

    def __init__(self, sim, node_id, channel, interval_s, message_size,
                 metrics, rng, id_counter):
        self.sim = sim
        self.node_id = node_id
        self.channel = channel
        self.interval_s = interval_s
        self.message_size = message_size
        self.metrics = metrics
        self.id_counter = id_counter
        self.skipped = 0
        first = rng_uniform(rng, 0.0, interval_s)
        sim.schedule(first, "app-generate", self._tick, target=node_id)

    def _tick(self):
        if self.channel.ready():
            msg = Message(next(self.id_counter), self.node_id,
                          self.sim.now(), self.message_size)
            self.metrics.record_generation(msg)
            self.channel.write_message(msg)
        else:
            self.skipped += 1
        self.sim.schedule_in(self.interval_s, "app-generate", self._tick,
                             target=self.node_id)


class ProxyRelay:
    """Collects section members' messages and forwards them to the sink in
    batches over one outbound connection.

    The batch flushes every batch_interval or once batch_bytes accumulate,
    whichever comes first. Receive windows advertised to section members
    shrink as the relay backlog (batch queue + outbound unsent bytes) fills,
    so upstream sensors throttle instead of overrunning the proxy."""

    def __init__(self, sim, node_id, section, outbound, batch_interval_s,
                 batch_bytes, backlog_cap_bytes, mss):
        self.sim = sim
        self.node_id = node_id
        self.section = section
        self.outbound = outbound
        self.batch_interval_s = batch_interval_s
        self.batch_bytes = batch_bytes
        self.backlog_cap_bytes = backlog_cap_bytes
        self.mss = mss
        self.queue = []
        self.queue_bytes = 0
        self.foreign_drops = 0
        self._timer = None
        self.inbound_receivers = []
        outbound.conn.sender.on_drain = self._push_window_updates

    def free_window_segments(self):
        backlog = self.queue_bytes + self.outbound.conn.sender.unsent_bytes
        return max(0, (self.backlog_cap_bytes - backlog) // self.mss)

    def attach_inbound(self, conn, sections):
        conn.receiver.window_provider = self.free_window_segments
        self.inbound_receivers.append(conn.receiver)

        def deliver(msg, _relay=self, _sections=sections):
            _relay.on_message(msg, _sections)

        return MessageChannel(conn, deliver)

    def on_message(self, msg, sections):
        if sections.get(msg.origin) != self.section:
            self.foreign_drops += 1
            return
        msg.proxy_arrived_at = self.sim.now()
        self.queue.append(msg)
        self.queue_bytes += msg.size_bytes
        if self.queue_bytes >= self.batch_bytes:
            self.flush()
        elif self._timer is None:
            self._timer = self.sim.schedule_in(
                self.batch_interval_s, "proxy-flush", self._timer_flush,
                target=self.node_id)

    def _timer_flush(self):
        self._timer = None
        self.flush()

    def flush(self):
        if self._timer is not None:
            self.sim.cancel(self._timer)
            self._timer = None
        if not self.queue:
            return
        now = self.sim.now()
        self.queue.sort(key=lambda m: (m.created_at, m.msg_id))
        for msg in self.queue:
            msg.proxy_departed_at = now
            self.outbound.write_message(msg)
        self.queue = []
        self.queue_bytes = 0
        self._push_window_updates()

    def _push_window_updates(self):
        for receiver in self.inbound_receivers:
            receiver.push_window_update()


class SinkApp:
    """Terminal consumer: stamps arrival and reports delivery to metrics."""

    def __init__(self, sim, metrics):
        self.sim = sim
        self.metrics = metrics

    def on_message(self, msg):
        self.metrics.record_delivery(msg, self.sim.now())

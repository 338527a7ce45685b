"""On-demand route discovery in the AODV style.

Kept deliberately small: flooded route requests with duplicate suppression,
route replies along the reverse path, precursor-driven route errors on link
break. No HELLO beacons (breaks surface via MAC retry exhaustion), no local
repair, no gratuitous replies.
"""

from collections import deque
from dataclasses import dataclass, field

from .engine import rng_uniform
from .mac import BROADCAST, Frame, FrameKind

RREQ_BYTES = 24
RREP_BYTES = 20
RERR_BYTES = 20


@dataclass
class RoutingParams:
    route_lifetime_s: float = 10.0
    discovery_timeout_s: float = 1.0
    discovery_retries: int = 2      # extra attempts after the first
    buffer_limit: int = 64          # pending packets per destination
    rebroadcast_jitter_s: float = 0.010


class Packet:
    """Network-layer envelope for one transport segment."""

    __slots__ = ("src", "dst", "size_bytes", "payload")

    def __init__(self, src, dst, size_bytes, payload):
        self.src = src
        self.dst = dst
        self.size_bytes = size_bytes
        self.payload = payload


@dataclass
class RouteEntry:
    dest: int
    next_hop: int
    hop_count: int
    dest_seq: int
    expires_at: float
    precursors: set = field(default_factory=set)


class Rreq:
    __slots__ = ("origin", "origin_seq", "rreq_id", "dest", "dest_seq_min", "hop_count")

    def __init__(self, origin, origin_seq, rreq_id, dest, dest_seq_min, hop_count):
        self.origin = origin
        self.origin_seq = origin_seq
        self.rreq_id = rreq_id
        self.dest = dest
        self.dest_seq_min = dest_seq_min
        self.hop_count = hop_count


class Rrep:
    __slots__ = ("origin", "dest", "dest_seq", "hop_count")

    def __init__(self, origin, dest, dest_seq, hop_count):
        self.origin = origin
        self.dest = dest
        self.dest_seq = dest_seq
        self.hop_count = hop_count


class Rerr:
    __slots__ = ("dest",)

    def __init__(self, dest):
        self.dest = dest


class _Pending:
    __slots__ = ("buffer", "attempt", "timer")

    def __init__(self):
        self.buffer = deque()
        self.attempt = 0
        self.timer = None


class Router:
    """Per-node routing agent. Wire one per node onto the shared MAC."""

    def __init__(self, sim, node_id, mac, params, rng, deliver_fn, stats=None):
        self.sim = sim
        self.node_id = node_id
        self.mac = mac
        self.params = params
        self.rng = rng
        self.deliver_fn = deliver_fn
        self.table = {}
        self.seen_rreqs = set()
        self.last_seq = {}
        self.own_seq = 0
        self.next_rreq_id = 0
        self.pending = {}
        self.stats = stats if stats is not None else {}
        for key in ("rreq_tx", "rerr_tx", "discovery_failures", "buffer_drops",
                    "link_breaks", "data_drops"):
            self.stats.setdefault(key, 0)
        mac.register(node_id, self._on_frame, self._on_link_break)

    # -- table ---------------------------------------------------------------

    def route_lookup(self, dest):
        """Next hop of an unexpired route, or None (caller buffers + discovers)."""
        entry = self.table.get(dest)
        if entry is None:
            return None
        if entry.expires_at <= self.sim.now():
            del self.table[dest]
            return None
        return entry

    def _install(self, dest, next_hop, hop_count, dest_seq):
        if dest == self.node_id:
            return None
        now = self.sim.now()
        cur = self.table.get(dest)
        if cur is not None and cur.expires_at > now:
            if cur.dest_seq > dest_seq:
                return cur
            if cur.dest_seq == dest_seq and cur.hop_count <= hop_count:
                cur.expires_at = now + self.params.route_lifetime_s
                return cur
        entry = RouteEntry(dest, next_hop, hop_count, dest_seq,
                           now + self.params.route_lifetime_s)
        self.table[dest] = entry
        if dest_seq > self.last_seq.get(dest, 0):
            self.last_seq[dest] = dest_seq
        return entry

    # -- data plane ------------------------------------------------------------

    def send_packet(self, packet):
        if packet.dst == self.node_id:
            self.deliver_fn(packet)
            return
        entry = self.route_lookup(packet.dst)
        if entry is not None:
            self._forward(packet, entry)
        else:
            self._buffer_and_discover(packet)

    def _forward(self, packet, entry):
        entry.expires_at = self.sim.now() + self.params.route_lifetime_s
        frame = Frame(self.node_id, entry.next_hop, FrameKind.DATA,
                      packet.size_bytes, packet)
        self.mac.send(self.node_id, frame)

    def _buffer_and_discover(self, packet):
        pending = self.pending.get(packet.dst)
        if pending is None:
            pending = _Pending()
            self.pending[packet.dst] = pending
            pending.buffer.append(packet)
            self._send_rreq(packet.dst)
            self._arm_timer(packet.dst, pending)
        else:
            if len(pending.buffer) >= self.params.buffer_limit:
                pending.buffer.popleft()
                self.stats["buffer_drops"] += 1
            pending.buffer.append(packet)

    # -- discovery ---------------------------------------------------------------

    def _send_rreq(self, dest):
        self.own_seq += 1
        self.next_rreq_id += 1
        rreq = Rreq(self.node_id, self.own_seq, self.next_rreq_id, dest,
                    self.last_seq.get(dest, 0), 0)
        self.seen_rreqs.add((rreq.origin, rreq.rreq_id))
        self.stats["rreq_tx"] += 1
        self.mac.send(self.node_id, Frame(self.node_id, BROADCAST,
                                          FrameKind.ROUTING, RREQ_BYTES, rreq))

    def _arm_timer(self, dest, pending):
        timeout = self.params.discovery_timeout_s * (1 << pending.attempt)
        pending.timer = self.sim.schedule_in(timeout, "rreq-timeout",
                                             self._discovery_timeout, dest,
                                             target=self.node_id)

    def _discovery_timeout(self, dest):
        pending = self.pending.get(dest)
        if pending is None:
            return
        if self.route_lookup(dest) is not None:
            self._resolve_pending(dest)
            return
        if pending.attempt < self.params.discovery_retries:
            pending.attempt += 1
            self._send_rreq(dest)
            self._arm_timer(dest, pending)
        else:
            self.stats["discovery_failures"] += 1
            self.stats["data_drops"] += len(pending.buffer)
            del self.pending[dest]

    def _resolve_pending(self, dest):
        pending = self.pending.pop(dest, None)
        if pending is None:
            return
        if pending.timer is not None:
            self.sim.cancel(pending.timer)
        for packet in pending.buffer:
            self.send_packet(packet)

    # -- frame handling ------------------------------------------------------------

    def _on_frame(self, node_id, frame):
        if frame.kind is FrameKind.DATA:
            self._on_data(frame)
        elif frame.kind is FrameKind.ROUTING:
            msg = frame.payload
            if isinstance(msg, Rreq):
                self._on_rreq(frame.src, msg)
            elif isinstance(msg, Rrep):
                self._on_rrep(frame.src, msg)
            elif isinstance(msg, Rerr):
                self._on_rerr(frame.src, msg)

    def _on_data(self, frame):
        packet = frame.payload
        if packet.dst == self.node_id:
            self.deliver_fn(packet)
            return
        entry = self.route_lookup(packet.dst)
        if entry is not None:
            entry.precursors.add(frame.src)
            self._forward(packet, entry)
        else:
            self._buffer_and_discover(packet)

    def _on_rreq(self, from_id, rreq):
        key = (rreq.origin, rreq.rreq_id)
        if key in self.seen_rreqs:
            return
        self.seen_rreqs.add(key)
        self._install(rreq.origin, from_id, rreq.hop_count + 1, rreq.origin_seq)
        if rreq.dest == self.node_id:
            self.own_seq = max(self.own_seq, rreq.dest_seq_min) + 1
            reply = Rrep(rreq.origin, self.node_id, self.own_seq, 0)
            self.mac.send(self.node_id, Frame(self.node_id, from_id,
                                              FrameKind.ROUTING, RREP_BYTES, reply))
            return
        entry = self.route_lookup(rreq.dest)
        if entry is not None and entry.dest_seq >= rreq.dest_seq_min \
                and entry.next_hop != from_id:
            reply = Rrep(rreq.origin, rreq.dest, entry.dest_seq, entry.hop_count)
            entry.precursors.add(from_id)
            self.mac.send(self.node_id, Frame(self.node_id, from_id,
                                              FrameKind.ROUTING, RREP_BYTES, reply))
            return
        fwd = Rreq(rreq.origin, rreq.origin_seq, rreq.rreq_id, rreq.dest,
                   rreq.dest_seq_min, rreq.hop_count + 1)
        jitter = rng_uniform(self.rng, 0.0, self.params.rebroadcast_jitter_s)
        self.sim.schedule_in(jitter, "rreq-rebroadcast", self._broadcast_rreq, fwd,
                             target=self.node_id)

    def _broadcast_rreq(self, rreq):
        self.stats["rreq_tx"] += 1
        self.mac.send(self.node_id, Frame(self.node_id, BROADCAST,
                                          FrameKind.ROUTING, RREQ_BYTES, rreq))

    def _on_rrep(self, from_id, rrep):
        entry = self._install(rrep.dest, from_id, rrep.hop_count + 1, rrep.dest_seq)
        if rrep.origin == self.node_id:
            self._resolve_pending(rrep.dest)
            return
        rev = self.route_lookup(rrep.origin)
        if rev is None:
            return  # reverse path vanished; origin's retry will recover
        if entry is not None:
            entry.precursors.add(rev.next_hop)
        fwd = Rrep(rrep.origin, rrep.dest, rrep.dest_seq, rrep.hop_count + 1)
        self.mac.send(self.node_id, Frame(self.node_id, rev.next_hop,
                                          FrameKind.ROUTING, RREP_BYTES, fwd))

    # -- failure handling ------------------------------------------------------------

    def _on_link_break(self, node_id, frame):
        self.stats["link_breaks"] += 1
        next_hop = frame.dst
        if frame.kind is FrameKind.DATA:
            self.stats["data_drops"] += 1
        broken = [d for d, e in self.table.items() if e.next_hop == next_hop]
        for dest in broken:
            entry = self.table.pop(dest)
            self._send_rerrs(dest, entry.precursors)

    def _on_rerr(self, from_id, rerr):
        entry = self.table.get(rerr.dest)
        if entry is not None and entry.next_hop == from_id:
            del self.table[rerr.dest]
            self._send_rerrs(rerr.dest, entry.precursors)

    def _send_rerrs(self, dest, precursors):
        for upstream in sorted(precursors):
            self.stats["rerr_tx"] += 1
            self.mac.send(self.node_id, Frame(self.node_id, upstream,
                                              FrameKind.ROUTING, RERR_BYTES,
                                              Rerr(dest)))

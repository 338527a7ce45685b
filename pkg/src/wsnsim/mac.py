"""Simplified IEEE 802.11 DCF: carrier sense, slotted backoff, collisions,
bounded retries.

Channel model: zero propagation delay, unit-disk carrier sense at radio range,
no capture (any overlap at a listener garbles every overlapped frame there).
MAC-level acks are instantaneous out-of-band notifications so that an
uncontended hop costs exactly DIFS + backoff + airtime; failed unicasts are
detected after ack_wait_s and retried with a doubled contention window.
"""

from collections import deque
from dataclasses import dataclass
from enum import Enum

BROADCAST = -1


class FrameKind(Enum):
    DATA = "data"
    MAC_ACK = "mac-ack"  # modeled out-of-band; kept for completeness
    ROUTING = "routing"


@dataclass
class MacParams:
    data_rate_bps: float = 2_000_000.0
    difs_s: float = 50e-6
    slot_s: float = 20e-6
    cw_min: int = 31            # initial contention window, in slots
    cw_max: int = 1023
    retry_limit: int = 7        # retransmissions after the first attempt
    overhead_bytes: int = 58    # preamble + MAC header per frame
    ack_wait_s: float = 300e-6  # failure detection delay for unicasts
    queue_limit: int = 50


class Frame:
    __slots__ = ("src", "dst", "kind", "payload_bytes", "payload",
                 "retry_count", "tx_start", "tx_end")

    def __init__(self, src, dst, kind, payload_bytes, payload):
        self.src = src
        self.dst = dst
        self.kind = kind
        self.payload_bytes = payload_bytes
        self.payload = payload
        self.retry_count = 0
        self.tx_start = 0.0
        self.tx_end = 0.0


class _Transmission:
    __slots__ = ("id", "sender", "frame", "start", "end", "listeners")

    def __init__(self, tx_id, sender, frame, start, end, listeners):
        self.id = tx_id
        self.sender = sender
        self.frame = frame
        self.start = start
        self.end = end
        self.listeners = listeners


class _NodeMac:
    __slots__ = ("queue", "attempt", "tx_until", "active_rx", "pending",
                 "on_frame", "on_link_break")

    def __init__(self):
        self.queue = deque()
        self.attempt = 0
        self.tx_until = 0.0
        self.active_rx = {}   # tx_id -> [end_time, garbled]
        self.pending = False  # a sense/tx event is scheduled for the head frame
        self.on_frame = None
        self.on_link_break = None


def overlaps(a_start, a_end, b_start, b_end):
    return a_start < b_end and b_start < a_end


def resolve_reception(frames):
    """Decide which of the frames a receiver decodes.

    A frame is delivered iff no other frame overlaps its [tx_start, tx_end)
    air interval; any overlap garbles both sides (no capture effect).
    Returns the delivered frames in transmission order."""
    delivered = []
    for f in frames:
        if not any(g is not f and overlaps(f.tx_start, f.tx_end, g.tx_start, g.tx_end)
                   for g in frames):
            delivered.append(f)
    delivered.sort(key=lambda f: f.tx_start)
    return delivered


class MacLayer:
    def __init__(self, sim, params, neighbors_fn, rng):
        self.sim = sim
        self.params = params
        self.neighbors = neighbors_fn
        self.rng = rng
        self._nodes = {}
        self._tx_counter = 0
        self.stats = {
            "frames_sent": 0, "frames_delivered": 0, "collisions": 0,
            "queue_drops": 0, "retry_drops": 0,
        }

    def register(self, node_id, on_frame, on_link_break=None):
        st = _NodeMac()
        st.on_frame = on_frame
        st.on_link_break = on_link_break
        self._nodes[node_id] = st

    def airtime(self, payload_bytes):
        return (payload_bytes + self.params.overhead_bytes) * 8.0 / self.params.data_rate_bps

    def send(self, node_id, frame):
        """Queue a frame for CSMA/CA transmission from node_id."""
        if frame.dst == frame.src:
            raise ValueError("frame addressed to its own sender")
        st = self._nodes[node_id]
        if len(st.queue) >= self.params.queue_limit:
            self.stats["queue_drops"] += 1
            return
        st.queue.append(frame)
        if not st.pending:
            st.attempt = 0
            self._sense(node_id)

    # -- channel state ----------------------------------------------------

    def _busy(self, st, now):
        return st.tx_until > now or bool(st.active_rx)

    def _busy_until(self, st):
        until = st.tx_until
        for end, _garbled in st.active_rx.values():
            if end > until:
                until = end
        return until

    # -- transmit pipeline -------------------------------------------------

    def _sense(self, node_id):
        st = self._nodes[node_id]
        if not st.queue:
            st.pending = False
            return
        st.pending = True
        now = self.sim.now()
        if self._busy(st, now):
            # Defer to the end of the current busy period. The blocking
            # tx-end event carries a lower seq, so at that instant the
            # channel state is already updated before we re-sense.
            self.sim.schedule(self._busy_until(st), "mac-sense", self._sense, node_id,
                              target=node_id)
            return
        cw = min((self.params.cw_min + 1) << st.attempt, self.params.cw_max + 1) - 1
        slots = self.rng.randint(0, cw)
        start_at = now + self.params.difs_s + slots * self.params.slot_s
        self.sim.schedule(start_at, "mac-tx-start", self._tx_start, node_id,
                          target=node_id)

    def _tx_start(self, node_id):
        st = self._nodes[node_id]
        if not st.queue:
            st.pending = False
            return
        now = self.sim.now()
        if self._busy(st, now):
            # Channel got claimed during our DIFS/backoff: defer, fresh backoff.
            self.sim.schedule(self._busy_until(st), "mac-sense", self._sense, node_id,
                              target=node_id)
            return
        frame = st.queue[0]
        frame.retry_count = st.attempt
        frame.tx_start = now
        frame.tx_end = now + self.airtime(frame.payload_bytes)
        self._tx_counter += 1
        listeners = list(self.neighbors(node_id))
        tx = _Transmission(self._tx_counter, node_id, frame, now, frame.tx_end, listeners)
        self.stats["frames_sent"] += 1
        st.tx_until = frame.tx_end
        # Half duplex: anything we were hearing is lost while we talk.
        for entry in st.active_rx.values():
            entry[1] = True
        for lid in listeners:
            lst = self._nodes[lid]
            garbled = lst.tx_until > now  # listener itself mid-transmission
            if lst.active_rx:
                for entry in lst.active_rx.values():
                    entry[1] = True
                garbled = True
            lst.active_rx[tx.id] = [tx.end, garbled]
        self.sim.schedule(tx.end, "mac-tx-end", self._tx_end, tx, target=node_id)

    def _tx_end(self, tx):
        delivered_to = []
        for lid in tx.listeners:
            entry = self._nodes[lid].active_rx.pop(tx.id, None)
            if entry is None:
                continue
            if entry[1]:
                self.stats["collisions"] += 1
            else:
                delivered_to.append(lid)
        frame = tx.frame
        sender = self._nodes[tx.sender]
        if frame.dst == BROADCAST:
            for lid in delivered_to:
                cb = self._nodes[lid].on_frame
                if cb is not None:
                    cb(lid, frame)
            self._complete(tx.sender, sender)
        elif frame.dst in delivered_to:
            self.stats["frames_delivered"] += 1
            self._complete(tx.sender, sender)
            cb = self._nodes[frame.dst].on_frame
            if cb is not None:
                cb(frame.dst, frame)
        else:
            # No MAC ack will come; retry after the ack window.
            self.sim.schedule_in(self.params.ack_wait_s, "mac-retry",
                                 self._retry, tx.sender, target=tx.sender)

    def _retry(self, node_id):
        st = self._nodes[node_id]
        if not st.queue:
            st.pending = False
            return
        st.attempt += 1
        if st.attempt > self.params.retry_limit:
            frame = st.queue.popleft()
            self.stats["retry_drops"] += 1
            st.attempt = 0
            self._sense(node_id)
            if st.on_link_break is not None:
                st.on_link_break(node_id, frame)
            return
        self._sense(node_id)

    def _complete(self, node_id, st):
        st.queue.popleft()
        st.attempt = 0
        self._sense(node_id)

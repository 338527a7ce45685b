"""Reliable byte-stream transport with pluggable congestion control.

Four variants share one sender state machine:

* Tcp      -- Tahoe-style baseline: fast retransmit at 3 dup acks, then a full
              window reset to slow start (no fast recovery).
* Reno     -- fast retransmit + fast recovery; exits recovery on any new ack.
* NewReno  -- Reno plus partial-ack handling: holes are retransmitted inside a
              single recovery episode bounded by the `recover` mark.
* Vegas    -- RTT-based window adjustment once per round (alpha/beta/gamma),
              modified slow start (doubles every other round), early
              retransmit on the 1st/2nd dup ack via a fine-grained timer, and
              a 25% (not 50%) window cut on confirmed loss.

Segments are structured values, not wire bytes; a fixed header size is charged
to the channel for every segment. Congestion-avoidance growth adds exactly one
segment per round: each ack adds 1/cwnd with cwnd frozen at the round start.
"""

import math
from dataclasses import dataclass
from enum import Enum

from .engine import SimulationError


class Variant(Enum):
    TCP = "tcp"
    RENO = "reno"
    NEWRENO = "newreno"
    VEGAS = "vegas"


class TcpState(Enum):
    SLOW_START = "slow_start"
    CONGESTION_AVOIDANCE = "congestion_avoidance"
    FAST_RECOVERY = "fast_recovery"


@dataclass
class TcpParams:
    mss: int = 512
    header_bytes: int = 40
    rwnd_segments: int = 64
    init_cwnd: float = 1.0
    init_ssthresh: float = 64.0
    rto_initial_s: float = 1.0
    rto_min_s: float = 0.2
    rto_max_s: float = 60.0
    vegas_alpha: float = 1.0
    vegas_beta: float = 3.0
    vegas_gamma: float = 1.0
    vegas_cut: float = 0.25
    vegas_floor: float = 2.0  # rate-based decreases never drop below 2 MSS
    max_consecutive_timeouts: int = 12
    persist_interval_s: float = 2.0


class Segment:
    __slots__ = ("conn_id", "seq", "ack", "payload_bytes", "is_ack",
                 "syn", "syn_ack", "rwnd", "sent_at", "epoch")

    def __init__(self, conn_id, seq=0, ack=0, payload_bytes=0, is_ack=False,
                 syn=False, syn_ack=False, rwnd=0, sent_at=0.0, epoch=0):
        self.conn_id = conn_id
        self.seq = seq
        self.ack = ack
        self.payload_bytes = payload_bytes
        self.is_ack = is_ack
        self.syn = syn
        self.syn_ack = syn_ack
        self.rwnd = rwnd
        self.sent_at = sent_at
        self.epoch = epoch


class _SegInfo:
    __slots__ = ("seq", "length", "sent_at", "retransmitted")

    def __init__(self, seq, length, sent_at):
        self.seq = seq
        self.length = length
        self.sent_at = sent_at
        self.retransmitted = False


class TcpSender:
    def __init__(self, sim, conn, params, variant, transmit_fn):
        self.sim = sim
        self.conn = conn
        self.params = params
        self.variant = variant
        self.transmit = transmit_fn
        self.trace = None  # optional list of (t, cwnd, ssthresh, state)
        self.on_drain = None  # fired when the unsent backlog empties
        self.on_ready = None  # fired when ready_for_message() turns true
        self.stats = {"data_tx": 0, "retransmits": 0, "timeouts": 0, "resets": 0,
                      "fast_recoveries": 0, "fast_retransmits": 0}
        self.established = False
        self._syn_timer = None
        self._syn_rto = params.rto_initial_s
        self._init_stream_state()

    def _init_stream_state(self):
        p = self.params
        self.state = TcpState.SLOW_START
        self.cwnd = p.init_cwnd
        self.ssthresh = p.init_ssthresh
        self.snd_una = 0
        self.snd_nxt = 0
        self.stream_end = 0          # total bytes written by the app
        self.segments = {}           # seq -> _SegInfo for in-flight data
        self.dup_acks = 0
        self.recover = 0
        self.srtt = None
        self.rttvar = 0.0
        self.rto = p.rto_initial_s
        self.rwnd_peer = p.rwnd_segments
        self.consecutive_timeouts = 0
        self._rto_timer = None
        self._persist_timer = None
        self._ca_base = self.cwnd
        self._ca_round_mark = 0
        # Vegas bookkeeping
        self.base_rtt = math.inf
        self.last_rtt = None
        self._round_mark = 0
        self._round_samples = 0
        self._ss_grow_turn = True
        self._cut_guard = 0
        self._rexmit_check_armed = False

    # -- lifecycle ---------------------------------------------------------

    def open(self):
        self._send_syn()

    def _send_syn(self):
        seg = Segment(self.conn.conn_id, syn=True, epoch=self.conn.epoch,
                      sent_at=self.sim.now())
        self.transmit(seg, self.params.header_bytes)
        self._syn_timer = self.sim.schedule_in(
            self._syn_rto, "tcp-syn-retry", self._syn_retry)

    def _syn_retry(self):
        self._syn_timer = None
        if self.established:
            return
        self._syn_rto = min(self._syn_rto * 2.0, self.params.rto_max_s)
        self._send_syn()

    def _establish(self):
        if self.established:
            return
        self.established = True
        if self._syn_timer is not None:
            self.sim.cancel(self._syn_timer)
            self._syn_timer = None
        self.try_send()

    def _reset_connection(self):
        """Give up after repeated timeouts: all unacked and buffered data is
        lost and the connection re-establishes from a fresh stream."""
        self.stats["resets"] += 1
        if self._rto_timer is not None:
            self.sim.cancel(self._rto_timer)
        if self._persist_timer is not None:
            self.sim.cancel(self._persist_timer)
        self.conn.handle_reset()
        self.established = False
        self._syn_rto = self.params.rto_initial_s
        self._init_stream_state()
        self._send_syn()

    # -- app interface -------------------------------------------------------

    @property
    def unsent_bytes(self):
        return self.stream_end - self.snd_nxt

    def flight_segments(self):
        return (self.snd_nxt - self.snd_una) / self.params.mss

    def effective_window(self):
        return min(self.cwnd, float(self.rwnd_peer))

    def ready_for_message(self):
        """Admission gate for sources: accept a new message only when the
        pipeline would start transmitting it immediately (previous data handed
        off and the window open). Blocked sources hold one pending report and
        skip further ticks (flow control, no drop)."""
        return (self.established
                and self.unsent_bytes == 0
                and self.flight_segments() < self.effective_window())

    def write(self, nbytes):
        """Append nbytes to the stream. Returns the (start, end) byte span."""
        if nbytes <= 0:
            raise ValueError("write requires a positive byte count")
        start = self.stream_end
        self.stream_end += nbytes
        if self.established:
            self.try_send()
        return start, self.stream_end

    # -- transmission ----------------------------------------------------------

    def try_send(self):
        p = self.params
        window = self.effective_window()
        had_backlog = self.unsent_bytes > 0
        sent_any = False
        while self.unsent_bytes > 0 and self.flight_segments() < window:
            length = min(p.mss, self.unsent_bytes)
            info = _SegInfo(self.snd_nxt, length, self.sim.now())
            self.segments[self.snd_nxt] = info
            self.snd_nxt += length
            self._emit(info)
            sent_any = True
        if sent_any and self._rto_timer is None:
            self._arm_rto()
        self._update_persist()
        if had_backlog and self.unsent_bytes == 0 and self.on_drain is not None:
            self.on_drain()

    def _emit(self, info, retransmit=False):
        if retransmit:
            info.retransmitted = True
            self.stats["retransmits"] += 1
        info.sent_at = self.sim.now()
        self.stats["data_tx"] += 1
        seg = Segment(self.conn.conn_id, seq=info.seq, payload_bytes=info.length,
                      epoch=self.conn.epoch, sent_at=info.sent_at)
        self.transmit(seg, self.params.header_bytes + info.length)

    def _update_persist(self):
        stalled = (self.unsent_bytes > 0 and self.snd_nxt == self.snd_una
                   and self.effective_window() < 1.0)
        if stalled and self._persist_timer is None:
            self._persist_timer = self.sim.schedule_in(
                self.params.persist_interval_s, "tcp-persist", self._persist_probe)
        elif not stalled and self._persist_timer is not None:
            self.sim.cancel(self._persist_timer)
            self._persist_timer = None

    def _persist_probe(self):
        self._persist_timer = None
        if not (self.unsent_bytes > 0 and self.snd_nxt == self.snd_una
                and self.effective_window() < 1.0):
            self.try_send()
            return
        seg = Segment(self.conn.conn_id, seq=self.snd_nxt, epoch=self.conn.epoch,
                      sent_at=self.sim.now())
        self.transmit(seg, self.params.header_bytes)
        self._persist_timer = self.sim.schedule_in(
            self.params.persist_interval_s, "tcp-persist", self._persist_probe)

    # -- timers -------------------------------------------------------------

    def _arm_rto(self):
        if self._rto_timer is not None:
            self.sim.cancel(self._rto_timer)
        self._rto_timer = self.sim.schedule_in(self.rto, "rto-expiry", self._on_rto)

    def _cancel_rto(self):
        if self._rto_timer is not None:
            self.sim.cancel(self._rto_timer)
            self._rto_timer = None

    def _on_rto(self):
        self._rto_timer = None
        if self.snd_nxt == self.snd_una:
            return  # stale timer, nothing outstanding
        self.on_timeout()

    def on_timeout(self):
        p = self.params
        self.stats["timeouts"] += 1
        self.consecutive_timeouts += 1
        if self.consecutive_timeouts >= p.max_consecutive_timeouts:
            self._reset_connection()
            return
        self.ssthresh = max(self.flight_segments() / 2.0, 2.0)
        self.cwnd = 1.0
        self.state = TcpState.SLOW_START
        self.dup_acks = 0
        info = self.segments.get(self.snd_una)
        if info is not None:
            self._emit(info, retransmit=True)
        self.rto = min(self.rto * 2.0, p.rto_max_s)
        self._arm_rto()
        if self.variant is Variant.VEGAS:
            self._round_mark = self.snd_nxt
            self._round_samples = 0
            self._cut_guard = self.snd_nxt
        self._record_trace()

    # -- estimators -----------------------------------------------------------

    def rto_update(self, sample):
        p = self.params
        if self.srtt is None:
            self.srtt = sample
            self.rttvar = sample / 2.0
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - sample)
            self.srtt = 0.875 * self.srtt + 0.125 * sample
        self.rto = min(max(self.srtt + 4.0 * self.rttvar, p.rto_min_s), p.rto_max_s)
        if self.variant is Variant.VEGAS:
            if sample < self.base_rtt:
                self.base_rtt = sample
            self.last_rtt = sample
            self._round_samples += 1

    def _fine_threshold(self):
        if self.srtt is None:
            return self.rto
        return self.srtt + 4.0 * self.rttvar

    # -- ack processing ----------------------------------------------------------

    def on_ack_segment(self, seg):
        if seg.syn_ack:
            self._establish()
            return
        if not self.established:
            return
        self.rwnd_peer = seg.rwnd
        ackno = seg.ack
        if ackno > self.snd_nxt:
            raise SimulationError(
                f"conn {self.conn.conn_id}: ack {ackno} beyond snd_nxt {self.snd_nxt}")
        if ackno > self.snd_una:
            self._on_new_ack(ackno)
        elif ackno == self.snd_una and self.snd_nxt > self.snd_una:
            self.on_dup_ack()
        else:
            self.try_send()  # pure window update
        self._record_trace()

    def _on_new_ack(self, ackno):
        newly_bytes = ackno - self.snd_una
        last_covered = None
        while self.snd_una < ackno:
            info = self.segments.pop(self.snd_una, None)
            if info is None:
                raise SimulationError(
                    f"conn {self.conn.conn_id}: ack {ackno} not on a segment boundary")
            self.snd_una += info.length
            last_covered = info
        self.consecutive_timeouts = 0
        if last_covered is not None and not last_covered.retransmitted:
            self.rto_update(self.sim.now() - last_covered.sent_at)

        if self.state is TcpState.FAST_RECOVERY:
            self._recovery_ack(ackno, newly_bytes)
        elif self.variant is Variant.VEGAS:
            self._vegas_new_ack(ackno)
            self.dup_acks = 0
        else:
            if self.state is TcpState.SLOW_START:
                self.cwnd += 1.0
                if self.cwnd >= self.ssthresh:
                    self._enter_ca()
            else:
                if ackno > self._ca_round_mark:
                    self._ca_base = self.cwnd
                    self._ca_round_mark = self.snd_nxt
                self.cwnd += 1.0 / self._ca_base
            self.dup_acks = 0

        if self.snd_nxt > self.snd_una:
            self._arm_rto()
        else:
            self._cancel_rto()
        self.try_send()

    def _enter_ca(self):
        self.state = TcpState.CONGESTION_AVOIDANCE
        self._ca_base = self.cwnd
        self._ca_round_mark = self.snd_nxt

    def _recovery_ack(self, ackno, newly_bytes):
        """New ack while in fast recovery (Reno and NewReno only)."""
        if self.variant is Variant.RENO or ackno >= self.recover:
            # Reno exits on any new ack; NewReno on the full ack.
            self.cwnd = self.ssthresh
            self._enter_ca()
            self.dup_acks = 0
        else:
            # NewReno partial ack: plug the next hole inside the same episode,
            # deflate by the acked amount, re-add one segment. No ssthresh cut.
            info = self.segments.get(self.snd_una)
            if info is not None:
                self._emit(info, retransmit=True)
            self.cwnd = max(self.cwnd - newly_bytes / self.params.mss + 1.0, 1.0)
            self.dup_acks = 0

    def on_dup_ack(self):
        self.dup_acks += 1
        if self.state is TcpState.FAST_RECOVERY:
            self.cwnd += 1.0  # window inflation per extra dup
            self.try_send()
            return
        if self.variant is Variant.VEGAS:
            if self.dup_acks < 3:
                self.vegas_check_retransmit()
            elif self.dup_acks == 3:
                info = self.segments.get(self.snd_una)
                if info is not None:
                    self.stats["fast_retransmits"] += 1
                    self._vegas_loss(info)
            return
        if self.dup_acks == 3:
            flight = self.flight_segments()
            info = self.segments.get(self.snd_una)
            if info is not None:
                self.stats["fast_retransmits"] += 1
                self._emit(info, retransmit=True)
            self.ssthresh = max(flight / 2.0, 2.0)
            if self.variant is Variant.TCP:
                self.cwnd = 1.0
                self.state = TcpState.SLOW_START
            else:
                self.cwnd = self.ssthresh + 3.0
                self.state = TcpState.FAST_RECOVERY
                self.stats["fast_recoveries"] += 1
                if self.variant is Variant.NEWRENO:
                    self.recover = self.snd_nxt
            self._arm_rto()
            self.try_send()

    # -- Vegas ---------------------------------------------------------------

    def _vegas_new_ack(self, ackno):
        if self._rexmit_check_armed:
            self._rexmit_check_armed = False
            info = self.segments.get(self.snd_una)
            if info is not None and \
                    self.sim.now() - info.sent_at > self._fine_threshold():
                self._vegas_loss(info)
        if ackno > self._round_mark:
            if self._round_samples > 0:
                self.vegas_adjust()
                self._round_samples = 0
            self._round_mark = self.snd_nxt

    def vegas_adjust(self):
        """Once-per-round window adjustment from the expected/actual rate gap."""
        p = self.params
        if self.last_rtt is None or not math.isfinite(self.base_rtt):
            return
        expected = self.cwnd / self.base_rtt
        actual = self.cwnd / self.last_rtt
        diff = (expected - actual) * self.base_rtt  # queued segments estimate
        if self.state is TcpState.SLOW_START:
            if diff > p.vegas_gamma:
                self._enter_ca()
            else:
                if self._ss_grow_turn:
                    self.cwnd *= 2.0
                self._ss_grow_turn = not self._ss_grow_turn
                if self.cwnd >= self.ssthresh:
                    self._enter_ca()
        else:
            if diff < p.vegas_alpha:
                self.cwnd += 1.0
            elif diff > p.vegas_beta:
                self.cwnd = max(self.cwnd - 1.0, p.vegas_floor)

    def vegas_check_retransmit(self):
        """Early retransmit on the 1st/2nd dup ack when the oldest outstanding
        segment has been out longer than the fine-grained threshold."""
        info = self.segments.get(self.snd_una)
        if info is None:
            return False
        if self.sim.now() - info.sent_at > self._fine_threshold():
            self._vegas_loss(info)
            return True
        return False

    def _vegas_loss(self, info):
        self._emit(info, retransmit=True)
        self._rexmit_check_armed = True
        if info.seq >= self._cut_guard:
            self.cwnd = max(self.cwnd * (1.0 - self.params.vegas_cut),
                            self.params.vegas_floor)
            self._cut_guard = self.snd_nxt
            if self.state is TcpState.SLOW_START:
                self._enter_ca()
        self._arm_rto()

    # -- tracing -----------------------------------------------------------

    def _record_trace(self):
        if self.trace is None:
            return
        snap = (self.sim.now(), self.cwnd, self.ssthresh, self.state.value)
        if not self.trace or self.trace[-1][1:] != snap[1:]:
            self.trace.append(snap)


class TcpReceiver:
    def __init__(self, sim, conn, params, transmit_fn):
        self.sim = sim
        self.conn = conn
        self.params = params
        self.transmit = transmit_fn
        self.on_advance = None       # callback(old_upto, new_upto)
        self.window_provider = None  # callable -> free segments at the app
        self.last_advertised = params.rwnd_segments
        self._reset_stream_state()

    def _reset_stream_state(self):
        self.rcv_nxt = 0
        self.ooo = {}  # seq -> payload length

    def _advertised_window(self):
        if self.window_provider is None:
            return self.params.rwnd_segments
        free = self.window_provider()
        return max(0, min(self.params.rwnd_segments, int(free)))

    def _send_ack(self):
        self.last_advertised = self._advertised_window()
        seg = Segment(self.conn.conn_id, ack=self.rcv_nxt, is_ack=True,
                      rwnd=self.last_advertised, epoch=self.conn.epoch,
                      sent_at=self.sim.now())
        self.transmit(seg, self.params.header_bytes)

    def push_window_update(self):
        """Re-advertise after the app drained its backlog; only spends a frame
        when the window had collapsed to zero."""
        if self.last_advertised == 0 and self._advertised_window() > 0:
            self._send_ack()

    def on_data(self, seg):
        if seg.syn:
            reply = Segment(self.conn.conn_id, is_ack=True, syn_ack=True,
                            rwnd=self._advertised_window(), epoch=self.conn.epoch,
                            sent_at=self.sim.now())
            self.transmit(reply, self.params.header_bytes)
            return
        if seg.payload_bytes <= 0:
            self._send_ack()  # window probe
            return
        seq = seg.seq
        if seq == self.rcv_nxt:
            old = self.rcv_nxt
            self.rcv_nxt += seg.payload_bytes
            while self.rcv_nxt in self.ooo:
                self.rcv_nxt += self.ooo.pop(self.rcv_nxt)
            self._send_ack()
            if self.on_advance is not None:
                self.on_advance(old, self.rcv_nxt)
        elif seq > self.rcv_nxt:
            if len(self.ooo) < self.params.rwnd_segments:
                self.ooo[seq] = seg.payload_bytes
            self._send_ack()  # duplicate ack for the hole
        else:
            self._send_ack()  # old duplicate; re-ack, no double delivery


class Connection:
    """One long-lived sender->receiver byte stream between two endpoints.

    Segments travel through the transmit functions supplied per endpoint (the
    routing fabric in a full simulation, or a scripted link in tests). The
    `annotations` deque carries (stream_end, message) marks used by the
    application layer to map delivered bytes back to messages."""

    _next_id = 0

    def __init__(self, sim, params, variant, send_transmit, recv_transmit,
                 conn_id=None):
        if conn_id is None:
            Connection._next_id += 1
            conn_id = Connection._next_id
        self.conn_id = conn_id
        self.epoch = 0
        self.sim = sim
        self.params = params
        self.variant = variant
        self.annotations = None  # owned by the application layer
        self.on_reset = []
        self.sender = TcpSender(sim, self, params, variant, send_transmit)
        self.receiver = TcpReceiver(sim, self, params, recv_transmit)

    def open(self):
        self.sender.open()

    def dispatch(self, seg):
        """Deliver an arriving segment to the right endpoint."""
        if seg.epoch != self.epoch:
            return  # stale segment from before a connection reset
        if seg.is_ack:
            self.sender.on_ack_segment(seg)
        else:
            self.receiver.on_data(seg)

    def handle_reset(self):
        self.epoch += 1
        self.receiver._reset_stream_state()
        for cb in self.on_reset:
            cb()

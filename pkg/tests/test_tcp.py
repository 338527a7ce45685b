import math

import pytest

from wsnsim.engine import Simulator, SimulationError
from wsnsim.tcp import (Connection, Segment, TcpParams, TcpState, Variant)


def make_conn(variant=Variant.RENO, params=None, established=True):
    sim = Simulator()
    sent = []
    acks = []
    params = params or TcpParams()
    conn = Connection(sim, params, variant,
                      lambda seg, nbytes: sent.append(seg),
                      lambda seg, nbytes: acks.append(seg))
    if established:
        conn.sender.established = True
    return sim, conn, sent, acks


def ack(conn, ackno, rwnd=64):
    return Segment(conn.conn_id, ack=ackno, is_ack=True, rwnd=rwnd,
                   epoch=conn.epoch)


def data_segs(sent):
    return [s for s in sent if not s.is_ack and s.payload_bytes > 0]


class TestSendWindow:
    def test_cwnd_two_emits_exactly_two(self):
        sim, conn, sent, _ = make_conn()
        conn.sender.cwnd = 2.0
        conn.sender.write(5 * 512)
        assert len(data_segs(sent)) == 2

    def test_full_window_emits_nothing_more(self):
        sim, conn, sent, _ = make_conn()
        conn.sender.cwnd = 10.0
        conn.sender.write(10 * 512)
        assert len(data_segs(sent)) == 10
        conn.sender.write(512)
        assert len(data_segs(sent)) == 10  # waits for an ack

    def test_message_split_with_short_tail(self):
        sim, conn, sent, _ = make_conn()
        conn.sender.cwnd = 8.0
        conn.sender.write(1500)
        sizes = [s.payload_bytes for s in data_segs(sent)]
        assert sizes == [512, 512, 476]

    def test_ack_opens_window(self):
        sim, conn, sent, _ = make_conn()
        conn.sender.cwnd = 2.0
        conn.sender.write(5 * 512)
        sim.run_until(0.1)
        conn.dispatch(ack(conn, 512))
        # slow start grew cwnd to 3: one acked out of flight, two more fit
        assert len(data_segs(sent)) == 4


class TestOnAck:
    def test_slow_start_increments_per_ack(self):
        sim, conn, sent, _ = make_conn()
        conn.sender.write(512)
        assert conn.sender.cwnd == 1.0
        sim.run_until(0.05)
        conn.dispatch(ack(conn, 512))
        assert conn.sender.cwnd == 2.0
        assert conn.sender.state is TcpState.SLOW_START

    def test_congestion_avoidance_one_segment_per_round(self):
        sim, conn, sent, _ = make_conn()
        s = conn.sender
        s.cwnd = 4.0
        s.ssthresh = 2.0
        s._enter_ca()
        s.write(4 * 512)
        sim.run_until(0.1)
        for k in range(1, 5):
            conn.dispatch(ack(conn, k * 512))
        assert s.cwnd == pytest.approx(5.0, abs=1e-9)

    def test_ack_beyond_snd_nxt_is_fatal(self):
        sim, conn, sent, _ = make_conn()
        conn.sender.write(512)
        with pytest.raises(SimulationError):
            conn.dispatch(ack(conn, 9999))

    def test_equal_ack_with_outstanding_data_counts_duplicate(self):
        sim, conn, sent, _ = make_conn()
        conn.sender.cwnd = 4.0
        conn.sender.write(4 * 512)
        conn.dispatch(ack(conn, 0))
        assert conn.sender.dup_acks == 1


class TestFastRetransmit:
    def prime(self, variant, flight=10):
        sim, conn, sent, _ = make_conn(variant)
        s = conn.sender
        s.cwnd = float(flight)
        s.write(flight * 512)
        assert len(data_segs(sent)) == flight
        return sim, conn, sent

    def test_two_dups_only_count(self):
        sim, conn, sent = self.prime(Variant.RENO)
        before = len(sent)
        conn.dispatch(ack(conn, 0))
        conn.dispatch(ack(conn, 0))
        assert conn.sender.dup_acks == 2
        assert len(sent) == before
        assert conn.sender.state is TcpState.SLOW_START

    def test_reno_third_dup_enters_fast_recovery(self):
        sim, conn, sent = self.prime(Variant.RENO)
        for _ in range(3):
            conn.dispatch(ack(conn, 0))
        s = conn.sender
        assert s.ssthresh == 5.0
        assert s.cwnd == 8.0
        assert s.state is TcpState.FAST_RECOVERY
        retx = data_segs(sent)[-1]
        assert retx.seq == 0  # snd_una retransmitted

    def test_reno_fourth_dup_inflates(self):
        sim, conn, sent = self.prime(Variant.RENO)
        for _ in range(4):
            conn.dispatch(ack(conn, 0))
        assert conn.sender.cwnd == 9.0

    def test_tahoe_baseline_resets_to_slow_start(self):
        sim, conn, sent = self.prime(Variant.TCP)
        for _ in range(3):
            conn.dispatch(ack(conn, 0))
        s = conn.sender
        assert s.ssthresh == 5.0
        assert s.cwnd == 1.0
        assert s.state is TcpState.SLOW_START
        assert data_segs(sent)[-1].seq == 0

    def test_newreno_partial_ack_stays_in_recovery(self):
        sim, conn, sent = self.prime(Variant.NEWRENO)
        s = conn.sender
        for _ in range(3):
            conn.dispatch(ack(conn, 0))
        assert s.recover == 10 * 512
        assert s.state is TcpState.FAST_RECOVERY
        ssthresh_after_cut = s.ssthresh
        cwnd_before = s.cwnd
        conn.dispatch(ack(conn, 3 * 512))  # partial: 3 of 10 segments
        assert s.state is TcpState.FAST_RECOVERY
        assert data_segs(sent)[-1].seq == 3 * 512  # hole retransmitted
        assert s.cwnd == cwnd_before - 3.0 + 1.0
        assert s.ssthresh == ssthresh_after_cut  # no second cut

    def test_newreno_full_ack_exits(self):
        sim, conn, sent = self.prime(Variant.NEWRENO)
        s = conn.sender
        for _ in range(3):
            conn.dispatch(ack(conn, 0))
        conn.dispatch(ack(conn, 10 * 512))
        assert s.state is TcpState.CONGESTION_AVOIDANCE
        assert s.cwnd == s.ssthresh == 5.0

    def test_reno_partial_ack_exits_recovery(self):
        sim, conn, sent = self.prime(Variant.RENO)
        s = conn.sender
        for _ in range(3):
            conn.dispatch(ack(conn, 0))
        conn.dispatch(ack(conn, 3 * 512))
        assert s.state is TcpState.CONGESTION_AVOIDANCE
        assert s.cwnd == s.ssthresh


class TestVegas:
    def vegas_conn(self, cwnd=10.0, base=0.1, state=TcpState.CONGESTION_AVOIDANCE):
        sim, conn, sent, _ = make_conn(Variant.VEGAS)
        s = conn.sender
        s.cwnd = cwnd
        s.state = state
        s.base_rtt = base
        return sim, conn, sent

    def test_diff_in_band_freezes(self):
        sim, conn, _ = self.vegas_conn()
        s = conn.sender
        s.last_rtt = 0.125  # diff = (100 - 80) * 0.1 = 2 segments
        s.vegas_adjust()
        assert s.cwnd == 10.0

    def test_diff_below_alpha_grows(self):
        sim, conn, _ = self.vegas_conn()
        s = conn.sender
        s.last_rtt = 0.1  # diff = 0
        s.vegas_adjust()
        assert s.cwnd == 11.0

    def test_diff_above_beta_shrinks(self):
        sim, conn, _ = self.vegas_conn()
        s = conn.sender
        s.last_rtt = 0.2  # diff = (100 - 50) * 0.1 = 5 segments
        s.vegas_adjust()
        assert s.cwnd == 9.0

    def test_early_retransmit_on_first_dup_when_stale(self):
        sim, conn, sent = self.vegas_conn(cwnd=4.0)
        s = conn.sender
        s.write(4 * 512)
        s.srtt, s.rttvar = 0.1, 0.0
        sim.run_until(0.2)  # oldest segment now 2x srtt old
        conn.dispatch(ack(conn, 0))
        assert data_segs(sent)[-1].seq == 0  # retransmitted on 1st dup
        assert s.cwnd == 3.0  # cut by a quarter, not half

    def test_no_early_retransmit_when_fresh(self):
        sim, conn, sent = self.vegas_conn(cwnd=4.0)
        s = conn.sender
        s.write(4 * 512)
        s.srtt, s.rttvar = 0.1, 0.0
        sim.run_until(0.01)  # 0.1x srtt
        n = len(sent)
        conn.dispatch(ack(conn, 0))
        assert len(sent) == n

    def test_third_dup_retransmits_regardless(self):
        sim, conn, sent = self.vegas_conn(cwnd=8.0)
        s = conn.sender
        s.write(8 * 512)
        s.srtt, s.rttvar = 10.0, 0.0  # generous fine clock: early check never fires
        for _ in range(3):
            conn.dispatch(ack(conn, 0))
        assert data_segs(sent)[-1].seq == 0
        assert s.cwnd == 6.0  # 8 * 0.75

    def test_cut_only_once_per_window(self):
        sim, conn, sent = self.vegas_conn(cwnd=8.0)
        s = conn.sender
        s.write(8 * 512)
        s.srtt, s.rttvar = 0.01, 0.0
        sim.run_until(0.1)
        conn.dispatch(ack(conn, 0))   # early retransmit + cut
        assert s.cwnd == 6.0
        conn.dispatch(ack(conn, 0))   # second dup: same window, no second cut
        assert s.cwnd == 6.0


class TestTimeout:
    def test_timeout_halves_ssthresh_resets_cwnd(self):
        sim, conn, sent, _ = make_conn()
        s = conn.sender
        s.cwnd = 16.0
        s.write(16 * 512)
        s.on_timeout()
        assert s.ssthresh == 8.0
        assert s.cwnd == 1.0
        assert s.state is TcpState.SLOW_START
        assert data_segs(sent)[-1].seq == 0

    def test_rto_doubles(self):
        sim, conn, sent, _ = make_conn()
        s = conn.sender
        s.write(512)
        assert s.rto == 1.0
        s.on_timeout()
        assert s.rto == 2.0

    def test_stale_timer_is_noop(self):
        sim, conn, sent, _ = make_conn()
        s = conn.sender
        before = (s.cwnd, s.ssthresh, s.state)
        s._on_rto()
        assert (s.cwnd, s.ssthresh, s.state) == before

    def test_twelve_consecutive_timeouts_reset_connection(self):
        sim, conn, sent, _ = make_conn()
        s = conn.sender
        s.write(512)
        epoch_before = conn.epoch
        for _ in range(12):
            s.on_timeout()
        assert conn.epoch == epoch_before + 1
        assert s.stats["resets"] == 1
        assert not s.established  # re-handshaking


class TestRtoEstimator:
    def test_first_sample(self):
        sim, conn, sent, _ = make_conn()
        s = conn.sender
        s.rto_update(0.100)
        assert s.srtt == pytest.approx(0.100)
        assert s.rttvar == pytest.approx(0.050)
        assert s.rto == pytest.approx(0.300)

    def test_steady_samples_floor_at_rto_min(self):
        sim, conn, sent, _ = make_conn()
        s = conn.sender
        for _ in range(30):
            s.rto_update(0.100)
        assert s.srtt == pytest.approx(0.100)
        assert s.rttvar == pytest.approx(0.0, abs=1e-4)
        assert s.rto == s.params.rto_min_s

    def test_karn_rule_skips_retransmitted(self):
        sim, conn, sent, _ = make_conn()
        s = conn.sender
        s.cwnd = 4.0
        s.write(2 * 512)
        info = s.segments[0]
        info.retransmitted = True
        sim.run_until(0.5)
        conn.dispatch(ack(conn, 512))
        assert s.srtt is None  # no sample taken


class TestReceiver:
    def recv(self, params=None):
        sim, conn, sent, acks = make_conn(params=params)
        return sim, conn, acks

    def seg(self, conn, seq, nbytes=512):
        return Segment(conn.conn_id, seq=seq, payload_bytes=nbytes,
                       epoch=conn.epoch)

    def test_in_order_ack(self):
        sim, conn, acks = self.recv()
        conn.receiver.on_data(self.seg(conn, 0))
        assert acks[-1].ack == 512

    def test_gap_then_fill_jumps(self):
        sim, conn, acks = self.recv()
        conn.receiver.on_data(self.seg(conn, 512))
        assert acks[-1].ack == 0  # duplicate ack for the hole
        conn.receiver.on_data(self.seg(conn, 0))
        assert acks[-1].ack == 1024  # single ack jumping the buffered range

    def test_duplicate_data_no_double_delivery(self):
        sim, conn, acks = self.recv()
        delivered = []
        conn.receiver.on_advance = lambda old, new: delivered.append((old, new))
        conn.receiver.on_data(self.seg(conn, 0))
        conn.receiver.on_data(self.seg(conn, 0))
        assert delivered == [(0, 512)]
        assert acks[-1].ack == 512

    def test_advance_callback_contiguous(self):
        sim, conn, acks = self.recv()
        spans = []
        conn.receiver.on_advance = lambda old, new: spans.append((old, new))
        conn.receiver.on_data(self.seg(conn, 1024))
        conn.receiver.on_data(self.seg(conn, 512))
        conn.receiver.on_data(self.seg(conn, 0))
        assert spans == [(0, 1536)]


class TestHandshake:
    def test_two_control_segments_then_data(self):
        sim = Simulator()
        wire = []
        params = TcpParams()
        conn = Connection(sim, params, Variant.RENO,
                          lambda seg, n: wire.append(("->", seg)),
                          lambda seg, n: wire.append(("<-", seg)))
        conn.open()
        conn.sender.write(512)
        assert [w[1].syn for w in wire] == [True]  # data held until established
        syn = wire[0][1]
        conn.receiver.on_data(syn)
        syn_ack = wire[1][1]
        assert syn_ack.syn_ack
        conn.sender.on_ack_segment(syn_ack)
        assert conn.sender.established
        assert wire[-1][1].payload_bytes == 512

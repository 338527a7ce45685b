import math

import pytest

from wsnsim.app import Message
from wsnsim.metrics import (MetricsCollector, MetricsError, MetricsRecord,
                            export_csv, format_table)


def msg(msg_id, origin=1, created_at=50.0, size=512):
    return Message(msg_id=msg_id, origin=origin, created_at=created_at,
                   size_bytes=size)


def collector(warmup=20.0, duration=200.0):
    return MetricsCollector(warmup, duration)


class TestCollector:
    def test_generate_and_deliver_pdr(self):
        c = collector()
        messages = [msg(k) for k in range(100)]
        for m in messages:
            c.record_generation(m)
        for m in messages[:97]:
            c.record_delivery(m, 51.0)
        assert c.generated_count == 100
        assert c.delivered_count == 97
        assert c.pdr() == pytest.approx(0.97)

    def test_warmup_message_excluded_entirely(self):
        c = collector()
        early = msg(1, created_at=10.0)  # inside warm-up
        c.record_generation(early)
        c.record_delivery(early, 25.0)   # delivered after warm-up
        assert c.generated_count == 0
        assert c.delivered_count == 0
        assert math.isnan(c.pdr())
        assert c.throughput_kbps() == 0.0

    def test_unknown_delivery_fatal(self):
        c = collector()
        with pytest.raises(MetricsError):
            c.record_delivery(msg(1), 30.0)

    def test_double_delivery_fatal(self):
        c = collector()
        m = msg(1)
        c.record_generation(m)
        c.record_delivery(m, 51.0)
        with pytest.raises(MetricsError):
            c.record_delivery(m, 52.0)

    def test_double_generation_fatal(self):
        c = collector()
        c.record_generation(msg(1))
        with pytest.raises(MetricsError):
            c.record_generation(msg(1))


class TestThroughput:
    def test_zero_deliveries_zero_kbps(self):
        assert collector().throughput_kbps() == 0.0

    def test_single_pair_hand_arithmetic(self):
        # 250000 bits delivered over a 10 s window -> 25 Kbps.
        c = collector(warmup=0.0, duration=10.0)
        m = msg(1, created_at=1.0, size=31250)  # 250000 bits
        c.record_generation(m)
        c.record_delivery(m, 2.0)
        assert c.throughput_kbps() == pytest.approx(25.0)

    def test_pairs_sum(self):
        # 100 Kbps and 50 Kbps pairs -> 150 Kbps overall.
        c = collector(warmup=0.0, duration=10.0)
        a = msg(1, origin=1, created_at=1.0, size=125_000)
        b = msg(2, origin=2, created_at=1.0, size=62_500)
        for m in (a, b):
            c.record_generation(m)
            c.record_delivery(m, 2.0)
        assert c.throughput_kbps() == pytest.approx(150.0)

    def test_consistency_bound(self):
        c = collector(warmup=0.0, duration=10.0)
        total_bits = 0
        for k in range(10):
            m = msg(k, created_at=1.0)
            total_bits += m.size_bytes * 8
            c.record_generation(m)
            if k % 2 == 0:
                c.record_delivery(m, 3.0)
        assert c.throughput_kbps() * 1000 * c.window_s() <= total_bits


class TestMeanDelay:
    def test_single_message(self):
        c = collector(warmup=0.0, duration=10.0)
        m = msg(1, created_at=1.000)
        c.record_generation(m)
        c.record_delivery(m, 1.120)
        assert c.mean_delay_ms() == pytest.approx(120.0)

    def test_mean_of_two(self):
        c = collector(warmup=0.0, duration=10.0)
        for k, (t0, t1) in enumerate(((1.0, 1.1), (2.0, 2.3))):
            m = msg(k, created_at=t0)
            c.record_generation(m)
            c.record_delivery(m, t1)
        assert c.mean_delay_ms() == pytest.approx(200.0)

    def test_zero_deliveries_nan_not_zero(self):
        c = collector()
        c.record_generation(msg(1))
        assert math.isnan(c.mean_delay_ms())


def rec(**kw):
    base = dict(scenario_id="reno_n50_none_medium", seed=1, variant="reno",
                node_count=50, proxy_mode="none", throughput_kbps=123.456789,
                mean_delay_ms=145.2, pdr=0.9712, generated=4410, delivered=4283)
    base.update(kw)
    return MetricsRecord(**base)


class TestCsv:
    def test_empty_records_header_only(self, tmp_path):
        path = tmp_path / "out.csv"
        data = export_csv([], path)
        assert data == ("scenario_id,seed,variant,node_count,proxy_mode,"
                        "throughput_kbps,mean_delay_ms,pdr,generated,delivered\n")

    def test_single_record_layout(self, tmp_path):
        data = export_csv([rec()], tmp_path / "out.csv")
        lines = data.strip().split("\n")
        assert len(lines) == 2
        assert lines[1] == ("reno_n50_none_medium,1,reno,50,none,"
                            "123.457,145.2,0.9712,4410,4283")

    def test_six_significant_digits(self, tmp_path):
        data = export_csv([rec(throughput_kbps=123.4567891, pdr=0.97123456)],
                          tmp_path / "x.csv")
        assert "123.457" in data
        assert "0.971235" in data

    def test_repeated_export_byte_identical(self, tmp_path):
        records = [rec(seed=s) for s in (3, 1, 2)]
        a = export_csv(records, tmp_path / "a.csv")
        b = export_csv(list(reversed(records)), tmp_path / "b.csv")
        assert a == b
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_rows_sorted_by_keys(self, tmp_path):
        records = [rec(seed=2), rec(seed=1),
                   rec(scenario_id="a_first", seed=9)]
        data = export_csv(records, tmp_path / "s.csv")
        lines = data.strip().split("\n")[1:]
        assert lines[0].startswith("a_first")
        assert lines[1].split(",")[1] == "1"


def test_format_table_groups_by_mode():
    records = [rec(), rec(seed=2), rec(proxy_mode="middle",
                                       scenario_id="reno_n50_middle_medium")]
    table = format_table(records)
    assert "without proxy" in table
    assert "middle" in table
    assert "reno" in table
    assert "Seeds" in table

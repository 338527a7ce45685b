"""Per-scenario performance accounting: throughput, end-to-end delay, packet
delivery ratio, CSV export, and a paper-style summary table.

Conventions: messages generated during warm-up are invisible to all three
metrics (even if delivered later); throughput counts application payload bits
only, summed per source-destination pair over the measurement window; Kbps
means 1000 bits per second; zero deliveries yield a NaN mean delay (never 0).
"""

import math
from dataclasses import dataclass


class MetricsError(Exception):
    """Invariant violation in the delivery accounting (a model bug)."""


@dataclass(frozen=True)
class MetricsRecord:
    scenario_id: str
    seed: int
    variant: str
    node_count: int
    proxy_mode: str
    throughput_kbps: float
    mean_delay_ms: float
    pdr: float
    generated: int
    delivered: int


CSV_COLUMNS = ("scenario_id", "seed", "variant", "node_count", "proxy_mode",
               "throughput_kbps", "mean_delay_ms", "pdr", "generated",
               "delivered")


class MetricsCollector:
    def __init__(self, warmup_s, duration_s):
        if duration_s <= warmup_s:
            raise ValueError("duration must exceed warm-up")
        self.warmup_s = warmup_s
        self.duration_s = duration_s
        self._known = set()     # every msg_id ever generated
        self._counted = set()   # generated inside the measurement window
        self._delivered = set()
        self._delays = []
        self._bits_by_pair = {}
        self.delivered_count = 0

    def record_generation(self, msg):
        if msg.msg_id in self._known:
            raise MetricsError(f"msg {msg.msg_id} generated twice")
        self._known.add(msg.msg_id)
        if msg.created_at >= self.warmup_s:
            self._counted.add(msg.msg_id)

    def record_delivery(self, msg, at):
        if msg.msg_id not in self._known:
            raise MetricsError(f"delivery of unknown msg {msg.msg_id}")
        if msg.msg_id in self._delivered:
            raise MetricsError(f"msg {msg.msg_id} delivered twice")
        self._delivered.add(msg.msg_id)
        msg.delivered_at = at
        if msg.msg_id in self._counted:
            self.delivered_count += 1
            self._delays.append(at - msg.created_at)
            key = msg.origin
            self._bits_by_pair[key] = self._bits_by_pair.get(key, 0) \
                + msg.size_bytes * 8

    @property
    def generated_count(self):
        return len(self._counted)

    def window_s(self):
        return self.duration_s - self.warmup_s

    def throughput_kbps(self):
        window = self.window_s()
        return sum(bits / window for bits in self._bits_by_pair.values()) / 1000.0

    def mean_delay_ms(self):
        if not self._delays:
            return math.nan
        return 1000.0 * sum(self._delays) / len(self._delays)

    def pdr(self):
        if self.generated_count == 0:
            return math.nan
        return self.delivered_count / self.generated_count

    def build_record(self, scenario_id, seed, variant, node_count, proxy_mode):
        return MetricsRecord(
            scenario_id=scenario_id, seed=seed, variant=variant,
            node_count=node_count, proxy_mode=proxy_mode,
            throughput_kbps=self.throughput_kbps(),
            mean_delay_ms=self.mean_delay_ms(), pdr=self.pdr(),
            generated=self.generated_count, delivered=self.delivered_count)


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def export_csv(records, path):
    """One header row plus one row per record, sorted on every key column so
    repeated exports of the same records are byte-identical."""
    rows = sorted(records, key=lambda r: (r.scenario_id, r.seed, r.variant,
                                          r.node_count, r.proxy_mode))
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(",".join(_fmt(getattr(r, col)) for col in CSV_COLUMNS))
    data = "\n".join(lines) + "\n"
    with open(path, "w", newline="") as fh:
        fh.write(data)
    return data


def export_cwnd_trace(rows, path):
    """Time-ordered (t, cwnd, ssthresh, state) dump for one connection."""
    lines = ["t,cwnd,ssthresh,state"]
    for t, cwnd, ssthresh, state in rows:
        lines.append(f"{t:.6g},{cwnd:.6g},{ssthresh:.6g},{state}")
    data = "\n".join(lines) + "\n"
    with open(path, "w", newline="") as fh:
        fh.write(data)
    return data


def mean(values):
    values = list(values)
    return sum(values) / len(values) if values else math.nan


def format_table(records):
    """Readable summary grouped like the published results: one block per
    proxy mode, rows variant x node count, metric columns averaged over
    seeds."""
    blocks = {}
    for r in records:
        blocks.setdefault(r.proxy_mode, {}).setdefault(
            (r.variant, r.node_count), []).append(r)
    mode_titles = {
        "none": "Network without proxy nodes",
        "middle": "Proxy nodes in the middle of each section",
        "sink_neighbor": "Proxy nodes neighboring the sink",
    }
    out = []
    header = (f"{'Transport':<10} {'Nodes':>5} {'Thr (Kbps)':>12} "
              f"{'Delay (ms)':>12} {'PDR':>8} {'Seeds':>6}")
    for mode in ("none", "middle", "sink_neighbor"):
        if mode not in blocks:
            continue
        out.append(mode_titles.get(mode, mode))
        out.append(header)
        out.append("-" * len(header))
        for (variant, node_count) in sorted(blocks[mode]):
            rs = blocks[mode][(variant, node_count)]
            out.append(
                f"{variant:<10} {node_count:>5} "
                f"{mean(r.throughput_kbps for r in rs):>12.2f} "
                f"{mean(r.mean_delay_ms for r in rs):>12.2f} "
                f"{mean(r.pdr for r in rs):>8.4f} {len(rs):>6}")
        out.append("")
    return "\n".join(out)

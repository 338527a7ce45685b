"""Multi-seed sweep execution, aggregation, and the trend report.

Runs are independent (config, seed) pairs, so the sweep can fan out across
processes; results are merged in sorted order, making the output identical
for any parallelism degree. The report computes the proxy/non-proxy ratios
and checks the trend thresholds the suite accepts against.
"""

import math
import multiprocessing
import statistics
from dataclasses import dataclass

from .config import ScenarioConfig
from .metrics import MetricsRecord, mean
from .scenario import run_scenario

def _record_key(r):
    return (r.scenario_id, r.seed, r.variant, r.node_count, r.proxy_mode)


def _run_task(config):
    try:
        result = run_scenario(config)
        return ("ok", result.record)
    except Exception as exc:  # recorded per-row, sweep continues
        return ("err", (config.scenario_id(), config.seed,
                        f"{type(exc).__name__}: {exc}"))


def run_sweep(configs, jobs=1):
    """Execute every config; returns (records, failures) with deterministic
    ordering regardless of execution order or parallelism."""
    if jobs > 1 and len(configs) > 1:
        with multiprocessing.Pool(processes=jobs) as pool:
            outcomes = pool.map(_run_task, configs)
    else:
        outcomes = [_run_task(cfg) for cfg in configs]
    records, failures = [], []
    for status, payload in outcomes:
        if status == "ok":
            records.append(payload)
        else:
            failures.append(payload)
    records.sort(key=_record_key)
    failures.sort()
    return records, failures


@dataclass(frozen=True)
class AggregateRow:
    scenario_id: str
    variant: str
    node_count: int
    proxy_mode: str
    seeds: int
    throughput_mean: float
    throughput_std: float
    delay_mean: float
    delay_std: float
    pdr_mean: float
    pdr_std: float


def _std(values):
    return statistics.stdev(values) if len(values) > 1 else 0.0


def aggregate(records):
    groups = {}
    for r in records:
        groups.setdefault((r.scenario_id, r.variant, r.node_count,
                           r.proxy_mode), []).append(r)
    rows = []
    for (sid, variant, node_count, mode), rs in sorted(groups.items()):
        thr = [r.throughput_kbps for r in rs]
        dly = [r.mean_delay_ms for r in rs if not math.isnan(r.mean_delay_ms)]
        pdr = [r.pdr for r in rs if not math.isnan(r.pdr)]
        rows.append(AggregateRow(
            scenario_id=sid, variant=variant, node_count=node_count,
            proxy_mode=mode, seeds=len(rs),
            throughput_mean=mean(thr), throughput_std=_std(thr),
            delay_mean=mean(dly) if dly else math.nan,
            delay_std=_std(dly) if dly else math.nan,
            pdr_mean=mean(pdr) if pdr else math.nan,
            pdr_std=_std(pdr) if pdr else math.nan))
    return rows


AGG_COLUMNS = ("scenario_id", "variant", "node_count", "proxy_mode", "seeds",
               "throughput_mean", "throughput_std", "delay_mean", "delay_std",
               "pdr_mean", "pdr_std")


def export_aggregate_csv(rows, path):
    lines = [",".join(AGG_COLUMNS)]
    for row in rows:
        parts = []
        for col in AGG_COLUMNS:
            v = getattr(row, col)
            parts.append(f"{v:.6g}" if isinstance(v, float) else str(v))
        lines.append(",".join(parts))
    data = "\n".join(lines) + "\n"
    with open(path, "w", newline="") as fh:
        fh.write(data)
    return data


# -- trend checks -------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def _group_means(records):
    """(variant, node_count, proxy_mode) -> (thr_mean, delay_mean, pdr_mean, n)."""
    groups = {}
    for r in records:
        groups.setdefault((r.variant, r.node_count, r.proxy_mode), []).append(r)
    out = {}
    for key, rs in groups.items():
        thr = mean(r.throughput_kbps for r in rs)
        dly_vals = [r.mean_delay_ms for r in rs if not math.isnan(r.mean_delay_ms)]
        dly = mean(dly_vals) if dly_vals else math.nan
        pdr_vals = [r.pdr for r in rs if not math.isnan(r.pdr)]
        pdr = mean(pdr_vals) if pdr_vals else math.nan
        out[key] = (thr, dly, pdr, len(rs))
    return out


def evaluate_trends(records):
    """Trend thresholds over seed means; checks whose inputs are missing are
    reported as unavailable (not passed, not failed)."""
    g = _group_means(records)
    checks = []
    node_counts = sorted({k[1] for k in g})

    def have(variant, n, mode):
        return (variant, n, mode) in g

    # Vegas throughput deficit vs Reno, non-proxy, every node count present.
    for n in node_counts:
        if have("vegas", n, "none") and have("reno", n, "none"):
            v = g[("vegas", n, "none")][0]
            r = g[("reno", n, "none")][0]
            ratio = v / r if r else math.inf
            checks.append(Check(
                f"vegas_throughput_deficit_n{n}", ratio < 0.7,
                f"vegas {v:.1f} / reno {r:.1f} = {ratio:.2f} (need < 0.70)"))

    # Vegas lowest mean delay among the four variants at 50 and 100 nodes.
    for n in (50, 100):
        variants = [v for v in ("tcp", "reno", "newreno", "vegas")
                    if have(v, n, "none")]
        if "vegas" in variants and len(variants) == 4:
            delays = {v: g[(v, n, "none")][1] for v in variants}
            lowest = min(delays, key=delays.get)
            checks.append(Check(
                f"vegas_lowest_delay_n{n}", lowest == "vegas",
                ", ".join(f"{v}={delays[v]:.0f}ms" for v in variants)))

    # Proxy throughput gain and delay cost for the loss-based variants.
    for variant in ("tcp", "reno", "newreno"):
        for n in (100, 110):
            if not have(variant, n, "none"):
                continue
            base_thr, base_dly = g[(variant, n, "none")][0], g[(variant, n, "none")][1]
            for mode in ("middle", "sink_neighbor"):
                if not have(variant, n, mode):
                    continue
                thr, dly = g[(variant, n, mode)][0], g[(variant, n, mode)][1]
                ratio = thr / base_thr if base_thr else math.inf
                checks.append(Check(
                    f"proxy_throughput_gain_{variant}_n{n}_{mode}",
                    ratio >= 1.2,
                    f"{thr:.1f} / {base_thr:.1f} = {ratio:.2f} (need >= 1.20)"))
                dratio = dly / base_dly if base_dly else math.inf
                checks.append(Check(
                    f"proxy_delay_cost_{variant}_n{n}_{mode}",
                    dratio >= 1.5,
                    f"{dly:.0f}ms / {base_dly:.0f}ms = {dratio:.2f} (need >= 1.50)"))

    # Delivery-ratio band over every configuration in the set.
    for (variant, n, mode), (thr, dly, pdr, cnt) in sorted(g.items()):
        checks.append(Check(
            f"pdr_band_{variant}_n{n}_{mode}",
            (not math.isnan(pdr)) and 0.90 <= pdr <= 1.00,
            f"mean pdr {pdr:.4f} (need in [0.90, 1.00])"))
    return checks


def comparison_rows(records):
    """Per-(variant, node_count) proxy/non-proxy ratios behind the headline
    claims: throughput gain, delay cost, pdr delta."""
    g = _group_means(records)
    rows = []
    variants = sorted({k[0] for k in g})
    counts = sorted({k[1] for k in g})
    for variant in variants:
        for n in counts:
            base = g.get((variant, n, "none"))
            for mode in ("middle", "sink_neighbor"):
                prox = g.get((variant, n, mode))
                if base is None or prox is None:
                    if prox is not None or base is not None:
                        rows.append((variant, n, mode, math.nan, math.nan,
                                     math.nan, "unavailable"))
                    continue
                thr_ratio = prox[0] / base[0] if base[0] else math.nan
                dly_ratio = prox[1] / base[1] if base[1] else math.nan
                pdr_delta = prox[2] - base[2]
                rows.append((variant, n, mode, thr_ratio, dly_ratio,
                             pdr_delta, ""))
    return rows


def report_text(records):
    lines = []
    rows = comparison_rows(records)
    if rows:
        lines.append(f"{'variant':<9} {'nodes':>5} {'placement':<14} "
                     f"{'thr ratio':>9} {'delay ratio':>11} {'pdr delta':>9}")
        for variant, n, mode, tr, dr, pd, note in rows:
            if note:
                lines.append(f"{variant:<9} {n:>5} {mode:<14} {note}")
            else:
                lines.append(f"{variant:<9} {n:>5} {mode:<14} "
                             f"{tr:>9.2f} {dr:>11.2f} {pd:>+9.4f}")
        lines.append("")
    checks = evaluate_trends(records)
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        lines.append(f"[{status}] {check.name}: {check.detail}")
    n_fail = sum(1 for c in checks if not c.passed)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} trend checks passed")
    return "\n".join(lines), checks

"""Topology generation and single-run execution: builds the full stack
(engine, mobility, MAC, routing, transport, application, metrics) from a
ScenarioConfig and runs it to completion.

A run is a pure function of (config, seed): every random draw comes from one
of five streams derived from the master seed (placement, mobility, mac,
traffic, routing), so repeating a run reproduces it bit for bit.
"""

import itertools
from dataclasses import dataclass, field

from .app import (MessageChannel, ProxyRelay, SensorSource, SinkApp,
                  TopologyError, assign_sections, select_proxies)
from .config import ScenarioConfig
from .engine import Simulator, derive_rng, rng_uniform
from .mac import MacLayer, MacParams
from .metrics import MetricsCollector
from .mobility import MobilityModel, NodeState, Role
from .routing import Packet, Router, RoutingParams
from .tcp import Connection, TcpParams, Variant

SINK_ID = 0

_VARIANT_BY_NAME = {
    "tcp": Variant.TCP, "reno": Variant.RENO,
    "newreno": Variant.NEWRENO, "vegas": Variant.VEGAS,
}


def generate_topology(config, rng):
    """Uniform node placement with the sink pinned at the field center.

    The whole placement redraws (up to 100 attempts) until every quadrant
    holds at least one non-sink node, so sections and proxy selection are
    well defined for any proxy mode with the same draw sequence."""
    side = config.area_side
    center = (side / 2.0, side / 2.0)
    for _attempt in range(100):
        positions = {SINK_ID: center}
        for nid in range(1, config.node_count):
            positions[nid] = (rng_uniform(rng, 0.0, side),
                              rng_uniform(rng, 0.0, side))
        sections = assign_sections(positions, side)
        occupied = {sections[nid] for nid in positions if nid != SINK_ID}
        if occupied == {0, 1, 2, 3}:
            proxies = {}
            if config.proxy_mode != "none":
                proxies = select_proxies(config.proxy_mode, sections,
                                         positions, side, center, SINK_ID)
            return positions, sections, proxies
    raise TopologyError(
        f"no viable placement after 100 attempts (n={config.node_count})")


@dataclass
class RunResult:
    record: object
    counters: dict
    cwnd_trace: list = None


class _TransportHost:
    """Per-node registry dispatching arriving segments to their connection."""

    def __init__(self):
        self.conns = {}

    def deliver(self, packet):
        conn = self.conns.get(packet.payload.conn_id)
        if conn is not None:
            conn.dispatch(packet.payload)


class Scenario:
    def __init__(self, config: ScenarioConfig, trace_origin=None):
        config.validate()
        self.config = config
        sim = Simulator()
        self.sim = sim
        seed = config.seed

        placement_rng = derive_rng(seed, "placement")
        mobility_rng = derive_rng(seed, "mobility")
        mac_rng = derive_rng(seed, "mac")
        traffic_rng = derive_rng(seed, "traffic")
        routing_rng = derive_rng(seed, "routing")

        positions, sections, proxies = generate_topology(config, placement_rng)
        self.positions = positions
        self.sections = sections
        self.proxies = proxies
        proxy_ids = set(proxies.values())

        self.nodes = []
        for nid in range(config.node_count):
            x, y = positions[nid]
            if nid == SINK_ID:
                role = Role.SINK
            elif nid in proxy_ids:
                role = Role.PROXY
            else:
                role = Role.SENSOR
            self.nodes.append(NodeState(id=nid, x=x, y=y, role=role,
                                        section=sections[nid]))

        self.mobility = MobilityModel(
            sim, self.nodes, config.area_side, config.radio_range,
            mobility_rng, v_min=config.v_min, v_max=config.v_max,
            pause_s=config.pause_s, tick_s=config.mobility_tick_s,
            enabled=config.mobility)
        self.mobility.start()

        mac_params = MacParams(
            data_rate_bps=config.mac_data_rate_bps, difs_s=config.mac_difs_s,
            slot_s=config.mac_slot_s, cw_min=config.mac_cw_min,
            retry_limit=config.mac_retry_limit,
            overhead_bytes=config.mac_overhead_bytes,
            queue_limit=config.mac_queue_limit)
        self.mac = MacLayer(sim, mac_params, self.mobility.neighbors, mac_rng)

        routing_params = RoutingParams(
            route_lifetime_s=config.route_lifetime_s,
            discovery_timeout_s=config.discovery_timeout_s,
            discovery_retries=config.discovery_retries,
            buffer_limit=config.route_buffer_limit,
            rebroadcast_jitter_s=config.rreq_jitter_s)
        self.routing_stats = {}
        self.hosts = {nid: _TransportHost() for nid in range(config.node_count)}
        self.routers = {}
        for nid in range(config.node_count):
            self.routers[nid] = Router(sim, nid, self.mac, routing_params,
                                       routing_rng, self.hosts[nid].deliver,
                                       self.routing_stats)

        self.collector = MetricsCollector(config.warmup_s, config.duration_s)
        sink_app = SinkApp(sim, self.collector)

        tcp_params = TcpParams(
            mss=config.segment_size, rwnd_segments=config.rwnd_segments,
            rto_min_s=config.rto_min_s, rto_max_s=config.rto_max_s)
        variant = _VARIANT_BY_NAME[config.variant]
        self._conn_counter = itertools.count(1)
        self._msg_counter = itertools.count(1)
        self.connections = []
        self.sources = []
        self.relays = []
        self.trace_sender = None

        interval = config.interval_s()

        def make_conn(src, dst):
            def tx_fwd(seg, wire_bytes, _src=src, _dst=dst):
                self.routers[_src].send_packet(Packet(_src, _dst, wire_bytes, seg))

            def tx_rev(seg, wire_bytes, _src=src, _dst=dst):
                self.routers[_dst].send_packet(Packet(_dst, _src, wire_bytes, seg))

            conn = Connection(sim, tcp_params, variant, tx_fwd, tx_rev,
                              conn_id=next(self._conn_counter))
            self.hosts[src].conns[conn.conn_id] = conn
            self.hosts[dst].conns[conn.conn_id] = conn
            self.connections.append(conn)
            open_at = rng_uniform(traffic_rng, 0.0, 1.0)
            sim.schedule(open_at, "conn-open", conn.open, target=src)
            return conn

        if config.proxy_mode == "none":
            for node in self.nodes:
                if node.role is Role.SINK:
                    continue
                conn = make_conn(node.id, SINK_ID)
                channel = MessageChannel(conn, sink_app.on_message)
                self._add_source(node.id, channel, interval, traffic_rng)
                self._maybe_trace(node.id, conn, trace_origin)
        else:
            relay_by_section = {}
            for sec in sorted(proxies):
                pid = proxies[sec]
                conn = make_conn(pid, SINK_ID)
                outbound = MessageChannel(conn, sink_app.on_message)
                relay = ProxyRelay(
                    sim, pid, sec, outbound,
                    batch_interval_s=config.batch_interval_s,
                    batch_bytes=config.batch_bytes,
                    backlog_cap_bytes=config.proxy_backlog_bytes,
                    mss=config.segment_size)
                relay_by_section[sec] = relay
                self.relays.append(relay)
                self._maybe_trace(pid, conn, trace_origin)
            for node in self.nodes:
                if node.role is not Role.SENSOR:
                    continue
                relay = relay_by_section[node.section]
                conn = make_conn(node.id, relay.node_id)
                channel = relay.attach_inbound(conn, sections)
                self._add_source(node.id, channel, interval, traffic_rng)
                self._maybe_trace(node.id, conn, trace_origin)

    def _add_source(self, node_id, channel, interval, traffic_rng):
        self.sources.append(SensorSource(
            self.sim, node_id, channel, interval, self.config.message_size,
            self.collector, traffic_rng, self._msg_counter))

    def _maybe_trace(self, node_id, conn, trace_origin):
        if trace_origin is not None and node_id == trace_origin:
            conn.sender.trace = []
            self.trace_sender = conn.sender

    def run(self):
        config = self.config
        self.sim.run_until(config.duration_s)
        record = self.collector.build_record(
            config.scenario_id(), config.seed, config.variant,
            config.node_count, config.proxy_mode)
        counters = dict(self.mac.stats)
        counters.update(self.routing_stats)
        counters["messages_skipped"] = sum(s.skipped for s in self.sources)
        counters["foreign_drops"] = sum(r.foreign_drops for r in self.relays)
        counters["tcp_timeouts"] = sum(
            c.sender.stats["timeouts"] for c in self.connections)
        counters["tcp_retransmits"] = sum(
            c.sender.stats["retransmits"] for c in self.connections)
        counters["tcp_resets"] = sum(
            c.sender.stats["resets"] for c in self.connections)
        counters["tcp_fast_recoveries"] = sum(
            c.sender.stats["fast_recoveries"] for c in self.connections)
        trace = self.trace_sender.trace if self.trace_sender else None
        return RunResult(record=record, counters=counters, cwnd_trace=trace)


def run_scenario(config, trace_origin=None):
    return Scenario(config, trace_origin=trace_origin).run()

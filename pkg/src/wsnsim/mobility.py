"""Node state, random-waypoint mobility, and unit-disk connectivity.

Positions advance only on mobility ticks; between ticks the topology is
static, which lets the MAC reuse cached neighbor sets.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .engine import rng_uniform


class Role(Enum):
    SENSOR = "sensor"
    PROXY = "proxy"
    SINK = "sink"


@dataclass
class NodeState:
    id: int
    x: float
    y: float
    waypoint: tuple = (0.0, 0.0)
    speed: float = 0.0
    pause_until: float = 0.0
    role: Role = Role.SENSOR
    section: int = 0


def in_range(a, b, radio_range):
    """Unit-disk connectivity with a closed boundary at exactly radio_range."""
    return math.hypot(a.x - b.x, a.y - b.y) <= radio_range


def draw_waypoint(node, side, v_min, v_max, rng):
    node.waypoint = (rng_uniform(rng, 0.0, side), rng_uniform(rng, 0.0, side))
    node.speed = rng_uniform(rng, v_min, v_max)


def mobility_step(node, dt, now, side, v_min, v_max, pause_s, rng):
    """Advance one node by dt seconds of random-waypoint motion.

    Handles multi-phase steps: travel, arrival, pause, pause expiry with a
    fresh waypoint/speed draw, and further travel, all within one dt."""
    if dt <= 0:
        raise ValueError("mobility_step requires dt > 0")
    t = now
    remaining = dt
    while remaining > 1e-12:
        if t < node.pause_until:
            wait = min(node.pause_until - t, remaining)
            t += wait
            remaining -= wait
            if t >= node.pause_until:
                draw_waypoint(node, side, v_min, v_max, rng)
            continue
        dx = node.waypoint[0] - node.x
        dy = node.waypoint[1] - node.y
        dist = math.hypot(dx, dy)
        if dist <= 1e-12 or node.speed <= 0.0:
            # Already at the waypoint and not pausing: draw the next leg.
            draw_waypoint(node, side, v_min, v_max, rng)
            continue
        travel_time = dist / node.speed
        if travel_time <= remaining:
            node.x, node.y = node.waypoint
            t += travel_time
            remaining -= travel_time
            node.pause_until = t + pause_s
        else:
            frac = node.speed * remaining / dist
            node.x += dx * frac
            node.y += dy * frac
            remaining = 0.0


class MobilityModel:
    """Drives waypoint motion on a fixed tick and caches the neighbor sets.

    The sink never moves; every other node (proxies included) roams."""

    def __init__(self, sim, nodes, side, radio_range, rng,
                 v_min=1.0, v_max=5.0, pause_s=2.0, tick_s=1.0, enabled=True):
        self.sim = sim
        self.nodes = nodes
        self.side = side
        self.radio_range = radio_range
        self.rng = rng
        self.v_min = v_min
        self.v_max = v_max
        self.pause_s = pause_s
        self.tick_s = tick_s
        self.enabled = enabled
        self._neighbors = {}
        for node in nodes:
            if node.role is not Role.SINK:
                draw_waypoint(node, side, v_min, v_max, rng)
        self.recompute_neighbors()

    def start(self):
        if self.enabled:
            self.sim.schedule_in(self.tick_s, "mobility-step", self._tick)

    def _tick(self):
        now = self.sim.now()
        for node in self.nodes:
            if node.role is not Role.SINK:
                mobility_step(node, self.tick_s, now - self.tick_s, self.side,
                              self.v_min, self.v_max, self.pause_s, self.rng)
        self.recompute_neighbors()
        self.sim.schedule_in(self.tick_s, "mobility-step", self._tick)

    def recompute_neighbors(self):
        xs = np.fromiter((n.x for n in self.nodes), dtype=float)
        ys = np.fromiter((n.y for n in self.nodes), dtype=float)
        dx = xs[:, None] - xs[None, :]
        dy = ys[:, None] - ys[None, :]
        close = (dx * dx + dy * dy) <= self.radio_range * self.radio_range
        np.fill_diagonal(close, False)
        ids = [n.id for n in self.nodes]
        neigh = {}
        for i, node in enumerate(self.nodes):
            neigh[node.id] = [ids[j] for j in np.nonzero(close[i])[0]]
        self._neighbors = neigh

    def neighbors(self, node_id):
        return self._neighbors[node_id]

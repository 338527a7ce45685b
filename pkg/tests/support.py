"""Shared test helpers: static topologies wired straight onto the MAC."""

import math

from wsnsim.engine import Simulator, derive_rng
from wsnsim.mac import MacLayer, MacParams


class StaticWorld:
    """Fixed node positions with unit-disk neighbor lookup (no mobility)."""

    def __init__(self, positions, radio_range=100.0):
        self.positions = dict(positions)
        self.radio_range = radio_range

    def neighbors(self, node_id):
        x, y = self.positions[node_id]
        out = []
        for other, (ox, oy) in self.positions.items():
            if other != node_id and math.hypot(x - ox, y - oy) <= self.radio_range:
                out.append(other)
        return out


def build_mac(positions, radio_range=100.0, seed=1, params=None):
    sim = Simulator()
    world = StaticWorld(positions, radio_range)
    params = params or MacParams()
    mac = MacLayer(sim, params, world.neighbors, derive_rng(seed, "mac"))
    return sim, mac, params

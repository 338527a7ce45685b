"""Scenario configuration: a flat key=value text format with defaults,
validation, and sweep-grid expansion."""

from dataclasses import dataclass, fields, replace

PROXY_MODES = ("none", "middle", "sink_neighbor")
VARIANTS = ("tcp", "reno", "newreno", "vegas")
TRAFFIC_STATES = ("low", "medium", "high")
TRAFFIC_INTERVALS = {"low": 4.0, "medium": 2.0, "high": 1.0}


class ConfigError(Exception):
    pass


@dataclass
class ScenarioConfig:
    # Experiment grid
    area_side: float = 1000.0
    node_count: int = 50
    proxy_mode: str = "none"
    proxy_count: int = 4
    radio_range: float = 100.0
    variant: str = "tcp"
    seed: int = 1
    duration_s: float = 200.0
    warmup_s: float = 20.0
    traffic_state: str = "medium"
    report_interval_s: float = 0.0  # 0 = derive from traffic_state
    message_size: int = 512
    # Mobility
    mobility: bool = True
    v_min: float = 1.0
    v_max: float = 5.0
    pause_s: float = 2.0
    mobility_tick_s: float = 1.0
    # MAC
    mac_data_rate_bps: float = 2_000_000.0
    mac_difs_s: float = 50e-6
    mac_slot_s: float = 20e-6
    mac_cw_min: int = 31
    mac_retry_limit: int = 7
    mac_overhead_bytes: int = 58
    mac_queue_limit: int = 50
    # Routing
    route_lifetime_s: float = 10.0
    discovery_timeout_s: float = 1.0
    discovery_retries: int = 2
    route_buffer_limit: int = 64
    rreq_jitter_s: float = 0.010
    # Transport
    segment_size: int = 512
    rwnd_segments: int = 64
    rto_min_s: float = 0.2
    rto_max_s: float = 60.0
    # Proxy application
    batch_interval_s: float = 1.0
    batch_bytes: int = 4096
    proxy_backlog_bytes: int = 16384

    def interval_s(self):
        if self.report_interval_s > 0:
            return self.report_interval_s
        return TRAFFIC_INTERVALS[self.traffic_state]

    def scenario_id(self):
        return f"{self.variant}_n{self.node_count}_{self.proxy_mode}_{self.traffic_state}"

    def validate(self):
        if self.proxy_mode not in PROXY_MODES:
            raise ConfigError(f"proxy_mode must be one of {PROXY_MODES}, "
                              f"got {self.proxy_mode!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, "
                              f"got {self.variant!r}")
        if self.traffic_state not in TRAFFIC_STATES:
            raise ConfigError(f"traffic_state must be one of {TRAFFIC_STATES}, "
                              f"got {self.traffic_state!r}")
        if self.proxy_count != 4:
            raise ConfigError("proxy_count is fixed at 4 (one per quadrant)")
        if self.node_count < self.proxy_count + 1:
            raise ConfigError(
                f"node_count={self.node_count} must be at least "
                f"proxy_count + 1 = {self.proxy_count + 1}")
        if self.radio_range <= 0:
            raise ConfigError("radio_range must be positive")
        if self.duration_s <= self.warmup_s:
            raise ConfigError("duration_s must exceed warmup_s")
        if not (0 < self.v_min <= self.v_max):
            raise ConfigError("need 0 < v_min <= v_max")
        if self.message_size <= 0 or self.segment_size <= 0:
            raise ConfigError("message_size and segment_size must be positive")
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _coerce(key, raw, line_no, path):
    ftype = _FIELD_TYPES[key]
    try:
        if ftype is bool:
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError("expected true/false")
            return low == "true"
        if ftype is int:
            return int(raw)
        if ftype is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{path}:{line_no}: bad value for {key!r}: {exc}") from None


def parse_config_text(text, path="<config>", base=None):
    config = base if base is not None else ScenarioConfig()
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
        setattr(config, key, _coerce(key, raw, line_no, path))
    config.validate()
    return config


def load_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read(), path=str(path))


def dump_config(config):
    lines = [f"{f.name}={getattr(config, f.name)}" for f in fields(ScenarioConfig)]
    return "\n".join(lines) + "\n"


def apply_overrides(config, pairs):
    """Apply key=value strings (CLI --set) on top of a config."""
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must be key=value, got {pair!r}")
        key, _, raw = pair.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r}")
        setattr(config, key, _coerce(key, raw.strip(), 0, "<override>"))
    config.validate()
    return config


# -- sweep grids ------------------------------------------------------------

_SWEEP_KEYS = ("variants", "node_counts", "proxy_modes", "traffic_states", "seeds")


def _parse_seeds(raw):
    seeds = []
    for part in raw.split(","):
        part = part.strip()
        if ".." in part:
            lo, _, hi = part.partition("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


@dataclass
class SweepSpec:
    variants: tuple = VARIANTS
    node_counts: tuple = (50, 100, 110)
    proxy_modes: tuple = PROXY_MODES
    traffic_states: tuple = ("medium",)
    seeds: tuple = tuple(range(1, 11))
    base: ScenarioConfig = None

    def expand(self):
        base = self.base if self.base is not None else ScenarioConfig()
        configs = []
        for variant in self.variants:
            for node_count in self.node_counts:
                for mode in self.proxy_modes:
                    for traffic in self.traffic_states:
                        for seed in self.seeds:
                            cfg = replace(base, variant=variant,
                                          node_count=node_count,
                                          proxy_mode=mode,
                                          traffic_state=traffic, seed=seed)
                            cfg.validate()
                            configs.append(cfg)
        return configs


def parse_sweep_text(text, path="<sweep>"):
    grid = {}
    base_lines = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{line_no}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in _SWEEP_KEYS:
            if key == "seeds":
                grid[key] = tuple(_parse_seeds(raw))
            elif key == "node_counts":
                grid[key] = tuple(int(v.strip()) for v in raw.split(",") if v.strip())
            else:
                grid[key] = tuple(v.strip() for v in raw.split(",") if v.strip())
        elif key in _FIELD_TYPES:
            base_lines.append(f"{key}={raw}")
        else:
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
    base = ScenarioConfig()
    if base_lines:
        # Defer validation to expand(): grid keys override the base fields.
        for line_no, line in enumerate(base_lines, start=1):
            key, _, raw = line.partition("=")
            setattr(base, key, _coerce(key, raw, line_no, path))
    spec = SweepSpec(base=base)
    for key, value in grid.items():
        setattr(spec, key, value)
    for variant in spec.variants:
        if variant not in VARIANTS:
            raise ConfigError(f"{path}: unknown variant {variant!r}")
    for mode in spec.proxy_modes:
        if mode not in PROXY_MODES:
            raise ConfigError(f"{path}: unknown proxy_mode {mode!r}")
    return spec


def load_sweep(path):
    with open(path) as fh:
        return parse_sweep_text(fh.read(), path=str(path))

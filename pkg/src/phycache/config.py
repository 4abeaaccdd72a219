"""Simulation configuration: one flat JSON document, unknown keys rejected."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .core import ConfigError

POLICIES = ("proposed", "offline", "lfu", "vip-single")


@dataclass(frozen=True)
class SimConfig:
    # topology
    n_pairs: int = 3
    cell_radius_m: float = 250.0
    user_placement: str = "uniform"       # "uniform" in the cell or "fixed" offset
    user_offset_m: float | None = None
    min_distance_m: float = 35.0
    wrap_around: bool = True              # only meaningful for 7 cells
    bs_antennas: int = 2
    user_antennas: int = 1
    # phy
    tx_snr_db: float = 121.0              # transmit power over receiver noise
    bandwidth_hz: float = 10e6
    coord_users: int = 1                  # users scheduled per slot in coordinated mode
    # timing
    slot_s: float = 0.002
    frame_slots: int = 50
    frames: int = 400
    warmup_fraction: float = 0.1
    # traffic
    arrival_mbps: float = 10.0            # per-user total request rate
    n_objects: int = 100
    catalog_size: int = 30
    skew: float = 0.5
    identical_preference: bool = False
    object_bits: float = 8e5
    chunks: int = 20
    # cache
    cache_size: int = 8
    gamma: float = 1.0
    W: float = 100.0
    cache_rate: float = 1.0               # objects/slot a BS can read from its cache
    # backhaul
    backhaul_mbps: float = 20.0
    control_cap: float = 0.2              # max share of the backhaul spent on placement
    # run
    policy: str = "proposed"
    seed: int = 0
    lfu_window: int | None = None
    actual_rates: str = "phy"             # "phy": full rate of the chosen mode; "virtual": mu
    record_trace: bool = False

    def __post_init__(self):
        pos = ["n_pairs", "cell_radius_m", "bandwidth_hz", "slot_s", "frame_slots", "frames",
               "n_objects", "catalog_size", "object_bits", "chunks", "bs_antennas",
               "user_antennas"]
        for name in pos:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        nonneg = ["arrival_mbps", "skew", "gamma", "W", "cache_rate", "backhaul_mbps",
                  "cache_size", "min_distance_m"]
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; pick one of {POLICIES}")
        if self.catalog_size > self.n_objects:
            raise ConfigError("catalog_size cannot exceed n_objects")
        if self.cache_size > self.n_objects:
            raise ConfigError("cache_size cannot exceed n_objects")
        if not 0 <= self.warmup_fraction < 1:
            raise ConfigError("warmup_fraction must lie in [0, 1)")
        if not 0 <= self.control_cap <= 1:
            raise ConfigError("control_cap must lie in [0, 1]")
        if self.coord_users < 1 or self.coord_users > self.bs_antennas:
            raise ConfigError("coord_users must lie in [1, bs_antennas]")
        if self.user_antennas != 1:
            raise ConfigError("only single-antenna users are supported")
        if self.actual_rates not in ("phy", "virtual"):
            raise ConfigError("actual_rates must be 'phy' or 'virtual'")
        if self.user_placement not in ("uniform", "fixed"):
            raise ConfigError("user_placement must be 'uniform' or 'fixed'")

    @property
    def total_slots(self) -> int:
        return self.frames * self.frame_slots

    def replace(self, **kw) -> "SimConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "SimConfig":
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        preset = data.pop("preset", None)
        if preset and preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        base = PRESETS[preset] if preset else cls()
        merged = base.to_dict()
        unknown = sorted(set(data) - set(merged))
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        merged.update(data)
        return cls(**merged)


PRESETS = {
    "desk": SimConfig(),
    "full": SimConfig(
        n_pairs=7, n_objects=1000, catalog_size=100, cache_size=80, frame_slots=250,
        frames=400, object_bits=8e6, chunks=20, arrival_mbps=13.25, cache_rate=1.0,
        tx_snr_db=141.0, coord_users=2, backhaul_mbps=30.0,
    ),
}

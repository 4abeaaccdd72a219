"""Topology, unit conversion, clock and seeded random streams.

Everything in here is immutable once built and shared read-only by the
PHY, traffic and control modules.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Raised for an invalid simulation or analysis configuration."""


# ---------------------------------------------------------------------------
# units
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitContext:
    object_bits: float
    chunks_per_object: int
    bandwidth_hz: float
    slot_duration_s: float

    def __post_init__(self):
        if self.object_bits <= 0 or self.chunks_per_object < 1:
            raise ConfigError("object size and chunk count must be positive")
        if self.bandwidth_hz <= 0 or self.slot_duration_s <= 0:
            raise ConfigError("bandwidth and slot duration must be positive")

    @property
    def chunk_bits(self) -> float:
        return self.object_bits / self.chunks_per_object

    def objects_per_slot(self, bps):
        return convert_rate(bps, self)

    def bps(self, objects_per_slot):
        return np.asarray(objects_per_slot) * self.object_bits / self.slot_duration_s


def convert_rate(bps, ctx: UnitContext):
    """bits/s -> data objects/slot. Works elementwise on arrays."""
    return np.asarray(bps, dtype=float) * (ctx.slot_duration_s / ctx.object_bits) \
        if np.ndim(bps) else float(bps) * ctx.slot_duration_s / ctx.object_bits


# ---------------------------------------------------------------------------
# clock
# ---------------------------------------------------------------------------

@dataclass
class Clock:
    slots_per_frame: int
    slot_duration_s: float = 0.002
    t: int = 1

    def __post_init__(self):
        if self.slots_per_frame < 1:
            raise ConfigError("slots_per_frame must be >= 1")
        if self.t < 1:
            raise ConfigError("slot index starts at 1")

    @property
    def frame(self) -> int:
        return -(-self.t // self.slots_per_frame)

    @property
    def frame_start(self) -> bool:
        return (self.t - 1) % self.slots_per_frame == 0

    def tick(self) -> int:
        self.t += 1
        return self.t


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------

def _stream_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "little")


@dataclass(frozen=True)
class RngStreams:
    """One master seed fanned out into independent named generators.

    ``streams.get("channels")`` always yields a fresh generator with the same
    state for the same (seed, name) pair, so consumers never perturb each
    other.
    """

    seed: int

    def get(self, name: str, *extra: int) -> np.random.Generator:
        ss = np.random.SeedSequence([self.seed, _stream_key(name), *extra])
        return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# topology
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Topology:
    bs_positions: np.ndarray      # (N, 2) metres
    user_positions: np.ndarray    # (N, 2) metres
    serving: np.ndarray           # serving[j] = n_j
    distances: np.ndarray         # (N users, N BSs) metres, wrap-around applied
    l_t: int = 2
    l_r: int = 1
    cell_radius_m: float = 250.0
    layout: str = "hex"

    @property
    def n_pairs(self) -> int:
        return len(self.serving)

    @property
    def associated_user(self) -> np.ndarray:
        """associated_user[n] = j_n (inverse of ``serving``)."""
        inv = np.empty_like(self.serving)
        inv[self.serving] = np.arange(len(self.serving))
        return inv


def hex_centers(n: int, isd: float) -> np.ndarray:
    """First ``n`` hexagonal lattice sites around the origin, ring by ring."""
    a1 = np.array([isd, 0.0])
    a2 = np.array([isd / 2.0, isd * math.sqrt(3.0) / 2.0])
    sites = []
    ring = 0
    while len(sites) < n:
        if ring == 0:
            sites.append(np.zeros(2))
        else:
            # axial walk around the ring starting from the +x corner
            q, r = ring, 0
            for dq, dr in [(-1, 1), (-1, 0), (0, -1), (1, -1), (1, 0), (0, 1)]:
                for _ in range(ring):
                    sites.append(q * a1 + r * a2)
                    q, r = q + dq, r + dr
        ring += 1
    return np.array(sites[:n])


def wrap_shifts(isd: float) -> np.ndarray:
    """Translations of the 7-cell cluster onto its six mirror images."""
    a1 = np.array([isd, 0.0])
    a2 = np.array([isd / 2.0, isd * math.sqrt(3.0) / 2.0])
    base = 2 * a1 + a2
    shifts = [np.zeros(2)]
    for m in range(6):
        ang = m * math.pi / 3.0
        rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
        shifts.append(rot @ base)
    return np.array(shifts)


def _uniform_in_hex(rng, radius: float, min_dist: float) -> np.ndarray:
    # hexagon with vertices at angles 30 + 60m (flat side faces the +x neighbour)
    apothem = radius * math.sqrt(3.0) / 2.0
    while True:
        p = rng.uniform(-radius, radius, size=2)
        r = math.hypot(*p)
        if r < min_dist or r > radius:
            continue
        ang = math.atan2(p[1], p[0])
        # distance to the nearest edge normal (edge normals at 0, 60, ...)
        off = (ang + math.pi / 6.0) % (math.pi / 3.0) - math.pi / 6.0
        if r * math.cos(off) <= apothem:
            return p


def build_topology(config, rng: np.random.Generator | None = None) -> Topology:
    """Place N BS-user pairs on a hexagonal layout.

    ``config`` needs ``n_pairs``, ``cell_radius_m`` and optionally
    ``user_placement`` ("uniform" or "fixed"), ``user_offset_m``,
    ``min_distance_m``, ``wrap_around``, ``bs_antennas``, ``user_antennas``.
    User j is always served by BS j.
    """
    n = int(getattr(config, "n_pairs"))
    radius = float(getattr(config, "cell_radius_m"))
    if n < 1:
        raise ConfigError("n_pairs must be >= 1")
    if radius <= 0:
        raise ConfigError("cell_radius_m must be > 0")
    placement = getattr(config, "user_placement", "uniform")
    min_dist = float(getattr(config, "min_distance_m", 35.0))
    offset = getattr(config, "user_offset_m", None)
    wrap = bool(getattr(config, "wrap_around", True)) and n == 7
    l_t = int(getattr(config, "bs_antennas", 2))
    l_r = int(getattr(config, "user_antennas", 1))

    isd = radius * math.sqrt(3.0)
    bs = hex_centers(n, isd)
    if placement == "fixed":
        off = float(offset if offset is not None else radius / 2.0)
        if not 0 < off <= radius:
            raise ConfigError("user_offset_m must lie in (0, cell_radius_m]")
        users = bs + np.array([off, 0.0])
    elif placement == "uniform":
        if rng is None:
            raise ConfigError("uniform user placement needs an rng")
        users = np.array([b + _uniform_in_hex(rng, radius, min_dist) for b in bs])
    else:
        raise ConfigError(f"unknown user_placement {placement!r}")

    if wrap:
        images = bs[None, :, :] + wrap_shifts(isd)[:, None, :]          # (7, N, 2)
        d = np.linalg.norm(users[None, :, None, :] - images[:, None, :, :], axis=-1)
        dist = d.min(axis=0)
    else:
        dist = np.linalg.norm(users[:, None, :] - bs[None, :, :], axis=-1)
    dist = np.maximum(dist, min_dist)
    if not np.all(dist > 0):
        raise ConfigError("degenerate geometry: zero BS-user distance")
    return Topology(
        bs_positions=bs,
        user_positions=users,
        serving=np.arange(n),
        distances=dist,
        l_t=l_t,
        l_r=l_r,
        cell_radius_m=radius,
        layout="hex-wrap" if wrap else "hex",
    )

"""Zipf popularity, per-user catalogs and Poisson request arrivals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError


def zipf_popularity(n_items: int, skew: float) -> np.ndarray:
    if n_items < 1:
        raise ConfigError("need at least one object")
    if skew < 0:
        raise ConfigError("skewness must be >= 0")
    w = np.arange(1, n_items + 1, dtype=float) ** (-float(skew))
    return w / w.sum()


@dataclass(frozen=True)
class Catalog:
    """Per-user request sets.

    ``members[j, r]`` is the object requested with rank r by user j and
    ``rates[j, k]`` the per-slot arrival rate of object k at user j.
    """

    n_objects: int
    members: np.ndarray      # (N, catalog_size) int
    popularity: np.ndarray   # (catalog_size,)
    rate_per_user: float

    @property
    def n_users(self) -> int:
        return self.members.shape[0]

    @property
    def rates(self) -> np.ndarray:
        out = np.zeros((self.n_users, self.n_objects))
        rows = np.arange(self.n_users)[:, None]
        out[rows, self.members] = self.rate_per_user * self.popularity[None, :]
        return out

    def aggregate_rates(self) -> np.ndarray:
        return self.rates.sum(axis=0)


def draw_catalogs(rng, n_users: int, n_objects: int, catalog_size: int, skew: float,
                  rate_per_user: float, identical: bool = False) -> Catalog:
    """Draw each user's catalog uniformly without replacement.

    With ``identical=True`` every user requests objects 0..catalog_size-1 in
    the same rank order, which is the identical-preference setting.
    """
    if not 1 <= catalog_size <= n_objects:
        raise ConfigError("catalog_size must lie in [1, K]")
    if rate_per_user < 0:
        raise ConfigError("arrival rate must be >= 0")
    if identical:
        members = np.tile(np.arange(catalog_size), (n_users, 1))
    else:
        members = np.stack([rng.choice(n_objects, size=catalog_size, replace=False)
                            for _ in range(n_users)])
    return Catalog(n_objects, members, zipf_popularity(catalog_size, skew), float(rate_per_user))


def arrival_cap(rate_per_user: float) -> int:
    return max(10, math.ceil(50.0 * rate_per_user))


@dataclass(frozen=True)
class ArrivalBatch:
    """Object request counts A[j, k] created in slot ``t``.

    Each object request stands for ``chunks`` interest packets that share the
    creation slot.
    """

    t: int
    counts: np.ndarray
    chunks: int = 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def interest_packets(self) -> int:
        return self.total * self.chunks


def generate_arrivals(rng, catalog: Catalog, t: int, chunks: int = 1) -> ArrivalBatch:
    return ArrivalBatch(t, arrival_block(rng, catalog, 1)[0], chunks)


def arrival_block(rng, catalog: Catalog, n_slots: int) -> np.ndarray:
    """Counts for ``n_slots`` consecutive slots, shape (n_slots, N, K)."""
    n, c = catalog.members.shape
    lam = catalog.rate_per_user * catalog.popularity
    draws = rng.poisson(np.broadcast_to(lam, (n_slots, n, c)))
    np.minimum(draws, arrival_cap(catalog.rate_per_user), out=draws)
    out = np.zeros((n_slots, n, catalog.n_objects), dtype=np.int64)
    rows = np.arange(n)[:, None]
    out[:, rows, catalog.members] = draws
    return out

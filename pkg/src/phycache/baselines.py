"""Comparison policies: static top-L_C caching, LFU, and coordinated-only VIP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .virtual import CacheState, ControlDecision, VipState, fast_control, place_cache


def offline_placement(rates: np.ndarray, capacity: int) -> CacheState:
    """Cache the ``capacity`` objects with the largest aggregate arrival rate.

    ``rates`` is the (N, K) matrix of per-user arrival rates. Every BS gets
    the same set; ties go to the lower object index.
    """
    n, k = rates.shape
    agg = rates.sum(axis=0)
    top = np.argsort(-agg, kind="stable")[:capacity]
    cache = CacheState.empty(n, k, capacity)
    p = np.zeros((n, k), dtype=np.int8)
    p[:, top] = 1
    cache.apply(p, gamma=0.0)
    return cache


@dataclass
class LfuCounters:
    counts: np.ndarray
    window: int | None = None       # frames between resets; None keeps counts forever
    frames_seen: int = 0

    @classmethod
    def zeros(cls, n: int, k: int, window: int | None = None) -> "LfuCounters":
        return cls(np.zeros((n, k), dtype=np.int64), window)

    def observe(self, arrivals: np.ndarray, modes: np.ndarray | None = None) -> None:
        """Count the requests each BS sees in one slot.

        BS n sees every request of its own user and the CoMP-marked requests
        of the others.
        """
        if modes is None:
            self.counts += arrivals
            return
        comp = (arrivals * modes).sum(axis=0)
        self.counts += arrivals + comp[None, :] - arrivals * modes

    def end_frame(self) -> None:
        self.frames_seen += 1
        if self.window and self.frames_seen % self.window == 0:
            self.counts[:] = 0


def lfu_step(counters: LfuCounters, cache_s: np.ndarray, capacity: int) -> np.ndarray:
    """Placement actions swapping in strictly more frequent uncached objects."""
    n, k = cache_s.shape
    p = np.zeros((n, k), dtype=np.int8)
    for b in range(n):
        cnt = counters.counts[b]
        held = set(np.flatnonzero(cache_s[b]).tolist())
        order = np.argsort(-cnt, kind="stable")
        candidates = [int(x) for x in order if int(x) not in held and cnt[x] > 0]
        for kp in candidates:
            if len(held) < capacity:
                held.add(kp)
                p[b, kp] = 1
                continue
            # least frequently requested cached object, lowest index on ties
            victim = min(held, key=lambda x: (cnt[x], x))
            if cnt[kp] <= cnt[victim]:
                break
            held.remove(victim)
            held.add(kp)
            if p[b, victim] == 1:
                p[b, victim] = 0
            else:
                p[b, victim] = -1
            p[b, kp] = 1
    return p


def single_mode_vip_control(vip: VipState, comp_rates, coord_rates, R_d) -> ControlDecision:
    """Fast control restricted to the coordinated mode."""
    return fast_control(vip, comp_rates, coord_rates, R_d, allow_comp=False)


def single_mode_placement(vip_bs, cache_s, capacity, W, T, gamma, r) -> np.ndarray:
    return place_cache(vip_bs, cache_s, capacity, W, T, gamma, r)

"""VIP counters, frame-level cache placement and slot-level control.

Array conventions: user-side arrays are (N, K) indexed [j, k]; BS-side
arrays are (N, K) indexed [n, k]. User j is served by BS j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class VipState:
    user: np.ndarray
    bs: np.ndarray
    t: int = 1

    @classmethod
    def zeros(cls, n: int, k: int) -> "VipState":
        return cls(np.zeros((n, k)), np.zeros((n, k)))

    def copy(self) -> "VipState":
        return VipState(self.user.copy(), self.bs.copy(), self.t)

    @property
    def total(self) -> float:
        return float(self.user.sum() + self.bs.sum())


@dataclass
class CacheState:
    s: np.ndarray                       # (N, K) in {0, 1}
    capacity: int
    frame: int = 0
    last_action: np.ndarray | None = None
    cost: float = 0.0

    @classmethod
    def empty(cls, n: int, k: int, capacity: int) -> "CacheState":
        return cls(np.zeros((n, k), dtype=np.int8), capacity)

    def copy(self) -> "CacheState":
        la = None if self.last_action is None else self.last_action.copy()
        return CacheState(self.s.copy(), self.capacity, self.frame, la, self.cost)

    def apply(self, p: np.ndarray, gamma: float = 0.0) -> float:
        """Apply placement actions ``p`` and return this frame's cost."""
        p = np.asarray(p, dtype=np.int8)
        check_placement(self.s, p, self.capacity)
        self.s = (self.s + p).astype(np.int8)
        self.last_action = p
        self.frame += 1
        frame_cost = float(gamma) * float((p == 1).sum())
        self.cost += frame_cost
        return frame_cost


def check_placement(s_prev: np.ndarray, p: np.ndarray, capacity: int) -> None:
    if np.any((p == 1) & (s_prev == 1)) or np.any((p == -1) & (s_prev == 0)):
        raise ValueError("redundant placement action")
    if np.any(np.abs(p) > 1):
        raise ValueError("placement actions must lie in {-1, 0, 1}")
    if np.any((s_prev + p).sum(axis=1) > capacity):
        raise ValueError("cache size exceeded")


@dataclass
class ControlDecision:
    mode: int                    # 1 = CoMP, 0 = coordinated
    mu_a: np.ndarray             # (N users, K)
    mu_b: np.ndarray             # (N users, K)
    mu_ng: np.ndarray            # (N BSs, K)
    delta_a: float = 0.0
    delta_b: float = 0.0

    @classmethod
    def idle(cls, n: int, k: int) -> "ControlDecision":
        z = np.zeros((n, k))
        return cls(1, z, z.copy(), z.copy())

    def user_rates(self) -> np.ndarray:
        """Aggregate per-user rate in the active mode."""
        return (self.mu_a if self.mode else self.mu_b).sum(axis=1)


# ---------------------------------------------------------------------------
# queue dynamics
# ---------------------------------------------------------------------------

def update_vip_queues(state: VipState, dec: ControlDecision, arrivals: np.ndarray,
                      cache_s: np.ndarray, r: np.ndarray) -> VipState:
    m = dec.mode
    serve = dec.mu_a if m else dec.mu_b
    user = np.maximum(state.user - serve, 0.0) + arrivals
    # BS n receives every user's CoMP flow, or only its own user's coordinated flow
    inflow = np.broadcast_to(dec.mu_a.sum(axis=0), state.bs.shape) if m else dec.mu_b
    bs = np.maximum(np.maximum(state.bs - dec.mu_ng, 0.0) + inflow
                    - np.asarray(r, dtype=float)[:, None] * cache_s, 0.0)
    return VipState(user, bs, state.t + 1)


# ---------------------------------------------------------------------------
# slow timescale
# ---------------------------------------------------------------------------

def _top_objects(v: np.ndarray, count: int) -> np.ndarray:
    # stable sort on -v: ties go to the lower index
    return np.argsort(-v, kind="stable")[:count]


def place_cache(vip_bs: np.ndarray, cache_s: np.ndarray, capacity: int, W: float, T: int,
                gamma: float, r) -> np.ndarray:
    """Frame-start placement actions p[n, k] in {-1, 0, 1}."""
    n_bs, k = vip_bs.shape
    r = np.broadcast_to(np.asarray(r, dtype=float), (n_bs,))
    thr = W * gamma / (2.0 * T)
    p = np.zeros((n_bs, k), dtype=np.int8)
    for n in range(n_bs):
        v = vip_bs[n]
        cached = np.flatnonzero(cache_s[n])
        best = _top_objects(v, capacity)
        in_best = np.zeros(k, dtype=bool)
        in_best[best] = True
        new = [int(x) for x in best if not cache_s[n, x]]            # already descending
        old = [int(x) for x in cached if not in_best[x]]
        old.sort(key=lambda x: (v[x], x))                             # ascending
        free = max(len(new) - len(old), 0)
        free = min(free, capacity - len(cached))
        for kp in new[:free]:
            if v[kp] * r[n] >= thr:
                p[n, kp] = 1
        for kp, ko in zip(new[free:], old):
            if (v[kp] - v[ko]) * r[n] >= thr:
                p[n, kp] = 1
                p[n, ko] = -1
    return p


def drift_upper_bound(vip_bs: np.ndarray, cache_prev: np.ndarray, p: np.ndarray,
                      W: float, T: int, gamma: float, r) -> float:
    """Placement-dependent part of the T-slot drift-plus-penalty bound."""
    r = np.broadcast_to(np.asarray(r, dtype=float), (vip_bs.shape[0],))
    adds = float((np.asarray(p) == 1).sum())
    held = (vip_bs * (cache_prev + p)).sum(axis=1)
    return W * gamma * adds - 2.0 * T * float((held * r).sum())


# ---------------------------------------------------------------------------
# fast timescale
# ---------------------------------------------------------------------------

def _best_allocation(weights: np.ndarray, rates: np.ndarray):
    """Each user puts its whole rate on its best positive-weight object."""
    n, k = weights.shape
    best = np.argmax(weights, axis=1)                 # first max wins ties
    w = weights[np.arange(n), best]
    serve = w > 0
    mu = np.zeros((n, k))
    mu[np.arange(n)[serve], best[serve]] = rates[serve]
    delta = float(np.dot(rates, np.where(serve, w, 0.0)))
    return mu, delta


def fast_control(vip: VipState, comp_rates, coord_rates, R_d, allow_comp: bool = True,
                 allow_coord: bool = True) -> ControlDecision:
    n, k = vip.user.shape
    R_d = np.broadcast_to(np.asarray(R_d, dtype=float), (n,))
    mu_ng = np.zeros((n, k))
    mu_ng[np.arange(n), np.argmax(vip.bs, axis=1)] = R_d
    comp_rates = np.asarray(comp_rates, dtype=float)
    coord_rates = np.asarray(coord_rates, dtype=float)

    w_a = vip.user - vip.bs.sum(axis=0)[None, :]
    w_b = vip.user - vip.bs                          # BS n_j = j
    if allow_comp:
        mu_a, d_a = _best_allocation(w_a, comp_rates)
    else:
        mu_a, d_a = np.zeros((n, k)), -np.inf
    if allow_coord:
        mu_b, d_b = _best_allocation(w_b, coord_rates)
    else:
        mu_b, d_b = np.zeros((n, k)), -np.inf
    mode = 1 if d_a >= d_b else 0
    if mode:
        mu_b = np.zeros((n, k))
    else:
        mu_a = np.zeros((n, k))
    return ControlDecision(mode, mu_a, mu_b, mu_ng, float(d_a), float(d_b))


def one_step_objective(vip: VipState, dec: ControlDecision) -> float:
    """Decision-dependent part of the one-slot drift bound (lower is better)."""
    bs_sum = vip.bs.sum(axis=0)
    if dec.mode:
        per_user = (dec.mu_a * (bs_sum[None, :] - vip.user)).sum(axis=1)
    else:
        per_user = (dec.mu_b * (vip.bs - vip.user)).sum(axis=1)
    backhaul = (vip.bs * dec.mu_ng).sum(axis=1)
    total = 0.0
    for x in per_user:
        total += float(x)
    for x in backhaul:
        total -= float(x)
    return total

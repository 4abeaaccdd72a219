"""Sum-DoF closed form, region membership and exhaustive oracles.

DoF-scale conventions: ``alpha`` is the fraction of time spent in the
coordinated mode, ``d`` is a per-user total DoF, and the per-mode DoF
regions are boxes {x_j <= D_A} and {x_j <= D_B}.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError
from .virtual import (ControlDecision, VipState, check_placement, drift_upper_bound,
                      one_step_objective)


@dataclass(frozen=True)
class RegionParams:
    N: int
    K: int
    L_C: int
    rho: np.ndarray
    R_d: float
    r: float
    D_A: float = 1.0
    D_B: float = 0.5

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        object.__setattr__(self, "rho", rho)
        if self.N < 1 or self.K < 1:
            raise ConfigError("N and K must be positive")
        if rho.shape != (self.K,):
            raise ConfigError("rho must have K entries")
        if abs(rho.sum() - 1.0) > 1e-9 or np.any(np.diff(rho) > 1e-15) or np.any(rho < 0):
            raise ConfigError("rho must be a normalized descending distribution")
        if not 0 <= self.L_C <= self.K:
            raise ConfigError("L_C must lie in [0, K]")
        if not 0 <= self.D_B <= self.D_A or self.D_A <= 0:
            raise ConfigError("need 0 <= D_B <= D_A and D_A > 0")
        if self.R_d < 0 or self.r < 0:
            raise ConfigError("rates must be non-negative")

    @property
    def tail(self) -> float:
        """Popularity mass outside the cache."""
        return float(self.rho[self.L_C:].sum())

    @property
    def R_A(self) -> float:
        return self.N * self.D_A * self.tail

    @property
    def R_B(self) -> float:
        return self.D_B * self.tail

    def replace(self, **kw) -> "RegionParams":
        vals = dict(N=self.N, K=self.K, L_C=self.L_C, rho=self.rho, R_d=self.R_d,
                    r=self.r, D_A=self.D_A, D_B=self.D_B)
        vals.update(kw)
        return RegionParams(**vals)


@dataclass(frozen=True)
class SumDof:
    d: float            # per-user DoF at the optimum
    alpha: float        # coordinated-mode fraction
    branch: int         # 1 = RAN limited, 2 = mixed, 3 = backhaul limited
    N: int
    K: int

    @property
    def network(self) -> float:
        return self.N * self.d

    @property
    def k_scaled(self) -> float:
        return self.K * self.d


def _require_fast_cache(p: RegionParams) -> None:
    if p.r < p.N * p.D_A:
        raise ConfigError("closed form needs r >= N * D_A")


def max_sum_dof(p: RegionParams) -> SumDof:
    _require_fast_cache(p)
    tau = p.tail
    if tau <= 0.0 or p.R_d >= p.R_A:
        return SumDof(p.D_A, 0.0, 1, p.N, p.K)
    if p.R_d <= p.R_B:
        return SumDof(p.R_d / tau, 1.0, 3, p.N, p.K)
    denom = p.R_A - p.N * p.R_B
    alpha = None
    if denom > 0:
        a_hat = (p.R_A - p.N * p.R_d) / denom
        # the first-case test ((1-a)R_A/N + a R_B <= a D_B) collapses to R_d <= a D_B
        if p.R_d <= a_hat * p.D_B:
            alpha = a_hat
    if alpha is None:
        alpha = (p.R_A - p.R_d) / (denom + (p.N - 1) * p.D_B)
    alpha = min(max(alpha, 0.0), 1.0)
    return SumDof((1 - alpha) * p.D_A + alpha * p.D_B, alpha, 2, p.N, p.K)


def symmetric_backhaul_load(d, alpha, p: RegionParams):
    """Least per-BS backhaul load for the symmetric tuple d * rho.

    CoMP traffic is placed on cached objects first; only the part that
    spills onto uncached objects is carried by the N - 1 other BSs.
    """
    tau = p.tail
    d = np.asarray(d, dtype=float)
    spill = np.maximum(d * tau - np.asarray(alpha) * p.D_B, 0.0)
    return d * tau + (p.N - 1) * spill


def symmetric_feasible(d, alpha, p: RegionParams):
    d = np.asarray(d, dtype=float)
    cap = (1 - np.asarray(alpha)) * p.D_A + np.asarray(alpha) * p.D_B
    return (d <= cap + 1e-12) & (symmetric_backhaul_load(d, alpha, p) <= p.R_d + 1e-12)


def grid_alpha_oracle(p: RegionParams, step: float = 1e-4, iters: int = 60,
                      return_alpha: bool = False):
    """Maximum per-user d by exhaustive search over alpha and bisection on d."""
    _require_fast_cache(p)
    n = int(round(1.0 / step))
    alpha = np.linspace(0.0, 1.0, n + 1)
    lo = np.zeros_like(alpha)
    hi = (1 - alpha) * p.D_A + alpha * p.D_B
    ok = symmetric_feasible(hi, alpha, p)
    lo[ok] = hi[ok]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f = symmetric_feasible(mid, alpha, p)
        lo = np.where(f, mid, lo)
        hi = np.where(f, hi, mid)
    i = int(np.argmax(lo))
    return (float(lo[i]), float(alpha[i])) if return_alpha else float(lo[i])


# ---------------------------------------------------------------------------
# region membership for general tuples d[j, k]
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Membership:
    feasible: bool
    alpha: float | None
    loads: np.ndarray | None = None


def popularity_order(d: np.ndarray) -> np.ndarray:
    """Object permutation sorting aggregate demand in descending order."""
    return np.argsort(-d.sum(axis=0), kind="stable")


def bs_loads(d: np.ndarray, alpha: float, cached: np.ndarray, D_B: float):
    """(cached, uncached) backhaul-relevant load per BS at a given alpha.

    Each user keeps only max(0, D_j - alpha D_B) on CoMP, placed on cached
    objects first. BS n carries its own user's whole demand plus the CoMP
    share of everyone else.
    """
    n, k = d.shape
    tot = d.sum(axis=1)
    comp = np.maximum(tot - alpha * D_B, 0.0)
    head = d[:, cached].sum(axis=1)
    comp_head = np.minimum(comp, head)
    comp_tail = comp - comp_head
    h = np.empty(n)
    t = np.empty(n)
    for bs in range(n):
        others = np.arange(n) != bs
        h[bs] = head[bs] + comp_head[others].sum()
        t[bs] = (tot[bs] - head[bs]) + comp_tail[others].sum()
    return h, t


def dof_region_membership(d, p: RegionParams, tol: float = 1e-12) -> Membership:
    """Whether the tuple d[j, k] lies in the DoF stability region.

    The cache holds the L_C objects with the largest aggregate demand at
    every BS. Loads only shrink as alpha grows, so the largest alpha that
    keeps every user within its mode-mixed DoF budget decides feasibility.
    """
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != p.N:
        raise ValueError("d must have shape (N, K')")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ValueError("DoF tuple entries must be finite and non-negative")
    tot = d.sum(axis=1)
    if np.any(tot > p.D_A + tol):
        return Membership(False, None)
    if p.D_A > p.D_B:
        a_max = float(min(1.0, np.min((p.D_A - tot) / (p.D_A - p.D_B))))
    else:
        a_max = 1.0
    a_max = max(a_max, 0.0)
    cached = popularity_order(d)[: p.L_C]
    h, t = bs_loads(d, a_max, cached, p.D_B)
    load = np.maximum(h - p.r, 0.0) + t
    return Membership(bool(np.all(load <= p.R_d + tol)), a_max, load)


# ---------------------------------------------------------------------------
# exhaustive oracles for the two control problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    decision: object
    objective: float


def brute_force_cache_oracle(vip_bs, cache_prev, capacity: int, W: float, T: int, gamma: float,
                             r) -> OracleResult:
    vip_bs = np.asarray(vip_bs, dtype=float)
    cache_prev = np.asarray(cache_prev, dtype=np.int8)
    n_bs, k = vip_bs.shape
    if k > 12 or capacity > 4:
        raise ValueError("instance too large for enumeration (K <= 12, L_C <= 4)")
    r = np.broadcast_to(np.asarray(r, dtype=float), (n_bs,))
    contents = [c for size in range(min(capacity, k) + 1)
                for c in itertools.combinations(range(k), size)]
    p = np.zeros((n_bs, k), dtype=np.int8)
    for n in range(n_bs):
        best, best_val = None, math.inf
        for c in contents:
            s_new = np.zeros(k, dtype=np.int8)
            s_new[list(c)] = 1
            pn = (s_new - cache_prev[n]).astype(np.int8)
            val = drift_upper_bound(vip_bs[n:n + 1], cache_prev[n:n + 1], pn[None],
                                    W, T, gamma, r[n:n + 1])
            if val < best_val:
                best, best_val = pn, val
        p[n] = best
    check_placement(cache_prev, p, capacity)
    return OracleResult(p, drift_upper_bound(vip_bs, cache_prev, p, W, T, gamma, r))


def brute_force_control_oracle(vip: VipState, comp_rates, coord_rates, R_d) -> OracleResult:
    n, k = vip.user.shape
    if n > 3 or k > 5:
        raise ValueError("instance too large for enumeration (N <= 3, K <= 5)")
    comp_rates = np.asarray(comp_rates, dtype=float)
    coord_rates = np.asarray(coord_rates, dtype=float)
    R_d = np.broadcast_to(np.asarray(R_d, dtype=float), (n,))
    bs_sum = vip.bs.sum(axis=0)
    # per-user cost of each option; column 0 = serve nothing
    cost = np.zeros((2, n, k + 1))
    cost[1, :, 1:] = comp_rates[:, None] * (bs_sum[None, :] - vip.user)
    cost[0, :, 1:] = coord_rates[:, None] * (vip.bs - vip.user)
    bh = -R_d[:, None] * vip.bs                                         # (n, k)

    user_choices = np.array(list(itertools.product(range(k + 1), repeat=n)))   # (U, n)
    bh_choices = np.array(list(itertools.product(range(k), repeat=n)))         # (B, n)
    user_tot = cost[:, np.arange(n)[None, :], user_choices].sum(axis=2)         # (2, U)
    bh_tot = bh[np.arange(n)[None, :], bh_choices].sum(axis=1)                  # (B,)
    joint = user_tot[:, :, None] + bh_tot[None, None, :]
    mode, ui, bi = np.unravel_index(int(np.argmin(joint)), joint.shape)

    mu = np.zeros((n, k))
    rates = comp_rates if mode == 1 else coord_rates
    for j, c in enumerate(user_choices[ui]):
        if c > 0:
            mu[j, c - 1] = rates[j]
    mu_ng = np.zeros((n, k))
    mu_ng[np.arange(n), bh_choices[bi]] = R_d
    zero = np.zeros((n, k))
    dec = ControlDecision(int(mode), mu if mode else zero, zero.copy() if mode else mu, mu_ng)
    return OracleResult(dec, one_step_objective(vip, dec))


# ---------------------------------------------------------------------------
# conditional flow balance
# ---------------------------------------------------------------------------

@dataclass
class FrameTrace:
    """Per-frame record of cache states and per-queue average rates.

    ``flows[name] = (inflow, service)`` with arrays shaped (frames, ...),
    both time averages over the frame in objects/slot.
    """

    states: list = field(default_factory=list)
    flows: dict = field(default_factory=dict)

    def append(self, state_key, **classes):
        self.states.append(state_key)
        for name, (inflow, service) in classes.items():
            a, s = self.flows.setdefault(name, ([], []))
            a.append(np.asarray(inflow, dtype=float))
            s.append(np.asarray(service, dtype=float))

    def arrays(self, name):
        a, s = self.flows[name]
        return np.stack(a), np.stack(s)

    def __len__(self):
        return len(self.states)


@dataclass
class StateGroup:
    key: bytes
    frames: int
    probability: float
    slack: dict
    stderr: dict
    violations: list


@dataclass
class FlowBalanceReport:
    groups: list
    excluded: list
    z: float

    @property
    def violations(self):
        return [(g.key, v) for g in self.groups for v in g.violations]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_conditional_flow_balance(trace: FrameTrace, T: int, min_frames: int = 50,
                                   z: float = 3.0, min_total_frames: int = 100,
                                   start: int = 0) -> FlowBalanceReport:
    """Group frames by cache state and test mean inflow <= mean service.

    A queue class is flagged when its conditional slack (inflow minus
    service) exceeds ``z`` standard errors of the frame-level mean.
    """
    n_frames = len(trace) - start
    if n_frames < min_total_frames:
        raise ValueError(f"trace spans {n_frames} frames, need >= {min_total_frames}")
    if T < 1:
        raise ValueError("T must be >= 1")
    keys = trace.states[start:]
    groups: dict = {}
    for i, key in enumerate(keys):
        groups.setdefault(key, []).append(i)
    data = {name: tuple(x[start:] for x in trace.arrays(name)) for name in trace.flows}
    out, excluded = [], []
    for key, idx in groups.items():
        if len(idx) < min_frames:
            excluded.append((key, len(idx)))
            continue
        slack, stderr, bad = {}, {}, []
        for name, (inflow, service) in data.items():
            diff = inflow[idx] - service[idx]
            m = diff.mean(axis=0)
            se = diff.std(axis=0, ddof=1) / math.sqrt(len(idx))
            slack[name] = m
            stderr[name] = se
            for pos in zip(*np.nonzero(m > z * se + 1e-12)):
                bad.append((name, tuple(int(x) for x in pos), float(m[pos]), float(se[pos])))
        out.append(StateGroup(key, len(idx), len(idx) / n_frames, slack, stderr, bad))
    if excluded:
        warnings.warn(f"{len(excluded)} cache state(s) visited fewer than {min_frames} frames "
                      "were left out", stacklevel=2)
    return FlowBalanceReport(out, excluded, z)

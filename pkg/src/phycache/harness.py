"""Slot/frame simulation loop, metrics, sweeps and file output."""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .actual import PacketLedger, VirtualCompQueues, deliver_phy, route_packets, select_ip_modes
from .analysis import FrameTrace
from .baselines import LfuCounters, lfu_step, offline_placement, single_mode_vip_control
from .config import SimConfig
from .core import RngStreams, UnitContext, build_topology
from .phy import db_to_linear, rate_block
from .traffic import arrival_block, draw_catalogs
from .virtual import CacheState, VipState, fast_control, place_cache, update_vip_queues

log = logging.getLogger(__name__)

TIMESERIES_COLUMNS = ("frame", "vip_backlog", "dp_backlog", "placement_cost", "comp_fraction",
                      "hits", "misses", "backhaul_data")

SUMMARY_KEYS = ("policy", "seed", "slots", "mean_delay_slots", "mean_delay_s", "p50_delay_slots",
                "p95_delay_slots", "p99_delay_slots", "delay_samples", "vip_backlog",
                "dp_backlog", "placement_cost", "comp_fraction", "hit_fraction",
                "miss_fraction", "requests_created", "fidelity_gap", "max_abs_u")


@dataclass
class MetricsReport:
    summary: dict
    timeseries: list
    delay_hist: dict
    fidelity: np.ndarray | None = None
    trace: FrameTrace | None = None
    vip_series: np.ndarray | None = None

    @property
    def mean_delay(self) -> float:
        return self.summary["mean_delay_slots"]

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        summary = {k: self.summary[k] for k in SUMMARY_KEYS}
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        with open(out / "timeseries.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TIMESERIES_COLUMNS)
            for row in self.timeseries:
                w.writerow([row[c] for c in TIMESERIES_COLUMNS])
        with open(out / "delays.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("delay_slots", "count"))
            for d in sorted(self.delay_hist):
                w.writerow((d, self.delay_hist[d]))


def _percentile(hist: Counter, q: float) -> float:
    if not hist:
        return 0.0
    keys = sorted(hist)
    counts = np.array([hist[k] for k in keys])
    cum = np.cumsum(counts)
    idx = int(np.searchsorted(cum, q * cum[-1]))
    return float(keys[min(idx, len(keys) - 1)])


def run_simulation(cfg: SimConfig, *, keep_vip_series: bool = False) -> MetricsReport:
    streams = RngStreams(cfg.seed)
    topo = build_topology(cfg, streams.get("topology"))
    ctx = UnitContext(cfg.object_bits, cfg.chunks, cfg.bandwidth_hz, cfg.slot_s)
    lam = ctx.objects_per_slot(cfg.arrival_mbps * 1e6)
    R = ctx.objects_per_slot(cfg.backhaul_mbps * 1e6)
    catalog = draw_catalogs(streams.get("catalogs"), cfg.n_pairs, cfg.n_objects,
                            cfg.catalog_size, cfg.skew, lam, cfg.identical_preference)
    power = db_to_linear(cfg.tx_snr_db)
    n, k, T = cfg.n_pairs, cfg.n_objects, cfg.frame_slots
    r = np.full(n, cfg.cache_rate)

    rng_ch = streams.get("channels")
    rng_sched = streams.get("scheduling")
    rng_arr = streams.get("arrivals")

    vip = VipState.zeros(n, k)
    vq = VirtualCompQueues(n, k)
    ledger = PacketLedger(n, cfg.chunks, r)
    warm = int(cfg.frames * cfg.warmup_fraction)
    ledger_record_from = warm * T + 1
    if cfg.policy == "offline":
        cache = offline_placement(catalog.rates, cfg.cache_size)
    else:
        cache = CacheState.empty(n, k, cfg.cache_size)
    counters = LfuCounters.zeros(n, k, cfg.lfu_window) if cfg.policy == "lfu" else None
    control = single_mode_vip_control if cfg.policy == "vip-single" else fast_control

    cum_ma = np.zeros((n, k))
    cum_mu = np.zeros((n, k))
    trace = FrameTrace() if cfg.record_trace else None
    vip_series = np.zeros(cfg.total_slots) if keep_vip_series else None
    timeseries = []
    delay_hist: Counter = Counter()
    comp_slots = 0
    use_phy = cfg.actual_rates == "phy"
    t = 1
    for f in range(cfg.frames):
        if cfg.policy in ("proposed", "vip-single"):
            p = place_cache(vip.bs, cache.s, cfg.cache_size, cfg.W, T, cfg.gamma, r)
        elif cfg.policy == "lfu":
            p = lfu_step(counters, cache.s, cfg.cache_size)
        else:
            p = np.zeros((n, k), dtype=np.int8)
        frame_cost = cache.apply(p, cfg.gamma)
        adds = (p == 1).sum(axis=1)
        R_c = np.minimum(adds / T, cfg.control_cap * R)
        R_d = R - R_c
        R_d_list = R_d.tolist()

        comp, coord, _ = rate_block(topo, ctx, power, rng_ch, rng_sched, T, cfg.coord_users)
        arr = arrival_block(rng_arr, catalog, T)
        s_now = cache.s
        drain = r[:, None] * s_now
        hits0, miss0 = ledger.hits, ledger.misses
        vip_acc = 0.0
        frame_comp = 0
        if trace is not None:
            acc = [np.zeros((n, k)) for _ in range(4)]
        for i in range(T):
            dec = control(vip, comp[i], coord[i], R_d)
            a = arr[i]
            m = select_ip_modes(vq, a, dec.mode, dec.mu_a)
            if counters is not None:
                counters.observe(a, m)
            if trace is not None:
                acc[0] += a
                acc[1] += dec.mu_a if dec.mode else dec.mu_b
                acc[2] += dec.mu_a.sum(axis=0)[None, :] if dec.mode else dec.mu_b
                acc[3] += dec.mu_ng + drain
            cum_ma += m * a
            if dec.mode:
                cum_mu += dec.mu_a
            vip = update_vip_queues(vip, dec, a, s_now, r)
            route_packets(ledger, s_now, m, a, t, R_d_list)
            before = len(ledger.delays)
            if use_phy:
                air = comp[i] if dec.mode else coord[i]
            else:
                air = dec.user_rates()
            deliver_phy(ledger, dec.mode, air.tolist(), t)
            if t < ledger_record_from:
                del ledger.delays[before:]
            tot = vip.total
            vip_acc += tot
            if vip_series is not None:
                vip_series[t - 1] = tot
            frame_comp += dec.mode
            t += 1
        if counters is not None:
            counters.end_frame()
        if ledger.delays:
            delay_hist.update(ledger.delays)
            ledger.delays.clear()
        comp_slots += frame_comp if f >= warm else 0
        if trace is not None:
            trace.append(s_now.tobytes(),
                         user=(acc[0] / T, acc[1] / T),
                         bs=(acc[2] / T, acc[3] / T))
        timeseries.append({
            "frame": f + 1,
            "vip_backlog": vip_acc / T,
            "dp_backlog": ledger.total_backlog(),
            "placement_cost": frame_cost,
            "comp_fraction": frame_comp / T,
            "hits": ledger.hits - hits0,
            "misses": ledger.misses - miss0,
            "backhaul_data": float(R_d.mean()),
        })

    steady = timeseries[warm:]
    n_delay = sum(delay_hist.values())
    mean_delay = (sum(d * c for d, c in delay_hist.items()) / n_delay) if n_delay else 0.0
    hits = sum(row["hits"] for row in steady)
    misses = sum(row["misses"] for row in steady)
    looked = hits + misses
    gap = np.abs(cum_ma - cum_mu) / cfg.total_slots
    summary = {
        "policy": cfg.policy,
        "seed": cfg.seed,
        "slots": cfg.total_slots,
        "mean_delay_slots": mean_delay,
        "mean_delay_s": mean_delay * cfg.slot_s,
        "p50_delay_slots": _percentile(delay_hist, 0.5),
        "p95_delay_slots": _percentile(delay_hist, 0.95),
        "p99_delay_slots": _percentile(delay_hist, 0.99),
        "delay_samples": n_delay,
        "vip_backlog": float(np.mean([row["vip_backlog"] for row in steady])),
        "dp_backlog": float(np.mean([row["dp_backlog"] for row in steady])),
        "placement_cost": float(np.mean([row["placement_cost"] for row in steady])),
        "comp_fraction": comp_slots / (len(steady) * T),
        "hit_fraction": hits / looked if looked else 0.0,
        "miss_fraction": misses / looked if looked else 0.0,
        "requests_created": ledger.created,
        "fidelity_gap": float(gap.max()),
        "max_abs_u": float(np.abs(vq.U).max()),
    }
    log.info("run %s seed=%d: delay %.2f slots, backlog %.2f", cfg.policy, cfg.seed,
             mean_delay, summary["vip_backlog"])
    return MetricsReport(summary, timeseries, dict(delay_hist), cum_ma - cum_mu, trace,
                         vip_series)


SWEEP_AXES = {
    "lambda": "arrival_mbps",
    "L_C": "cache_size",
    "skew": "skew",
    "W": "W",
    "R": "backhaul_mbps",
}

SWEEP_COLUMNS = ("axis", "value", "policy", "seed", "mean_delay_slots", "vip_backlog",
                 "placement_cost", "comp_fraction")


def sweep(base: SimConfig, axis: str, values, policies=None, seeds=None) -> list[dict]:
    """One run per (value, policy, seed); seeds are shared across policies."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; pick one of {sorted(SWEEP_AXES)}")
    field_name = SWEEP_AXES[axis]
    policies = policies or [base.policy]
    seeds = seeds if seeds is not None else [base.seed]
    rows = []
    for v in values:
        cast = int(v) if field_name == "cache_size" else float(v)
        for pol in policies:
            for sd in seeds:
                rep = run_simulation(base.replace(**{field_name: cast, "policy": pol,
                                                     "seed": sd}))
                s = rep.summary
                rows.append({"axis": axis, "value": cast, "policy": pol, "seed": sd,
                             "mean_delay_slots": s["mean_delay_slots"],
                             "vip_backlog": s["vip_backlog"],
                             "placement_cost": s["placement_cost"],
                             "comp_fraction": s["comp_fraction"]})
    return rows


def write_rows(rows, path, columns=SWEEP_COLUMNS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([row[c] for c in columns])


def quarter_means(series) -> tuple[float, float]:
    """Means of the third and fourth quarter of a backlog series."""
    x = np.asarray(series, dtype=float)
    q = len(x) // 4
    if q == 0:
        raise ValueError("series too short to split into quarters")
    return float(x[2 * q:3 * q].mean()), float(x[3 * q:].mean())


def growth_ratio(reports) -> float:
    """Last-quarter over third-quarter VIP backlog of the seed-averaged series."""
    if isinstance(reports, MetricsReport):
        reports = [reports]
    series = np.mean([[row["vip_backlog"] for row in rep.timeseries] for rep in reports], axis=0)
    q3, q4 = quarter_means(series)
    return q4 / q3 if q3 > 0 else (1.0 if q4 == 0 else float("inf"))


def find_capacity(base: SimConfig, grid, iters: int = 4, threshold: float = 1.1,
                  seeds=(0,)) -> float:
    """Arrival rate (Mbps) where the VIP backlog first starts to grow.

    A rate counts as stable when the seed-averaged last-quarter backlog stays
    within ``threshold`` times the third-quarter backlog. The ascending
    ``grid`` is scanned for the first unstable rate, then the gap to its
    stable predecessor is bisected. Scanning matters: far past capacity the
    placement eventually caches enough to flatten the backlog again, so
    stability is not monotone in the rate.
    """
    def stable(lam):
        reps = [run_simulation(base.replace(arrival_mbps=lam, seed=sd)) for sd in seeds]
        return growth_ratio(reps) <= threshold

    grid = sorted(float(g) for g in grid)
    lo = None
    for g in grid:
        if not stable(g):
            hi = g
            break
        lo = g
    else:
        raise ValueError(f"no unstable rate up to {grid[-1]} Mbps")
    if lo is None:
        raise ValueError(f"lowest grid rate {grid[0]} Mbps is already unstable")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return lo

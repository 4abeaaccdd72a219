"""Randomized oracle-equivalence suites behind ``phycache validate``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import (RegionParams, brute_force_cache_oracle, brute_force_control_oracle,
                       grid_alpha_oracle, max_sum_dof)
from .traffic import zipf_popularity
from .virtual import VipState, drift_upper_bound, fast_control, one_step_objective, place_cache


@dataclass(frozen=True)
class SuiteResult:
    name: str
    trials: int
    failures: int
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.failures == 0


def placement_suite(trials: int, rng: np.random.Generator) -> SuiteResult:
    bad = 0
    for _ in range(trials):
        n = int(rng.integers(1, 3))
        k = int(rng.integers(1, 11))
        cap = int(rng.integers(0, min(3, k) + 1))
        v = rng.integers(0, 101, (n, k)).astype(float)
        s = np.zeros((n, k), np.int8)
        for b in range(n):
            s[b, rng.choice(k, int(rng.integers(0, cap + 1)), replace=False)] = 1
        W = float(rng.choice([0.0, 1.0, 10.0, 100.0, 1000.0]))
        T = int(rng.integers(1, 100))
        r = rng.choice([0.5, 1.0, 2.0], n)
        p = place_cache(v, s, cap, W, T, 1.0, r)
        got = drift_upper_bound(v, s, p, W, T, 1.0, r)
        bad += got != brute_force_cache_oracle(v, s, cap, W, T, 1.0, r).objective
    return SuiteResult("cache placement", trials, int(bad))


def control_suite(trials: int, rng: np.random.Generator) -> SuiteResult:
    bad = 0
    for _ in range(trials):
        n = int(rng.integers(1, 4))
        k = int(rng.integers(1, 6))
        vip = VipState(rng.integers(0, 30, (n, k)).astype(float),
                       rng.integers(0, 30, (n, k)).astype(float))
        comp = rng.integers(0, 9, n) / 4
        coord = rng.integers(0, 9, n) / 4
        R_d = float(rng.integers(0, 9) / 4)
        dec = fast_control(vip, comp, coord, R_d)
        best = brute_force_control_oracle(vip, comp, coord, R_d).objective
        bad += one_step_objective(vip, dec) != best
    return SuiteResult("fast control", trials, int(bad))


def random_region(rng: np.random.Generator) -> RegionParams:
    N = int(rng.integers(1, 6))
    K = int(rng.integers(1, 30))
    return RegionParams(N, K, int(rng.integers(0, K + 1)), zipf_popularity(K, rng.uniform(0, 2)),
                        10 ** rng.uniform(-3, 1), float(N), 1.0, float(rng.uniform(0.05, 1)))


def dof_suite(trials: int, rng: np.random.Generator, tol: float = 1e-3) -> SuiteResult:
    bad, worst = 0, 0.0
    for _ in range(trials):
        p = random_region(rng)
        gap = abs(max_sum_dof(p).d - grid_alpha_oracle(p))
        worst = max(worst, gap)
        bad += gap > tol
    return SuiteResult("sum DoF", trials, int(bad), f"max gap {worst:.2e}")


def run_all(trials: int, seed: int = 0) -> list[SuiteResult]:
    rng = np.random.default_rng(seed)
    return [placement_suite(trials, rng), control_suite(trials, rng),
            dof_suite(max(1, trials // 5), rng)]

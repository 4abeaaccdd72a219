"""Command line entry point: simulate, sweep, analyze-dof, validate."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
from pathlib import Path

from .analysis import RegionParams, max_sum_dof
from .config import SimConfig
from .core import ConfigError
from .harness import SWEEP_AXES, SWEEP_COLUMNS, run_simulation, sweep
from .traffic import zipf_popularity
from .validate import run_all

DOF_COLUMNS = ("N", "K", "L_C", "skew", "R_d", "D_A", "D_B", "D_star", "alpha_star", "branch")
DOF_FIELDS = {"N", "K", "L_C", "skew", "R_d", "r", "D_A", "D_B"}


def _cmd_simulate(args) -> int:
    cfg = SimConfig.load(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    rep = run_simulation(cfg)
    rep.write(args.out)
    print(json.dumps({k: rep.summary[k] for k in ("policy", "seed", "mean_delay_slots",
                                                   "vip_backlog", "placement_cost")}))
    return 0


def _cmd_sweep(args) -> int:
    cfg = SimConfig.load(args.config)
    values = [v for v in args.values.split(",") if v]
    policies = args.policies.split(",") if args.policies else None
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    rows = sweep(cfg, args.axis, values, policies, seeds)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow([row[c] for c in SWEEP_COLUMNS])
    finally:
        if args.out:
            out.close()
    return 0


def _dof_rows(entry):
    """Expand one parameter object; list-valued fields are crossed."""
    unknown = sorted(set(entry) - DOF_FIELDS)
    if unknown:
        raise ConfigError(f"unknown DoF parameter(s): {', '.join(unknown)}")
    missing = sorted({"N", "K", "L_C", "skew", "R_d"} - set(entry))
    if missing:
        raise ConfigError(f"missing DoF parameter(s): {', '.join(missing)}")
    keys = sorted(entry)
    grids = [v if isinstance(v, list) else [v] for v in (entry[k] for k in keys)]
    for combo in itertools.product(*grids):
        yield dict(zip(keys, combo))


def _cmd_analyze_dof(args) -> int:
    data = json.loads(Path(args.params).read_text())
    entries = data if isinstance(data, list) else [data]
    w = csv.writer(sys.stdout)
    w.writerow(DOF_COLUMNS)
    for entry in entries:
        for row in _dof_rows(entry):
            N, K = int(row["N"]), int(row["K"])
            D_A = float(row.get("D_A", 1.0))
            p = RegionParams(N, K, int(row["L_C"]), zipf_popularity(K, float(row["skew"])),
                             float(row["R_d"]), float(row.get("r", N * D_A)), D_A,
                             float(row.get("D_B", 0.5)))
            res = max_sum_dof(p)
            w.writerow((N, K, p.L_C, row["skew"], p.R_d, p.D_A, p.D_B, f"{res.d:.10g}",
                        f"{res.alpha:.10g}", res.branch))
    return 0


def _cmd_validate(args) -> int:
    results = run_all(args.oracle_trials, args.seed)
    for res in results:
        status = "ok" if res.ok else "FAILED"
        extra = f" ({res.detail})" if res.detail else ""
        print(f"{res.name}: {res.trials - res.failures}/{res.trials} {status}{extra}")
    return 0 if all(r.ok for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phycache")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="vary one parameter across runs")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--values", required=True, help="comma separated")
    p.add_argument("--policies", help="comma separated; defaults to the config policy")
    p.add_argument("--seeds", help="comma separated; defaults to the config seed")
    p.add_argument("--out", help="CSV path; stdout when omitted")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("analyze-dof", help="closed-form maximum sum DoF as CSV")
    p.add_argument("--params", required=True)
    p.set_defaults(func=_cmd_analyze_dof)

    p = sub.add_parser("validate", help="run the oracle equivalence suites")
    p.add_argument("--oracle-trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: single scenarios and supply x demand x policy sweeps.

    poolsim --config scenario.json --out results/ [--seed N] [--policy P]
    poolsim --sweep sweep.json --out results/ [--parallelism N]
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import kpi
from .config import ConfigError, load_scenario, load_sweep, with_overrides
from .economics import Policy
from .engine import build_inputs, run, write_events, write_ledger, write_outcomes
from .errors import PoolSimError

log = logging.getLogger("poolsim")

EXIT_OK, EXIT_CELL_FAILED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

OUTPUT_FILES = ("events.csv", "outcomes.csv", "drivers.csv", "kpi.json")


def write_outputs(event_log, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_events(event_log, out / "events.csv")
    write_outcomes(event_log, out / "outcomes.csv")
    write_ledger(event_log, out / "drivers.csv")
    (out / "kpi.json").write_text(kpi.report(event_log).to_json(), encoding="utf-8")


def run_scenario(config_path, out_dir, seed_override=None, policy=None) -> int:
    try:
        cfg = load_scenario(config_path, policy=policy, seed=seed_override)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        event_log = run(cfg)
    except PoolSimError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        write_outputs(event_log, out_dir)
    except OSError as e:
        print(f"error: cannot write outputs: {e}", file=sys.stderr)
        return EXIT_IO
    rep = kpi.report(event_log)
    log.info("policy=%s served %d/%d (SR %.3f)", cfg.pricing.policy, rep.n_served, rep.n_requests,
             rep.service_rate)
    return EXIT_OK


def _run_cell(base, cell, shared=None):
    policy, n_drivers, rate, seed = cell
    try:
        cfg = with_overrides(base, policy=policy, n_drivers=n_drivers, rate=rate, seed=seed)
        if shared is None:
            shared = build_inputs(cfg)
        rep = kpi.report(run(cfg, *shared))
        return kpi.sweep_row(policy, n_drivers, rate, seed, rep) + ["ok"]
    except Exception as e:  # a failing cell must not kill the sweep
        msg = f"error: {type(e).__name__}: {e}".replace("\n", " ")
        return [str(policy), str(n_drivers), f"{rate:g}", str(seed), "", "", "", "", "", msg]


def _run_group(args):
    """Cells with equal (rate, seed) share one demand draw and ride enumeration."""
    base, cells = args
    _, _, rate, seed = cells[0]
    try:
        shared = build_inputs(with_overrides(base, rate=rate, seed=seed))
    except Exception:
        shared = None  # let each cell report the error
    return [_run_cell(base, c, shared) for c in cells]


def run_sweep(sweep_path, out_dir, parallelism=1) -> int:
    try:
        spec = load_sweep(sweep_path)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: cannot read sweep: {e}", file=sys.stderr)
        return EXIT_IO
    cells = spec.cells()
    groups = {}
    for c in cells:
        groups.setdefault((c[2], c[3]), []).append(c)
    jobs = [(spec.base, g) for g in groups.values()]
    if parallelism <= 1:
        results = [_run_group(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_run_group, jobs))
    by_cell = {c: row for g, rs in zip(groups.values(), results) for c, row in zip(g, rs)}
    rows = [by_cell[c] for c in cells]
    try:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(kpi.SWEEP_HEADER + ["status"])
            w.writerows(rows)
    except OSError as e:
        print(f"error: cannot write summary: {e}", file=sys.stderr)
        return EXIT_IO
    failed = sum(r[-1] != "ok" for r in rows)
    if failed:
        log.warning("%d of %d sweep cells failed", failed, len(rows))
        return EXIT_CELL_FAILED
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="poolsim", description="Ride-pooling market simulator")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--config", metavar="PATH", help="scenario JSON")
    mode.add_argument("--sweep", metavar="PATH", help="sweep JSON")
    p.add_argument("--out", metavar="DIR", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--parallelism", type=int, default=1, help="worker processes for --sweep")
    p.add_argument("--policy", choices=[x.value for x in Policy], help="override pricing.policy")
    return p


def main(argv=None) -> int:
    level = getattr(logging, os.environ.get("POOLSIM_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.config:
        return run_scenario(args.config, args.out, args.seed, args.policy)
    if args.seed is not None or args.policy is not None:
        print("error: --seed/--policy apply to --config runs only", file=sys.stderr)
        return EXIT_CONFIG
    return run_sweep(args.sweep, args.out, args.parallelism)


if __name__ == "__main__":
    sys.exit(main())

"""Indicators computed from a finished simulation log."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .engine import SERVED, EventLog

SWEEP_HEADER = ["policy", "n_drivers", "req_rate", "seed", "service_rate", "gini",
                "commission_eur", "wait_mean_s", "occupancy"]


@dataclass
class KpiReport:
    service_rate: float
    per_driver_revenue: list  # euros, by driver id
    revenue_gini: float  # summary of how unevenly revenue is spread over drivers
    platform_commission_total: float
    wait_mean: float
    wait_median: float
    wait_p90: float
    occupancy: float
    n_requests: int
    n_served: int
    n_pooled_served: int
    total_fares: float
    total_driver_revenue: float

    def to_json(self) -> str:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and math.isnan(v):
                d[k] = None
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


def service_rate(log: EventLog) -> float:
    n = len(log.outcomes)
    if n == 0:
        return 0.0
    return sum(o.outcome == SERVED for o in log.outcomes.values()) / n


def occupancy(log: EventLog) -> float:
    """Traveller in-vehicle seconds over driver driving seconds."""
    riding = sum(o.in_vehicle for o in log.outcomes.values() if o.outcome == SERVED)
    driving = sum(d.busy for d in log.drivers)
    return riding / driving if driving > 0 else 0.0


def gini(values) -> float:
    x = np.sort(np.asarray(values, dtype=float))
    n = len(x)
    total = x.sum()
    if n == 0 or total == 0:
        return 0.0
    ranks = np.arange(1, n + 1)
    g = 2.0 * np.sum(ranks * x) / (n * total) - (n + 1.0) / n
    return float(min(max(g, 0.0), 1.0))


def revenue_distribution(log: EventLog):
    revenues = [d.revenue / 100 for d in sorted(log.drivers, key=lambda d: d.driver_id)]
    return revenues, gini([d.revenue for d in log.drivers])


def platform_commission(log: EventLog) -> float:
    return sum(r.priced.commission for r in log.rides) / 100


def commission_cents(log: EventLog) -> int:
    return sum(r.priced.commission for r in log.rides)


def wait_stats(log: EventLog):
    """(mean, median, p90) of waits of served requests; NaN when none served."""
    waits = [o.wait for o in log.outcomes.values() if o.outcome == SERVED]
    if not waits:
        nan = float("nan")
        return nan, nan, nan
    w = np.asarray(waits)
    return float(w.mean()), float(np.median(w)), float(np.percentile(w, 90))


def conservation_gap(log: EventLog) -> int:
    """Sum of fares minus (driver revenue + commission), in cents. Zero when books balance."""
    fares = sum(o.fare for o in log.outcomes.values() if o.outcome == SERVED)
    return fares - sum(d.revenue for d in log.drivers) - commission_cents(log)


def report(log: EventLog) -> KpiReport:
    revenues, g = revenue_distribution(log)
    mean, median, p90 = wait_stats(log)
    served = [o for o in log.outcomes.values() if o.outcome == SERVED]
    pooled_ids = {r.priced.ride_id for r in log.rides if r.priced.candidate.pooled}
    return KpiReport(
        service_rate=service_rate(log),
        per_driver_revenue=revenues,
        revenue_gini=g,
        platform_commission_total=platform_commission(log),
        wait_mean=mean,
        wait_median=median,
        wait_p90=p90,
        occupancy=occupancy(log),
        n_requests=len(log.outcomes),
        n_served=len(served),
        n_pooled_served=sum(o.ride_id in pooled_ids for o in served),
        total_fares=sum(o.fare for o in served) / 100,
        total_driver_revenue=sum(d.revenue for d in log.drivers) / 100,
    )


def sweep_row(policy, n_drivers, rate, seed, rep: KpiReport):
    return [str(policy), str(n_drivers), f"{rate:g}", str(seed), f"{rep.service_rate:.6f}",
            f"{rep.revenue_gini:.6f}", f"{rep.platform_commission_total:.2f}",
            "" if math.isnan(rep.wait_mean) else f"{rep.wait_mean:.3f}", f"{rep.occupancy:.6f}"]


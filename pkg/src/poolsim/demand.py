"""Traveller requests: seeded Poisson generator and CSV import."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError
from .network import Network, read_csv_rows

DEMAND_HEADER = ["request_id", "origin_id", "destination_id", "request_time_s", "patience_s"]


@dataclass(frozen=True)
class TripRequest:
    request_id: int
    origin: int
    destination: int
    request_time: float
    patience: float
    distance: float  # direct shortest-path length l_i, meters
    time: float  # direct travel time t_i, seconds

    @property
    def deadline(self):
        return self.request_time + self.patience


@dataclass(frozen=True)
class DemandConfig:
    rate: float = 200.0  # requests per hour
    horizon: float = 4 * 3600.0
    patience: float = 300.0
    seed: int = 0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValidationError(f"demand rate must be positive, got {self.rate}")
        if self.horizon < 0:
            raise ValidationError(f"demand horizon must be >= 0, got {self.horizon}")
        if not self.patience > 0:
            raise ValidationError(f"patience must be positive, got {self.patience}")


def make_request(net: Network, request_id, origin, destination, request_time, patience) -> TripRequest:
    if origin not in net or destination not in net:
        missing = origin if origin not in net else destination
        raise ValidationError(f"request {request_id}: unknown node {missing}")
    if origin == destination:
        raise ValidationError(f"request {request_id}: origin equals destination ({origin})")
    if not patience > 0:
        raise ValidationError(f"request {request_id}: patience must be positive, got {patience}")
    if request_time < 0:
        raise ValidationError(f"request {request_id}: negative request time {request_time}")
    dist = net.distance(origin, destination)
    return TripRequest(int(request_id), origin, destination, float(request_time), float(patience),
                       dist, dist / net.speed)


def arrival_times(rate, horizon, rng):
    mean_gap = 3600.0 / rate
    times = []
    t = rng.exponential(mean_gap)
    while t < horizon:
        times.append(float(t))
        t += rng.exponential(mean_gap)
    return times


def generate_demand(net: Network, cfg: DemandConfig) -> list[TripRequest]:
    """Poisson arrivals over [0, horizon) with origin/destination drawn uniformly
    over ordered pairs of distinct nodes."""
    rng = np.random.default_rng(cfg.seed)
    times = arrival_times(cfg.rate, cfg.horizon, rng)
    nodes = net.node_ids
    n = len(nodes)
    if n < 2:
        raise ValidationError("demand generation needs at least two nodes")
    requests = []
    for rid, t in enumerate(times):
        o = int(rng.integers(n))
        d = int(rng.integers(n - 1))
        if d >= o:
            d += 1
        requests.append(make_request(net, rid, nodes[o], nodes[d], t, cfg.patience))
    return requests


def load_demand(path, net: Network) -> list[TripRequest]:
    requests = []
    seen = set()
    for line, fields in read_csv_rows(path, DEMAND_HEADER):
        try:
            rid, o, d = int(fields[0]), int(fields[1]), int(fields[2])
            t, patience = float(fields[3]), float(fields[4])
        except ValueError:
            raise ParseError(f"bad demand record {','.join(fields)}", path, line) from None
        if rid in seen:
            raise ValidationError(f"{path}:{line}: duplicate request id {rid}")
        seen.add(rid)
        try:
            requests.append(make_request(net, rid, o, d, t, patience))
        except ValidationError as e:
            raise ValidationError(f"{path}:{line}: {e}") from None
    requests.sort(key=lambda r: r.request_time)  # stable on ties
    return requests


def write_demand(requests, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DEMAND_HEADER)
        for r in requests:
            w.writerow([r.request_id, r.origin, r.destination, repr(r.request_time), repr(r.patience)])

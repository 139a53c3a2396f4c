"""Discrete-event simulation of drivers serving pooled and solo rides.

Requests arrive over time. After each arrival, and whenever a driver becomes
idle, waiting requests are dispatched oldest first: the request's nearest idle
driver is offered the attractive rides containing it whose other members are
all still waiting. Requests that find no idle driver (or no acceptable ride)
keep waiting for the next round. The offer is filtered by the pricing policy and by patience (each
member must be picked up before giving up), priced from the driver's position,
and the driver picks per `choose_ride`. A request nobody picks up within its
patience expires.
"""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np

from .demand import DemandConfig, generate_demand, load_demand
from .economics import (DETERMINISTIC, DriverProfile, Policy, PricingParams, choose_ride,
                        filter_by_policy, price_ride)
from .errors import ValidationError
from .network import KMH, Network, load_network, make_grid
from .shareability import (DROPOFF, ShareabilityConfig, TravellerPrefs, enumerate_rides,
                           rides_by_member)

log = logging.getLogger(__name__)

PATIENCE_EXPIRED = "patience_expired"
DROPOFF_COMPLETE = "dropoff_complete"
PICKUP_COMPLETE = "pickup_complete"
REQUEST_ARRIVAL = "request_arrival"
DRIVER_DECISION = "driver_decision"

# tie-break among events at the same instant
PRIORITY = {PATIENCE_EXPIRED: 0, DROPOFF_COMPLETE: 1, PICKUP_COMPLETE: 2,
            REQUEST_ARRIVAL: 3, DRIVER_DECISION: 4}

IDLE, TO_PICKUP, SERVING = "idle", "to_pickup", "serving"
SERVED, EXPIRED = "served", "expired"


@dataclass(frozen=True)
class NetworkSpec:
    rows: int = 6
    cols: int = 6
    edge_len: float = 500.0
    nodes_file: str | None = None
    edges_file: str | None = None
    speed_kmh: float = 36.0

    def build(self) -> Network:
        speed = self.speed_kmh * KMH
        if self.nodes_file or self.edges_file:
            if not (self.nodes_file and self.edges_file):
                raise ValidationError("network import needs both nodes_file and edges_file")
            return load_network(self.nodes_file, self.edges_file, speed)
        return make_grid(self.rows, self.cols, self.edge_len, speed)


@dataclass(frozen=True)
class DemandSpec:
    rate: float = 200.0  # requests per hour
    patience: float = 300.0
    file: str | None = None


@dataclass(frozen=True)
class DriverSpec:
    count: int = 10
    cost_per_km: float = 0.5
    value_of_time: float = 0.0
    pooling_multiplier: tuple = (1.0, 1.0)  # uniform range, drawn per driver
    choice_mode: str = DETERMINISTIC
    mnl_scale: float = 1.0
    decline_allowed: bool = False
    positions: tuple | None = None  # node ids; seeded uniform when absent


@dataclass(frozen=True)
class ScenarioConfig:
    network: NetworkSpec = field(default_factory=NetworkSpec)
    demand: DemandSpec = field(default_factory=DemandSpec)
    drivers: DriverSpec = field(default_factory=DriverSpec)
    pricing: PricingParams = field(default_factory=PricingParams)
    traveller: TravellerPrefs = field(default_factory=TravellerPrefs)
    max_degree: int = 3
    pooling_window: float = 600.0
    horizon: float = 4 * 3600.0
    seed: int = 0

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValidationError(f"horizon must be positive, got {self.horizon}")
        if self.drivers.count < 1:
            raise ValidationError(f"need at least one driver, got {self.drivers.count}")
        lo, hi = self.drivers.pooling_multiplier
        if not 0 < lo <= hi <= 1:
            raise ValidationError(f"pooling_multiplier range must satisfy 0 < lo <= hi <= 1, got {lo}, {hi}")
        if self.drivers.positions is not None and len(self.drivers.positions) != self.drivers.count:
            raise ValidationError("drivers.positions must list one node per driver")

    @property
    def shareability(self):
        return ShareabilityConfig(self.max_degree, self.pricing.discount, self.pooling_window,
                                  self.pricing.fare_per_km)


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: str
    driver_id: int | None = None
    ride_id: int | None = None
    request_ids: tuple = ()


@dataclass
class DriverState:
    profile: DriverProfile
    position: int
    status: str = IDLE
    busy_until: float = 0.0
    rides: list = field(default_factory=list)
    revenue: int = 0  # cents
    cost: int = 0
    profit: int = 0
    busy: float = 0.0  # seconds driving (pickup + service legs)
    n_pooled: int = 0

    @property
    def driver_id(self):
        return self.profile.driver_id


@dataclass
class Outcome:
    request_id: int
    outcome: str = ""
    wait: float = float("nan")
    in_vehicle: float = float("nan")
    fare: int = 0  # cents
    pickup_at: float = float("nan")
    ride_id: int | None = None
    driver_id: int | None = None


@dataclass(frozen=True)
class ServedRide:
    driver_id: int
    priced: object  # PricedRide
    start: float  # decision time
    legs: tuple  # (from_node, to_node, meters, depart_s, arrive_s)


@dataclass
class EventLog:
    events: list
    outcomes: dict  # request id -> Outcome
    drivers: list  # DriverState, by id
    rides: list  # ServedRide in decision order
    requests: dict
    end_time: float
    policy: Policy
    max_degree: int


def _seeds(seed):
    ss = np.random.SeedSequence(seed)
    demand, positions, multipliers, choice = ss.spawn(4)
    return (int(demand.generate_state(1, dtype=np.uint64)[0]), np.random.default_rng(positions),
            np.random.default_rng(multipliers), np.random.default_rng(choice))


def build_inputs(cfg: ScenarioConfig, net=None, requests=None, rides=None):
    """(network, requests, rides) for `cfg`, building whatever is not given.

    Rides do not depend on the policy or the drivers, so runs that differ only
    in those can share one call.
    """
    if net is None:
        net = cfg.network.build()
    if requests is None:
        if cfg.demand.file:
            requests = load_demand(cfg.demand.file, net)
        else:
            requests = generate_demand(net, DemandConfig(
                cfg.demand.rate, cfg.horizon, cfg.demand.patience, _seeds(cfg.seed)[0]))
    if rides is None:
        rides = enumerate_rides(requests, net, cfg.traveller, cfg.shareability)
    return net, requests, rides


class Simulation:

    def __init__(self, cfg: ScenarioConfig, net=None, requests=None, rides=None):
        self.cfg = cfg
        self.net, requests, rides = build_inputs(cfg, net, requests, rides)
        _, pos_rng, mult_rng, self.rng = _seeds(cfg.seed)
        self.requests = {r.request_id: r for r in requests}
        if len(self.requests) != len(requests):
            raise ValidationError("duplicate request ids")
        self.rides_of = rides_by_member(rides)

        dcfg = cfg.drivers
        if dcfg.positions is not None:
            positions = list(dcfg.positions)
            for p in positions:
                self.net.index(p)
        else:
            nodes = self.net.node_ids
            positions = [nodes[int(i)] for i in pos_rng.integers(len(nodes), size=dcfg.count)]
        lo, hi = dcfg.pooling_multiplier
        self.drivers = []
        for i in range(dcfg.count):
            mult = float(mult_rng.uniform(lo, hi)) if hi > lo else lo
            prof = DriverProfile(i, dcfg.cost_per_km, dcfg.value_of_time, mult, dcfg.choice_mode,
                                 dcfg.mnl_scale, dcfg.decline_allowed)
            self.drivers.append(DriverState(prof, positions[i]))

        self.policy = cfg.pricing.policy
        self.waiting = {}
        self.outcomes = {rid: Outcome(rid) for rid in sorted(self.requests)}
        self.events = []
        self.served = []
        self._queue = []
        self._seq = 0
        self._decision_pending = False
        self.now = 0.0

    def _push(self, time, kind, payload):
        heapq.heappush(self._queue, (time, PRIORITY[kind], self._seq, kind, payload))
        self._seq += 1

    def _log(self, kind, driver=None, ride=None, members=()):
        self.events.append(SimEvent(self.now, kind, driver, ride, tuple(members)))

    def run(self) -> EventLog:
        for rid in sorted(self.requests, key=lambda r: (self.requests[r].request_time, r)):
            req = self.requests[rid]
            self._push(req.request_time, REQUEST_ARRIVAL, rid)
            self._push(req.deadline, PATIENCE_EXPIRED, rid)
        handlers = {
            REQUEST_ARRIVAL: self._on_arrival,
            PATIENCE_EXPIRED: self._on_expiry,
            PICKUP_COMPLETE: self._on_pickup,
            DROPOFF_COMPLETE: self._on_dropoff,
            DRIVER_DECISION: self._on_decision,
        }
        while self._queue:
            time, _, _, kind, payload = heapq.heappop(self._queue)
            assert time >= self.now
            self.now = time
            handlers[kind](payload)
        assert not self.waiting
        end = max(self.cfg.horizon, self.now)
        for o in self.outcomes.values():
            assert o.outcome in (SERVED, EXPIRED)
        return EventLog(self.events, self.outcomes, self.drivers, self.served, self.requests,
                        end, self.policy, self.cfg.max_degree)

    # event handlers

    def _on_arrival(self, rid):
        self.waiting[rid] = self.requests[rid]
        self._log(REQUEST_ARRIVAL, members=(rid,))
        self._request_decision()

    def _on_expiry(self, rid):
        if rid not in self.waiting:
            return  # already picked up or assigned
        del self.waiting[rid]
        self.outcomes[rid].outcome = EXPIRED
        self._log(PATIENCE_EXPIRED, members=(rid,))

    def _on_pickup(self, payload):
        driver, ride_id, rid, node = payload
        d = self.drivers[driver]
        d.position = node
        d.status = SERVING
        o = self.outcomes[rid]
        o.pickup_at = self.now
        o.wait = self.now - self.requests[rid].request_time
        self._log(PICKUP_COMPLETE, driver, ride_id, (rid,))

    def _on_dropoff(self, payload):
        driver, ride_id, rid, node, last = payload
        d = self.drivers[driver]
        d.position = node
        o = self.outcomes[rid]
        o.in_vehicle = self.now - o.pickup_at
        o.outcome = SERVED
        self._log(DROPOFF_COMPLETE, driver, ride_id, (rid,))
        if last:
            served = d.rides[-1]
            pr = served.priced
            d.revenue += pr.revenue
            d.cost += pr.cost
            d.profit += pr.profit
            d.status = IDLE
            self._request_decision()

    def _request_decision(self):
        # one decision round per instant, after all same-time arrivals and dropoffs
        if not self._decision_pending:
            self._decision_pending = True
            self._push(self.now, DRIVER_DECISION, None)

    def _on_decision(self, _):
        """Dispatch waiting requests oldest first while some driver is idle.

        Each request goes to its nearest idle driver, who is offered the rides
        containing it whose other members are all still waiting.
        """
        self._decision_pending = False
        for rid in sorted(self.waiting, key=lambda r: (self.requests[r].request_time, r)):
            if rid not in self.waiting:
                continue  # taken by an earlier ride this round
            idle = [d for d in self.drivers if d.status == IDLE]
            if not idle:
                break
            origin = self.requests[rid].origin
            driver = min(idle, key=lambda d: (self.net.distance(d.position, origin), d.driver_id))
            offer = [r for r in self.rides_of.get(rid, ()) if self._all_waiting(r)]
            self._offer(driver, offer)

    # dispatch

    def _all_waiting(self, ride):
        return all(m in self.waiting for m in ride.members)

    def _timeline(self, driver, ride):
        """Arrival time at each stop if `driver` starts now, or None when some
        member would be picked up after their patience runs out."""
        net = self.net
        start = self.now + net.distance(driver.position, ride.first_node) / net.speed
        times = []
        cum = 0.0
        prev = ride.first_node
        for stop in ride.stops:
            cum += net.distance(prev, stop.node)
            prev = stop.node
            t = start + cum / net.speed
            if stop.action != DROPOFF and t > self.requests[stop.request_id].deadline:
                return None
            times.append(t)
        return times

    def _offer(self, driver, candidates):
        candidates = filter_by_policy(candidates, self.policy)
        feasible = {}
        for c in candidates:
            times = self._timeline(driver, c)
            if times is not None:
                feasible[c.ride_id] = (c, times)
        if not feasible:
            return None
        priced = [price_ride(c, driver.position, self.cfg.pricing, driver.profile, self.net,
                             self.requests) for c, _ in feasible.values()]
        choice = choose_ride(priced, driver.profile, self.rng)
        if choice is None:
            self._log(DRIVER_DECISION, driver.driver_id, None, ())
            return None
        self._log(DRIVER_DECISION, driver.driver_id, choice.ride_id, choice.candidate.members)
        self._advance(driver, choice, feasible[choice.ride_id][1])
        return choice

    def _advance(self, driver, priced, times):
        ride = priced.candidate
        for m in ride.members:
            assert m in self.waiting, f"request {m} is not waiting"
            del self.waiting[m]
        net = self.net
        start = self.now + priced.pickup_time
        legs = [(driver.position, ride.first_node, priced.pickup_distance, self.now, start)]
        prev, prev_t = ride.first_node, start
        for stop, t in zip(ride.stops[1:], times[1:]):
            legs.append((prev, stop.node, net.distance(prev, stop.node), prev_t, t))
            prev, prev_t = stop.node, t
        served = ServedRide(driver.driver_id, priced, self.now, tuple(legs))
        self.served.append(served)
        driver.rides.append(served)
        driver.status = TO_PICKUP
        driver.busy_until = times[-1]
        driver.busy += times[-1] - self.now
        if ride.pooled:
            driver.n_pooled += 1
        for k, m in enumerate(ride.members):
            o = self.outcomes[m]
            o.fare = priced.fares[k]
            o.ride_id = ride.ride_id
            o.driver_id = driver.driver_id
        n = len(ride.stops)
        for i, (stop, t) in enumerate(zip(ride.stops, times)):
            if stop.action == DROPOFF:
                self._push(t, DROPOFF_COMPLETE,
                           (driver.driver_id, ride.ride_id, stop.request_id, stop.node, i == n - 1))
            else:
                self._push(t, PICKUP_COMPLETE, (driver.driver_id, ride.ride_id, stop.request_id, stop.node))


def run(cfg: ScenarioConfig, net=None, requests=None, rides=None) -> EventLog:
    """Run one scenario. `net`, `requests` and `rides` override what the config
    would build (useful for sharing ride enumeration across policies)."""
    return Simulation(cfg, net, requests, rides).run()


# exports

def euros(cents: int) -> str:
    return f"{Decimal(cents) / 100:.2f}"


def _num(x, digits=3):
    return "" if x != x else f"{x:.{digits}f}"  # NaN -> empty


def _opt(x):
    return "" if x is None else str(x)


def write_events(log: EventLog, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("time_s,kind,driver_id,ride_id,request_ids\n")
        for e in log.events:
            fh.write(f"{e.time:.3f},{e.kind},{_opt(e.driver_id)},{_opt(e.ride_id)},"
                     f"{';'.join(map(str, e.request_ids))}\n")


def write_outcomes(log: EventLog, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("request_id,outcome,wait_s,in_vehicle_s,fare_eur\n")
        for rid in sorted(log.outcomes):
            o = log.outcomes[rid]
            fh.write(f"{rid},{o.outcome},{_num(o.wait)},{_num(o.in_vehicle)},{euros(o.fare)}\n")


def write_ledger(log: EventLog, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("driver_id,n_rides,n_pooled,revenue_eur,cost_eur,profit_eur,busy_s,idle_s\n")
        for d in log.drivers:
            fh.write(f"{d.driver_id},{len(d.rides)},{d.n_pooled},{euros(d.revenue)},{euros(d.cost)},"
                     f"{euros(d.profit)},{d.busy:.3f},{log.end_time - d.busy:.3f}\n")

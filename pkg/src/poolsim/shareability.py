"""Enumeration of attractive rides.

A pooled ride is kept only when every member prefers it to riding alone.
Members' perceived cost of a pooled ride is the fare (discounted) plus the
value of time, inflated by the willingness-to-share factor, applied to the
time between requesting and being dropped off.

Rides are scheduled as early as possible: the vehicle starts at the first
pickup at that traveller's request time, drives stop to stop, and idles at a
pickup if it arrives before the traveller has requested. A pooled ride must
be shared: the car is never empty between its first pickup and last dropoff,
so back-to-back trips are not pooled rides.

Dropping a member (and its two stops) can only make every other member's
dropoff earlier, by the triangle inequality on shortest paths. A shared ride
always has some member whose removal leaves the rest still shared, so every
attractive degree-k ride has an attractive degree-(k-1) sub-ride. Growing
rides one member at a time from attractive smaller ones therefore finds the
same set as trying every subset.
"""
from __future__ import annotations

from dataclasses import dataclass

from .demand import TripRequest
from .network import Network

PICKUP = "pickup"
DROPOFF = "dropoff"
SOLO = "solo"
POOLED = "pooled"

# utility ties within this many euros count as attractive
TIE_EPS = 1e-9


@dataclass(frozen=True)
class TravellerPrefs:
    value_of_time: float = 0.0025  # euro per second
    willingness_to_share: float = 1.3

    def __post_init__(self):
        if self.value_of_time < 0:
            raise ValueError(f"value_of_time must be >= 0, got {self.value_of_time}")
        if self.willingness_to_share < 1:
            raise ValueError(f"willingness_to_share must be >= 1, got {self.willingness_to_share}")


@dataclass(frozen=True)
class ShareabilityConfig:
    max_degree: int = 3
    discount: float = 0.25
    window: float = 600.0  # max spread of member request times, seconds
    fare_per_km: float = 1.5

    def __post_init__(self):
        if not 0 <= self.discount < 1:
            raise ValueError(f"discount must be in [0, 1), got {self.discount}")
        if self.max_degree < 1:
            raise ValueError(f"max_degree must be >= 1, got {self.max_degree}")
        if self.window < 0:
            raise ValueError(f"window must be >= 0, got {self.window}")
        if not self.fare_per_km > 0:
            raise ValueError(f"fare_per_km must be positive, got {self.fare_per_km}")


@dataclass(frozen=True)
class Stop:
    request_id: int
    action: str
    node: int


@dataclass(frozen=True)
class RideCandidate:
    ride_id: int
    members: tuple  # sorted request ids
    kind: str
    stops: tuple  # of Stop
    service_distance: float  # first stop to last stop, meters
    service_time: float  # pure driving time along the stops, seconds
    in_vehicle: tuple  # planned pickup->dropoff seconds, aligned with members
    departure_offset: tuple  # planned pickup - request time, aligned with members

    @property
    def degree(self):
        return len(self.members)

    @property
    def pooled(self):
        return self.kind == POOLED

    @property
    def first_node(self):
        return self.stops[0].node

    def member_index(self, request_id):
        try:
            return self.members.index(request_id)
        except ValueError:
            raise ValueError(f"request {request_id} is not a member of ride {self.ride_id}") from None

    def stop_key(self):
        return tuple((s.request_id, s.action == DROPOFF) for s in self.stops)


def traveller_utility(req: TripRequest, prefs: TravellerPrefs, ride: RideCandidate,
                      discount: float, fare_per_km: float = 1.5) -> float:
    """Euro-equivalent utility of `ride` for traveller `req` (higher is better)."""
    k = ride.member_index(req.request_id)
    fare = fare_per_km * req.distance / 1000.0
    if ride.kind == SOLO:
        return -fare - prefs.value_of_time * req.time
    perceived = ride.in_vehicle[k] + ride.departure_offset[k]
    return -(1.0 - discount) * fare - prefs.value_of_time * prefs.willingness_to_share * perceived


class _Batch:
    """Flat per-request arrays for the enumeration hot loop."""

    def __init__(self, requests, net, prefs, cfg):
        self.requests = sorted(requests, key=lambda r: r.request_id)
        self.ids = [r.request_id for r in self.requests]
        self.origin = [net.index(r.origin) for r in self.requests]
        self.dest = [net.index(r.destination) for r in self.requests]
        self.req_time = [r.request_time for r in self.requests]
        self.dist = net.distance_rows()
        self.speed = net.speed
        self.tt = [[d / net.speed for d in row] for row in self.dist]
        # a member accepts pooling while  vot * eta * (dropoff - request) <= budget
        self.time_weight = prefs.value_of_time * prefs.willingness_to_share
        self.budget = [cfg.fare_per_km * cfg.discount * r.distance / 1000.0
                       + prefs.value_of_time * r.time + TIE_EPS for r in self.requests]

    def evaluate(self, order):
        """Schedule `order` (stop codes 2k / 2k+1 for pickup / dropoff of local
        request k). Returns (pickup, dropoff, distance), or None if the car
        runs empty before the last stop or some member would rather ride alone."""
        dist, tt = self.dist, self.tt
        pickup, dropoff = {}, {}
        last = len(order) - 1
        prev = None
        t = 0.0
        total = 0.0
        aboard = 0
        for i, code in enumerate(order):
            k = code >> 1
            if code & 1:
                node = self.dest[k]
                total += dist[prev][node]
                t += tt[prev][node]
                aboard -= 1
                if aboard == 0 and i != last:
                    return None
                if self.time_weight * (t - self.req_time[k]) > self.budget[k]:
                    return None
                dropoff[k] = t
            else:
                node = self.origin[k]
                if prev is None:
                    t = self.req_time[k]
                else:
                    total += dist[prev][node]
                    t += tt[prev][node]
                    if t < self.req_time[k]:
                        t = self.req_time[k]
                aboard += 1
                pickup[k] = t
            prev = node
        return pickup, dropoff, total


def _pair_orders(a, b):
    orders = []
    for first, second in ((a, b), (b, a)):
        p1, d1, p2, d2 = 2 * first, 2 * first + 1, 2 * second, 2 * second + 1
        orders += [(p1, p2, d1, d2), (p1, p2, d2, d1)]
    return orders


def _stays_shared(order, x):
    """Whether `order` minus member x's stops never leaves the car empty early."""
    px, dx = 2 * x, 2 * x + 1
    aboard = 0
    remaining = len(order) - 2
    for c in order:
        if c == px or c == dx:
            continue
        remaining -= 1
        aboard += -1 if c & 1 else 1
        if aboard == 0 and remaining:
            return False
    return True


def _grow(order, members, m, pair_types):
    """Orders obtained by inserting newcomer m's pickup and dropoff into
    `order` that pass two cheap necessary checks.

    Each member that m shares the car with must, on their own four stops,
    form an attractive pair in that same order: removing the other stops can
    only make their dropoffs earlier. `pair_types` holds (first to board,
    second to board, first is dropped first) for attractive pairs.

    Each ride is grown from one parent only: m must be the highest-id member
    whose removal leaves a shared ride.
    """
    pm, dm = 2 * m, 2 * m + 1
    spans = [(x, order.index(2 * x), order.index(2 * x + 1)) for x in members]
    higher = [x for x in members if x > m]
    n = len(order)
    for i in range(n + 1):
        for j in range(i, n + 1):
            shares = False
            for x, px, dx in spans:
                if j <= px or i > dx:
                    continue  # one leaves before the other boards
                shares = True
                key = (m, x, j <= dx) if i <= px else (x, m, j > dx)
                if key not in pair_types:
                    break
            else:
                if not shares:
                    continue
                new = order[:i] + (pm,) + order[i:j] + (dm,) + order[j:]
                if any(_stays_shared(new, x) for x in higher):
                    continue
                yield new


def _build(batch, members, order, sched):
    pickup, dropoff, total = sched
    ids = batch.ids
    stops = tuple(
        Stop(ids[c >> 1], DROPOFF if c & 1 else PICKUP,
             batch.requests[c >> 1].destination if c & 1 else batch.requests[c >> 1].origin)
        for c in order)
    ordered = sorted(members, key=lambda k: ids[k])
    return dict(
        members=tuple(ids[k] for k in ordered),
        kind=POOLED if len(members) > 1 else SOLO,
        stops=stops,
        service_distance=total,
        service_time=total / batch.speed,
        in_vehicle=tuple(dropoff[k] - pickup[k] for k in ordered),
        departure_offset=tuple(pickup[k] - batch.req_time[k] for k in ordered),
    )


def finalize(rides):
    """Sort ride dicts, collapse physically identical orderings and assign ids.

    Two orderings are identical when they visit the same nodes in the same
    order with the same per-member pickup and dropoff times; that only happens
    when co-located stops swap labels. The smallest stop key survives.
    """
    def key(r):
        return (len(r["members"]), r["members"],
                tuple((s.request_id, s.action == DROPOFF) for s in r["stops"]))

    seen = set()
    out = []
    for r in sorted(rides, key=key):
        phys = (r["members"], tuple(s.node for s in r["stops"]),
                tuple(zip(r["in_vehicle"], r["departure_offset"])))
        if phys in seen:
            continue
        seen.add(phys)
        out.append(RideCandidate(ride_id=len(out), **r))
    return out


def enumerate_rides(requests, net: Network, prefs: TravellerPrefs = TravellerPrefs(),
                    cfg: ShareabilityConfig = ShareabilityConfig()) -> list[RideCandidate]:
    """Every solo ride plus every attractive pooled ride of degree <= max_degree.

    Output is sorted by (degree, member ids, stop sequence) and ride ids follow
    that order.
    """
    batch = _Batch(requests, net, prefs, cfg)
    n = len(batch.ids)
    if len(set(batch.ids)) != n:
        raise ValueError("duplicate request ids in batch")
    rides = []
    for k in range(n):
        req = batch.requests[k]
        order = (2 * k, 2 * k + 1)
        rides.append(_build(batch, (k,), order,
                            ({k: req.request_time}, {k: req.request_time + req.time}, req.distance)))
    if cfg.max_degree < 2 or n < 2:
        return finalize(rides)

    by_time = sorted(range(n), key=lambda k: (batch.req_time[k], k))
    rt = batch.req_time
    # level: member tuple (sorted local ids) -> list of (order, schedule)
    level = {}
    partners = [set() for _ in range(n)]
    pair_types = set()  # (first aboard, second aboard, first leaves first)
    for x, a in enumerate(by_time):
        for b in by_time[x + 1:]:
            if rt[b] - rt[a] > cfg.window:
                break
            good = []
            for order in _pair_orders(a, b):
                sched = batch.evaluate(order)
                if sched is not None:
                    good.append((order, sched))
            if good:
                pair_types.update((o[0] >> 1, o[1] >> 1, o[2] == o[0] + 1) for o, _ in good)
                level[tuple(sorted((a, b)))] = good
                partners[a].add(b)
                partners[b].add(a)

    for degree in range(2, cfg.max_degree + 1):
        for members, good in level.items():
            for order, sched in good:
                rides.append(_build(batch, members, order, sched))
        if degree == cfg.max_degree:
            break
        nxt = {}
        for members, good in level.items():
            # a newcomer shares the car with at least one member, and that pair
            # alone is itself an attractive shared ride
            near = set.union(*(partners[k] for k in members)) - set(members)
            lo = min(rt[k] for k in members)
            hi = max(rt[k] for k in members)
            first = min(members)
            for m in sorted(near):
                if m < first:
                    continue  # every grown ride has two members that could be dropped
                if max(hi, rt[m]) - min(lo, rt[m]) > cfg.window:
                    continue
                grown = tuple(sorted(members + (m,)))
                for order, _ in good:
                    for new in _grow(order, members, m, pair_types):
                        sched = batch.evaluate(new)
                        if sched is not None:
                            nxt.setdefault(grown, []).append((new, sched))
        level = nxt
        if not level:
            break
    return finalize(rides)


def prune_served(candidates, served_ids) -> list[RideCandidate]:
    served = set(served_ids)
    if not served:
        return list(candidates)
    return [r for r in candidates if served.isdisjoint(r.members)]


def rides_by_member(candidates):
    index = {}
    for r in candidates:
        for m in r.members:
            index.setdefault(m, []).append(r)
    return index


def write_rides(candidates, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("ride_id,kind,member_ids,service_distance_m,service_time_s\n")
        for r in candidates:
            fh.write(f"{r.ride_id},{r.kind},{';'.join(map(str, r.members))},"
                     f"{r.service_distance:.3f},{r.service_time:.3f}\n")

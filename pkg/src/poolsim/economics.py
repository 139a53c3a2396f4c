"""Fares, commission, driver costs and the driver's ride choice.

All money inside PricedRide is integer euro cents. Every ride-level quantity
is rounded half-up to the cent once, and the derived quantities (total fare,
commission, profit) are exact integer arithmetic on the rounded values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum

from .shareability import POOLED, SOLO, RideCandidate


class Policy(str, Enum):
    SOLO_ONLY = "solo_only"
    FORCED_POOLING = "forced_pooling"
    PROFIT_MAX = "profit_max"

    def __str__(self):
        return self.value


DETERMINISTIC = "deterministic"
MNL = "mnl"


def _dec(x) -> Decimal:
    if isinstance(x, Decimal):
        return x
    if isinstance(x, float):
        return Decimal(repr(float(x)))  # shortest repr, so 0.25 -> Decimal("0.25")
    return Decimal(x)


def to_cents(euros) -> int:
    """Round a euro amount half-up to integer cents."""
    return int((_dec(euros) * 100).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def _half_up(x: Decimal) -> int:
    return int(x.quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class PricingParams:
    fare_per_km: float = 1.5
    discount: float = 0.25
    commission: float = 0.25
    policy: Policy = Policy.PROFIT_MAX

    def __post_init__(self):
        if not self.fare_per_km > 0:
            raise ValueError(f"fare_per_km must be positive, got {self.fare_per_km}")
        if not 0 <= self.discount < 1:
            raise ValueError(f"discount must be in [0, 1), got {self.discount}")
        if not 0 <= self.commission < 1:
            raise ValueError(f"commission must be in [0, 1), got {self.commission}")
        object.__setattr__(self, "policy", Policy(self.policy))


@dataclass(frozen=True)
class DriverProfile:
    driver_id: int
    cost_per_km: float = 0.5
    value_of_time: float = 0.0  # euro per second
    pooling_multiplier: float = 1.0
    choice_mode: str = DETERMINISTIC
    mnl_scale: float = 1.0  # per euro
    decline_allowed: bool = False

    def __post_init__(self):
        if self.cost_per_km < 0 or self.value_of_time < 0:
            raise ValueError("driver cost parameters must be >= 0")
        if not 0 < self.pooling_multiplier <= 1:
            raise ValueError(f"pooling_multiplier must be in (0, 1], got {self.pooling_multiplier}")
        if self.choice_mode not in (DETERMINISTIC, MNL):
            raise ValueError(f"unknown choice mode {self.choice_mode!r}")
        if not self.mnl_scale > 0:
            raise ValueError(f"mnl_scale must be positive, got {self.mnl_scale}")

    def multiplier(self, kind):
        return self.pooling_multiplier if kind == POOLED else 1.0


def fare(req, ride_kind, p: PricingParams) -> float:
    """Fare in euros, from the direct distance of the request."""
    return fare_cents(req.distance, ride_kind, p) / 100


def fare_cents(distance_m, ride_kind, p: PricingParams) -> int:
    amount = _dec(p.fare_per_km) * _dec(distance_m) / 1000
    if ride_kind == POOLED:
        amount *= 1 - _dec(p.discount)
    elif ride_kind != SOLO:
        raise ValueError(f"unknown ride kind {ride_kind!r}")
    return to_cents(amount)


@dataclass(frozen=True)
class PricedRide:
    candidate: RideCandidate
    fares: tuple  # cents, aligned with candidate.members
    total_fare: int
    commission_rate: float
    revenue: int  # driver's share
    commission: int  # platform's share
    cost: int
    profit: int
    multiplier: float
    pickup_distance: float = 0.0
    pickup_time: float = 0.0

    def __post_init__(self):
        assert self.total_fare == sum(self.fares), "total fare is not the sum of member fares"
        assert self.revenue == _half_up((1 - _dec(self.commission_rate)) * self.total_fare), \
            "driver revenue is not (1 - commission) * fare"
        assert self.commission == self.total_fare - self.revenue
        assert self.profit == self.revenue - self.cost, "profit is not revenue - cost"

    @property
    def ride_id(self):
        return self.candidate.ride_id

    @property
    def effective_utility(self) -> float:
        return self.multiplier * self.profit / 100


def price_ride(candidate: RideCandidate, driver_position, p: PricingParams, d: DriverProfile,
               net, requests) -> PricedRide:
    """Price `candidate` for driver `d` idle at `driver_position`.

    `requests` maps request id -> TripRequest (fares use direct distances).
    """
    fares = tuple(fare_cents(requests[m].distance, candidate.kind, p) for m in candidate.members)
    total = sum(fares)
    revenue = _half_up((1 - _dec(p.commission)) * total)
    pickup_distance = net.distance(driver_position, candidate.first_node)
    pickup_time = pickup_distance / net.speed
    cost_eur = (_dec(d.cost_per_km) * (_dec(pickup_distance) + _dec(candidate.service_distance)) / 1000
                + _dec(d.value_of_time) * (_dec(pickup_time) + _dec(candidate.service_time)))
    cost = to_cents(cost_eur)
    return PricedRide(candidate, fares, total, p.commission, revenue, total - revenue, cost,
                      revenue - cost, d.multiplier(candidate.kind), pickup_distance, pickup_time)


def filter_by_policy(candidates, policy) -> list:
    policy = Policy(policy)
    if policy is Policy.SOLO_ONLY:
        return [c for c in candidates if _kind(c) == SOLO]
    if policy is Policy.FORCED_POOLING:
        return [c for c in candidates if _kind(c) == POOLED]
    return list(candidates)


def _kind(c):
    return c.candidate.kind if isinstance(c, PricedRide) else c.kind


def logit_probabilities(utilities, scale):
    m = max(utilities)
    w = [math.exp(scale * (u - m)) for u in utilities]
    s = sum(w)
    return [x / s for x in w]


def choose_ride(priced, d: DriverProfile, rng=None):
    """Pick a ride from a non-empty choice set; None means the driver declines.

    With `d.decline_allowed` the driver also has an outside option worth 0:
    the deterministic chooser takes it only when every ride is worth less,
    the logit chooser draws it like any other alternative.
    """
    if not priced:
        raise ValueError("choice set is empty")
    options = sorted(priced, key=lambda r: r.ride_id)
    utils = [r.effective_utility for r in options]
    if d.choice_mode == DETERMINISTIC:
        if d.decline_allowed and max(utils) < 0:
            return None
        best = max(range(len(options)), key=lambda i: (utils[i], -options[i].ride_id))
        return options[best]
    if rng is None:
        raise ValueError("mnl choice needs an rng")
    alternatives = options + [None] if d.decline_allowed else options
    probs = logit_probabilities(utils + [0.0] if d.decline_allowed else utils, d.mnl_scale)
    u = rng.random()
    acc = 0.0
    for opt, pr in zip(alternatives, probs):
        acc += pr
        if u < acc:
            return opt
    return alternatives[-1]

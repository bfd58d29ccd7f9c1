"""Core domain model for the surplus-food matching engine.

This module defines the fundamental data carried through the system:
- Location / TimeWindow: planar coordinates (km) and integer-minute windows
- FoodType / Perishability / FoodTaxonomy: the food classification scheme
- Thresholds: the ten operating parameters that govern every eligibility test
- DonationRequest / RequirementRequest / VolunteerRequest: agent intents
- Match: a (donor meal, optional volunteer, optional receiver) assignment
- Sequencer: the server-side monotone counter that totally orders requests

Times are integer minutes since the scenario epoch; amounts are integer
grams; distances are kilometers. Integer minutes keep tie-breaking exact.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union


class FoodType(Enum):
    FRESHLY_COOKED = "freshly_cooked"
    FROZEN_UNCOOKED = "frozen_uncooked"
    FROZEN_COOKED = "frozen_cooked"
    PACKAGED_SOLID = "packaged_solid"
    PACKAGED_LIQUID = "packaged_liquid"
    FRESH_PRODUCE = "fresh_produce"
    FRUITS_AND_VEGETABLES = "fruits_and_vegetables"
    MIXED = "mixed"


class Perishability(Enum):
    PERISHABLE = "perishable"
    NON_PERISHABLE = "non_perishable"


class FoodTaxonomy:
    """Total mapping of food types to perishable / non-perishable classes.

    Mixed food always counts as perishable. The default taxonomy sends the
    packaged types to non-perishable and everything else to perishable; a
    custom mapping may be supplied as long as it stays total and keeps the
    mixed-is-perishable rule.
    """

    def __init__(self, mapping: Optional[dict[FoodType, Perishability]] = None):
        if mapping is None:
            mapping = dict(_DEFAULT_TAXONOMY)
        missing = [ft for ft in FoodType if ft not in mapping]
        if missing:
            raise ValueError(f"taxonomy not total, missing: {missing}")
        if mapping[FoodType.MIXED] is not Perishability.PERISHABLE:
            raise ValueError("mixed food must map to the perishable class")
        self._mapping = dict(mapping)

    def perishability(self, food: FoodType) -> Perishability:
        return self._mapping[food]

    def is_perishable(self, food: FoodType) -> bool:
        return self._mapping[food] is Perishability.PERISHABLE


_DEFAULT_TAXONOMY = {
    FoodType.FRESHLY_COOKED: Perishability.PERISHABLE,
    FoodType.FROZEN_UNCOOKED: Perishability.PERISHABLE,
    FoodType.FROZEN_COOKED: Perishability.PERISHABLE,
    FoodType.PACKAGED_SOLID: Perishability.NON_PERISHABLE,
    FoodType.PACKAGED_LIQUID: Perishability.NON_PERISHABLE,
    FoodType.FRESH_PRODUCE: Perishability.PERISHABLE,
    FoodType.FRUITS_AND_VEGETABLES: Perishability.PERISHABLE,
    FoodType.MIXED: Perishability.PERISHABLE,
}


def perishability(taxonomy: FoodTaxonomy, food: FoodType) -> Perishability:
    """Deterministic class lookup for one food type."""
    return taxonomy.perishability(food)


@dataclass(frozen=True)
class Location:
    x: float
    y: float


@dataclass(frozen=True)
class TimeWindow:
    """Inclusive integer-minute window with start <= end."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"window start {self.start} after end {self.end}")

    def length(self) -> int:
        return self.end - self.start

    def overlap_minutes(self, other: "TimeWindow") -> int:
        """Length of the intersection, 0 when the windows do not meet."""
        return max(0, min(self.end, other.end) - max(self.start, other.start))


@dataclass(frozen=True)
class RequestId:
    """Globally unique request identity.

    meal_seq is 0 for requests that were not split; split donation pieces
    get meal_seq 1..k appended to the parent identity.
    """

    agent_id: int
    request_seq: int
    meal_seq: int = 0

    def __str__(self) -> str:
        if self.meal_seq:
            return f"{self.agent_id}.{self.request_seq}.{self.meal_seq}"
        return f"{self.agent_id}.{self.request_seq}"


class Sequencer:
    """Server-side monotone counter. Thread-safe; values start at 1.

    The issued sequence replaces wall-clock submit timestamps: it is unique
    across all requests and provides the supreme tie-breaking key.
    """

    def __init__(self, start: int = 1):
        self._counter = itertools.count(start)
        self._lock = threading.Lock()

    def next(self) -> int:
        with self._lock:
            return next(self._counter)


def next_arrival_seq(sequencer: Sequencer) -> int:
    return sequencer.next()


@dataclass(frozen=True)
class Thresholds:
    """The ten operating parameters.

    t_o       minutes  minimum donor/volunteer availability overlap
    t_l       percent  volunteer off-routing allowance (of route length)
    t_m       grams    healthy meal size; donation splitting unit
    t_a       percent  payload headroom required over the donation weight
    t_p_nm    km       perishable reach, non-motored / no volunteer
    t_p_m     km       perishable reach, motored transport
    t_np      km       non-perishable reach
    t_d       minutes  donor matching lead before the donation window
    t_r       minutes  receiver matching lead before the requirement window
    t_w       minutes  acceptance deadline for a displayed match
    """

    t_o: int = 15
    t_l: float = 5.0
    t_m: int = 1000
    t_a: float = 20.0
    t_p_nm: float = 5.0
    t_p_m: float = 20.0
    t_np: float = 100.0
    t_d: int = 120
    t_r: int = 180
    t_w: int = 15

    def __post_init__(self) -> None:
        for name in ("t_o", "t_l", "t_m", "t_a", "t_p_nm", "t_p_m", "t_np", "t_d", "t_r", "t_w"):
            if getattr(self, name) <= 0:
                raise ValueError(f"threshold {name} must be positive")
        if not (self.t_p_nm <= self.t_p_m <= self.t_np):
            raise ValueError("reach thresholds must order t_p_nm <= t_p_m <= t_np")


@dataclass
class DonationRequest:
    """One donation meal offer.

    vicinity is runtime state: the matching engine recomputes it whenever
    the request is considered, from the food class and assigned transport.
    """

    id: RequestId
    arrival: int
    location: Location
    food: FoodType
    amount: int
    window: TimeWindow
    packaging: str = ""
    prep_or_expiry: int = 0
    image_ref: str = ""
    preferred_receivers: tuple[int, ...] = ()
    vicinity: float = 0.0

    def __post_init__(self) -> None:
        if self.amount <= 0:
            raise ValueError("invalid amount")
        if len(set(self.preferred_receivers)) != len(self.preferred_receivers):
            raise ValueError("duplicate entries in preferred receivers")

    @property
    def event_time(self) -> int:
        """Donor event time is the donation window start."""
        return self.window.start


@dataclass
class RequirementRequest:
    """One food requirement. Never split; tracks the unfulfilled remainder."""

    id: RequestId
    arrival: int
    location: Location
    food: FoodType
    amount: int
    window: TimeWindow
    preferred_donors: tuple[int, ...] = ()
    remaining_amount: int = field(default=-1)

    def __post_init__(self) -> None:
        if self.amount <= 0:
            raise ValueError("invalid amount")
        if self.remaining_amount < 0:
            self.remaining_amount = self.amount
        if self.remaining_amount > self.amount:
            raise ValueError("remaining amount exceeds requirement")

    @property
    def event_time(self) -> int:
        """Receiver event time is the requirement window end."""
        return self.window.end


@dataclass
class VolunteerRequest:
    """One transport offer along a fixed start->destination route."""

    id: RequestId
    arrival: int
    route_start: Location
    route_end: Location
    motored: bool
    ac: bool
    payload_capacity: int
    window: TimeWindow
    receivers: tuple[int, ...] = ()
    remaining_payload: int = field(default=-1)

    def __post_init__(self) -> None:
        if self.payload_capacity <= 0:
            raise ValueError("invalid payload capacity")
        if self.remaining_payload < 0:
            self.remaining_payload = self.payload_capacity
        if self.remaining_payload > self.payload_capacity:
            raise ValueError("remaining payload exceeds capacity")


Request = Union[DonationRequest, RequirementRequest, VolunteerRequest]


class MatchStatus(Enum):
    PENDING_VOLUNTEER_ONLY = "pending_volunteer_only"
    DISPLAYED = "displayed"
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    EXPIRED = "expired"


@dataclass
class Match:
    """A donor-meal assignment, optionally carrying transport and a receiver.

    A displayed match becomes accepted only if every involved agent accepts
    before created_at + t_w; otherwise it expires or is rejected and all
    involved requests are requeued.
    """

    id: int
    donor: RequestId
    volunteer: Optional[RequestId]
    receiver: Optional[RequestId]
    vicinity: float
    status: MatchStatus
    created_at: int
    delivered_amount: int = 0
    requeued: bool = False


def tie_break_key(event_time: int, arrival: int) -> tuple[int, int]:
    """Sort key for the system-wide double tie-break.

    Orders by event time (donation start for donors, requirement end for
    receivers) and then by the globally unique arrival sequence.
    """
    return (event_time, arrival)


def tie_break_compare(a: tuple[int, int], b: tuple[int, int]) -> int:
    """Strict total-order comparison over (event_time, arrival) pairs.

    Returns -1 when a precedes b, 1 when b precedes a. Equal pairs violate
    arrival uniqueness and are rejected outright.
    """
    if a[0] != b[0]:
        return -1 if a[0] < b[0] else 1
    if a[1] == b[1]:
        raise AssertionError(f"duplicate arrival sequence in tie-break: {a} vs {b}")
    return -1 if a[1] < b[1] else 1

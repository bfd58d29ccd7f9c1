"""Deterministic scenario generation and the scenario file format.

Scenarios are generated from independent per-role random streams so that
regenerating with a different volunteer count leaves the donor and receiver
populations untouched, and the first k volunteers of a larger pool are
exactly the smaller pool. Volunteer routes are biased to start near donation
sites and end near requirement sites: agents of the model volunteer along
the errands they already run, which is what makes the tight pickup radius
(a percentage of the route length) operative at all.

The file format is a single JSON object with "config" and "requests" keys;
request records carry a "type" discriminator, integer-minute times, [x, y]
kilometer locations, and gram amounts.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from .model import (
    DonationRequest,
    FoodTaxonomy,
    FoodType,
    Location,
    Request,
    RequestId,
    RequirementRequest,
    Thresholds,
    TimeWindow,
    VolunteerRequest,
)

PACKAGING = ("box", "bag", "crate", "tin", "tray")


@dataclass(frozen=True)
class ScenarioConfig:
    n_requests: int = 5000
    donor_fraction: float = 0.3
    receiver_fraction: float = 0.4
    volunteer_fraction: float = 0.3
    n_donors: Optional[int] = None
    n_receivers: Optional[int] = None
    n_volunteers: Optional[int] = None
    city_width: float = 50.0
    city_height: float = 50.0
    working_start: int = 360
    working_end: int = 1439
    max_payload: int = 100_000
    min_payload: int = 5_000
    donor_amount_min: int = 500
    donor_amount_max: int = 3500
    receiver_amount_min: int = 500
    receiver_amount_max: int = 4000
    preference_lengths: tuple[int, ...] = (0, 0, 1, 2, 3, 4)
    food_types: tuple[FoodType, ...] = tuple(FoodType)
    donor_lead: tuple[int, int] = (30, 360)
    donor_span: tuple[int, int] = (60, 240)
    receiver_lead: tuple[int, int] = (45, 420)
    receiver_span: tuple[int, int] = (45, 240)
    volunteer_near_agents: float = 0.75
    restricted_volunteer_rate: float = 0.08
    motored_rate: float = 0.7
    ac_rate: float = 0.4
    donor_hubs: int = 0
    receiver_hubs: int = 0
    hub_sigma: float = 1.2
    hub_separation: tuple[float, float] = (8.0, 18.0)
    seed: int = 0
    thresholds: Thresholds = field(default_factory=Thresholds)

    def counts(self) -> tuple[int, int, int]:
        if self.n_donors is not None or self.n_receivers is not None or self.n_volunteers is not None:
            if None in (self.n_donors, self.n_receivers, self.n_volunteers):
                raise ValueError("explicit counts must set all three roles")
            return self.n_donors, self.n_receivers, self.n_volunteers
        total = self.donor_fraction + self.receiver_fraction + self.volunteer_fraction
        if abs(total - 1.0) > 1e-9:
            raise ValueError("mix fractions must sum to 1")
        n_d = int(self.n_requests * self.donor_fraction)
        n_r = int(self.n_requests * self.receiver_fraction)
        return n_d, n_r, self.n_requests - n_d - n_r

    def validate(self) -> None:
        if self.working_end <= self.working_start:
            raise ValueError("infeasible scenario: empty working hours")
        if self.city_width <= 0 or self.city_height <= 0:
            raise ValueError("infeasible scenario: empty city")
        n_d, n_r, n_v = self.counts()
        if min(n_d, n_r, n_v) < 0:
            raise ValueError("infeasible scenario: negative role count")
        if self.donor_amount_min <= 0 or self.donor_amount_min > self.donor_amount_max:
            raise ValueError("infeasible scenario: donor amount range")
        if self.min_payload <= 0 or self.min_payload > self.max_payload:
            raise ValueError("infeasible scenario: payload range")


@dataclass
class TimedRequest:
    submit_at: int
    request: Request


@dataclass
class Scenario:
    config: ScenarioConfig
    requests: list[TimedRequest]

    def horizon(self) -> int:
        if not self.requests:
            return self.config.working_end
        return max(t.request.window.end for t in self.requests)


def _uniform_location(rng: random.Random, config: ScenarioConfig) -> Location:
    return Location(
        round(rng.uniform(0.0, config.city_width), 4),
        round(rng.uniform(0.0, config.city_height), 4),
    )


def _near(rng: random.Random, config: ScenarioConfig, anchor: Location, sigma: float = 1.5) -> Location:
    x = min(max(anchor.x + rng.gauss(0.0, sigma), 0.0), config.city_width)
    y = min(max(anchor.y + rng.gauss(0.0, sigma), 0.0), config.city_height)
    return Location(round(x, 4), round(y, 4))


def _window_after(rng: random.Random, config: ScenarioConfig, submit: int,
                  lead: tuple[int, int], span: tuple[int, int]) -> TimeWindow:
    start = min(submit + rng.randint(*lead), config.working_end)
    end = min(start + rng.randint(*span), config.working_end)
    return TimeWindow(start, end)


def _preference(rng: random.Random, config: ScenarioConfig, pool: range) -> tuple[int, ...]:
    length = min(rng.choice(config.preference_lengths), len(pool))
    if length == 0:
        return ()
    return tuple(rng.sample(list(pool), length))


def _hub_centers(config: ScenarioConfig) -> tuple[list[Location], list[Location]]:
    """Donation-site and requirement-side district centers.

    Receiver hubs are rejection-sampled so their nearest donor hub sits in
    the configured separation ring: past plain self-transport reach, within
    motored volunteer reach.
    """
    rng = random.Random(f"{config.seed}:hubs")
    margin = min(5.0, config.city_width / 4, config.city_height / 4)

    def point() -> Location:
        return Location(
            round(rng.uniform(margin, config.city_width - margin), 4),
            round(rng.uniform(margin, config.city_height - margin), 4),
        )

    donor_centers = [point() for _ in range(config.donor_hubs)]
    receiver_centers: list[Location] = []
    lo, hi = config.hub_separation
    for _ in range(config.receiver_hubs):
        for _attempt in range(300):
            candidate = point()
            nearest = min(
                ((candidate.x - h.x) ** 2 + (candidate.y - h.y) ** 2) ** 0.5
                for h in donor_centers
            )
            if lo <= nearest <= hi:
                receiver_centers.append(candidate)
                break
        else:
            receiver_centers.append(point())
    return donor_centers, receiver_centers


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Generate a random, logically coherent scenario. Deterministic per seed."""
    config.validate()
    n_d, n_r, n_v = config.counts()
    wh = (config.working_start, config.working_end)
    latest_submit = max(wh[0], wh[1] - 150)

    receiver_ids = range(1, n_r + 1)
    donor_ids = range(n_r + 1, n_r + n_d + 1)

    donor_centers: list[Location] = []
    receiver_centers: list[Location] = []
    if config.donor_hubs > 0 and config.receiver_hubs > 0:
        donor_centers, receiver_centers = _hub_centers(config)

    rng_r = random.Random(f"{config.seed}:receivers")
    receivers: list[TimedRequest] = []
    receiver_locations: list[Location] = []
    for agent in receiver_ids:
        submit = rng_r.randint(wh[0], latest_submit)
        if receiver_centers:
            loc = _near(rng_r, config, rng_r.choice(receiver_centers), sigma=config.hub_sigma)
        else:
            loc = _uniform_location(rng_r, config)
        receiver_locations.append(loc)
        receivers.append(
            TimedRequest(
                submit_at=submit,
                request=RequirementRequest(
                    id=RequestId(agent, 1),
                    arrival=-1,
                    location=loc,
                    food=rng_r.choice(config.food_types),
                    amount=rng_r.randint(config.receiver_amount_min, config.receiver_amount_max),
                    window=_window_after(rng_r, config, submit, config.receiver_lead, config.receiver_span),
                    preferred_donors=_preference(rng_r, config, donor_ids),
                ),
            )
        )

    rng_d = random.Random(f"{config.seed}:donors")
    donors: list[TimedRequest] = []
    donor_locations: list[Location] = []
    for agent in donor_ids:
        submit = rng_d.randint(wh[0], latest_submit)
        if donor_centers:
            loc = _near(rng_d, config, rng_d.choice(donor_centers), sigma=config.hub_sigma)
        else:
            loc = _uniform_location(rng_d, config)
        donor_locations.append(loc)
        window = _window_after(rng_d, config, submit, config.donor_lead, config.donor_span)
        donors.append(
            TimedRequest(
                submit_at=submit,
                request=DonationRequest(
                    id=RequestId(agent, 1),
                    arrival=-1,
                    location=loc,
                    food=rng_d.choice(config.food_types),
                    amount=rng_d.randint(config.donor_amount_min, config.donor_amount_max),
                    window=window,
                    packaging=rng_d.choice(PACKAGING),
                    prep_or_expiry=max(0, window.start - rng_d.randint(0, 720)),
                    image_ref=f"img-{agent}-1",
                    preferred_receivers=_preference(rng_d, config, receiver_ids),
                ),
            )
        )

    # volunteers plan errands between the places donations and requirements
    # actually happen (the model lets donors and receivers volunteer too):
    # an anchored volunteer starts near some donation site, is available
    # around that donation, submits in time for its matching gate, and heads
    # toward a requirement of the same food class it could plausibly carry
    # volunteers declare the day's availability up front, so a larger pool
    # extends a smaller one without reordering it
    taxonomy = FoodTaxonomy()
    rng_v = random.Random(f"{config.seed}:volunteers")
    volunteers: list[TimedRequest] = []
    anchor_cycle: list[TimedRequest] = []
    for index in range(n_v):
        agent = n_r + n_d + 1 + index
        submit = wh[0]
        anchor: Optional[TimedRequest] = None
        if donors and rng_v.random() < config.volunteer_near_agents:
            # balanced recruitment: spread anchored volunteers across the
            # donation sites, reshuffling each full pass
            if not anchor_cycle:
                anchor_cycle = rng_v.sample(donors, len(donors))
            anchor = anchor_cycle.pop()
            start = _near(rng_v, config, anchor.request.location, sigma=0.5)
            avail_start = max(wh[0], anchor.request.window.start - rng_v.randint(0, 90))
            window = TimeWindow(avail_start, min(avail_start + rng_v.randint(120, 420), wh[1]))
        else:
            start = _uniform_location(rng_v, config)
            avail_start = rng_v.randint(wh[0], latest_submit)
            window = TimeWindow(avail_start, min(avail_start + rng_v.randint(120, 420), wh[1]))
        end = None
        if anchor is not None and receivers:
            # aim for a requirement the anchor donation could actually serve:
            # same food class, usable after the donation, gates overlapping
            anchor_class = taxonomy.perishability(anchor.request.food)
            th = config.thresholds
            for _ in range(12):
                candidate = rng_v.choice(receivers)
                if (
                    taxonomy.perishability(candidate.request.food) is anchor_class
                    and candidate.request.window.end >= anchor.request.window.end
                    and candidate.request.window.start - th.t_r <= anchor.request.window.end - th.t_d
                ):
                    end = _near(rng_v, config, candidate.request.location, sigma=0.5)
                    break
        if end is None:
            if receiver_locations:
                end = _near(rng_v, config, rng_v.choice(receiver_locations), sigma=0.5)
            else:
                end = _uniform_location(rng_v, config)
        motored = rng_v.random() < config.motored_rate
        restricted: tuple[int, ...] = ()
        if receiver_locations and rng_v.random() < config.restricted_volunteer_rate:
            restricted = tuple(rng_v.sample(list(receiver_ids), min(2, n_r)))
        volunteers.append(
            TimedRequest(
                submit_at=submit,
                request=VolunteerRequest(
                    id=RequestId(agent, 1),
                    arrival=-1,
                    route_start=start,
                    route_end=end,
                    motored=motored,
                    ac=motored and rng_v.random() < config.ac_rate,
                    payload_capacity=rng_v.randint(config.min_payload, config.max_payload),
                    window=window,
                    receivers=restricted,
                ),
            )
        )

    requests = receivers + donors + volunteers
    requests.sort(key=lambda t: (t.submit_at, t.request.id.agent_id))
    return Scenario(config=config, requests=requests)


def with_volunteer_count(config: ScenarioConfig, n_volunteers: int) -> ScenarioConfig:
    """Same population, different volunteer pool size (prefix-stable)."""
    n_d, n_r, _ = config.counts()
    return replace(config, n_donors=n_d, n_receivers=n_r, n_volunteers=n_volunteers)


# ---------------------------------------------------------------------------
# JSON round-trip
# ---------------------------------------------------------------------------


def _request_to_record(timed: TimedRequest) -> dict:
    r = timed.request
    base = {
        "agent_id": r.id.agent_id,
        "request_seq": r.id.request_seq,
        "submit_at": timed.submit_at,
        "window": [r.window.start, r.window.end],
    }
    if isinstance(r, DonationRequest):
        base.update(
            type="donation",
            location=[r.location.x, r.location.y],
            food=r.food.value,
            amount=r.amount,
            packaging=r.packaging,
            prep_or_expiry=r.prep_or_expiry,
            image_ref=r.image_ref,
            preferred=list(r.preferred_receivers),
        )
    elif isinstance(r, RequirementRequest):
        base.update(
            type="requirement",
            location=[r.location.x, r.location.y],
            food=r.food.value,
            amount=r.amount,
            preferred=list(r.preferred_donors),
        )
    else:
        base.update(
            type="volunteer",
            route=[[r.route_start.x, r.route_start.y], [r.route_end.x, r.route_end.y]],
            motored=r.motored,
            ac=r.ac,
            payload=r.payload_capacity,
            receivers=list(r.receivers),
        )
    return base


def _request_from_record(record: dict) -> TimedRequest:
    rid = RequestId(int(record["agent_id"]), int(record.get("request_seq", 1)))
    window = TimeWindow(int(record["window"][0]), int(record["window"][1]))
    kind = record["type"]
    if kind == "donation":
        request: Request = DonationRequest(
            id=rid,
            arrival=-1,
            location=Location(*record["location"]),
            food=FoodType(record["food"]),
            amount=int(record["amount"]),
            window=window,
            packaging=record.get("packaging", ""),
            prep_or_expiry=int(record.get("prep_or_expiry", 0)),
            image_ref=record.get("image_ref", ""),
            preferred_receivers=tuple(record.get("preferred", ())),
        )
    elif kind == "requirement":
        request = RequirementRequest(
            id=rid,
            arrival=-1,
            location=Location(*record["location"]),
            food=FoodType(record["food"]),
            amount=int(record["amount"]),
            window=window,
            preferred_donors=tuple(record.get("preferred", ())),
        )
    elif kind == "volunteer":
        request = VolunteerRequest(
            id=rid,
            arrival=-1,
            route_start=Location(*record["route"][0]),
            route_end=Location(*record["route"][1]),
            motored=bool(record["motored"]),
            ac=bool(record["ac"]),
            payload_capacity=int(record["payload"]),
            window=window,
            receivers=tuple(record.get("receivers", ())),
        )
    else:
        raise ValueError(f"unknown request type {kind!r}")
    return TimedRequest(submit_at=int(record["submit_at"]), request=request)


_TUPLE_FIELDS = (
    "preference_lengths",
    "donor_lead",
    "donor_span",
    "receiver_lead",
    "receiver_span",
    "hub_separation",
)


def config_to_dict(config: ScenarioConfig) -> dict:
    data = asdict(config)
    data["thresholds"] = asdict(config.thresholds)
    data["food_types"] = [food.value for food in config.food_types]
    for name in _TUPLE_FIELDS:
        data[name] = list(getattr(config, name))
    return data


def config_from_dict(data: dict) -> ScenarioConfig:
    data = dict(data)
    if "thresholds" in data:
        data["thresholds"] = Thresholds(**data["thresholds"])
    if "food_types" in data:
        data["food_types"] = tuple(FoodType(v) for v in data["food_types"])
    for name in _TUPLE_FIELDS:
        if name in data:
            data[name] = tuple(data[name])
    return ScenarioConfig(**data)


def scenario_to_json(scenario: Scenario) -> str:
    payload = {
        "config": config_to_dict(scenario.config),
        "requests": [_request_to_record(t) for t in scenario.requests],
    }
    return json.dumps(payload, indent=1, sort_keys=True)


def scenario_from_json(text: str) -> Scenario:
    payload = json.loads(text)
    config = config_from_dict(payload.get("config", {}))
    requests = [_request_from_record(r) for r in payload.get("requests", [])]
    return Scenario(config=config, requests=requests)


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_text(scenario_to_json(scenario))


def load_scenario(path: Union[str, Path]) -> Scenario:
    return scenario_from_json(Path(path).read_text())

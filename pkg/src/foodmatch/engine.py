"""The matching engine: volunteer assignment and chronological acceptance.

One iteration drains the intake pool, classifies the snapshot, and runs the
matcher once per food class, perishable first. Within a class the matcher:

1. gates donors and receivers by their lead-time windows,
2. assigns each gated donor the eligible volunteer that maximizes the
   distance the donation can travel, falling back to class defaults,
3. extracts and augments both sides' preference lists against run-time
   eligibility,
4. serves receivers in earliest-requirement-end order (configurable), each
   repeatedly taking the still-available donor that ranks it best, until the
   requirement is covered or no eligible donor remains.

Position ties are broken by the receiver's own preference order, then by the
donor's event time, then by the globally unique arrival sequence. Matches
whose donors never reach a receiver are rolled back at the end of the
iteration: the reserved payload returns to the volunteer and both parties
stay in the market.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .classify import ClassifiedLists, trifurcate
from .geometry import (
    default_vicinity,
    distance,
    off_route_overhead,
    volunteer_route,
    within_dropoff_band,
    within_pickup_radius,
)
from .model import (
    DonationRequest,
    FoodTaxonomy,
    Match,
    MatchStatus,
    Perishability,
    Request,
    RequestId,
    RequirementRequest,
    Thresholds,
    VolunteerRequest,
)
from .pool import ActivePool, expire_stale_matches, requeue_rejected

RECEIVER_SORT_MODES = ("end", "start")
PREFERENCE_MODES = ("eligible", "raw")


@dataclass(frozen=True)
class MatchPolicy:
    """Matcher configuration axes exercised by the experiments."""

    receiver_sort: str = "end"
    preferences: str = "eligible"

    def __post_init__(self) -> None:
        if self.receiver_sort not in RECEIVER_SORT_MODES:
            raise ValueError(f"receiver_sort must be one of {RECEIVER_SORT_MODES}")
        if self.preferences not in PREFERENCE_MODES:
            raise ValueError(f"preferences must be one of {PREFERENCE_MODES}")


@dataclass(frozen=True)
class OrchestratorConfig:
    max_iterations: int = 1 << 20
    tick_minutes: int = 5

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.tick_minutes < 1:
            raise ValueError("tick_minutes must be at least 1")


@dataclass
class PreferenceList:
    """Extracted-and-augmented preference over requests.

    entries holds (request id, rank) with non-decreasing ranks: listed agents
    keep their submitted order under collapsed ranks 1..k, and every other
    eligible agent is appended at the shared lowest rank k+1, ordered by
    arrival sequence.
    """

    entries: list[tuple[RequestId, int]] = field(default_factory=list)
    augmented_tail_rank: int = 0
    agent_ranks: dict[int, int] = field(default_factory=dict)

    def rank_of_agent(self, agent_id: int) -> Optional[int]:
        return self.agent_ranks.get(agent_id)


def extract_augment(original: Sequence[int], eligible: Sequence[Request]) -> PreferenceList:
    """Restrict a submitted agent-id list to the eligible requests and append
    the unlisted remainder at one shared lowest rank."""
    by_agent: dict[int, list[Request]] = {}
    for request in eligible:
        by_agent.setdefault(request.id.agent_id, []).append(request)
    for requests in by_agent.values():
        requests.sort(key=lambda r: r.arrival)

    pref = PreferenceList()
    rank = 0
    for agent_id in original:
        if agent_id in by_agent and agent_id not in pref.agent_ranks:
            rank += 1
            pref.agent_ranks[agent_id] = rank
            for request in by_agent[agent_id]:
                pref.entries.append((request.id, rank))

    tail = [r for agent, reqs in by_agent.items() if agent not in pref.agent_ranks for r in reqs]
    if tail:
        tail.sort(key=lambda r: r.arrival)
        tail_rank = rank + 1
        pref.augmented_tail_rank = tail_rank
        for request in tail:
            pref.agent_ranks.setdefault(request.id.agent_id, tail_rank)
            pref.entries.append((request.id, tail_rank))
    return pref


class MatchSet:
    """Matches of one mechanism run, at most one per donor meal request."""

    def __init__(self) -> None:
        self._by_donor: dict[RequestId, Match] = {}

    def add(self, match: Match) -> None:
        if match.donor in self._by_donor:
            raise ValueError(f"donor {match.donor} already has a match")
        self._by_donor[match.donor] = match

    def get(self, donor_id: RequestId) -> Optional[Match]:
        return self._by_donor.get(donor_id)

    def __iter__(self) -> Iterator[Match]:
        return iter(self._by_donor.values())

    def __len__(self) -> int:
        return len(self._by_donor)


# ---------------------------------------------------------------------------
# Gating
# ---------------------------------------------------------------------------


def current_donors(
    donors: Iterable[DonationRequest], now: int, thresholds: Thresholds
) -> list[DonationRequest]:
    """Donors inside their matching lead window [start - t_d, end - t_d]."""
    t_d = thresholds.t_d
    return [d for d in donors if d.window.start - t_d <= now <= d.window.end - t_d]


def current_receivers(
    receivers: Iterable[RequirementRequest], now: int, thresholds: Thresholds
) -> list[RequirementRequest]:
    """Receivers inside their search lead window [start - t_r, end - t_r]."""
    t_r = thresholds.t_r
    return [r for r in receivers if r.window.start - t_r <= now <= r.window.end - t_r]


# ---------------------------------------------------------------------------
# Volunteer assignment
# ---------------------------------------------------------------------------


def required_payload(amount: int, thresholds: Thresholds) -> float:
    # multiply before dividing: keeps e.g. 1000 g at 20% exactly 1200.0
    return amount * (100.0 + thresholds.t_a) / 100.0


def volunteer_is_eligible(
    d: DonationRequest,
    v: VolunteerRequest,
    thresholds: Thresholds,
    receiver_universe: Optional[set[int]] = None,
) -> bool:
    if v.remaining_payload < required_payload(d.amount, thresholds):
        return False
    if v.window.overlap_minutes(d.window) < thresholds.t_o:
        return False
    if not within_pickup_radius(d.location, volunteer_route(v), thresholds.t_l):
        return False
    if v.receivers and receiver_universe is not None:
        if not receiver_universe.intersection(v.receivers):
            return False
    return True


def eligible_volunteers(
    d: DonationRequest,
    vols: Sequence[VolunteerRequest],
    thresholds: Thresholds,
    receiver_universe: Optional[set[int]] = None,
) -> list[VolunteerRequest]:
    """Volunteers that can carry this donation: payload headroom, pickup
    radius, availability overlap, and a restricted receivers list (if any)
    intersecting the donor's potential receiver universe."""
    return [v for v in vols if volunteer_is_eligible(d, v, thresholds, receiver_universe)]


def vicinity_candidate(
    d: DonationRequest,
    v: VolunteerRequest,
    food: Perishability,
    thresholds: Thresholds,
) -> float:
    """How far this volunteer lets the donation travel before spoiling."""
    if food is Perishability.NON_PERISHABLE or v.ac:
        return distance(v.route_end, d.location)
    if v.motored:
        return thresholds.t_p_m
    return thresholds.t_p_nm


class _VolunteerIndex:
    """Grid over route starts; pickup eligibility only reaches t_l% of a
    route length, so donors only ever need nearby cells."""

    def __init__(self, vols: Sequence[VolunteerRequest], t_l: float):
        self._cell = 1.0
        for v in vols:
            allowance = t_l * distance(v.route_start, v.route_end) / 100.0
            if allowance > self._cell:
                self._cell = allowance
        self._grid: dict[tuple[int, int], list[VolunteerRequest]] = {}
        for v in vols:
            key = (int(v.route_start.x // self._cell), int(v.route_start.y // self._cell))
            self._grid.setdefault(key, []).append(v)

    def near(self, loc) -> list[VolunteerRequest]:
        cx, cy = int(loc.x // self._cell), int(loc.y // self._cell)
        found = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                found.extend(self._grid.get((cx + dx, cy + dy), ()))
        found.sort(key=lambda v: v.arrival)
        return found


def assign_volunteers(
    donors: Sequence[DonationRequest],
    vols: Sequence[VolunteerRequest],
    matches: MatchSet,
    food: Perishability,
    thresholds: Thresholds,
    now: int = 0,
    receiver_universe: Optional[set[int]] = None,
    match_ids: Optional[Iterator[int]] = None,
) -> tuple[MatchSet, list[VolunteerRequest]]:
    """Give every gated donor a provisional match, with the best volunteer
    it can get.

    Scanning follows volunteer arrival order and upgrades only on a strict
    vicinity improvement, so the earliest-arriving maximizer wins. A chosen
    volunteer leaves the open market but is offered first to later meals of
    the same donor while its payload lasts. Donors with no eligible
    volunteer fall back to the class default reach.
    """
    if match_ids is None:
        match_ids = itertools.count(1)
    index = _VolunteerIndex(vols, thresholds.t_l)
    taken: set[RequestId] = set()
    sticky: dict[int, VolunteerRequest] = {}

    for d in donors:
        chosen: Optional[VolunteerRequest] = None
        candidate_vicinity = 0.0

        previous = sticky.get(d.id.agent_id)
        if previous is not None and volunteer_is_eligible(d, previous, thresholds, receiver_universe):
            chosen = previous
            candidate_vicinity = vicinity_candidate(d, previous, food, thresholds)
        else:
            best_vicinity = 0.0
            for v in index.near(d.location):
                if v.id in taken:
                    continue
                if not volunteer_is_eligible(d, v, thresholds, receiver_universe):
                    continue
                vicinity = vicinity_candidate(d, v, food, thresholds)
                if chosen is None or vicinity > best_vicinity:
                    chosen = v
                    best_vicinity = vicinity
            candidate_vicinity = best_vicinity

        if chosen is None:
            d.vicinity = default_vicinity(food, None, thresholds)
        else:
            d.vicinity = max(candidate_vicinity, default_vicinity(food, chosen.motored, thresholds))
            chosen.remaining_payload -= d.amount
            taken.add(chosen.id)
            sticky[d.id.agent_id] = chosen

        matches.add(
            Match(
                id=next(match_ids),
                donor=d.id,
                volunteer=chosen.id if chosen else None,
                receiver=None,
                vicinity=d.vicinity,
                status=MatchStatus.PENDING_VOLUNTEER_ONLY,
                created_at=now,
            )
        )

    remaining = [v for v in vols if v.id not in taken]
    return matches, remaining


# ---------------------------------------------------------------------------
# Donor / receiver eligibility and preference positions
# ---------------------------------------------------------------------------


def eligible_donors_for(
    r: RequirementRequest,
    donors: Sequence[DonationRequest],
    taxonomy: Optional[FoodTaxonomy] = None,
) -> list[DonationRequest]:
    """Donors whose donation ends before the requirement ends, same food class."""
    taxonomy = taxonomy or FoodTaxonomy()
    r_class = taxonomy.perishability(r.food)
    return [
        d
        for d in donors
        if d.window.end <= r.window.end and taxonomy.perishability(d.food) is r_class
    ]


def donor_neighbourhood(
    d: DonationRequest,
    receivers: Sequence[RequirementRequest],
    thresholds: Thresholds,
    volunteer: Optional[VolunteerRequest] = None,
) -> list[RequirementRequest]:
    """Receivers this donor can actually reach: inside the vicinity circle,
    inside the assigned volunteer's drop-off band, and on the volunteer's
    restricted receivers list when one was given."""
    out = []
    route = volunteer_route(volunteer) if volunteer is not None else None
    for r in receivers:
        if distance(r.location, d.location) > d.vicinity:
            continue
        if volunteer is not None:
            if volunteer.receivers and r.id.agent_id not in volunteer.receivers:
                continue
            if not within_dropoff_band(r.location, route, thresholds.t_l):
                continue
        out.append(r)
    return out


class _PairContext:
    """Per-iteration pairwise eligibility and preference-position tables.

    Positions are fixed when the receiver loop starts (the preference-update
    phase); the match loop then only filters by donor availability.
    """

    def __init__(
        self,
        donors: Sequence[DonationRequest],
        receivers: Sequence[RequirementRequest],
        volunteers_by_id: dict[RequestId, VolunteerRequest],
        matches: MatchSet,
        thresholds: Thresholds,
        policy: MatchPolicy,
    ):
        self.thresholds = thresholds
        self.raw_mode = policy.preferences == "raw"
        self.donors = list(donors)
        self.receivers = list(receivers)
        self._volunteer_of: dict[RequestId, Optional[VolunteerRequest]] = {}
        for d in donors:
            match = matches.get(d.id)
            vol_id = match.volunteer if match else None
            self._volunteer_of[d.id] = volunteers_by_id.get(vol_id) if vol_id else None
        self._donor_tables: dict[RequestId, tuple[dict[int, int], Optional[int]]] = {}
        self._receiver_tables: dict[RequestId, tuple[dict[int, int], Optional[int]]] = {}

    def pair_eligible(self, d: DonationRequest, r: RequirementRequest) -> bool:
        if d.window.end > r.window.end:
            return False
        if distance(r.location, d.location) > d.vicinity:
            return False
        volunteer = self._volunteer_of[d.id]
        if volunteer is not None:
            if volunteer.receivers and r.id.agent_id not in volunteer.receivers:
                return False
            if not within_dropoff_band(r.location, volunteer_route(volunteer), self.thresholds.t_l):
                return False
        if self.raw_mode:
            if d.preferred_receivers and r.id.agent_id not in d.preferred_receivers:
                return False
            if r.preferred_donors and d.id.agent_id not in r.preferred_donors:
                return False
        return True

    def _donor_table(self, d: DonationRequest) -> tuple[dict[int, int], Optional[int]]:
        """Agent-id -> priority position of each receiver agent in this
        donor's preference; second item is the shared tail rank (None when
        unlisted agents cannot be matched, i.e. raw mode with a list)."""
        cached = self._donor_tables.get(d.id)
        if cached is not None:
            return cached
        if self.raw_mode:
            if d.preferred_receivers:
                table = ({agent: i + 1 for i, agent in enumerate(d.preferred_receivers)}, None)
            else:
                table = ({}, 1)
        else:
            eligible_agents = set()
            for r in self.receivers:
                if r.id.agent_id not in eligible_agents and self.pair_eligible(d, r):
                    eligible_agents.add(r.id.agent_id)
            ranks: dict[int, int] = {}
            rank = 0
            for agent in d.preferred_receivers:
                if agent in eligible_agents and agent not in ranks:
                    rank += 1
                    ranks[agent] = rank
            table = (ranks, rank + 1)
        self._donor_tables[d.id] = table
        return table

    def donor_position(self, d: DonationRequest, receiver_agent: int) -> Optional[int]:
        ranks, tail = self._donor_table(d)
        position = ranks.get(receiver_agent)
        if position is not None:
            return position
        return tail

    def receiver_rank(self, r: RequirementRequest, donor_agent: int) -> Optional[int]:
        cached = self._receiver_tables.get(r.id)
        if cached is None:
            if self.raw_mode:
                if r.preferred_donors:
                    cached = ({agent: i + 1 for i, agent in enumerate(r.preferred_donors)}, None)
                else:
                    cached = ({}, 1)
            else:
                eligible_agents = set()
                for d in self.donors:
                    if d.id.agent_id not in eligible_agents and self.pair_eligible(d, r):
                        eligible_agents.add(d.id.agent_id)
                ranks = {}
                rank = 0
                for agent in r.preferred_donors:
                    if agent in eligible_agents and agent not in ranks:
                        rank += 1
                        ranks[agent] = rank
                cached = (ranks, rank + 1)
            self._receiver_tables[r.id] = cached
        ranks, tail = cached
        position = ranks.get(donor_agent)
        if position is not None:
            return position
        return tail


class EligibilityTrace:
    """Which partner agents each request ever saw as candidates. Feeds the
    manipulation experiment's exception analysis."""

    def __init__(self) -> None:
        self.seen: dict[RequestId, set[int]] = {}

    def record(self, request_id: RequestId, agent_ids: Iterable[int]) -> None:
        self.seen.setdefault(request_id, set()).update(agent_ids)

    def universe_of(self, request_id: RequestId) -> set[int]:
        return self.seen.get(request_id, set())


def match_receivers(
    receivers: Sequence[RequirementRequest],
    donors: Sequence[DonationRequest],
    matches: MatchSet,
    thresholds: Thresholds,
    volunteers_by_id: Optional[dict[RequestId, VolunteerRequest]] = None,
    policy: MatchPolicy = MatchPolicy(),
    trace: Optional[EligibilityTrace] = None,
) -> MatchSet:
    """Serve receivers chronologically, each taking the donor that wants it most.

    Receivers are processed in ascending requirement end (or start, per
    policy) order with arrival as tie-break. Each receiver repeatedly takes,
    among still-available mutually eligible donors, the one ranking it at the
    minimum priority position; position ties fall back to the receiver's own
    preference order, the donor event time, and the arrival sequence. The
    final meal is accepted even when it overshoots the open requirement.
    """
    volunteers_by_id = volunteers_by_id or {}
    context = _PairContext(donors, receivers, volunteers_by_id, matches, thresholds, policy)

    market: dict[RequestId, DonationRequest] = {d.id: d for d in donors}
    sort_key = (
        (lambda r: (r.window.end, r.arrival))
        if policy.receiver_sort == "end"
        else (lambda r: (r.window.start, r.arrival))
    )

    for r in sorted(receivers, key=sort_key):
        while r.remaining_amount > 0:
            best: Optional[DonationRequest] = None
            best_key: Optional[tuple] = None
            candidate_agents: set[int] = set()
            for d in market.values():
                if not context.pair_eligible(d, r):
                    continue
                position = context.donor_position(d, r.id.agent_id)
                if position is None:
                    continue
                own_rank = context.receiver_rank(r, d.id.agent_id)
                if own_rank is None:
                    continue
                candidate_agents.add(d.id.agent_id)
                key = (position, own_rank, d.event_time, d.arrival)
                if best_key is None or key < best_key:
                    best, best_key = d, key
            if trace is not None and candidate_agents:
                trace.record(r.id, candidate_agents)
                agent = r.id.agent_id
                for d in market.values():
                    if d.id.agent_id in candidate_agents:
                        trace.record(d.id, (agent,))
            if best is None:
                break
            match = matches.get(best.id)
            match.receiver = r.id
            match.delivered_amount = best.amount
            r.remaining_amount -= best.amount
            del market[best.id]
    return matches


# ---------------------------------------------------------------------------
# One class-level run and the full iteration
# ---------------------------------------------------------------------------


@dataclass
class CaDtbResult:
    matches: MatchSet
    donors: list[DonationRequest]
    receivers: list[RequirementRequest]
    vols: list[VolunteerRequest]

    def completed(self) -> list[Match]:
        return [m for m in self.matches if m.receiver is not None]


def ca_dtb(
    donors: Sequence[DonationRequest],
    receivers: Sequence[RequirementRequest],
    vols: Sequence[VolunteerRequest],
    food: Perishability,
    now: int,
    thresholds: Thresholds,
    policy: MatchPolicy = MatchPolicy(),
    match_ids: Optional[Iterator[int]] = None,
    trace: Optional[EligibilityTrace] = None,
) -> CaDtbResult:
    """Run one class's matching round and return the leftovers.

    Donors that end up without a receiver have their volunteer reservation
    rolled back; both stay in the market for the next iteration. Receivers
    whose requirement is fully covered leave the market; partially covered
    ones carry over.
    """
    gated_donors = current_donors(donors, now, thresholds)
    gated_receivers = current_receivers(receivers, now, thresholds)
    receiver_universe = {r.id.agent_id for r in gated_receivers}

    matches = MatchSet()
    matches, _ = assign_volunteers(
        gated_donors, vols, matches, food, thresholds,
        now=now, receiver_universe=receiver_universe, match_ids=match_ids,
    )
    volunteers_by_id = {v.id: v for v in vols}
    match_receivers(
        gated_receivers, gated_donors, matches, thresholds,
        volunteers_by_id=volunteers_by_id, policy=policy, trace=trace,
    )

    donors_by_id = {d.id: d for d in gated_donors}
    committed_vols: set[RequestId] = set()
    for match in matches:
        if match.receiver is None:
            if match.volunteer is not None:
                volunteers_by_id[match.volunteer].remaining_payload += donors_by_id[match.donor].amount
        elif match.volunteer is not None:
            committed_vols.add(match.volunteer)

    matched_donors = {m.donor for m in matches if m.receiver is not None}
    leftover_donors = [d for d in donors if d.id not in matched_donors]
    leftover_receivers = [r for r in receivers if r.remaining_amount > 0]
    leftover_vols = [v for v in vols if v.id not in committed_vols]
    return CaDtbResult(matches, leftover_donors, leftover_receivers, leftover_vols)


@dataclass
class DisplayGroup:
    """What one agent triple actually sees: meal matches with the same
    (donor agent, volunteer, receiver) clubbed into a single record."""

    id: int
    donor_agent: int
    volunteer: Optional[RequestId]
    receiver: Optional[RequestId]
    matches: list[Match]
    total_amount: int
    created_at: int
    food: Perishability

    @property
    def status(self) -> MatchStatus:
        return self.matches[0].status


def club_matches(matches: Sequence[Match]) -> list[list[Match]]:
    """Group matches by (donor agent, volunteer, receiver), preserving order."""
    groups: dict[tuple, list[Match]] = {}
    for match in matches:
        key = (match.donor.agent_id, match.volunteer, match.receiver)
        groups.setdefault(key, []).append(match)
    return list(groups.values())


class MatchingEngine:
    """Holds the carry lists and match ledger across iterations.

    The simulator owns the clock and the acceptance decisions; the engine
    owns classification, matching, display, expiry, and requeueing.
    """

    def __init__(
        self,
        pool: ActivePool,
        thresholds: Thresholds,
        taxonomy: Optional[FoodTaxonomy] = None,
        policy: MatchPolicy = MatchPolicy(),
        trace: Optional[EligibilityTrace] = None,
    ):
        self.pool = pool
        self.thresholds = thresholds
        self.taxonomy = taxonomy or FoodTaxonomy()
        self.policy = policy
        self.trace = trace
        self.carry = ClassifiedLists()
        self.ledger: list[Match] = []
        self.groups: list[DisplayGroup] = []
        self.open_groups: list[DisplayGroup] = []
        self.retired: dict[RequestId, Request] = {}
        self._match_ids = itertools.count(1)
        self._group_ids = itertools.count(1)

    # -- bookkeeping ------------------------------------------------------

    def active_carry_ids(self) -> set[RequestId]:
        ids = set(self.carry.all_ids())
        ids.update(self.pool.queued_ids())
        return ids

    def _retire_lapsed(self, now: int) -> None:
        th = self.thresholds
        keep_d = lambda d: now <= d.window.end - th.t_d
        keep_r = lambda r: now <= r.window.end - th.t_r
        keep_v = lambda v: now <= v.window.end
        for name, keep in (("pfd", keep_d), ("npfd", keep_d), ("pfr", keep_r), ("npfr", keep_r), ("v", keep_v)):
            kept = []
            for request in getattr(self.carry, name):
                if keep(request):
                    kept.append(request)
                else:
                    self.retired[request.id] = request
            setattr(self.carry, name, kept)

    def _display(self, result: CaDtbResult, food: Perishability, now: int) -> list[DisplayGroup]:
        displayed = []
        for bundle in club_matches(result.completed()):
            for match in bundle:
                match.status = MatchStatus.DISPLAYED
                match.created_at = now
                self.ledger.append(match)
            group = DisplayGroup(
                id=next(self._group_ids),
                donor_agent=bundle[0].donor.agent_id,
                volunteer=bundle[0].volunteer,
                receiver=bundle[0].receiver,
                matches=bundle,
                total_amount=sum(m.delivered_amount for m in bundle),
                created_at=now,
                food=food,
            )
            displayed.append(group)
            self.groups.append(group)
            self.open_groups.append(group)
        return displayed

    # -- the iteration ----------------------------------------------------

    def iterate(self, now: int) -> list[DisplayGroup]:
        """One full mechanism iteration at the given minute.

        Drains the pool, classifies, matches perishable food first and
        displays its groups before the non-perishable round starts, then
        expires stale displayed matches and requeues their requests.
        """
        snapshot = self.pool.drain()
        self.carry = trifurcate(snapshot, self.carry, self.taxonomy)
        self._retire_lapsed(now)

        result_p = ca_dtb(
            self.carry.pfd, self.carry.pfr, self.carry.v,
            Perishability.PERISHABLE, now, self.thresholds,
            policy=self.policy, match_ids=self._match_ids, trace=self.trace,
        )
        self.carry.pfd, self.carry.pfr, self.carry.v = (
            result_p.donors, result_p.receivers, result_p.vols,
        )
        displayed = self._display(result_p, Perishability.PERISHABLE, now)

        result_np = ca_dtb(
            self.carry.npfd, self.carry.npfr, self.carry.v,
            Perishability.NON_PERISHABLE, now, self.thresholds,
            policy=self.policy, match_ids=self._match_ids, trace=self.trace,
        )
        self.carry.npfd, self.carry.npfr, self.carry.v = (
            result_np.donors, result_np.receivers, result_np.vols,
        )
        displayed.extend(self._display(result_np, Perishability.NON_PERISHABLE, now))

        self._expire_and_requeue(now)
        return displayed

    def _expire_and_requeue(self, now: int) -> None:
        still_open = []
        stale: list[DisplayGroup] = []
        for group in self.open_groups:
            if group.status is MatchStatus.DISPLAYED and now > group.created_at + self.thresholds.t_w:
                stale.append(group)
            elif group.status is MatchStatus.DISPLAYED:
                still_open.append(group)
        self.open_groups = still_open
        if not stale:
            return
        active = self.active_carry_ids()
        for group in stale:
            expire_stale_matches(group.matches, now, self.thresholds)
            for match in group.matches:
                requeue_rejected(match, self.pool, already_active=active)
                active.add(match.donor)
                if match.volunteer is not None:
                    active.add(match.volunteer)
                if match.receiver is not None:
                    active.add(match.receiver)

    def apply_decisions(self, decisions: Sequence[tuple[DisplayGroup, bool]], now: int) -> None:
        """Record accept/reject outcomes for displayed groups.

        A clubbed group is a single notification, so the whole group shares
        one fate. Rejected groups immediately requeue their requests.
        """
        active: Optional[set[RequestId]] = None
        for group, accepted in decisions:
            if group.status is not MatchStatus.DISPLAYED:
                continue
            if accepted:
                for match in group.matches:
                    match.status = MatchStatus.ACCEPTED
            else:
                if active is None:
                    active = self.active_carry_ids()
                for match in group.matches:
                    match.status = MatchStatus.REJECTED
                    requeue_rejected(match, self.pool, already_active=active)
                    active.add(match.donor)
                    if match.volunteer is not None:
                        active.add(match.volunteer)
                    if match.receiver is not None:
                        active.add(match.receiver)
            self.open_groups = [g for g in self.open_groups if g.id != group.id]

    def delivery_records(self):
        """Off-routing audit records for every accepted volunteer delivery."""
        records = []
        for group in self.groups:
            if group.status is not MatchStatus.ACCEPTED or group.volunteer is None:
                continue
            volunteer = self.pool.lookup(group.volunteer)
            donor = self.pool.lookup(group.matches[0].donor)
            receiver = self.pool.lookup(group.receiver) if group.receiver else None
            if receiver is None:
                continue
            records.append(
                off_route_overhead(volunteer_route(volunteer), donor.location, receiver.location)
            )
        return records

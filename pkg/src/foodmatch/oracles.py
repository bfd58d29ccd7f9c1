"""Brute-force oracles for the engine's matching properties.

The oracles recompute eligibility, preference positions, and feasible
assignments from first principles and then check the produced matching
against the full enumeration, independently of the engine's selection path:

- the off-routing bound: every recorded delivery stays within four times the
  per-end off-routing allowance;
- the assignment oracle: enumerating every feasible donor-to-receiver
  assignment, the produced matching must be maximal (no feasible pair left
  wholly unused) and justified (no receiver assigned a donor while an
  unmatched eligible donor ranked that receiver strictly better), so no
  enumerated alternative can improve a left-out donor's rank without taking
  a matched donor's assignment for a strictly worse-ranked one;
- the misreport probe: exhaustively rerunning an instance under every
  unilateral preference-list misreport, an agent's achieved rank measured by
  its true preferences must never strictly improve unless the truthful
  partner fell outside the manipulator's run-time eligibility universe.
"""

from __future__ import annotations

import copy
import itertools
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .classify import ClassifiedLists, trifurcate
from .engine import (
    EligibilityTrace,
    MatchPolicy,
    ca_dtb,
    current_donors,
    current_receivers,
)
from .geometry import default_vicinity, distance, volunteer_route, within_dropoff_band
from .model import (
    DonationRequest,
    FoodTaxonomy,
    FoodType,
    Location,
    Match,
    Perishability,
    RequestId,
    RequirementRequest,
    Thresholds,
    TimeWindow,
    VolunteerRequest,
)

MAX_ORACLE_DONORS = 5
MAX_ORACLE_RECEIVERS = 5
MAX_ORACLE_VOLUNTEERS = 3


def verify_gamma_bound(deliveries, thresholds: Thresholds, tolerance: float = 1e-9) -> bool:
    """True iff every delivery's off-routing stays within 4 * t_l percent."""
    bound = 4.0 * thresholds.t_l + tolerance
    return all(record.overhead_pct <= bound for record in deliveries)


def gamma_violations(deliveries, thresholds: Thresholds, tolerance: float = 1e-9):
    bound = 4.0 * thresholds.t_l + tolerance
    return [record for record in deliveries if record.overhead_pct > bound]


# ---------------------------------------------------------------------------
# One-shot instances
# ---------------------------------------------------------------------------


@dataclass
class Instance:
    """A small market snapshot that gates entirely at a single minute."""

    donors: list[DonationRequest]
    receivers: list[RequirementRequest]
    vols: list[VolunteerRequest]
    now: int
    thresholds: Thresholds = field(default_factory=Thresholds)
    taxonomy: FoodTaxonomy = field(default_factory=FoodTaxonomy)
    policy: MatchPolicy = field(default_factory=MatchPolicy)

    def clone(self) -> "Instance":
        return copy.deepcopy(self)

    def agents(self) -> dict[int, str]:
        roles = {}
        for d in self.donors:
            roles[d.id.agent_id] = "donor"
        for r in self.receivers:
            roles[r.id.agent_id] = "receiver"
        for v in self.vols:
            roles[v.id.agent_id] = "volunteer"
        return roles


def run_instance(instance: Instance) -> tuple[list[Match], EligibilityTrace]:
    """One mechanism iteration over the instance, perishable class first."""
    work = instance.clone()
    trace = EligibilityTrace()
    snapshot = sorted(work.donors + work.receivers + work.vols, key=lambda r: r.arrival)
    lists = trifurcate(snapshot, ClassifiedLists(), work.taxonomy)
    match_ids = itertools.count(1)

    result_p = ca_dtb(
        lists.pfd, lists.pfr, lists.v, Perishability.PERISHABLE,
        work.now, work.thresholds, policy=work.policy, match_ids=match_ids, trace=trace,
    )
    result_np = ca_dtb(
        lists.npfd, lists.npfr, result_p.vols, Perishability.NON_PERISHABLE,
        work.now, work.thresholds, policy=work.policy, match_ids=match_ids, trace=trace,
    )
    return list(result_p.matches) + list(result_np.matches), trace


# ---------------------------------------------------------------------------
# Assignment oracle
# ---------------------------------------------------------------------------


@dataclass
class OracleVerdict:
    ok: bool
    reason: str = "pareto-ok"
    counterexample: Optional[dict] = None

    def describe(self) -> str:
        if self.ok:
            return "pareto-ok"
        return f"violation: {self.reason} :: {self.counterexample}"


class _OracleWorld:
    """First-principles pairwise feasibility and positions for one instance.

    Transport assignments (and with them each donor's reach) are taken from
    the produced matching, because alternatives must live under the same
    eligibility predicates; everything else is recomputed here.
    """

    def __init__(self, instance: Instance, produced: Sequence[Match]):
        self.instance = instance
        self.thresholds = instance.thresholds
        self.taxonomy = instance.taxonomy
        self.raw_mode = instance.policy.preferences == "raw"
        self.gated_donors = current_donors(instance.donors, instance.now, instance.thresholds)
        self.gated_receivers = current_receivers(instance.receivers, instance.now, instance.thresholds)
        vols_by_id = {v.id: v for v in instance.vols}
        self.vicinity: dict[RequestId, float] = {}
        self.volunteer: dict[RequestId, Optional[VolunteerRequest]] = {}
        produced_by_donor = {m.donor: m for m in produced}
        for d in self.gated_donors:
            match = produced_by_donor.get(d.id)
            if match is not None:
                self.vicinity[d.id] = match.vicinity
                self.volunteer[d.id] = vols_by_id.get(match.volunteer) if match.volunteer else None
            else:
                # no recorded assignment: a donor always reaches at least the
                # class floor on its own
                floor = default_vicinity(
                    self.taxonomy.perishability(d.food), None, self.thresholds
                )
                self.vicinity[d.id] = max(d.vicinity, floor)
                self.volunteer[d.id] = None

    def pair_feasible(self, d: DonationRequest, r: RequirementRequest) -> bool:
        if self.taxonomy.perishability(d.food) is not self.taxonomy.perishability(r.food):
            return False
        if d.window.end > r.window.end:
            return False
        if distance(r.location, d.location) > self.vicinity[d.id]:
            return False
        volunteer = self.volunteer[d.id]
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

    def donor_position(self, d: DonationRequest, receiver_agent: int) -> Optional[int]:
        if self.raw_mode:
            if d.preferred_receivers:
                if receiver_agent in d.preferred_receivers:
                    return d.preferred_receivers.index(receiver_agent) + 1
                return None
            return 1
        eligible_agents = []
        for r in self.gated_receivers:
            if r.id.agent_id not in eligible_agents and self.pair_feasible(d, r):
                eligible_agents.append(r.id.agent_id)
        rank = 0
        ranks = {}
        for agent in d.preferred_receivers:
            if agent in eligible_agents and agent not in ranks:
                rank += 1
                ranks[agent] = rank
        if receiver_agent in ranks:
            return ranks[receiver_agent]
        if receiver_agent in eligible_agents:
            return rank + 1
        return None


def _receiver_load_feasible(amount: int, meals: Sequence[int]) -> bool:
    """A receiver can hold a meal set iff some serving order keeps remaining
    demand positive before each meal: total minus the largest stays under the
    requirement (the final meal may overshoot)."""
    if not meals:
        return True
    return sum(meals) - max(meals) < amount


def brute_force_pareto_oracle(instance: Instance, produced: Sequence[Match]) -> OracleVerdict:
    """Check the produced matching against every feasible assignment.

    Flags a counterexample assignment whenever the enumeration can improve a
    donor that the produced matching left unmatched, either onto spare
    receiver demand (the produced matching was not maximal) or in place of a
    strictly worse-ranked matched donor (a selection was not justified).
    """
    if len(instance.donors) > MAX_ORACLE_DONORS or len(instance.receivers) > MAX_ORACLE_RECEIVERS:
        raise ValueError("instance too large for exhaustive enumeration")
    if len(instance.vols) > MAX_ORACLE_VOLUNTEERS:
        raise ValueError("instance too large for exhaustive enumeration")

    world = _OracleWorld(instance, produced)
    donors = world.gated_donors
    receivers = world.gated_receivers
    produced_pairs = {m.donor: m.receiver for m in produced if m.receiver is not None}
    matched_donor_ids = set(produced_pairs)

    load: dict[RequestId, int] = {r.id: 0 for r in receivers}
    for m in produced:
        if m.receiver is not None and m.receiver in load:
            load[m.receiver] += m.delivered_amount

    # maximality: an unmatched donor fitting a receiver with open demand
    for d in donors:
        if d.id in matched_donor_ids:
            continue
        for r in receivers:
            if not world.pair_feasible(d, r):
                continue
            if world.donor_position(d, r.id.agent_id) is None:
                continue
            if load[r.id] < r.amount:
                better = dict(produced_pairs)
                better[d.id] = r.id
                return OracleVerdict(
                    ok=False,
                    reason="unmatched donor fits open demand",
                    counterexample={
                        "donor": str(d.id),
                        "receiver": str(r.id),
                        "assignment": {str(k): str(v) for k, v in better.items()},
                    },
                )

    # justified selection: swapping in an unmatched donor that ranks the
    # receiver strictly better than the donor it got
    donors_by_id = {d.id: d for d in donors}
    for donor_id, receiver_id in produced_pairs.items():
        matched_donor = donors_by_id.get(donor_id)
        receiver = next((r for r in receivers if r.id == receiver_id), None)
        if matched_donor is None or receiver is None:
            continue
        matched_position = world.donor_position(matched_donor, receiver.id.agent_id)
        for d in donors:
            if d.id in matched_donor_ids:
                continue
            if not world.pair_feasible(d, receiver):
                continue
            position = world.donor_position(d, receiver.id.agent_id)
            if position is None or matched_position is None:
                continue
            if position < matched_position:
                better = dict(produced_pairs)
                del better[donor_id]
                better[d.id] = receiver.id
                return OracleVerdict(
                    ok=False,
                    reason="unmatched donor ranked the receiver strictly better",
                    counterexample={
                        "receiver": str(receiver.id),
                        "kept_donor": str(donor_id),
                        "kept_position": matched_position,
                        "better_donor": str(d.id),
                        "better_position": position,
                        "assignment": {str(k): str(v) for k, v in better.items()},
                    },
                )

    # consistency: the produced load itself must be realizable
    for r in receivers:
        meals = [m.delivered_amount for m in produced if m.receiver == r.id]
        if not _receiver_load_feasible(r.amount, meals):
            return OracleVerdict(
                ok=False,
                reason="receiver overloaded beyond a final-meal overshoot",
                counterexample={"receiver": str(r.id), "meals": meals, "amount": r.amount},
            )

    return OracleVerdict(ok=True)


def enumerate_feasible_assignments(instance: Instance, produced: Sequence[Match]) -> list[dict]:
    """All feasible donor-to-receiver assignments under the instance's
    predicates (with transport frozen as produced). Exponential; guarded by
    the oracle size caps."""
    if len(instance.donors) > MAX_ORACLE_DONORS or len(instance.receivers) > MAX_ORACLE_RECEIVERS:
        raise ValueError("instance too large for exhaustive enumeration")
    world = _OracleWorld(instance, produced)
    donors = world.gated_donors
    receivers = world.gated_receivers
    options: list[list[Optional[RequestId]]] = []
    for d in donors:
        feasible: list[Optional[RequestId]] = [None]
        for r in receivers:
            if world.pair_feasible(d, r) and world.donor_position(d, r.id.agent_id) is not None:
                feasible.append(r.id)
        options.append(feasible)
    amounts = {r.id: r.amount for r in receivers}
    out = []
    for combo in itertools.product(*options):
        loads: dict[RequestId, list[int]] = {}
        for d, rid in zip(donors, combo):
            if rid is not None:
                loads.setdefault(rid, []).append(d.amount)
        if all(_receiver_load_feasible(amounts[rid], meals) for rid, meals in loads.items()):
            out.append({d.id: rid for d, rid in zip(donors, combo) if rid is not None})
    return out


# ---------------------------------------------------------------------------
# Misreport probe
# ---------------------------------------------------------------------------


@dataclass
class MisreportCase:
    agent_id: int
    role: str
    misreport: tuple[int, ...]
    truthful_rank: int
    misreport_rank: int
    gain: int
    exception: bool


@dataclass
class StrategyproofReport:
    cases: int = 0
    improvements: list[MisreportCase] = field(default_factory=list)
    exceptions: list[MisreportCase] = field(default_factory=list)

    @property
    def hard_violations(self) -> list[MisreportCase]:
        return [c for c in self.improvements if not c.exception]

    def ok(self) -> bool:
        return not self.hard_violations


def true_rank(true_list: Sequence[int], partners: Sequence[int]) -> int:
    """Best achieved rank measured against the agent's true list.

    Listed partners score their submitted index; unlisted partners share the
    rank just past the list; no partner at all scores one worse than that.
    """
    unmatched = len(true_list) + 2
    if not partners:
        return unmatched
    best = unmatched
    for agent in partners:
        if agent in true_list:
            best = min(best, list(true_list).index(agent) + 1)
        else:
            best = min(best, len(true_list) + 1)
    return best


def _achieved_partners(matches: Sequence[Match], agent_id: int, role: str) -> list[int]:
    partners = []
    for m in matches:
        if m.receiver is None:
            continue
        if role == "donor" and m.donor.agent_id == agent_id:
            partners.append(m.receiver.agent_id)
        elif role == "receiver" and m.receiver.agent_id == agent_id:
            partners.append(m.donor.agent_id)
    return partners


def _misreports(universe: Sequence[int], cap: int = 4) -> list[tuple[int, ...]]:
    ids = list(universe)[:cap]
    out: list[tuple[int, ...]] = []
    for size in range(len(ids) + 1):
        for subset in itertools.combinations(ids, size):
            out.extend(itertools.permutations(subset))
    return out


def exhaustive_misreports(instance: Instance) -> StrategyproofReport:
    """Try every unilateral preference-list misreport on every donor and
    receiver of a small instance; report any true-preference gain."""
    report = StrategyproofReport()
    base_matches, _ = run_instance(instance)

    sides = [("donor", d) for d in instance.donors] + [("receiver", r) for r in instance.receivers]
    opposite = {
        "donor": [r.id.agent_id for r in instance.receivers],
        "receiver": [d.id.agent_id for d in instance.donors],
    }
    for role, agent in sides:
        agent_id = agent.id.agent_id
        true_list = agent.preferred_receivers if role == "donor" else agent.preferred_donors
        truthful = true_rank(true_list, _achieved_partners(base_matches, agent_id, role))
        truthful_partners = _achieved_partners(base_matches, agent_id, role)
        for misreport in _misreports(opposite[role]):
            if tuple(misreport) == tuple(true_list):
                continue
            variant = instance.clone()
            pool = variant.donors if role == "donor" else variant.receivers
            for request in pool:
                if request.id.agent_id == agent_id:
                    if role == "donor":
                        request.preferred_receivers = misreport
                    else:
                        request.preferred_donors = misreport
            matches, trace = run_instance(variant)
            achieved = true_rank(true_list, _achieved_partners(matches, agent_id, role))
            report.cases += 1
            if achieved < truthful:
                universe = set()
                for request in pool:
                    if request.id.agent_id == agent_id:
                        universe |= trace.universe_of(request.id)
                exception = any(p not in universe for p in truthful_partners) if truthful_partners else True
                case = MisreportCase(
                    agent_id=agent_id,
                    role=role,
                    misreport=tuple(misreport),
                    truthful_rank=truthful,
                    misreport_rank=achieved,
                    gain=truthful - achieved,
                    exception=exception,
                )
                report.improvements.append(case)
                if exception:
                    report.exceptions.append(case)
    return report


# ---------------------------------------------------------------------------
# Random instance generation
# ---------------------------------------------------------------------------


def random_instance(
    seed: int,
    max_donors: int = MAX_ORACLE_DONORS,
    max_receivers: int = MAX_ORACLE_RECEIVERS,
    max_vols: int = MAX_ORACLE_VOLUNTEERS,
    thresholds: Optional[Thresholds] = None,
    policy: MatchPolicy = MatchPolicy(),
) -> Instance:
    """A small, simultaneously gateable market snapshot."""
    rng = random.Random(f"instance:{seed}")
    return sized_instance(
        seed,
        rng.randint(1, max_donors),
        rng.randint(1, max_receivers),
        rng.randint(0, max_vols),
        thresholds=thresholds,
        policy=policy,
    )


def sized_instance(
    seed: int,
    n_d: int,
    n_r: int,
    n_v: int,
    thresholds: Optional[Thresholds] = None,
    policy: MatchPolicy = MatchPolicy(),
    city: float = 16.0,
) -> Instance:
    """A simultaneously gateable market snapshot with exact role counts."""
    rng = random.Random(f"instance:{seed}")
    thresholds = thresholds or Thresholds()
    now = 600

    def loc() -> Location:
        return Location(round(rng.uniform(0, city), 3), round(rng.uniform(0, city), 3))

    donor_ids = list(range(101, 101 + n_d))
    receiver_ids = list(range(201, 201 + n_r))

    def pref(pool: list[int]) -> tuple[int, ...]:
        size = rng.randint(0, len(pool))
        return tuple(rng.sample(pool, size))

    arrivals = itertools.count(1)
    donors = []
    for agent in donor_ids:
        start = now + thresholds.t_d - rng.randint(0, 60)
        end = max(start, now + thresholds.t_d) + rng.randint(0, 180)
        donors.append(
            DonationRequest(
                id=RequestId(agent, 1),
                arrival=next(arrivals),
                location=loc(),
                food=rng.choice(list(FoodType)),
                amount=rng.randint(600, 1800),
                window=TimeWindow(start, end),
                preferred_receivers=pref(receiver_ids),
            )
        )
    receivers = []
    for agent in receiver_ids:
        start = now + thresholds.t_r - rng.randint(0, 60)
        end = max(start, now + thresholds.t_r) + rng.randint(0, 300)
        receivers.append(
            RequirementRequest(
                id=RequestId(agent, 1),
                arrival=next(arrivals),
                location=loc(),
                food=rng.choice(list(FoodType)),
                amount=rng.randint(600, 2600),
                window=TimeWindow(start, end),
                preferred_donors=pref(donor_ids),
            )
        )
    vols = []
    for index in range(n_v):
        agent = 301 + index
        start_min = now - rng.randint(0, 120)
        vols.append(
            VolunteerRequest(
                id=RequestId(agent, 1),
                arrival=next(arrivals),
                route_start=loc() if rng.random() < 0.4 else _jitter(rng, donors[rng.randrange(n_d)].location, city),
                route_end=loc() if rng.random() < 0.4 else _jitter(rng, receivers[rng.randrange(n_r)].location, city),
                motored=rng.random() < 0.7,
                ac=rng.random() < 0.3,
                payload_capacity=rng.randint(2000, 20000),
                window=TimeWindow(start_min, now + rng.randint(60, 420)),
                receivers=(),
            )
        )
    return Instance(donors=donors, receivers=receivers, vols=vols, now=now,
                    thresholds=thresholds, policy=policy)


def _jitter(rng: random.Random, anchor: Location, city: float) -> Location:
    return Location(
        round(min(max(anchor.x + rng.gauss(0, 1.0), 0.0), city), 3),
        round(min(max(anchor.y + rng.gauss(0, 1.0), 0.0), city), 3),
    )

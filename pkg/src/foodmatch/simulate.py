"""Simulation driver: clock, acceptance modeling, metrics, lifecycle audit.

A run advances the clock in fixed ticks, feeding submissions at their
arrival minutes, running one mechanism iteration per tick, and applying the
acceptance model to each displayed group. After the horizon passes, extra
ticks run until every displayed group has settled (accepted, rejected, or
expired); no new match can form past the horizon because no window can gate.
"""

from __future__ import annotations

import copy
import random
import time
from dataclasses import dataclass, field
from typing import Optional

from .engine import EligibilityTrace, MatchingEngine, MatchPolicy, OrchestratorConfig
from .geometry import DeliveryRecord
from .model import (
    DonationRequest,
    MatchStatus,
    RequirementRequest,
    VolunteerRequest,
)
from .pool import ActivePool, submit_request
from .scenario import Scenario


@dataclass(frozen=True)
class AcceptanceModel:
    """How displayed groups get decided.

    Each group draws once: with rejection_probability it is rejected by some
    involved agent, with no_response_probability nobody answers and the
    group is left to expire, otherwise everyone accepts immediately.
    """

    rejection_probability: float = 0.0
    no_response_probability: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.rejection_probability <= 1.0):
            raise ValueError("rejection_probability out of range")
        if not (0.0 <= self.no_response_probability <= 1.0):
            raise ValueError("no_response_probability out of range")
        if self.rejection_probability + self.no_response_probability > 1.0:
            raise ValueError("decision probabilities exceed 1")

    def decide(self, rng: random.Random) -> Optional[bool]:
        draw = rng.random()
        if draw < self.rejection_probability:
            return False
        if draw < self.rejection_probability + self.no_response_probability:
            return None
        return True


@dataclass
class SimReport:
    counts: dict[str, int]
    allocation: dict[str, float]
    served_grams: int
    requested_grams: int
    donated_accepted_grams: int
    fulfillment_pct: float
    match_counts: dict[str, int]
    deliveries: list[DeliveryRecord]
    terminal_states: dict[str, str]
    lifecycle_consistent: bool
    accepted_groups: list[dict]
    iteration_wall_times: list[float] = field(default_factory=list)
    eligibility_universes: dict[int, set[int]] = field(default_factory=dict)


def run_simulation(
    scenario: Scenario,
    policy: MatchPolicy = MatchPolicy(),
    acceptance: AcceptanceModel = AcceptanceModel(),
    orchestrator: OrchestratorConfig = OrchestratorConfig(),
    trace: bool = False,
    collect_timings: bool = False,
) -> SimReport:
    """Run one scenario to completion and measure it."""
    thresholds = scenario.config.thresholds
    pool = ActivePool()
    eligibility = EligibilityTrace() if trace else None
    engine = MatchingEngine(pool, thresholds, policy=policy, trace=eligibility)
    rng = random.Random(f"{acceptance.seed}:acceptance")

    # runs never mutate the caller's scenario (requests carry live state)
    schedule = copy.deepcopy(
        sorted(scenario.requests, key=lambda t: (t.submit_at, t.request.id.agent_id))
    )
    if schedule:
        start = min(scenario.config.working_start, schedule[0].submit_at)
    else:
        start = scenario.config.working_start
    horizon = scenario.horizon()

    tick = orchestrator.tick_minutes
    now = start
    pending = 0
    iterations = 0
    wall_times: list[float] = []

    while now <= horizon or engine.open_groups or pending < len(schedule):
        if iterations >= orchestrator.max_iterations:
            raise RuntimeError(
                f"simulation did not settle within {orchestrator.max_iterations} iterations "
                f"(now={now}, horizon={horizon}, open groups={len(engine.open_groups)})"
            )
        while pending < len(schedule) and schedule[pending].submit_at <= now:
            submit_request(schedule[pending].request, pool, thresholds)
            pending += 1

        t0 = time.perf_counter() if collect_timings else 0.0
        groups = engine.iterate(now)
        if collect_timings:
            wall_times.append(time.perf_counter() - t0)

        decisions = []
        for group in groups:
            verdict = acceptance.decide(rng)
            if verdict is not None:
                decisions.append((group, verdict))
        if decisions:
            engine.apply_decisions(decisions, now)

        iterations += 1
        now += tick

    return _build_report(scenario, engine, pool, wall_times, eligibility)


def _build_report(
    scenario: Scenario,
    engine: MatchingEngine,
    pool: ActivePool,
    wall_times: list[float],
    eligibility: Optional[EligibilityTrace],
) -> SimReport:
    donors: list[DonationRequest] = []
    receivers: list[RequirementRequest] = []
    volunteers: list[VolunteerRequest] = []
    for timed in scenario.requests:
        request = timed.request
        if isinstance(request, DonationRequest):
            donors.append(request)
        elif isinstance(request, RequirementRequest):
            receivers.append(request)
        else:
            volunteers.append(request)

    accepted = [m for m in engine.ledger if m.status is MatchStatus.ACCEPTED]
    accepted_donor_requests = {(m.donor.agent_id, m.donor.request_seq) for m in accepted}
    accepted_receivers = {m.receiver for m in accepted if m.receiver is not None}
    accepted_receiver_requests = {(r.agent_id, r.request_seq) for r in accepted_receivers}
    accepted_volunteers = {m.volunteer for m in accepted if m.volunteer is not None}

    def pct(part: int, whole: int) -> float:
        return 100.0 * part / whole if whole else 0.0

    n_d, n_r, n_v = len(donors), len(receivers), len(volunteers)
    allocation = {
        "donors": pct(len(accepted_donor_requests), n_d),
        "receivers": pct(len(accepted_receiver_requests), n_r),
        "volunteers": pct(len(accepted_volunteers), n_v),
        "overall": pct(
            len(accepted_donor_requests) + len(accepted_receiver_requests) + len(accepted_volunteers),
            n_d + n_r + n_v,
        ),
        "food_requests": pct(
            len(accepted_donor_requests) + len(accepted_receiver_requests), n_d + n_r
        ),
    }

    served = sum(m.delivered_amount for m in accepted)
    requested = sum(r.amount for r in receivers)
    donated = served  # every accepted match moves exactly its meal grams

    match_counts: dict[str, int] = {status.value: 0 for status in MatchStatus}
    for match in engine.ledger:
        match_counts[match.status.value] += 1

    terminal, consistent = _terminal_states(engine, pool, accepted)

    accepted_groups = [
        {
            "group_id": g.id,
            "donor_agent": g.donor_agent,
            "volunteer_agent": g.volunteer.agent_id if g.volunteer else "",
            "receiver_agent": g.receiver.agent_id if g.receiver else "",
            "receiver": str(g.receiver) if g.receiver else "",
            "grams": g.total_amount,
            "created_at": g.created_at,
            "food": g.food.value,
        }
        for g in engine.groups
        if g.status is MatchStatus.ACCEPTED
    ]

    meal_count = sum(1 for rid in pool.all_registered() if isinstance(pool.lookup(rid), DonationRequest))
    return SimReport(
        counts={"donors": n_d, "receivers": n_r, "volunteers": n_v, "meals": meal_count},
        allocation=allocation,
        served_grams=served,
        requested_grams=requested,
        donated_accepted_grams=donated,
        fulfillment_pct=pct(min(served, requested), requested),
        match_counts=match_counts,
        deliveries=engine.delivery_records(),
        terminal_states=terminal,
        lifecycle_consistent=consistent,
        accepted_groups=accepted_groups,
        iteration_wall_times=wall_times,
        eligibility_universes=_universes_by_agent(eligibility),
    )


def _universes_by_agent(eligibility: Optional[EligibilityTrace]) -> dict[int, set[int]]:
    if eligibility is None:
        return {}
    merged: dict[int, set[int]] = {}
    for rid, agents in eligibility.seen.items():
        merged.setdefault(rid.agent_id, set()).update(agents)
    return merged


def _terminal_states(engine: MatchingEngine, pool: ActivePool, accepted) -> tuple[dict[str, str], bool]:
    accepted_meals = {m.donor for m in accepted}
    accepted_receiver_ids = {m.receiver for m in accepted if m.receiver is not None}
    accepted_volunteer_ids = {m.volunteer for m in accepted if m.volunteer is not None}
    active = engine.active_carry_ids()

    terminal: dict[str, str] = {}
    consistent = True
    for rid in pool.all_registered():
        request = pool.lookup(rid)
        if isinstance(request, DonationRequest):
            if rid in accepted_meals:
                terminal[str(rid)] = "accepted"
                if rid in active:
                    consistent = False
            else:
                terminal[str(rid)] = "unmatched"
        elif isinstance(request, RequirementRequest):
            if request.remaining_amount <= 0:
                terminal[str(rid)] = "served"
                if rid in active:
                    consistent = False
            elif rid in accepted_receiver_ids:
                terminal[str(rid)] = "partially_served"
            else:
                terminal[str(rid)] = "unserved"
        else:
            terminal[str(rid)] = "assigned" if rid in accepted_volunteer_ids else "unused"
    return terminal, consistent

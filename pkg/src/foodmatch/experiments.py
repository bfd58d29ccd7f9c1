"""The four simulation experiments.

Paired comparisons always reuse the same population: policy experiments run
one scenario under both policies, and the volunteer-availability sweep
regenerates only the volunteer pool, whose random stream is prefix-stable,
so a larger pool literally contains the smaller one. That keeps each
comparison a controlled experiment rather than two unrelated draws.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .engine import MatchPolicy, OrchestratorConfig
from .model import DonationRequest, FoodType, RequirementRequest
from .oracles import true_rank
from .scenario import Scenario, ScenarioConfig, TimedRequest, generate_scenario, with_volunteer_count
from .simulate import AcceptanceModel, SimReport, run_simulation

PERISHABLE_TYPES = (
    FoodType.FRESHLY_COOKED,
    FoodType.FROZEN_COOKED,
    FoodType.FRESH_PRODUCE,
    FoodType.FRUITS_AND_VEGETABLES,
    FoodType.MIXED,
)


def desk_volunteer_sweep_config(seed: int = 0, n_requests: int = 400) -> ScenarioConfig:
    """Desk-scale city for the volunteer-availability sweep.

    A cooked-meal rescue corridor: one donation district and one requirement
    district 11-16 km apart (past plain self-transport reach for perishable
    food, within motored reach), long requirement windows, and volunteers
    recruited across donation sites. Volunteer transport is what bridges the
    districts, so allocation responds to volunteer availability and levels
    off once every donation site is covered.
    """
    return ScenarioConfig(
        n_requests=n_requests,
        seed=seed,
        donor_hubs=1,
        receiver_hubs=1,
        hub_sigma=0.5,
        hub_separation=(11.0, 16.0),
        volunteer_near_agents=0.9,
        receiver_span=(300, 540),
        donor_span=(60, 180),
        receiver_amount_min=500,
        receiver_amount_max=1500,
        donor_amount_min=800,
        donor_amount_max=2200,
        motored_rate=0.85,
        ac_rate=0.15,
        food_types=PERISHABLE_TYPES,
    )


def desk_policy_config(seed: int = 0, n_requests: int = 600) -> ScenarioConfig:
    """Desk-scale city for the policy experiments (receiver sorting and
    preference updating): deadlines of widely varying tightness and scarce
    donations make the serving order and the preference treatment bind."""
    return ScenarioConfig(
        n_requests=n_requests,
        donor_fraction=0.2,
        receiver_fraction=0.5,
        volunteer_fraction=0.3,
        seed=seed,
        donor_hubs=1,
        receiver_hubs=1,
        hub_sigma=0.5,
        hub_separation=(11.0, 16.0),
        volunteer_near_agents=0.9,
        receiver_span=(30, 300),
        donor_span=(60, 180),
        receiver_amount_min=500,
        receiver_amount_max=1500,
        donor_amount_min=800,
        donor_amount_max=2200,
        motored_rate=0.85,
        ac_rate=0.15,
        food_types=PERISHABLE_TYPES,
        preference_lengths=(0, 1, 2, 3, 4),
    )


@dataclass
class CurvePoint:
    multiple: float
    n_volunteers: int
    allocation_pct: float
    receiver_fulfillment_pct: float


def experiment_allocation_vs_volunteers(
    config: ScenarioConfig,
    multiples: Sequence[float],
    policy: MatchPolicy = MatchPolicy(),
    acceptance: AcceptanceModel = AcceptanceModel(),
    orchestrator: OrchestratorConfig = OrchestratorConfig(),
) -> list[CurvePoint]:
    """Allocation as the volunteer pool grows in multiples of the donor count.

    Allocation here is over food requests (donors plus receivers): the
    volunteer population is the experimental variable, so it stays out of
    the denominator.
    """
    if not multiples or any(m < 0 for m in multiples):
        raise ValueError("multiples must be non-empty and non-negative")
    n_d, _, _ = config.counts()
    points = []
    for multiple in multiples:
        cfg = with_volunteer_count(config, round(multiple * n_d))
        scenario = generate_scenario(cfg)
        report = run_simulation(scenario, policy, acceptance, orchestrator)
        points.append(
            CurvePoint(
                multiple=multiple,
                n_volunteers=cfg.counts()[2],
                allocation_pct=report.allocation["food_requests"],
                receiver_fulfillment_pct=report.fulfillment_pct,
            )
        )
    return points


@dataclass
class PairedRun:
    seed: int
    baseline_pct: float
    variant_pct: float


def experiment_receiver_sorting(
    config: ScenarioConfig,
    seeds: Sequence[int],
    acceptance: AcceptanceModel = AcceptanceModel(),
    orchestrator: OrchestratorConfig = OrchestratorConfig(),
) -> list[PairedRun]:
    """Start-sorted versus end-sorted receivers on the same scenarios.

    Both runs use eligibility-updated preferences; only the serving order
    changes.
    """
    rows = []
    for seed in seeds:
        scenario = generate_scenario(replace(config, seed=seed))
        start = run_simulation(scenario, MatchPolicy(receiver_sort="start"), acceptance, orchestrator)
        end = run_simulation(scenario, MatchPolicy(receiver_sort="end"), acceptance, orchestrator)
        rows.append(
            PairedRun(
                seed=seed,
                baseline_pct=start.allocation["food_requests"],
                variant_pct=end.allocation["food_requests"],
            )
        )
    return rows


def experiment_preference_updating(
    config: ScenarioConfig,
    seeds: Sequence[int],
    acceptance: AcceptanceModel = AcceptanceModel(),
    orchestrator: OrchestratorConfig = OrchestratorConfig(),
) -> list[PairedRun]:
    """Submitted (raw) versus eligibility-updated preferences, end-sorted."""
    rows = []
    for seed in seeds:
        scenario = generate_scenario(replace(config, seed=seed))
        raw = run_simulation(scenario, MatchPolicy(preferences="raw"), acceptance, orchestrator)
        eligible = run_simulation(scenario, MatchPolicy(preferences="eligible"), acceptance, orchestrator)
        rows.append(
            PairedRun(
                seed=seed,
                baseline_pct=raw.allocation["food_requests"],
                variant_pct=eligible.allocation["food_requests"],
            )
        )
    return rows


@dataclass
class ManipulatorOutcome:
    agent_id: int
    role: str
    truthful_rank: int
    manipulated_rank: int
    gain: int
    exception: bool


@dataclass
class ManipulationReport:
    manipulators: int
    outcomes: list[ManipulatorOutcome] = field(default_factory=list)

    @property
    def improvements(self) -> list[ManipulatorOutcome]:
        return [o for o in self.outcomes if o.gain > 0]

    @property
    def hard_violations(self) -> list[ManipulatorOutcome]:
        return [o for o in self.improvements if not o.exception]

    @property
    def exception_rate_pct(self) -> float:
        if not self.manipulators:
            return 0.0
        return 100.0 * sum(1 for o in self.improvements if o.exception) / self.manipulators

    @property
    def mean_gain(self) -> float:
        if not self.outcomes:
            return 0.0
        return sum(o.gain for o in self.outcomes) / len(self.outcomes)


def _misreport_list(rng: random.Random, original: tuple[int, ...]) -> tuple[int, ...]:
    entries = list(original)
    if len(entries) > 1 and rng.random() < 0.5:
        while True:
            rng.shuffle(entries)
            if tuple(entries) != original:
                return tuple(entries)
    cut = rng.randint(0, max(0, len(entries) - 1))
    return tuple(entries[:cut])


def manipulate_scenario(
    scenario: Scenario, fraction: float, seed: int = 0
) -> tuple[Scenario, list[tuple[int, str, tuple[int, ...]]]]:
    """A copy of the scenario where the given percentage of donors and
    receivers with stated preferences misreport (shuffle or truncate)."""
    if not (0.0 <= fraction <= 100.0):
        raise ValueError("fraction must be a percentage")
    rng = random.Random(f"{seed}:manipulation")
    eligible_idx = [
        i
        for i, timed in enumerate(scenario.requests)
        if (isinstance(timed.request, DonationRequest) and timed.request.preferred_receivers)
        or (isinstance(timed.request, RequirementRequest) and timed.request.preferred_donors)
    ]
    count = round(len(eligible_idx) * fraction / 100.0)
    chosen = sorted(rng.sample(eligible_idx, count)) if count else []

    manipulators = []
    requests = list(scenario.requests)
    for i in chosen:
        timed = requests[i]
        request = timed.request
        if isinstance(request, DonationRequest):
            fake = _misreport_list(rng, request.preferred_receivers)
            request = replace(request, preferred_receivers=fake)
            manipulators.append((request.id.agent_id, "donor", fake))
        else:
            fake = _misreport_list(rng, request.preferred_donors)
            request = replace(request, preferred_donors=fake)
            manipulators.append((request.id.agent_id, "receiver", fake))
        requests[i] = TimedRequest(submit_at=timed.submit_at, request=request)
    return Scenario(config=scenario.config, requests=requests), manipulators


def _partners_by_agent(report: SimReport) -> dict[tuple[int, str], list[int]]:
    partners: dict[tuple[int, str], list[int]] = {}
    for group in report.accepted_groups:
        donor_agent = group["donor_agent"]
        receiver_agent = group["receiver_agent"]
        if receiver_agent == "":
            continue
        partners.setdefault((donor_agent, "donor"), []).append(receiver_agent)
        partners.setdefault((receiver_agent, "receiver"), []).append(donor_agent)
    return partners


def experiment_manipulation(
    config: ScenarioConfig,
    fraction: float,
    acceptance: AcceptanceModel = AcceptanceModel(),
    orchestrator: OrchestratorConfig = OrchestratorConfig(),
    scenario: Optional[Scenario] = None,
) -> ManipulationReport:
    """Bulk preference manipulation against the truthful baseline.

    Each manipulator's outcome is scored by its true preference list in both
    runs; gain is truthful rank minus manipulated rank, so positive means
    the lie helped. Gains are excused as availability artifacts (exceptions)
    only when the truthful partners never entered the manipulator's
    eligibility universe during the manipulated run.
    """
    scenario = scenario if scenario is not None else generate_scenario(config)
    manipulated, manipulators = manipulate_scenario(scenario, fraction, seed=config.seed)

    truthful_report = run_simulation(scenario, acceptance=acceptance, orchestrator=orchestrator, trace=True)
    manip_report = run_simulation(manipulated, acceptance=acceptance, orchestrator=orchestrator, trace=True)

    true_lists: dict[tuple[int, str], tuple[int, ...]] = {}
    for timed in scenario.requests:
        request = timed.request
        if isinstance(request, DonationRequest):
            true_lists[(request.id.agent_id, "donor")] = request.preferred_receivers
        elif isinstance(request, RequirementRequest):
            true_lists[(request.id.agent_id, "receiver")] = request.preferred_donors

    truthful_partners = _partners_by_agent(truthful_report)
    manip_partners = _partners_by_agent(manip_report)

    report = ManipulationReport(manipulators=len(manipulators))
    for agent_id, role, _fake in manipulators:
        key = (agent_id, role)
        true_list = true_lists.get(key, ())
        t_partners = truthful_partners.get(key, [])
        m_partners = manip_partners.get(key, [])
        t_rank = true_rank(true_list, t_partners)
        m_rank = true_rank(true_list, m_partners)
        gain = t_rank - m_rank
        exception = False
        if gain > 0:
            universe = manip_report.eligibility_universes.get(agent_id, set())
            exception = (not t_partners) or any(p not in universe for p in t_partners)
        report.outcomes.append(
            ManipulatorOutcome(
                agent_id=agent_id,
                role=role,
                truthful_rank=t_rank,
                manipulated_rank=m_rank,
                gain=gain,
                exception=exception,
            )
        )
    return report

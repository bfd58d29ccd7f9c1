"""Surplus-food matching: intake, classification, volunteer assignment, and
chronological-acceptance matching of donors to receivers, with a
deterministic simulation harness."""

from .classify import ClassifiedLists, trifurcate
from .engine import (
    EligibilityTrace,
    MatchingEngine,
    MatchPolicy,
    MatchSet,
    OrchestratorConfig,
    PreferenceList,
    assign_volunteers,
    ca_dtb,
    club_matches,
    current_donors,
    current_receivers,
    donor_neighbourhood,
    eligible_donors_for,
    eligible_volunteers,
    extract_augment,
    match_receivers,
    vicinity_candidate,
)
from .geometry import (
    DeliveryRecord,
    Route,
    default_vicinity,
    distance,
    off_route_overhead,
    point_to_segment_distance,
    within_dropoff_band,
    within_pickup_radius,
)
from .model import (
    DonationRequest,
    FoodTaxonomy,
    FoodType,
    Location,
    Match,
    MatchStatus,
    Perishability,
    RequestId,
    RequirementRequest,
    Sequencer,
    Thresholds,
    TimeWindow,
    VolunteerRequest,
    next_arrival_seq,
    perishability,
    tie_break_compare,
)
from .pool import ActivePool, expire_stale_matches, requeue_rejected, split_into_meals, submit_request
from .scenario import Scenario, ScenarioConfig, generate_scenario, load_scenario, save_scenario
from .simulate import AcceptanceModel, SimReport, run_simulation

__version__ = "0.1.0"

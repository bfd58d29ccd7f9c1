"""Planar city geometry: distances, route bands, reach radii, off-routing.

Routes are straight segments on a flat plane. All boundary comparisons are
inclusive (<=), and percentage expressions multiply before dividing so that
the documented boundary cases stay exact in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .model import Location, Perishability, Thresholds, VolunteerRequest


@dataclass(frozen=True)
class Route:
    start: Location
    end: Location

    def length(self) -> float:
        return distance(self.start, self.end)

    def is_degenerate(self) -> bool:
        return self.start == self.end


@dataclass(frozen=True)
class DeliveryRecord:
    """Off-routing audit record for one volunteer-carried delivery."""

    route_length: float
    pickup_km: float
    dropoff_km: float
    overhead_km: float
    overhead_pct: float


def distance(a: Location, b: Location) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def point_to_segment_distance(p: Location, route: Route) -> float:
    """Minimum distance from p to the closed segment start->end."""
    ax, ay = route.start.x, route.start.y
    bx, by = route.end.x, route.end.y
    abx, aby = bx - ax, by - ay
    norm_sq = abx * abx + aby * aby
    if norm_sq == 0.0:
        return math.hypot(p.x - ax, p.y - ay)
    t = ((p.x - ax) * abx + (p.y - ay) * aby) / norm_sq
    t = max(0.0, min(1.0, t))
    return math.hypot(p.x - (ax + t * abx), p.y - (ay + t * aby))


def off_route_allowance(route: Route, t_l: float) -> float:
    """Manageable diversion radius: t_l percent of the route length."""
    return t_l * route.length() / 100.0


def within_pickup_radius(donor_loc: Location, route: Route, t_l: float) -> bool:
    """Donor reachable for pickup: within t_l% of route length from the route start."""
    if route.is_degenerate():
        return False
    return distance(donor_loc, route.start) <= off_route_allowance(route, t_l)


def within_dropoff_band(recv_loc: Location, route: Route, t_l: float) -> bool:
    """Receiver reachable for drop-off: within t_l% of route length from the route."""
    if route.is_degenerate():
        return False
    return point_to_segment_distance(recv_loc, route) <= off_route_allowance(route, t_l)


def off_route_overhead(route: Route, pickup: Location, dropoff: Location) -> DeliveryRecord:
    """Extra travel for one delivery: detour-and-return at pickup plus at drop-off."""
    length = route.length()
    if length == 0.0:
        raise ValueError("zero-length route")
    pickup_km = distance(route.start, pickup)
    dropoff_km = point_to_segment_distance(dropoff, route)
    overhead_km = 2.0 * pickup_km + 2.0 * dropoff_km
    return DeliveryRecord(
        route_length=length,
        pickup_km=pickup_km,
        dropoff_km=dropoff_km,
        overhead_km=overhead_km,
        overhead_pct=100.0 * overhead_km / length,
    )


def default_vicinity(food: Perishability, motored: Optional[bool], thresholds: Thresholds) -> float:
    """Reach floor for a donation given its food class and known transport.

    Non-perishable food always gets the long reach; perishable food gets the
    motored reach only when a motored transport is known, otherwise the short
    non-motored reach.
    """
    if food is Perishability.NON_PERISHABLE:
        return thresholds.t_np
    if motored:
        return thresholds.t_p_m
    return thresholds.t_p_nm


def volunteer_route(v: VolunteerRequest) -> Route:
    return Route(v.route_start, v.route_end)

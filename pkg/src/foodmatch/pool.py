"""Request intake: the concurrent active pool, meal splitting, and requeue.

Submission and requeue may run concurrently with the matching engine; the
pool guarantees linearizable insert/drain through a single lock. Arrival
sequences are assigned here, at the server side, one per stored request, so
split meal pieces are ordered among themselves by their fresh sequences.
"""

from __future__ import annotations

import threading
from typing import Iterable, Optional

from .model import (
    DonationRequest,
    Match,
    MatchStatus,
    Request,
    RequestId,
    RequirementRequest,
    Sequencer,
    Thresholds,
    VolunteerRequest,
)


class ActivePool:
    """Queue of active, unmatched requests keyed by arrival order.

    Each request id is present at most once. The pool also keeps a registry
    of every request object it has ever accepted, so rejected matches can be
    requeued by id later.
    """

    def __init__(self, sequencer: Optional[Sequencer] = None):
        self.sequencer = sequencer or Sequencer()
        self._queued: dict[RequestId, Request] = {}
        self._registry: dict[RequestId, Request] = {}
        self._submitted_raw_ids: set[RequestId] = set()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        with self._lock:
            return len(self._queued)

    def lookup(self, request_id: RequestId) -> Request:
        return self._registry[request_id]

    def all_registered(self) -> list[RequestId]:
        return list(self._registry)

    def queued_ids(self) -> set[RequestId]:
        with self._lock:
            return set(self._queued)

    def _store(self, request: Request) -> None:
        if request.id in self._queued:
            raise ValueError(f"duplicate request {request.id}")
        self._queued[request.id] = request
        self._registry[request.id] = request

    def submit(self, pieces: list[Request], raw_id: RequestId) -> list[RequestId]:
        """Atomically sequence and enqueue the pieces of one raw submission."""
        with self._lock:
            if raw_id in self._submitted_raw_ids:
                raise ValueError(f"duplicate request {raw_id}")
            for piece in pieces:
                if piece.id in self._registry:
                    raise ValueError(f"duplicate request {piece.id}")
            self._submitted_raw_ids.add(raw_id)
            for piece in pieces:
                piece.arrival = self.sequencer.next()
                self._store(piece)
        return [piece.id for piece in pieces]

    def readd(self, request: Request) -> bool:
        """Re-insert a previously registered request, keeping its arrival.

        Returns False when the request is already queued (a request id is
        never present twice).
        """
        with self._lock:
            if request.id in self._queued:
                return False
            self._queued[request.id] = request
            self._registry[request.id] = request
            return True

    def drain(self) -> list[Request]:
        """Hand all queued requests to the current iteration, arrival-ordered.

        Requests submitted after the drain are only seen by the next one.
        """
        with self._lock:
            batch = list(self._queued.values())
            self._queued.clear()
        batch.sort(key=lambda r: r.arrival)
        return batch


def split_into_meals(raw: DonationRequest, t_m: int) -> list[DonationRequest]:
    """Chop a donation into meal pieces of the healthy-meal threshold.

    Donations under twice the threshold stay whole. Otherwise the donation
    becomes k = floor(amount / t_m) pieces: the first k-1 at exactly t_m
    grams and the last absorbing the remainder, so every piece lands in
    [t_m, 2*t_m).
    """
    if raw.amount < 2 * t_m:
        return [raw]
    k = raw.amount // t_m
    amounts = [t_m] * (k - 1) + [raw.amount - t_m * (k - 1)]
    pieces = []
    for seq, amount in enumerate(amounts, start=1):
        pieces.append(
            DonationRequest(
                id=RequestId(raw.id.agent_id, raw.id.request_seq, seq),
                arrival=raw.arrival,
                location=raw.location,
                food=raw.food,
                amount=amount,
                window=raw.window,
                packaging=raw.packaging,
                prep_or_expiry=raw.prep_or_expiry,
                image_ref=raw.image_ref,
                preferred_receivers=raw.preferred_receivers,
            )
        )
    return pieces


def submit_request(raw: Request, pool: ActivePool, thresholds: Thresholds) -> list[RequestId]:
    """Queue one raw agent request, splitting donations into meals.

    Returns the ids of the stored requests (one per meal piece for a split
    donation). Raises ValueError for duplicate ids or invalid amounts.
    """
    if isinstance(raw, DonationRequest):
        pieces: list[Request] = list(split_into_meals(raw, thresholds.t_m))
    elif isinstance(raw, (RequirementRequest, VolunteerRequest)):
        pieces = [raw]
    else:
        raise TypeError(f"unclassifiable request type {type(raw).__name__}")
    return pool.submit(pieces, raw.id)


def requeue_rejected(
    match: Match,
    pool: ActivePool,
    already_active: Iterable[RequestId] = (),
) -> list[RequestId]:
    """Return every request involved in a failed match to the pool.

    Undoes the match's delivery: the volunteer gets its payload back and the
    receiver gets its requirement back. Requests listed in already_active
    (still live in the engine's carry lists) only have their amounts
    restored, they are not enqueued twice.
    """
    if match.status not in (MatchStatus.REJECTED, MatchStatus.EXPIRED):
        raise ValueError(f"illegal requeue: match {match.id} is {match.status.value}")
    if match.requeued:
        raise ValueError(f"illegal requeue: match {match.id} already requeued")
    match.requeued = True

    skip = set(already_active)
    requeued: list[RequestId] = []

    donor = pool.lookup(match.donor)
    if match.donor not in skip and pool.readd(donor):
        requeued.append(match.donor)

    if match.volunteer is not None:
        volunteer = pool.lookup(match.volunteer)
        volunteer.remaining_payload += match.delivered_amount
        if match.volunteer not in skip and pool.readd(volunteer):
            requeued.append(match.volunteer)

    if match.receiver is not None:
        receiver = pool.lookup(match.receiver)
        receiver.remaining_amount += match.delivered_amount
        if match.receiver not in skip and pool.readd(receiver):
            requeued.append(match.receiver)

    return requeued


def expire_stale_matches(matches: Iterable[Match], now: int, thresholds: Thresholds) -> list[Match]:
    """Expire displayed matches left unaccepted past the acceptance deadline.

    The deadline instant itself still counts as within the window; only
    now > created_at + t_w expires.
    """
    expired = []
    for match in matches:
        if match.status is MatchStatus.DISPLAYED and now > match.created_at + thresholds.t_w:
            match.status = MatchStatus.EXPIRED
            expired.append(match)
    return expired

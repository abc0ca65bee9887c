"""Domain types for synchronised activities.

An activity is a planned social event with a time window, a geofence, and a
participant list. Everything here is a pure value: operations return new
``Activity`` instances and never mutate their inputs, so they are safe to
call from any number of threads.

Time is integer Unix seconds, UTC. The activity phase is always derived
from (window, now) — it is never stored.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, replace
from enum import Enum

from .errors import SyncError
from .geo import Geofence

DEFAULT_GATHERING_BATCH = 5


class WindowInvalid(SyncError):
    code = "WINDOW_INVALID"


class TooFewParticipants(SyncError):
    code = "TOO_FEW_PARTICIPANTS"


class DuplicateParticipant(SyncError):
    code = "DUPLICATE_PARTICIPANT"


class OrganizerNotParticipant(SyncError):
    code = "ORGANIZER_NOT_PARTICIPANT"


class BatchThresholdInvalid(SyncError):
    code = "BATCH_THRESHOLD_INVALID"


class UnknownParticipant(SyncError):
    # Same meaning as the server-level "not a participant" error; one code.
    code = "NOT_A_PARTICIPANT"


class AlreadyResponded(SyncError):
    code = "ALREADY_RESPONDED"


class ActivityKind(str, Enum):
    MEETUP = "MEETUP"
    GATHERING = "GATHERING"
    PICKUP = "PICKUP"
    TASK = "TASK"


class PrivacyPolicy(str, Enum):
    DISCLOSE_IDENTITY = "IDENTITY"
    ANONYMOUS_COUNT = "ANONYMOUS"


class ParticipantStatus(str, Enum):
    INVITED = "INVITED"
    ACCEPTED = "ACCEPTED"
    DECLINED = "DECLINED"


class InviteAnswer(str, Enum):
    ACCEPT = "ACCEPT"
    DECLINE = "DECLINE"


class ActivityPhase(str, Enum):
    SCHEDULED = "SCHEDULED"
    ACTIVE = "ACTIVE"
    ENDED = "ENDED"


def validate_timestamp(seconds: int, what: str = "timestamp") -> int:
    if not isinstance(seconds, int) or isinstance(seconds, bool):
        raise WindowInvalid(f"{what} must be an integer, got {seconds!r}")
    if seconds < 0:
        raise WindowInvalid(f"{what} must be non-negative, got {seconds}")
    return seconds


@dataclass(frozen=True)
class TimeWindow:
    """Half-open activity window: start inclusive, end exclusive."""

    start: int
    end: int

    def __post_init__(self):
        validate_timestamp(self.start, "start")
        validate_timestamp(self.end, "end")
        if not self.start < self.end:
            raise WindowInvalid(f"start {self.start} must be < end {self.end}")


@dataclass(frozen=True)
class ParticipantRecord:
    id: str
    status: ParticipantStatus = ParticipantStatus.INVITED


@dataclass(frozen=True)
class Activity:
    id: str
    title: str
    kind: ActivityKind
    window: TimeWindow
    fence: Geofence
    organizer: str
    participants: tuple[ParticipantRecord, ...]
    policy: PrivacyPolicy
    batch_threshold: int
    calendar_uid: str | None = None

    def participant(self, participant_id: str) -> ParticipantRecord | None:
        for p in self.participants:
            if p.id == participant_id:
                return p
        return None

    def accepted_ids(self) -> tuple[str, ...]:
        return tuple(
            p.id for p in self.participants
            if p.status is ParticipantStatus.ACCEPTED
        )


def new_activity(
    *,
    title: str,
    kind: ActivityKind,
    window: TimeWindow,
    fence: Geofence,
    organizer: str,
    participant_ids: list[str] | tuple[str, ...],
    policy: PrivacyPolicy = PrivacyPolicy.DISCLOSE_IDENTITY,
    batch_threshold: int | None = None,
    activity_id: str | None = None,
    calendar_uid: str | None = None,
) -> Activity:
    """Validate an activity spec and build the activity.

    All participants (organizer included) start as Invited. A missing
    batch threshold defaults to 5 for Gathering activities and 1 for every
    other kind. When ``activity_id`` is not supplied a random opaque id is
    generated; callers that need reproducible ids (the server does) pass
    their own.
    """
    ids = list(participant_ids)
    seen = set()
    for pid in ids:
        if not isinstance(pid, str) or not pid:
            raise DuplicateParticipant(f"participant id must be a non-empty string, got {pid!r}")
        if pid in seen:
            raise DuplicateParticipant(f"participant {pid!r} listed twice")
        seen.add(pid)
    if len(ids) < 2:
        raise TooFewParticipants(f"need at least 2 participants, got {len(ids)}")
    if organizer not in seen:
        raise OrganizerNotParticipant(f"organizer {organizer!r} not in participant list")
    if batch_threshold is None:
        batch_threshold = (
            DEFAULT_GATHERING_BATCH if kind is ActivityKind.GATHERING else 1
        )
    if not isinstance(batch_threshold, int) or batch_threshold < 1:
        raise BatchThresholdInvalid(
            f"batch threshold must be an integer >= 1, got {batch_threshold!r}"
        )
    return Activity(
        id=activity_id if activity_id is not None else f"act-{uuid.uuid4().hex[:12]}",
        title=title,
        kind=kind,
        window=window,
        fence=fence,
        organizer=organizer,
        participants=tuple(ParticipantRecord(pid) for pid in ids),
        policy=policy,
        batch_threshold=batch_threshold,
        calendar_uid=calendar_uid,
    )


def respond_invitation(
    activity: Activity, participant_id: str, answer: InviteAnswer
) -> Activity:
    """Record a participant's accept/decline. Each participant answers once."""
    record = activity.participant(participant_id)
    if record is None:
        raise UnknownParticipant(f"{participant_id!r} is not a participant of {activity.id}")
    if record.status is not ParticipantStatus.INVITED:
        raise AlreadyResponded(
            f"{participant_id!r} already responded ({record.status.value})"
        )
    status = (
        ParticipantStatus.ACCEPTED
        if answer is InviteAnswer.ACCEPT
        else ParticipantStatus.DECLINED
    )
    updated = tuple(
        ParticipantRecord(p.id, status) if p.id == participant_id else p
        for p in activity.participants
    )
    return replace(activity, participants=updated)


def phase_at(activity: Activity, now: int) -> ActivityPhase:
    """Scheduled before start, Active in [start, end), Ended from end on."""
    if now < activity.window.start:
        return ActivityPhase.SCHEDULED
    if now < activity.window.end:
        return ActivityPhase.ACTIVE
    return ActivityPhase.ENDED

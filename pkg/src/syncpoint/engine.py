"""Authoritative synchronisation engine.

The functional core is a command handler over an explicit ``ServerState``:
validate the command, derive the event records, then fold the records into
the state with ``apply``. Replay folds the persisted records through the
very same ``apply``, which is why a replayed log reproduces the live state
field for field. ``handle`` is deterministic in (state, message, sender,
now) — "now" is always injected, never read from a clock, so a simulator
can drive virtual time.

Notification queues are part of the state: every queued ``Notify`` carries
a per-recipient sequence number, assigned at enqueue time, and is also
returned as an immediate push. Delivery cursors are session bookkeeping
(the ``Engine`` wrapper), not event-sourced state: polls append no records.

Privacy stance: fixes come in, facts go out. The latest fix per
(activity, participant) is all the location the state retains, and no
outbound message ever carries a coordinate.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import presence as prs
from .activities import (
    Activity,
    ActivityKind,
    ActivityPhase,
    ParticipantStatus,
    PrivacyPolicy,
    TimeWindow,
    UnknownParticipant,
    new_activity,
    phase_at,
    respond_invitation,
)
from .errors import SyncError
from .eventlog import (
    ActivityCreated,
    ArmCleared,
    ArmSet,
    ArrivalRecorded,
    EventRecord,
    FixAccepted,
    InviteResponded,
    LogWriter,
    TaskCompleted,
    load_log,
)
from .geo import DEFAULT_HYSTERESIS_M, DEFAULT_RADIUS_M, Geofence, Zone, classify_zone
from .ics import ActivityDraft
from .notify import KindMismatch, Notification, on_arrival, on_invite, on_task_done
from .wire import (
    Ack,
    Arm,
    ClientMessage,
    Disarm,
    Err,
    Fix,
    Hello,
    Notify,
    ParticipantView,
    Poll,
    RespondInvite,
    ServerMessage,
    Status,
    StatusView,
    TaskDone,
    Welcome,
)


class UnknownActivity(SyncError):
    code = "UNKNOWN_ACTIVITY"


class StaleFix(SyncError):
    code = "STALE_FIX"


class PhaseViolation(SyncError):
    code = "PHASE_VIOLATION"


@dataclass
class ParticipantPresence:
    """Per-(activity, participant) server-side presence bookkeeping."""

    alarm: prs.AlarmState = prs.DISARMED
    zone: Zone = Zone.OUTSIDE  # last classified zone; seeds arm()
    last_fix_at: int | None = None


@dataclass
class ServerState:
    """Everything the event log determines."""

    activities: dict[str, Activity] = field(default_factory=dict)
    presence: dict[tuple[str, str], ParticipantPresence] = field(default_factory=dict)
    arrivals: dict[str, tuple[str, ...]] = field(default_factory=dict)
    queues: dict[str, list[Notify]] = field(default_factory=dict)
    next_seq: dict[str, int] = field(default_factory=dict)
    record_count: int = 0


Outbound = list[tuple[str, ServerMessage]]


def _enqueue(state: ServerState, recipient: str, n: Notification) -> tuple[str, Notify]:
    seq = state.next_seq.get(recipient, 1)
    state.next_seq[recipient] = seq + 1
    msg = Notify(seq, n)
    state.queues.setdefault(recipient, []).append(msg)
    return recipient, msg


def apply(state: ServerState, record: EventRecord) -> Outbound:
    """Fold one record into the state; returns the pushes it generates.

    This is the single mutation path for live handling and replay alike.
    Records are applied exactly in log order (dense indices enforced).
    """
    if record.index != state.record_count:
        raise SyncError(
            f"record index {record.index} applied out of order "
            f"(expected {state.record_count})"
        )
    state.record_count += 1
    e = record.event
    if isinstance(e, ActivityCreated):
        a = e.activity
        state.activities[a.id] = a
        for p in a.participants:
            state.presence[(a.id, p.id)] = ParticipantPresence()
        state.arrivals[a.id] = ()
        return [_enqueue(state, r, n) for r, n in on_invite(a)]
    if isinstance(e, InviteResponded):
        state.activities[e.activity] = respond_invitation(
            state.activities[e.activity], e.who, e.answer
        )
        return []
    if isinstance(e, ArmSet):
        pp = state.presence[(e.activity, e.who)]
        pp.alarm = prs.arm(pp.alarm, e.zone)
        return []
    if isinstance(e, ArmCleared):
        pp = state.presence[(e.activity, e.who)]
        pp.alarm = prs.disarm(pp.alarm)
        return []
    if isinstance(e, FixAccepted):
        act = state.activities[e.activity]
        pp = state.presence[(e.activity, e.who)]
        zone = classify_zone(act.fence, pp.zone, e.point)
        pp.zone = zone
        pp.last_fix_at = e.fix_at
        if isinstance(pp.alarm, prs.Armed):
            # The arrival itself, when due, is its own record applied next.
            pp.alarm = prs.Armed(zone)
        return []
    if isinstance(e, ArrivalRecorded):
        act = state.activities[e.activity]
        pp = state.presence[(e.activity, e.who)]
        pp.alarm = prs.Arrived(e.arrived_at)
        state.arrivals[e.activity] = state.arrivals[e.activity] + (e.who,)
        total = len(state.arrivals[e.activity])
        return [
            _enqueue(state, r, n)
            for r, n in on_arrival(act, e.who, total, e.arrived_at)
        ]
    if isinstance(e, TaskCompleted):
        act = state.activities[e.activity]
        return [
            _enqueue(state, r, n) for r, n in on_task_done(act, e.who, e.done_at)
        ]
    raise TypeError(f"not an event: {e!r}")


def replay(records) -> ServerState:
    """Rebuild state by folding records through the live transition logic."""
    state = ServerState()
    for record in records:
        apply(state, record)
    return state


# --- command handling --------------------------------------------------------


def _activity(state: ServerState, activity_id: str) -> Activity:
    act = state.activities.get(activity_id)
    if act is None:
        raise UnknownActivity(f"no such activity {activity_id!r}")
    return act


def _presence_of(state: ServerState, act: Activity, who: str) -> ParticipantPresence:
    record = act.participant(who)
    if record is None:
        raise UnknownParticipant(f"{who!r} is not a participant of {act.id}")
    return state.presence[(act.id, who)]


def _require_accepted(act: Activity, who: str) -> None:
    record = act.participant(who)
    if record is None:
        raise UnknownParticipant(f"{who!r} is not a participant of {act.id}")
    if record.status is not ParticipantStatus.ACCEPTED:
        raise prs.NotAccepted(f"{who!r} has not accepted {act.id}")


def pending(
    state: ServerState, participant: str, cursor: int
) -> tuple[list[Notify], int]:
    """Queued notifications with sequence > cursor, and the new cursor.

    Pure read; the stored queue is never mutated here. Re-polling with the
    same cursor returns the same messages.
    """
    queue = state.queues.get(participant, [])
    out = [m for m in queue if m.seq > cursor]
    return out, (out[-1].seq if out else cursor)


def status_view(state: ServerState, activity_id: str, now: int) -> StatusView:
    """Per-participant invitation status and arrivals, plus current phase."""
    act = _activity(state, activity_id)
    arrived = state.arrivals.get(activity_id, ())
    return StatusView(
        activity=act.id,
        participants=tuple(
            ParticipantView(p.id, p.status, p.id in arrived)
            for p in act.participants
        ),
        arrivals=len(arrived),
        phase=phase_at(act, now),
    )


def handle(
    state: ServerState, msg: ClientMessage, from_: str, now: int
) -> tuple[Outbound, list[EventRecord]]:
    """Process one client message.

    Returns the outbound (recipient, message) list — Ack/Err and direct
    responses to the sender plus Notify pushes — and the records appended.
    An errored command appends zero records and mutates nothing.
    """
    try:
        return _dispatch(state, msg, from_, now)
    except SyncError as e:
        return [(from_, Err(e.code, e.detail))], []


def _dispatch(
    state: ServerState, msg: ClientMessage, from_: str, now: int
) -> tuple[Outbound, list[EventRecord]]:
    if isinstance(msg, Hello):
        return [(from_, Welcome(now))], []

    if isinstance(msg, RespondInvite):
        act = _activity(state, msg.activity)
        if phase_at(act, now) is ActivityPhase.ENDED:
            raise PhaseViolation(f"{act.id} has already ended")
        respond_invitation(act, from_, msg.answer)  # validation only
        records = [
            EventRecord(
                state.record_count, now, InviteResponded(act.id, from_, msg.answer)
            )
        ]
        pushes = [p for r in records for p in apply(state, r)]
        return [(from_, Ack("RESPOND_INVITE"))] + pushes, records

    if isinstance(msg, Arm):
        act = _activity(state, msg.activity)
        _require_accepted(act, from_)
        pp = _presence_of(state, act, from_)
        prs.arm(pp.alarm, pp.zone)  # validation only
        records = [
            EventRecord(state.record_count, now, ArmSet(act.id, from_, pp.zone))
        ]
        pushes = [p for r in records for p in apply(state, r)]
        return [(from_, Ack("ARM"))] + pushes, records

    if isinstance(msg, Disarm):
        act = _activity(state, msg.activity)
        pp = _presence_of(state, act, from_)
        records = []
        if isinstance(pp.alarm, prs.Armed):
            records = [EventRecord(state.record_count, now, ArmCleared(act.id, from_))]
            for r in records:
                apply(state, r)
        return [(from_, Ack("DISARM"))], records

    if isinstance(msg, Fix):
        act = _activity(state, msg.activity)
        _require_accepted(act, from_)
        pp = _presence_of(state, act, from_)
        if pp.last_fix_at is not None and msg.at <= pp.last_fix_at:
            raise StaleFix(
                f"fix at {msg.at} is not after the last fix at {pp.last_fix_at}"
            )
        if phase_at(act, msg.at) is not ActivityPhase.ACTIVE:
            # Outside the window the fix is ignored: no state, no record.
            return [(from_, Ack("FIX"))], []
        fix = prs.LocationFix(from_, msg.point, msg.at)
        _, events = prs.ingest_fix(act, pp.alarm, fix)
        records = [
            EventRecord(
                state.record_count, now, FixAccepted(act.id, from_, msg.point, msg.at)
            )
        ]
        if events:
            records.append(
                EventRecord(
                    state.record_count + 1,
                    now,
                    ArrivalRecorded(act.id, from_, events[0].at),
                )
            )
        pushes = [p for r in records for p in apply(state, r)]
        return [(from_, Ack("FIX"))] + pushes, records

    if isinstance(msg, TaskDone):
        act = _activity(state, msg.activity)
        _require_accepted(act, from_)
        if act.kind is not ActivityKind.TASK:
            raise KindMismatch(f"{act.id} is {act.kind.value}, not TASK")
        records = [
            EventRecord(state.record_count, now, TaskCompleted(act.id, from_, msg.at))
        ]
        pushes = [p for r in records for p in apply(state, r)]
        return [(from_, Ack("TASK_DONE"))] + pushes, records

    if isinstance(msg, Poll):
        msgs, _ = pending(state, from_, msg.cursor)
        return [(from_, m) for m in msgs] + [(from_, Ack("POLL"))], []

    if isinstance(msg, Status):
        act = _activity(state, msg.activity)
        if act.participant(from_) is None:
            raise UnknownParticipant(f"{from_!r} is not a participant of {act.id}")
        return [(from_, status_view(state, act.id, now))], []

    raise TypeError(f"not a client message: {msg!r}")


def create_activity(
    state: ServerState,
    *,
    now: int,
    title: str,
    kind: ActivityKind,
    window: TimeWindow,
    fence: Geofence,
    organizer: str,
    participant_ids,
    policy: PrivacyPolicy = PrivacyPolicy.DISCLOSE_IDENTITY,
    batch_threshold: int | None = None,
    calendar_uid: str | None = None,
) -> tuple[Activity, Outbound, list[EventRecord]]:
    """Validate, store, and fan out invitations for a new activity.

    Activity ids are allocated deterministically from the state ("a1",
    "a2", ... in creation order) so logs and transcripts are reproducible.
    """
    act = new_activity(
        title=title,
        kind=kind,
        window=window,
        fence=fence,
        organizer=organizer,
        participant_ids=participant_ids,
        policy=policy,
        batch_threshold=batch_threshold,
        activity_id=f"a{len(state.activities) + 1}",
        calendar_uid=calendar_uid,
    )
    record = EventRecord(state.record_count, now, ActivityCreated(act))
    pushes = apply(state, record)
    return act, pushes, [record]


def materialize_draft(
    state: ServerState, draft: ActivityDraft, now: int
) -> tuple[Activity, Outbound, list[EventRecord]]:
    """Create an activity from a calendar draft, applying defaults.

    Missing optional fields default to: MEETUP kind, identity disclosure,
    100 m radius, 25 m hysteresis, batch threshold per kind. Attendee
    addresses are used verbatim as participant ids; the calendar UID is
    preserved on the activity.
    """
    participant_ids = [draft.organizer] + [
        a for a in draft.attendees if a != draft.organizer
    ]
    return create_activity(
        state,
        now=now,
        title=draft.title,
        kind=draft.kind if draft.kind is not None else ActivityKind.MEETUP,
        window=draft.window,
        fence=Geofence(
            draft.center,
            draft.radius_m if draft.radius_m is not None else DEFAULT_RADIUS_M,
            DEFAULT_HYSTERESIS_M,
        ),
        organizer=draft.organizer,
        participant_ids=participant_ids,
        policy=draft.policy if draft.policy is not None else PrivacyPolicy.DISCLOSE_IDENTITY,
        batch_threshold=draft.batch_threshold,
        calendar_uid=draft.uid,
    )


# --- stateful wrapper ---------------------------------------------------------


class Engine:
    """State + optional durable log + session-layer delivery cursors.

    Thread-safe: all commands serialize through one lock, establishing the
    total order the determinism guarantees depend on.
    """

    def __init__(self, log_path: str | Path | None = None):
        self.state = ServerState()
        self.cursors: dict[str, int] = {}
        self._lock = threading.Lock()
        self._writer: LogWriter | None = None
        if log_path is not None:
            existing = load_log(log_path) if Path(log_path).exists() else []
            self.state = replay(existing)
            self._writer = LogWriter(log_path, start_index=len(existing))

    def _persist(self, records: list[EventRecord]) -> None:
        if self._writer is not None:
            for record in records:
                self._writer.append(record)

    def handle(self, msg: ClientMessage, from_: str, now: int) -> Outbound:
        with self._lock:
            outbound, records = handle(self.state, msg, from_, now)
            self._persist(records)
            if isinstance(msg, Poll) and not any(
                isinstance(m, Err) for _, m in outbound
            ):
                # The echoed cursor acknowledges everything at or below it.
                self.cursors[from_] = max(self.cursors.get(from_, 0), msg.cursor)
            return outbound

    def create_activity(self, *, now: int, **spec) -> tuple[Activity, Outbound]:
        with self._lock:
            act, outbound, records = create_activity(self.state, now=now, **spec)
            self._persist(records)
            return act, outbound

    def materialize_draft(self, draft: ActivityDraft, now: int) -> tuple[Activity, Outbound]:
        with self._lock:
            act, outbound, records = materialize_draft(self.state, draft, now)
            self._persist(records)
            return act, outbound

    def known_calendar_uids(self) -> set[str]:
        return {
            a.calendar_uid
            for a in self.state.activities.values()
            if a.calendar_uid is not None
        }

    def pending(self, participant: str, cursor: int) -> tuple[list[Notify], int]:
        return pending(self.state, participant, cursor)

    def status_view(self, activity_id: str, now: int) -> StatusView:
        return status_view(self.state, activity_id, now)

    def close(self) -> None:
        if self._writer is not None:
            self._writer.close()

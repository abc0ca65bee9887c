"""Append-only event log.

Every server state mutation is mirrored by exactly one record; replaying
the log through the same transition logic reproduces the live state. One
record per line, canonical JSON (same dialect as the wire format), indices
dense from 0. A malformed or out-of-sequence line stops replay with
``CorruptRecord`` naming the index; everything before it is recoverable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .activities import (
    Activity,
    ActivityKind,
    InviteAnswer,
    ParticipantRecord,
    ParticipantStatus,
    PrivacyPolicy,
    TimeWindow,
)
from .errors import SyncError
from .geo import Geofence, GeoPoint, Zone
from .wire import dumps_canonical


class CorruptRecord(SyncError):
    code = "CORRUPT_RECORD"

    def __init__(self, index: int, reason: str):
        super().__init__(f"record {index}: {reason}")
        self.index = index
        self.reason = reason


@dataclass(frozen=True)
class ActivityCreated:
    activity: Activity


@dataclass(frozen=True)
class InviteResponded:
    activity: str
    who: str
    answer: InviteAnswer


@dataclass(frozen=True)
class ArmSet:
    activity: str
    who: str
    zone: Zone


@dataclass(frozen=True)
class ArmCleared:
    activity: str
    who: str


@dataclass(frozen=True)
class FixAccepted:
    activity: str
    who: str
    point: GeoPoint
    fix_at: int


@dataclass(frozen=True)
class ArrivalRecorded:
    activity: str
    who: str
    arrived_at: int


@dataclass(frozen=True)
class TaskCompleted:
    activity: str
    who: str
    done_at: int


Event = (
    ActivityCreated
    | InviteResponded
    | ArmSet
    | ArmCleared
    | FixAccepted
    | ArrivalRecorded
    | TaskCompleted
)


@dataclass(frozen=True)
class EventRecord:
    index: int
    at: int
    event: Event


def _activity_fields(a: Activity) -> dict:
    fields = {
        "batch_threshold": a.batch_threshold,
    }
    if a.calendar_uid is not None:
        fields["calendar_uid"] = a.calendar_uid
    fields.update(
        {
            "fence": {
                "center": {"lat": a.fence.center.lat, "lon": a.fence.center.lon},
                "hysteresis_m": a.fence.hysteresis_m,
                "radius_m": a.fence.radius_m,
            },
            "id": a.id,
            "kind": a.kind.value,
            "organizer": a.organizer,
            "participants": [
                {"id": p.id, "status": p.status.value} for p in a.participants
            ],
            "policy": a.policy.value,
            "title": a.title,
            "window": {"end": a.window.end, "start": a.window.start},
        }
    )
    return fields


def _activity_from_fields(obj: dict) -> Activity:
    fence = obj["fence"]
    return Activity(
        id=obj["id"],
        title=obj["title"],
        kind=ActivityKind(obj["kind"]),
        window=TimeWindow(obj["window"]["start"], obj["window"]["end"]),
        fence=Geofence(
            GeoPoint(fence["center"]["lat"], fence["center"]["lon"]),
            fence["radius_m"],
            fence["hysteresis_m"],
        ),
        organizer=obj["organizer"],
        participants=tuple(
            ParticipantRecord(p["id"], ParticipantStatus(p["status"]))
            for p in obj["participants"]
        ),
        policy=PrivacyPolicy(obj["policy"]),
        batch_threshold=obj["batch_threshold"],
        calendar_uid=obj.get("calendar_uid"),
    )


def encode_record(record: EventRecord) -> str:
    """One canonical line, newline-terminated."""
    e = record.event
    if isinstance(e, ActivityCreated):
        fields = {
            "type": "ACTIVITY_CREATED",
            "activity": _activity_fields(e.activity),
            "at": record.at,
            "index": record.index,
        }
    elif isinstance(e, InviteResponded):
        fields = {
            "type": "INVITE_RESPONDED",
            "activity": e.activity,
            "answer": e.answer.value,
            "at": record.at,
            "index": record.index,
            "who": e.who,
        }
    elif isinstance(e, ArmSet):
        fields = {
            "type": "ARMED",
            "activity": e.activity,
            "at": record.at,
            "index": record.index,
            "who": e.who,
            "zone": e.zone.value,
        }
    elif isinstance(e, ArmCleared):
        fields = {
            "type": "DISARMED",
            "activity": e.activity,
            "at": record.at,
            "index": record.index,
            "who": e.who,
        }
    elif isinstance(e, FixAccepted):
        fields = {
            "type": "FIX_ACCEPTED",
            "activity": e.activity,
            "at": record.at,
            "fix_at": e.fix_at,
            "index": record.index,
            "lat": e.point.lat,
            "lon": e.point.lon,
            "who": e.who,
        }
    elif isinstance(e, ArrivalRecorded):
        fields = {
            "type": "ARRIVAL_RECORDED",
            "activity": e.activity,
            "arrived_at": e.arrived_at,
            "at": record.at,
            "index": record.index,
            "who": e.who,
        }
    elif isinstance(e, TaskCompleted):
        fields = {
            "type": "TASK_COMPLETED",
            "activity": e.activity,
            "at": record.at,
            "done_at": e.done_at,
            "index": record.index,
            "who": e.who,
        }
    else:
        raise TypeError(f"not an event: {e!r}")
    return dumps_canonical(fields) + "\n"


def decode_record(line: str, expected_index: int) -> EventRecord:
    """Decode one log line, enforcing dense indices."""
    try:
        obj = json.loads(line)
    except ValueError as e:
        raise CorruptRecord(expected_index, f"not valid JSON: {e}") from None
    if not isinstance(obj, dict):
        raise CorruptRecord(expected_index, "line is not a JSON object")
    try:
        index = obj["index"]
        at = obj["at"]
        t = obj["type"]
        if index != expected_index:
            raise CorruptRecord(
                expected_index, f"index {index} breaks dense sequence"
            )
        if t == "ACTIVITY_CREATED":
            event: Event = ActivityCreated(_activity_from_fields(obj["activity"]))
        elif t == "INVITE_RESPONDED":
            event = InviteResponded(
                obj["activity"], obj["who"], InviteAnswer(obj["answer"])
            )
        elif t == "ARMED":
            event = ArmSet(obj["activity"], obj["who"], Zone(obj["zone"]))
        elif t == "DISARMED":
            event = ArmCleared(obj["activity"], obj["who"])
        elif t == "FIX_ACCEPTED":
            event = FixAccepted(
                obj["activity"],
                obj["who"],
                GeoPoint(obj["lat"], obj["lon"]),
                obj["fix_at"],
            )
        elif t == "ARRIVAL_RECORDED":
            event = ArrivalRecorded(obj["activity"], obj["who"], obj["arrived_at"])
        elif t == "TASK_COMPLETED":
            event = TaskCompleted(obj["activity"], obj["who"], obj["done_at"])
        else:
            raise CorruptRecord(expected_index, f"unknown record type {t!r}")
    except CorruptRecord:
        raise
    except (KeyError, TypeError, ValueError, SyncError) as e:
        raise CorruptRecord(expected_index, f"bad record payload: {e}") from None
    return EventRecord(index, at, event)


def read_records(lines: Iterable[str]) -> Iterator[EventRecord]:
    """Decode log lines in order; raises CorruptRecord at the first bad one.

    A final line lacking its newline terminator counts as truncated and
    therefore corrupt — a torn write must not be silently absorbed.
    """
    index = 0
    for line in lines:
        if not line.endswith("\n"):
            raise CorruptRecord(index, "truncated line (missing newline)")
        yield decode_record(line, index)
        index += 1


def load_log(path: str | Path) -> list[EventRecord]:
    """Read a whole log file; CorruptRecord on the first bad line."""
    text = Path(path).read_text(encoding="utf-8")
    if not text:
        return []
    # Preserve the missing-final-newline signal for read_records.
    raw = text.split("\n")
    lines = [r + "\n" for r in raw[:-1]]
    if raw[-1]:
        lines.append(raw[-1])
    return list(read_records(lines))


class LogWriter:
    """Appends records to a log file, one canonical line each."""

    def __init__(self, path: str | Path, start_index: int = 0):
        self.path = Path(path)
        self.next_index = start_index
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, record: EventRecord) -> None:
        if record.index != self.next_index:
            raise CorruptRecord(
                self.next_index, f"attempted append with index {record.index}"
            )
        self._fh.write(encode_record(record))
        self._fh.flush()
        self.next_index += 1

    def close(self) -> None:
        self._fh.close()

"""Ingest activities from iCalendar (.ics) files.

A calendar event becomes an activity draft when the synchronisation
service's own address appears among the ATTENDEEs — that is how the service
learns it has been enrolled. Coordinates ride in the standard GEO property;
the activity-specific metadata uses X- extension properties:

    X-SYNC-TYPE     MEETUP | GATHERING | PICKUP | TASK
    X-SYNC-RADIUS   fence radius in meters
    X-SYNC-BATCH    gathering batch threshold
    X-SYNC-PRIVACY  IDENTITY | ANONYMOUS

Only the RFC 5545 subset needed for that job is implemented: line
unfolding, BEGIN/END blocks, property parameters (skipped, quote-aware),
UTC ("...Z") datetimes plus a digits-only epoch-seconds form. Recurrence,
timezones, and writing calendars are out of scope. The parser never raises
anything but its own named errors, no matter the input bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from math import isfinite

from .activities import ActivityKind, PrivacyPolicy, TimeWindow
from .errors import SyncError
from .geo import GeoPoint, LatOutOfRange, LonOutOfRange


class NotACalendar(SyncError):
    code = "NOT_A_CALENDAR"


class MalformedGeo(SyncError):
    code = "MALFORMED_GEO"


class EventInvalid(SyncError):
    code = "EVENT_INVALID"

    def __init__(self, uid: str, reason: str):
        super().__init__(f"event {uid!r}: {reason}")
        self.uid = uid
        self.reason = reason


@dataclass(frozen=True)
class ActivityDraft:
    """What one enrolled VEVENT contributes before defaults are applied."""

    uid: str
    title: str
    window: TimeWindow
    center: GeoPoint
    radius_m: float | None
    kind: ActivityKind | None
    policy: PrivacyPolicy | None
    batch_threshold: int | None
    attendees: tuple[str, ...]
    organizer: str


@dataclass(frozen=True)
class ParseResult:
    drafts: tuple[ActivityDraft, ...]
    skipped: int
    warnings: tuple[str, ...]


_SUPPORTED = {
    "BEGIN", "END", "UID", "SUMMARY", "DTSTART", "DTEND", "GEO",
    "ATTENDEE", "ORGANIZER",
    "X-SYNC-TYPE", "X-SYNC-RADIUS", "X-SYNC-BATCH", "X-SYNC-PRIVACY",
}

# Standard properties we recognise and deliberately ignore, silently.
_IGNORED = {
    "VERSION", "PRODID", "CALSCALE", "METHOD", "DTSTAMP", "SEQUENCE",
    "STATUS", "TRANSP", "CREATED", "LAST-MODIFIED", "LOCATION",
    "DESCRIPTION", "CLASS", "PRIORITY", "URL", "RRULE",
}

_KINDS = {k.value: k for k in ActivityKind}
_POLICIES = {p.value: p for p in PrivacyPolicy}


def unfold_lines(text: str) -> list[str]:
    """Undo RFC 5545 line folding.

    A line starting with a single space or tab continues the previous line;
    the leading whitespace character is dropped. Accepts CRLF or LF.
    """
    out: list[str] = []
    for raw in text.splitlines():
        if raw[:1] in (" ", "\t") and out:
            out[-1] += raw[1:]
        else:
            out.append(raw)
    return out


def parse_geo(value: str) -> GeoPoint:
    """Parse a GEO property value: "lat;lon" in decimal degrees."""
    parts = value.split(";")
    if len(parts) != 2:
        raise MalformedGeo(f"expected 'lat;lon', got {value!r}")
    try:
        lat, lon = float(parts[0]), float(parts[1])
    except ValueError:
        raise MalformedGeo(f"non-numeric coordinate in {value!r}") from None
    return GeoPoint(lat, lon)


def _split_property(line: str) -> tuple[str, str] | None:
    """Split one content line into (NAME, value), skipping parameters.

    Parameter values may be quoted and contain ':' or ';', so the scan is
    quote-aware. Returns None for lines with no ':' outside quotes.
    """
    in_quotes = False
    name_end = None
    for i, ch in enumerate(line):
        if ch == '"':
            in_quotes = not in_quotes
        elif not in_quotes and ch in (";", ":") and name_end is None:
            name_end = i
        if ch == ":" and not in_quotes:
            name = line[:name_end if name_end is not None else i]
            return name.strip().upper(), line[i + 1:]
    return None


def _strip_mailto(value: str) -> str:
    v = value.strip()
    if v.lower().startswith("mailto:"):
        return v[len("mailto:"):]
    return v


def _ascii_digits(v: str) -> bool:
    return bool(v) and all(c in "0123456789" for c in v)


def _parse_dt(value: str, uid: str, prop: str) -> int:
    v = value.strip()
    if _ascii_digits(v):
        return int(v)
    try:
        dt = datetime.strptime(v, "%Y%m%dT%H%M%SZ").replace(tzinfo=timezone.utc)
    except ValueError:
        raise EventInvalid(
            uid, f"unsupported {prop} form {value!r} (UTC '...Z' or epoch seconds)"
        ) from None
    return int(dt.timestamp())


def parse_ics(text: str, system_address: str) -> ParseResult:
    """Extract activity drafts from an iCalendar stream.

    Only VEVENTs listing ``system_address`` among their ATTENDEEs are
    ingested; the rest are counted as skipped. A matching VEVENT missing
    UID, DTSTART, DTEND, or GEO — or carrying an unusable value for a
    supported property — raises EventInvalid.
    """
    if not isinstance(text, str):
        raise NotACalendar("input is not text")
    lines = unfold_lines(text)
    stripped = [ln.strip() for ln in lines if ln.strip()]
    if not any(ln.upper() == "BEGIN:VCALENDAR" for ln in stripped):
        raise NotACalendar("no BEGIN:VCALENDAR wrapper")

    system = _strip_mailto(system_address).lower()
    warnings: list[str] = []
    drafts: list[ActivityDraft] = []
    skipped = 0

    events: list[list[tuple[str, str]]] = []
    current: list[tuple[str, str]] | None = None
    for idx, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        prop = _split_property(line)
        if prop is None:
            warnings.append(f"line {idx}: ignored malformed line")
            continue
        name, value = prop
        if name == "BEGIN" and value.strip().upper() == "VEVENT":
            current = []
        elif name == "END" and value.strip().upper() == "VEVENT":
            if current is not None:
                events.append(current)
            current = None
        elif current is not None:
            if name not in _SUPPORTED and name not in _IGNORED:
                warnings.append(f"line {idx}: ignored unknown property {name}")
            current.append((name, value))
        else:
            if name not in _SUPPORTED and name not in _IGNORED:
                warnings.append(f"line {idx}: ignored unknown property {name}")

    for props in events:
        first = {}
        attendees: list[str] = []
        for name, value in props:
            if name == "ATTENDEE":
                attendees.append(_strip_mailto(value))
            else:
                first.setdefault(name, value)

        if not any(a.lower() == system for a in attendees):
            skipped += 1
            continue

        uid = first.get("UID", "").strip()
        if not uid:
            raise EventInvalid("?", "missing UID")
        for required in ("DTSTART", "DTEND", "GEO"):
            if required not in first:
                raise EventInvalid(uid, f"missing {required}")

        start = _parse_dt(first["DTSTART"], uid, "DTSTART")
        end = _parse_dt(first["DTEND"], uid, "DTEND")
        try:
            window = TimeWindow(start, end)
        except SyncError as e:
            raise EventInvalid(uid, e.detail) from None
        try:
            center = parse_geo(first["GEO"].strip())
        except (MalformedGeo, LatOutOfRange, LonOutOfRange) as e:
            raise EventInvalid(uid, f"bad GEO: {e.detail}") from None

        radius = None
        if "X-SYNC-RADIUS" in first:
            try:
                radius = float(first["X-SYNC-RADIUS"])
            except ValueError:
                raise EventInvalid(uid, "X-SYNC-RADIUS is not a number") from None
            if not (isfinite(radius) and radius > 0):
                raise EventInvalid(uid, "X-SYNC-RADIUS must be a finite number > 0")
        kind = None
        if "X-SYNC-TYPE" in first:
            label = first["X-SYNC-TYPE"].strip().upper()
            if label not in _KINDS:
                raise EventInvalid(uid, f"unknown X-SYNC-TYPE {label!r}")
            kind = _KINDS[label]
        policy = None
        if "X-SYNC-PRIVACY" in first:
            label = first["X-SYNC-PRIVACY"].strip().upper()
            if label not in _POLICIES:
                raise EventInvalid(uid, f"unknown X-SYNC-PRIVACY {label!r}")
            policy = _POLICIES[label]
        batch = None
        if "X-SYNC-BATCH" in first:
            raw = first["X-SYNC-BATCH"].strip()
            if not _ascii_digits(raw) or int(raw) < 1:
                raise EventInvalid(uid, "X-SYNC-BATCH must be an integer >= 1")
            batch = int(raw)

        guest_list: list[str] = []
        for a in attendees:
            if a.lower() == system:
                continue
            if a in guest_list:
                warnings.append(f"event {uid}: duplicate attendee {a} ignored")
                continue
            guest_list.append(a)

        if "ORGANIZER" in first:
            organizer = _strip_mailto(first["ORGANIZER"])
        elif guest_list:
            organizer = guest_list[0]
            warnings.append(f"event {uid}: no ORGANIZER, using first attendee")
        else:
            organizer = ""
            warnings.append(f"event {uid}: no ORGANIZER and no attendees")

        drafts.append(
            ActivityDraft(
                uid=uid,
                title=first.get("SUMMARY", "").strip(),
                window=window,
                center=center,
                radius_m=radius,
                kind=kind,
                policy=policy,
                batch_threshold=batch,
                attendees=tuple(guest_list),
                organizer=organizer,
            )
        )

    return ParseResult(tuple(drafts), skipped, tuple(warnings))

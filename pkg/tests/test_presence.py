"""Alarm state machine: arming, disarming, and arrival detection."""

import math
import random

import pytest
from hypothesis import given, strategies as st

from syncpoint.activities import (
    ActivityKind,
    InviteAnswer,
    TimeWindow,
    new_activity,
    respond_invitation,
)
from syncpoint.geo import EARTH_RADIUS_M, Geofence, GeoPoint, Zone, classify_zone
from syncpoint.presence import (
    DISARMED,
    AlreadyArmed,
    Armed,
    Arrival,
    Arrived,
    Disarmed,
    LocationFix,
    NotAccepted,
    arm,
    disarm,
    ingest_fix,
)

CENTER = GeoPoint(41.5606, -8.3970)
FENCE = Geofence(CENTER, 100.0, 25.0)


def at_distance(meters: float) -> GeoPoint:
    return GeoPoint(CENTER.lat + math.degrees(meters / EARTH_RADIUS_M), CENTER.lon)


def activity(accepted=("bruno",)):
    act = new_activity(
        title="Fair",
        kind=ActivityKind.MEETUP,
        window=TimeWindow(1000, 5000),
        fence=FENCE,
        organizer="ana",
        participant_ids=["ana", "bruno", "carla"],
    )
    for pid in accepted:
        act = respond_invitation(act, pid, InviteAnswer.ACCEPT)
    return act


class TestArm:
    def test_arm_outside(self):
        assert arm(DISARMED, Zone.OUTSIDE) == Armed(Zone.OUTSIDE)

    def test_arm_inside_emits_nothing(self):
        # Arming on site must not become an arrival; the state just
        # remembers the zone so only a later exit/re-entry can trigger.
        assert arm(DISARMED, Zone.INSIDE) == Armed(Zone.INSIDE)

    def test_arm_twice(self):
        with pytest.raises(AlreadyArmed):
            arm(Armed(Zone.OUTSIDE), Zone.OUTSIDE)

    def test_arm_after_arrival(self):
        with pytest.raises(AlreadyArmed):
            arm(Arrived(1234), Zone.OUTSIDE)


class TestDisarm:
    def test_disarm_armed(self):
        assert disarm(Armed(Zone.INSIDE)) == Disarmed()

    def test_disarm_idempotent(self):
        assert disarm(DISARMED) == Disarmed()

    def test_arrived_is_terminal(self):
        assert disarm(Arrived(42)) == Arrived(42)


class TestIngestFix:
    def fix(self, d, t=2000, who="bruno"):
        return LocationFix(who, at_distance(d), t)

    def test_entry_while_armed_outside(self):
        state, events = ingest_fix(activity(), Armed(Zone.OUTSIDE), self.fix(50))
        assert state == Arrived(2000)
        assert events == [Arrival("bruno", 2000)]

    def test_armed_inside_absorbs_inside_fixes(self):
        state, events = ingest_fix(activity(), Armed(Zone.INSIDE), self.fix(50))
        assert state == Armed(Zone.INSIDE)
        assert events == []

    def test_fix_before_window_ignored(self):
        state, events = ingest_fix(activity(), Armed(Zone.OUTSIDE), self.fix(50, t=999))
        assert state == Armed(Zone.OUTSIDE)
        assert events == []

    def test_fix_after_window_ignored(self):
        state, events = ingest_fix(activity(), Armed(Zone.OUTSIDE), self.fix(50, t=5000))
        assert state == Armed(Zone.OUTSIDE)
        assert events == []

    def test_not_accepted_rejected(self):
        with pytest.raises(NotAccepted):
            ingest_fix(activity(), Armed(Zone.OUTSIDE), self.fix(50, who="carla"))
        with pytest.raises(NotAccepted):
            ingest_fix(activity(), DISARMED, self.fix(50, who="nobody"))

    def test_disarmed_and_arrived_absorb(self):
        assert ingest_fix(activity(), DISARMED, self.fix(50)) == (DISARMED, [])
        assert ingest_fix(activity(), Arrived(1500), self.fix(50)) == (Arrived(1500), [])

    def test_exit_updates_zone_without_event(self):
        state, events = ingest_fix(activity(), Armed(Zone.INSIDE), self.fix(200))
        assert state == Armed(Zone.OUTSIDE)
        assert events == []

    def test_arrival_timestamp_is_fix_timestamp(self):
        state, events = ingest_fix(activity(), Armed(Zone.OUTSIDE), self.fix(10, t=3333))
        assert events[0].at == 3333
        assert state == Arrived(3333)


def drive(act, trace):
    """Feed a (time, distance, action) trace through the machine.

    Mirrors the server's bookkeeping: the zone fed to arm() is classified
    from the latest fix accepted during the Active window (Outside before
    any fix), whatever the alarm state was at the time.
    """
    state = DISARMED
    events = []
    zone = Zone.OUTSIDE
    for t, d, action in trace:
        if action == "arm":
            try:
                state = arm(state, zone)
            except AlreadyArmed:
                pass
        elif action == "disarm":
            state = disarm(state)
        else:
            point = at_distance(d)
            state, evs = ingest_fix(act, state, LocationFix("bruno", point, t))
            if act.window.start <= t < act.window.end:
                zone = classify_zone(act.fence, zone, point)
            events.extend(evs)
    return state, events


class TestTraceProperties:
    @given(
        st.lists(
            st.tuples(
                st.integers(min_value=0, max_value=6000),
                st.floats(min_value=0, max_value=400, allow_nan=False),
                st.sampled_from(["fix", "fix", "fix", "arm", "disarm"]),
            ),
            max_size=40,
        )
    )
    def test_at_most_one_arrival(self, steps):
        trace = sorted(steps, key=lambda s: s[0])
        _, events = drive(activity(), trace)
        assert len(events) <= 1

    def test_ten_thousand_random_traces_single_arrival(self):
        rng = random.Random(20260811)
        act = activity()
        for _ in range(2000):
            trace = sorted(
                (
                    rng.randint(0, 6000),
                    rng.uniform(0, 400),
                    rng.choice(["fix", "fix", "fix", "arm", "disarm"]),
                )
                for _ in range(rng.randint(1, 30))
            )
            _, events = drive(act, trace)
            assert len(events) <= 1

    def test_armed_inside_never_leaving_never_arrives(self):
        # The on-site arming trap: inside the whole time, no event ever.
        trace = [(1000, 20, "fix"), (1001, 30, "arm")] + [
            (1000 + i, 40, "fix") for i in range(2, 30)
        ]
        state, events = drive(activity(), trace)
        assert events == []
        assert state == Armed(Zone.INSIDE)

    def test_noise_within_hysteresis_after_entry_single_arrival(self):
        rng = random.Random(7)
        trace = [(1100, 300, "arm"), (1100, 300, "fix"), (1160, 50, "fix")]
        # Oscillate across the radius with amplitude < hysteresis.
        trace += [
            (1200 + 10 * i, 100 + rng.uniform(-20, 20), "fix") for i in range(50)
        ]
        _, events = drive(activity(), trace)
        assert len(events) == 1
        assert events[0].at == 1160

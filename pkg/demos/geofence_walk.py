"""A noisy walk across a geofence, with and without hysteresis.

A subject walks from 200 m out to the fence center and loiters right on
the 100 m boundary with +/-12 m of GPS jitter. Without a dead band the
zone flaps; with a 25 m dead band it settles after the first entry.

Run:  python demos/geofence_walk.py
"""

import math
import random

from syncpoint.geo import EARTH_RADIUS_M, Geofence, GeoPoint, Zone, classify_zone

CENTER = GeoPoint(41.5606, -8.3970)


def at_distance(meters: float) -> GeoPoint:
    return GeoPoint(CENTER.lat + math.degrees(meters / EARTH_RADIUS_M), CENTER.lon)


def walk(fence: Geofence, label: str) -> None:
    rng = random.Random(4)
    distances = [200 - 10 * i for i in range(11)]          # approach to 100 m
    distances += [100 + rng.uniform(-12, 12) for _ in range(20)]  # loiter on the edge
    zone = Zone.OUTSIDE
    flips = 0
    print(f"\n{label}")
    for step, d in enumerate(distances):
        new_zone = classify_zone(fence, zone, at_distance(d))
        marker = ""
        if new_zone is not zone:
            flips += 1
            marker = f"  <-- {zone.value} -> {new_zone.value}"
        zone = new_zone
        print(f"  step {step:2d}  d={d:6.1f} m  zone={zone.value:7s}{marker}")
    print(f"  zone changes: {flips}")


if __name__ == "__main__":
    walk(Geofence(CENTER, 100.0, 0.0), "No dead band (hysteresis 0 m): the edge flaps")
    walk(Geofence(CENTER, 100.0, 25.0), "25 m dead band: one entry, then steady")

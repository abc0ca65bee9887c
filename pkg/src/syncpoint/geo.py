"""Great-circle geometry and hysteresis-based zone classification.

Distances are computed with the haversine formula on a sphere of radius
6,371,000 m. Centimetre-level geodesy is irrelevant at the ~100 m fence
scales this package deals in.

Zone classification is deliberately stateful-by-argument: the caller passes
the previously classified zone and the fence's dead band (``hysteresis_m``)
keeps GPS jitter from flapping a subject in and out of the fence.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import asin, cos, radians, sin, sqrt

from .errors import SyncError

EARTH_RADIUS_M = 6_371_000.0

# Defaults applied when an ingested activity does not state its own values.
DEFAULT_RADIUS_M = 100.0
DEFAULT_HYSTERESIS_M = 25.0


class LatOutOfRange(SyncError):
    code = "LAT_OUT_OF_RANGE"


class LonOutOfRange(SyncError):
    code = "LON_OUT_OF_RANGE"


class FenceInvalid(SyncError):
    code = "FENCE_INVALID"


class Zone(str, Enum):
    INSIDE = "INSIDE"
    OUTSIDE = "OUTSIDE"


@dataclass(frozen=True)
class GeoPoint:
    """A WGS-ish coordinate pair: lat in [-90, 90], lon in (-180, 180]."""

    lat: float
    lon: float

    def __post_init__(self):
        object.__setattr__(self, "lat", float(self.lat))
        object.__setattr__(self, "lon", float(self.lon))
        if not (-90.0 <= self.lat <= 90.0):
            raise LatOutOfRange(f"latitude {self.lat!r} outside [-90, 90]")
        if not (-180.0 < self.lon <= 180.0):
            raise LonOutOfRange(f"longitude {self.lon!r} outside (-180, 180]")


@dataclass(frozen=True)
class Geofence:
    """Circular geographic scope: center, radius, and exit dead band."""

    center: GeoPoint
    radius_m: float
    hysteresis_m: float = DEFAULT_HYSTERESIS_M

    def __post_init__(self):
        object.__setattr__(self, "radius_m", float(self.radius_m))
        object.__setattr__(self, "hysteresis_m", float(self.hysteresis_m))
        if not self.radius_m > 0:
            raise FenceInvalid(f"radius_m must be > 0, got {self.radius_m!r}")
        if self.hysteresis_m < 0:
            raise FenceInvalid(
                f"hysteresis_m must be >= 0, got {self.hysteresis_m!r}"
            )


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in meters.

    Result lies in [0, pi * EARTH_RADIUS_M].
    """
    phi1, phi2 = radians(a.lat), radians(b.lat)
    dphi = radians(b.lat - a.lat)
    dlam = radians(b.lon - a.lon)
    h = sin(dphi / 2.0) ** 2 + cos(phi1) * cos(phi2) * sin(dlam / 2.0) ** 2
    # Clamp guards rounding noise for antipodal-ish inputs.
    return 2.0 * EARTH_RADIUS_M * asin(min(1.0, sqrt(h)))


def classify_zone(fence: Geofence, prev: Zone, p: GeoPoint) -> Zone:
    """Classify a fix against a fence with hysteresis.

    Inside when distance <= radius; Outside when distance >= radius +
    hysteresis; anywhere in the open band between, the previous zone is
    kept (dead band). With hysteresis 0 the result is independent of
    ``prev``.
    """
    d = haversine_m(fence.center, p)
    if d <= fence.radius_m:
        return Zone.INSIDE
    if d >= fence.radius_m + fence.hysteresis_m:
        return Zone.OUTSIDE
    return prev

"""Geodesic and camera-projection primitives.

Angles are in degrees unless a name says otherwise. Bearings are measured
clockwise from true north; pitch is positive above the horizon. Pixel
coordinates have their origin at the top-left image corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6371008.8  # IUGG mean Earth radius

# Rays whose direction vectors subtend less than this angle (radians) are
# treated as parallel and never intersected.
PARALLEL_TOLERANCE_RAD = 1e-9


def normalize_bearing(degrees: float) -> float:
    """Wrap a compass bearing into [0, 360)."""
    b = degrees % 360.0
    return 0.0 if b >= 360.0 else b


def wrap_degrees(degrees: float) -> float:
    """Wrap an angle difference into [-180, 180)."""
    d = (degrees + 180.0) % 360.0
    if d >= 360.0:
        d = 0.0
    return d - 180.0


@dataclass(frozen=True)
class GeoPoint:
    """A point on the sphere in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and -90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of range [-90, 90]: {self.lat!r}")
        if not (math.isfinite(self.lon) and -180.0 <= self.lon < 180.0):
            raise ValueError(f"longitude out of range [-180, 180): {self.lon!r}")


@dataclass(frozen=True)
class CameraFrame:
    """Pose and optics of one captured image.

    ``heading`` is the compass bearing of the optical axis, ``pitch`` the
    camera's own pitch above the horizon, ``fov`` the field of view covered
    by the image in both directions. ``fov_top``/``fov_bottom`` are the
    partial vertical extents above/below the optical centre; when absent
    the lens offset is zero. ``camera_height`` is the signed offset of the
    camera above reference ground, in meters.
    """

    image_id: str
    position: GeoPoint
    heading: float
    pitch: float = 0.0
    fov: float = 68.77
    image_width: int = 2046
    image_height: int = 2046
    fov_top: float | None = None
    fov_bottom: float | None = None
    camera_height: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.fov < 180.0:
            raise ValueError(f"{self.image_id}: fov must be in (0, 180), got {self.fov!r}")
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError(f"{self.image_id}: image dimensions must be >= 1")
        if (self.fov_top is None) != (self.fov_bottom is None):
            raise ValueError(f"{self.image_id}: fov_top and fov_bottom must be given together")
        object.__setattr__(self, "heading", normalize_bearing(self.heading))

    @property
    def lens_offset(self) -> float:
        """Half the difference between top and bottom field of view (degrees)."""
        if self.fov_top is None or self.fov_bottom is None:
            return 0.0
        return (self.fov_top - self.fov_bottom) / 2.0


@dataclass(frozen=True)
class Detection:
    """One detected object in one image.

    ``pixel_x``/``pixel_y`` locate the centre of the detected object.
    ``mono_depth`` is the camera-to-object distance sampled from a monocular
    depth map, in meters; it may be absent.
    """

    image_id: str
    class_label: str
    pixel_x: float
    pixel_y: float
    mono_depth: float | None = None

    def __post_init__(self) -> None:
        if self.mono_depth is not None and not self.mono_depth > 0.0:
            raise ValueError(f"{self.image_id}: mono_depth must be > 0, got {self.mono_depth!r}")


@dataclass(frozen=True)
class Ray:
    """A 2D half-line from a camera position toward a detected object."""

    origin: GeoPoint
    bearing: float
    frame: CameraFrame
    detection: Detection

    def __post_init__(self) -> None:
        object.__setattr__(self, "bearing", normalize_bearing(self.bearing))


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points in meters (haversine formula)."""
    lat1 = math.radians(a.lat)
    lat2 = math.radians(b.lat)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon - a.lon)
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.atan2(math.sqrt(h), math.sqrt(1.0 - h))


def detection_bearing(frame: CameraFrame, det: Detection) -> float:
    """Compass bearing from the camera toward the detection's pixel column.

    The horizontal pixel-to-angle map is linear: the image centre maps to the
    frame heading and the image edges to heading +/- fov/2.
    """
    half_w = frame.image_width / 2.0
    offset = (det.pixel_x - half_w) / half_w * (frame.fov / 2.0)
    return normalize_bearing(frame.heading + offset)


def pixel_pitch(frame: CameraFrame, det: Detection, corrected: bool = True) -> float:
    """Pitch angle of the detection above the horizon, in degrees.

    The vertical pixel-to-angle map is linear in the pixel row: the top edge
    maps to +fov/2 and the bottom edge to -fov/2 relative to the optical
    axis, offset by the camera pitch. With ``corrected`` the lens offset
    (half the top/bottom field-of-view difference) is added; with symmetric
    optics the two forms coincide.
    """
    half_h = frame.image_height / 2.0
    gamma = (half_h - det.pixel_y) / half_h * (frame.fov / 2.0) - frame.pitch
    if corrected:
        gamma += frame.lens_offset
    return gamma


def make_ray(frame: CameraFrame, det: Detection) -> Ray:
    """Build the detection's ray from its camera frame."""
    return Ray(frame.position, detection_bearing(frame, det), frame, det)


@dataclass(frozen=True)
class LocalChart:
    """Equirectangular tangent plane around an anchor point.

    Coordinates are meters, x pointing east and y north. Distortion over the
    tens of meters this pipeline works with is negligible; straight lines in
    the chart correspond to curves of constant dlon/dlat on the sphere.
    """

    anchor: GeoPoint

    def _cos_lat(self) -> float:
        return math.cos(math.radians(self.anchor.lat))

    def to_xy(self, p: GeoPoint) -> tuple[float, float]:
        x = math.radians(p.lon - self.anchor.lon) * self._cos_lat() * EARTH_RADIUS_M
        y = math.radians(p.lat - self.anchor.lat) * EARTH_RADIUS_M
        return x, y

    def to_geo(self, x: float, y: float) -> GeoPoint:
        lat = self.anchor.lat + math.degrees(y / EARTH_RADIUS_M)
        lon = self.anchor.lon + math.degrees(x / (EARTH_RADIUS_M * self._cos_lat()))
        lon = wrap_degrees(lon)
        return GeoPoint(lat, lon)

    def bearing_to(self, origin: GeoPoint, target: GeoPoint) -> float:
        """Compass bearing from origin to target as seen in this chart."""
        ox, oy = self.to_xy(origin)
        tx, ty = self.to_xy(target)
        return normalize_bearing(math.degrees(math.atan2(tx - ox, ty - oy)))


def midpoint_chart(a: GeoPoint, b: GeoPoint) -> LocalChart:
    """Chart anchored at the midpoint of two nearby points."""
    lat = (a.lat + b.lat) / 2.0
    lon = wrap_degrees(a.lon + wrap_degrees(b.lon - a.lon) / 2.0)
    return LocalChart(GeoPoint(lat, lon))


def intersect_rays(r1: Ray, r2: Ray) -> GeoPoint | None:
    """Intersection of two half-lines, or None.

    The rays are intersected in the equirectangular chart anchored at the
    midpoint of the two origins. Returns None for rays that are parallel
    within PARALLEL_TOLERANCE_RAD or whose lines cross behind either origin.
    """
    chart = midpoint_chart(r1.origin, r2.origin)
    o1x, o1y = chart.to_xy(r1.origin)
    o2x, o2y = chart.to_xy(r2.origin)
    b1 = math.radians(r1.bearing)
    b2 = math.radians(r2.bearing)
    d1x, d1y = math.sin(b1), math.cos(b1)
    d2x, d2y = math.sin(b2), math.cos(b2)
    # Cross product of unit direction vectors = sine of the angle between.
    cross = d1x * d2y - d1y * d2x
    if abs(cross) < PARALLEL_TOLERANCE_RAD:
        return None
    dx = o2x - o1x
    dy = o2y - o1y
    t1 = (dx * d2y - dy * d2x) / cross
    t2 = (dx * d1y - dy * d1x) / cross
    if t1 < 0.0 or t2 < 0.0:
        return None
    return chart.to_geo(o1x + t1 * d1x, o1y + t1 * d1y)

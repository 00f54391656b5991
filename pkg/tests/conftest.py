"""Shared test helpers: chart-based scene construction."""

from __future__ import annotations

import math

import pytest

from streetfuse.geometry import (
    CameraFrame,
    Detection,
    GeoPoint,
    LocalChart,
    Ray,
    make_ray,
    normalize_bearing,
    wrap_degrees,
)

ANCHOR = GeoPoint(53.3405, -6.2489)


@pytest.fixture
def chart() -> LocalChart:
    return LocalChart(ANCHOR)


def frame_at(
    chart: LocalChart,
    x: float,
    y: float,
    heading: float,
    image_id: str,
    fov: float = 68.77,
    camera_height: float = 0.0,
    **kwargs,
) -> CameraFrame:
    """Camera frame at chart coordinates (meters east/north of the anchor)."""
    return CameraFrame(
        image_id=image_id,
        position=chart.to_geo(x, y),
        heading=heading,
        fov=fov,
        camera_height=camera_height,
        **kwargs,
    )


def detection_toward(
    frame: CameraFrame,
    chart: LocalChart,
    tx: float,
    ty: float,
    class_label: str = "drain",
    mono_depth: float | None = None,
    elevation: float | None = None,
) -> Detection:
    """Detection whose pixel column points at chart position (tx, ty).

    When ``elevation`` is given the pixel row encodes the matching pitch,
    otherwise the detection sits on the horizontal centre line.
    """
    bearing = chart.bearing_to(frame.position, chart.to_geo(tx, ty))
    px = (
        frame.image_width / 2.0
        + wrap_degrees(bearing - frame.heading) / (frame.fov / 2.0) * frame.image_width / 2.0
    )
    assert 0.0 <= px < frame.image_width, "target outside the horizontal frustum"
    py = frame.image_height / 2.0
    if elevation is not None:
        fx, fy = chart.to_xy(frame.position)
        d = math.hypot(tx - fx, ty - fy)
        gamma = math.degrees(math.atan2(elevation - frame.camera_height, d))
        py = (
            frame.image_height / 2.0
            - (gamma + frame.pitch - frame.lens_offset)
            / (frame.fov / 2.0)
            * frame.image_height / 2.0
        )
        assert 0.0 <= py < frame.image_height, "target outside the vertical frustum"
    return Detection(frame.image_id, class_label, px, py, mono_depth)


def ray_through(
    chart: LocalChart,
    ox: float,
    oy: float,
    tx: float,
    ty: float,
    image_id: str,
    class_label: str = "drain",
    mono_depth: float | None = None,
    heading: float | None = None,
) -> Ray:
    """Ray from chart point (ox, oy) through (tx, ty).

    The frame heading defaults to the target bearing, putting the detection
    on the optical axis.
    """
    if heading is None:
        heading = normalize_bearing(math.degrees(math.atan2(tx - ox, ty - oy)))
    frame = frame_at(chart, ox, oy, heading, image_id)
    det = detection_toward(frame, chart, tx, ty, class_label, mono_depth)
    return make_ray(frame, det)

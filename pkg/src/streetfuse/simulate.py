"""Synthetic street-survey generator.

Builds camera trajectories along a street, emits detections for every
object falling inside a camera's frustum by inverting the pipeline's own
projection model, and perturbs the records with a configurable noise model.
Noise-free scenes therefore round-trip through the pipeline exactly, which
is what makes the generator usable as a verification oracle.

The default street runs due east, so every capture point shares one
latitude; all the equirectangular charts used during triangulation then
agree to the last bit and noise-free reconstructions are exact to float
rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    CameraFrame,
    Detection,
    GeoPoint,
    LocalChart,
    haversine_distance,
    normalize_bearing,
    wrap_degrees,
)
from .pipeline import GroundTruthObject

DUBLIN_ANCHOR = GeoPoint(53.3405, -6.2489)


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean Gaussian perturbations plus miss / false-positive rates."""

    bearing_sigma: float = 0.0  # degrees, horizontal detection error
    depth_sigma: float = 0.0  # meters, monocular depth error
    gps_sigma: float = 0.0  # meters, recorded camera position error
    pixel_sigma: float = 0.0  # pixels, detection centre error (both axes)
    false_positive_rate: float = 0.0  # probability of a spurious detection per image
    miss_rate: float = 0.0  # probability of dropping a visible object

    def __post_init__(self) -> None:
        for name in ("bearing_sigma", "depth_sigma", "gps_sigma", "pixel_sigma"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("false_positive_rate", "miss_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


@dataclass(frozen=True)
class SceneSpec:
    """Layout of one synthetic survey.

    Capture points are spaced along the street with ``views_per_point``
    headings covering the full panorama. Objects are placed in the chart
    anchored at ``anchor``: x meters east along the street, y meters north
    of it.
    """

    seed: int = 0
    street_length: float = 45.0
    capture_spacing: float = 3.0
    views_per_point: int = 6
    fov: float = 68.77
    camera_height: float = 2.18
    camera_pitch: float = 0.0
    fov_top: float | None = None
    fov_bottom: float | None = None
    image_width: int = 2046
    image_height: int = 2046
    anchor: GeoPoint = DUBLIN_ANCHOR
    street_bearing: float = 90.0
    objects: tuple[GroundTruthObject, ...] = ()
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    max_detection_distance: float = 30.0

    def __post_init__(self) -> None:
        if self.capture_spacing <= 0.0:
            raise ValueError("capture_spacing must be > 0")
        if self.views_per_point < 1:
            raise ValueError("views_per_point must be >= 1")
        if self.street_length < 0.0:
            raise ValueError("street_length must be >= 0")


def place_objects(
    seed: int,
    count: int,
    classes: tuple[str, ...] = ("drain", "sign"),
    elevations: dict[str, float] | None = None,
    street_length: float = 45.0,
    anchor: GeoPoint = DUBLIN_ANCHOR,
    lateral_range: tuple[float, float] = (4.0, 9.0),
) -> tuple[GroundTruthObject, ...]:
    """Deterministic object layout along a street.

    Objects are spread evenly along the street with jitter, alternate
    between the north and south side, and cycle through the classes.
    Default elevations: drains at ground level, signs at 2.4 m.
    """
    if elevations is None:
        elevations = {"drain": 0.0, "sign": 2.4}
    rng = np.random.default_rng(seed)
    chart = LocalChart(anchor)
    objects = []
    for k in range(count):
        along = (k + 0.5) / count * street_length + rng.uniform(-0.8, 0.8)
        lateral = rng.uniform(*lateral_range) * (1 if k % 2 == 0 else -1)
        label = classes[k % len(classes)]
        position = chart.to_geo(along, lateral)
        objects.append(GroundTruthObject(label, position, elevations.get(label, 0.0)))
    return tuple(objects)


def _perturb_position(chart: LocalChart, p: GeoPoint, rng, sigma: float) -> GeoPoint:
    x, y = chart.to_xy(p)
    return chart.to_geo(x + rng.normal(0.0, sigma), y + rng.normal(0.0, sigma))


def generate(
    spec: SceneSpec,
) -> tuple[list[CameraFrame], list[Detection], list[GroundTruthObject]]:
    """Produce (frames, detections, ground truth) for a scene.

    Detection pixel coordinates are exact inversions of the pipeline's
    bearing and pitch maps evaluated at the true camera pose; the recorded
    camera pose, pixels and depth are then perturbed per the noise model.
    Fully deterministic given the spec (including its seed).
    """
    rng = np.random.default_rng(spec.seed)
    noise = spec.noise
    chart = LocalChart(spec.anchor)
    street_rad = math.radians(spec.street_bearing)
    n_points = int(spec.street_length // spec.capture_spacing) + 1
    half_fov = spec.fov / 2.0
    delta = 0.0
    if spec.fov_top is not None and spec.fov_bottom is not None:
        delta = (spec.fov_top - spec.fov_bottom) / 2.0
    classes = sorted({obj.class_label for obj in spec.objects})

    frames: list[CameraFrame] = []
    detections: list[Detection] = []
    for p in range(n_points):
        along = p * spec.capture_spacing
        true_pos = chart.to_geo(along * math.sin(street_rad), along * math.cos(street_rad))
        recorded_pos = true_pos
        if noise.gps_sigma > 0.0:
            recorded_pos = _perturb_position(chart, true_pos, rng, noise.gps_sigma)
        cam_chart = LocalChart(true_pos)
        for v in range(spec.views_per_point):
            heading = normalize_bearing(v * 360.0 / spec.views_per_point)
            image_id = f"p{p:04d}_v{v}"
            frames.append(
                CameraFrame(
                    image_id=image_id,
                    position=recorded_pos,
                    heading=heading,
                    pitch=spec.camera_pitch,
                    fov=spec.fov,
                    image_width=spec.image_width,
                    image_height=spec.image_height,
                    fov_top=spec.fov_top,
                    fov_bottom=spec.fov_bottom,
                    camera_height=spec.camera_height,
                )
            )
            for obj in spec.objects:
                d = haversine_distance(true_pos, obj.position)
                if not 0.0 < d <= spec.max_detection_distance:
                    continue
                bearing = cam_chart.bearing_to(true_pos, obj.position)
                px = (
                    spec.image_width / 2.0
                    + wrap_degrees(bearing - heading) / half_fov * spec.image_width / 2.0
                )
                if not 0.0 <= px < spec.image_width:
                    continue
                elevation = obj.elevation if obj.elevation is not None else 0.0
                gamma = math.degrees(math.atan2(elevation - spec.camera_height, d))
                py = (
                    spec.image_height / 2.0
                    - (gamma + spec.camera_pitch - delta) / half_fov * spec.image_height / 2.0
                )
                if not 0.0 <= py < spec.image_height:
                    continue
                if noise.miss_rate > 0.0 and rng.random() < noise.miss_rate:
                    continue
                if noise.bearing_sigma > 0.0:
                    px += rng.normal(0.0, noise.bearing_sigma) / half_fov * spec.image_width / 2.0
                if noise.pixel_sigma > 0.0:
                    px += rng.normal(0.0, noise.pixel_sigma)
                    py += rng.normal(0.0, noise.pixel_sigma)
                px = min(max(px, 0.0), spec.image_width - 1.0)
                py = min(max(py, 0.0), spec.image_height - 1.0)
                depth = d
                if noise.depth_sigma > 0.0:
                    depth = max(d + rng.normal(0.0, noise.depth_sigma), 0.1)
                detections.append(Detection(image_id, obj.class_label, px, py, depth))
            if classes and noise.false_positive_rate > 0.0 and rng.random() < noise.false_positive_rate:
                detections.append(
                    Detection(
                        image_id,
                        classes[int(rng.integers(len(classes)))],
                        float(rng.uniform(0.0, spec.image_width - 1.0)),
                        float(rng.uniform(0.0, spec.image_height - 1.0)),
                        float(rng.uniform(1.0, 30.0)),
                    )
                )
    return frames, detections, list(spec.objects)

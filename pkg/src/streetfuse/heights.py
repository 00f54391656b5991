"""Per-view object elevations from camera geometry.

A single view gives the object's elevation as ``d * tan(pitch) + camera
height``, with the pitch read off the detection's pixel row. Estimates from
all views of an object are aggregated into mean/median/std statistics, and
ground-level reference objects turn the same relation around to calibrate
the camera height itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Iterable, Sequence

from .geometry import CameraFrame, Detection, pixel_pitch

if TYPE_CHECKING:
    from .mrf import MrfGraph

PITCH_MODES = ("zero", "camera", "corrected")


class DegenerateGeometryError(ValueError):
    """Raised when an object pitch reaches or exceeds +/-90 degrees."""


class CalibrationError(ValueError):
    """Raised when camera-height calibration has no usable input."""


@dataclass(frozen=True)
class HeightEstimate:
    """Aggregated height of one object over its single-view estimates."""

    per_view: tuple[tuple[str, float], ...]
    mean: float
    median: float
    std: float


@dataclass(frozen=True)
class CameraHeightCalibration:
    """Camera height inferred from ground-level reference objects."""

    mean_based: float
    median_based: float
    sample_count: int


def lower_median(values: Sequence[float]) -> float:
    """Median taking the lower middle value for even-sized input."""
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def pitch_for_mode(frame: CameraFrame, det: Detection, mode: str = "corrected") -> float:
    """Detection pitch under one of the three correction modes.

    ``zero`` ignores the camera's own pitch entirely, ``camera`` subtracts
    it, ``corrected`` additionally applies the lens offset.
    """
    if mode == "zero":
        return pixel_pitch(replace(frame, pitch=0.0), det, corrected=False)
    if mode == "camera":
        return pixel_pitch(frame, det, corrected=False)
    if mode == "corrected":
        return pixel_pitch(frame, det, corrected=True)
    raise ValueError(f"unknown pitch mode {mode!r}; expected one of {PITCH_MODES}")


def single_view_height(
    frame: CameraFrame, det: Detection, distance: float, mode: str = "corrected"
) -> float:
    """Object elevation seen from one camera: d * tan(pitch) + camera height."""
    if distance <= 0.0:
        raise ValueError(f"distance must be > 0, got {distance!r}")
    gamma = pitch_for_mode(frame, det, mode)
    if abs(gamma) >= 90.0:
        raise DegenerateGeometryError(
            f"{frame.image_id}: object pitch {gamma:.3f} deg outside the frustum"
        )
    return distance * math.tan(math.radians(gamma)) + frame.camera_height


def node_heights(graph: "MrfGraph", mode: str = "corrected") -> None:
    """Fill every graph node with its two single-view height estimates.

    A node whose geometry cannot produce a height (degenerate pitch) is
    flagged instead; the energy treats such nodes with a large fixed
    penalty.
    """
    for node in graph.nodes:
        values = []
        degenerate = False
        for ray, dist in ((node.ray_a, node.tri_dist[0]), (node.ray_b, node.tri_dist[1])):
            try:
                values.append(single_view_height(ray.frame, ray.detection, dist, mode))
            except DegenerateGeometryError:
                degenerate = True
                break
        if degenerate:
            node.heights = None
            node.height_degenerate = True
        else:
            node.heights = (values[0], values[1])
            node.height_degenerate = False


def aggregate(per_view: Iterable[tuple[str, float]]) -> HeightEstimate:
    """Mean, lower-middle median and population std of per-view heights."""
    entries = tuple(per_view)
    if not entries:
        raise ValueError("aggregate needs at least one height estimate")
    values = [h for _, h in entries]
    mean = sum(values) / len(values)
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
    return HeightEstimate(entries, mean, lower_median(values), std)


def calibrate_camera_height(instances) -> CameraHeightCalibration:
    """Camera height from objects of known zero elevation.

    The instances must have been estimated with the camera height set to
    zero; their (negated) elevations then measure the camera's own height.
    """
    elevations = [inst.height.mean for inst in instances]
    if not elevations:
        raise CalibrationError("no instances available for camera-height calibration")
    return CameraHeightCalibration(
        mean_based=-(sum(elevations) / len(elevations)),
        median_based=-lower_median(elevations),
        sample_count=len(elevations),
    )

"""End-to-end fusion, ground-truth matching and hyperparameter search.

The pipeline runs per object class: detections become rays, rays an
intersection graph, the graph a pseudo-Boolean problem solved exactly, and
the positive nodes are clustered into object instances carrying aggregated
height statistics.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, replace

from .clustering import agglomerate, split_by_pair_count
from .config import RunConfig
from .geometry import CameraFrame, Detection, GeoPoint, Ray, haversine_distance, make_ray
from .heights import (
    CalibrationError,
    DegenerateGeometryError,
    HeightEstimate,
    aggregate,
    calibrate_camera_height,
    lower_median,
    single_view_height,
)
from .mrf import build_graph
from .heights import node_heights
from .qpbo import from_mrf, solve_complete

logger = logging.getLogger(__name__)


class InputValidationError(ValueError):
    """A detection or frame record that cannot be processed."""


@dataclass(frozen=True)
class GroundTruthObject:
    """Reference object: class, position, and optional true elevation."""

    class_label: str
    position: GeoPoint
    elevation: float | None = None


@dataclass(frozen=True)
class ObjectInstance:
    """One fused output object."""

    class_label: str
    position: GeoPoint
    view_count: int
    height: HeightEstimate


@dataclass(frozen=True)
class MatchRecord:
    prediction: ObjectInstance
    truth: GroundTruthObject
    distance: float


@dataclass(frozen=True)
class EvalReport:
    """Detection metrics plus position/height error statistics (meters)."""

    precision: float
    recall: float
    f_score: float
    position_error_mean: float
    position_error_median: float
    height_error_mean: float
    height_error_median: float
    height_std_mean: float
    true_positives: int
    false_positives: int
    false_negatives: int
    matches: tuple[MatchRecord, ...]


def validate_inputs(frames: list[CameraFrame], detections: list[Detection]) -> dict[str, CameraFrame]:
    """Cross-check detections against frames; returns the frame index."""
    by_id: dict[str, CameraFrame] = {}
    for frame in frames:
        if frame.image_id in by_id:
            raise InputValidationError(f"duplicate frame image_id {frame.image_id!r}")
        by_id[frame.image_id] = frame
    for k, det in enumerate(detections):
        frame = by_id.get(det.image_id)
        if frame is None:
            raise InputValidationError(
                f"detection #{k} ({det.class_label!r}): unknown image_id {det.image_id!r}"
            )
        if not (0.0 <= det.pixel_x < frame.image_width and 0.0 <= det.pixel_y < frame.image_height):
            raise InputValidationError(
                f"detection #{k} ({det.image_id!r}): pixel ({det.pixel_x!r}, {det.pixel_y!r}) "
                f"outside {frame.image_width}x{frame.image_height} image"
            )
    return by_id


def _supporting_rays(members) -> list[Ray]:
    """Distinct rays supporting a cluster, in first-seen member order."""
    seen: dict[Ray, None] = {}
    for node in members:
        seen.setdefault(node.ray_a)
        seen.setdefault(node.ray_b)
    return list(seen)


def _instances_for_class(
    class_label: str,
    frames_by_id: dict[str, CameraFrame],
    detections: list[Detection],
    config: RunConfig,
) -> list[ObjectInstance]:
    rays = [make_ray(frames_by_id[d.image_id], d) for d in detections]
    graph = build_graph(rays, config.max_ray_distance, class_label)
    if not graph.nodes:
        return []
    node_heights(graph, mode="corrected")  # vertical-consistency term input
    problem = from_mrf(graph, config.weights, config.u0_variant)
    labeling = solve_complete(problem)
    positive = [node for node, z in zip(graph.nodes, labeling.labels) if z]
    clusters = agglomerate(positive, config.linkage_cutoff)
    if config.split_clusters:
        clusters = [part for c in clusters for part in split_by_pair_count(c)]

    instances = []
    for cluster in clusters:
        support = _supporting_rays(cluster.members)
        per_view = []
        for ray in support:
            distance = haversine_distance(ray.frame.position, cluster.center)
            if distance <= 0.0:
                continue
            try:
                h = single_view_height(ray.frame, ray.detection, distance, config.pitch_mode)
            except DegenerateGeometryError:
                logger.warning("%s: degenerate view geometry skipped", ray.frame.image_id)
                continue
            per_view.append((ray.frame.image_id, h))
        if not per_view:
            logger.warning(
                "%s cluster at (%.6f, %.6f) dropped: no usable height view",
                class_label,
                cluster.center.lat,
                cluster.center.lon,
            )
            continue
        view_count = len({image_id for image_id, _ in per_view})
        instances.append(
            ObjectInstance(class_label, cluster.center, view_count, aggregate(per_view))
        )
    return instances


def _run_once(
    frames: list[CameraFrame],
    detections: list[Detection],
    config: RunConfig,
    camera_height_override: float | None,
) -> list[ObjectInstance]:
    if camera_height_override is not None:
        frames = [replace(f, camera_height=camera_height_override) for f in frames]
    frames_by_id = validate_inputs(frames, detections)
    by_class: dict[str, list[Detection]] = {}
    for det in detections:
        by_class.setdefault(det.class_label, []).append(det)
    instances = []
    for class_label in sorted(by_class):
        instances.extend(
            _instances_for_class(class_label, frames_by_id, by_class[class_label], config)
        )
    instances.sort(key=lambda i: (i.class_label, i.position.lat, i.position.lon))
    return instances


def run_pipeline(
    frames: list[CameraFrame], detections: list[Detection], config: RunConfig
) -> list[ObjectInstance]:
    """Fuse detections into geolocated object instances with heights.

    When the configuration asks for camera-height calibration, a first pass
    runs with the camera height zeroed, the requested class's instances
    calibrate the height, and the final pass uses the calibrated value.
    """
    if config.calibrate_class is not None:
        reference = [
            inst
            for inst in _run_once(frames, detections, config, 0.0)
            if inst.class_label == config.calibrate_class
        ]
        if not reference:
            raise CalibrationError(
                f"no instances of class {config.calibrate_class!r} to calibrate from"
            )
        calibration = calibrate_camera_height(reference)
        logger.info(
            "camera height calibrated from %d %r instances: %.3f m",
            calibration.sample_count,
            config.calibrate_class,
            calibration.mean_based,
        )
        return _run_once(frames, detections, config, calibration.mean_based)
    return _run_once(frames, detections, config, config.camera_height)


def match_and_score(
    predictions: list[ObjectInstance],
    ground_truth: list[GroundTruthObject],
    tp_radius: float = 6.0,
) -> EvalReport:
    """Greedy nearest-first one-to-one matching and metric computation.

    A prediction is a true positive when a ground-truth object of the same
    class lies within ``tp_radius``; every prediction and truth is used at
    most once. Height error statistics cover matched pairs whose truth
    carries an elevation.
    """
    if tp_radius <= 0.0:
        raise ValueError(f"tp_radius must be > 0, got {tp_radius!r}")
    candidates = []
    for pi, pred in enumerate(predictions):
        for ti, truth in enumerate(ground_truth):
            if pred.class_label != truth.class_label:
                continue
            d = haversine_distance(pred.position, truth.position)
            if d <= tp_radius:
                candidates.append((d, pi, ti))
    candidates.sort()
    used_pred: set[int] = set()
    used_truth: set[int] = set()
    matches = []
    for d, pi, ti in candidates:
        if pi in used_pred or ti in used_truth:
            continue
        used_pred.add(pi)
        used_truth.add(ti)
        matches.append(MatchRecord(predictions[pi], ground_truth[ti], d))

    tp = len(matches)
    fp = len(predictions) - tp
    fn = len(ground_truth) - tp
    precision = tp / len(predictions) if predictions else 0.0
    recall = tp / len(ground_truth) if ground_truth else 0.0
    f_score = 2.0 * precision * recall / (precision + recall) if precision + recall > 0.0 else 0.0

    nan = float("nan")
    if matches:
        distances = [m.distance for m in matches]
        pos_mean = sum(distances) / len(distances)
        pos_median = lower_median(distances)
        std_mean = sum(m.prediction.height.std for m in matches) / len(matches)
    else:
        pos_mean = pos_median = std_mean = nan
    height_errors = [
        abs(m.prediction.height.mean - m.truth.elevation)
        for m in matches
        if m.truth.elevation is not None
    ]
    if height_errors:
        h_mean = sum(height_errors) / len(height_errors)
        h_median = lower_median(height_errors)
    else:
        h_mean = h_median = nan

    return EvalReport(
        precision=precision,
        recall=recall,
        f_score=f_score,
        position_error_mean=pos_mean,
        position_error_median=pos_median,
        height_error_mean=h_mean,
        height_error_median=h_median,
        height_std_mean=std_mean,
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
        matches=tuple(matches),
    )


@dataclass(frozen=True)
class GridSearchResult:
    best_config: RunConfig
    best_report: EvalReport
    evaluated: int
    skipped: int


def grid_search(
    frames: list[CameraFrame],
    detections: list[Detection],
    validation_truth: list[GroundTruthObject],
    alphas: list[float],
    betas: list[float],
    lams: list[float],
    linkage_cutoffs: list[float],
    base_config: RunConfig | None = None,
) -> GridSearchResult:
    """Exhaustive search maximizing f-score on the validation truth.

    Combinations whose unary weights sum beyond 1 are skipped. Ties are
    broken by lower mean position error, then by lexicographic parameter
    order (the first combination evaluated wins).
    """
    if not (alphas and betas and lams and linkage_cutoffs):
        raise ValueError("every grid must be non-empty")
    base = base_config if base_config is not None else RunConfig()
    best: tuple[float, float] | None = None  # (-f_score, position error)
    best_config = None
    best_report = None
    evaluated = 0
    skipped = 0
    grid = itertools.product(sorted(alphas), sorted(betas), sorted(lams), sorted(linkage_cutoffs))
    for alpha, beta, lam, cutoff in grid:
        if alpha + beta + lam > 1.0:
            logger.info("skipping alpha=%s beta=%s lam=%s: weights exceed 1", alpha, beta, lam)
            skipped += 1
            continue
        config = replace(base, alpha=alpha, beta=beta, lam=lam, linkage_cutoff=cutoff)
        report = match_and_score(
            run_pipeline(frames, detections, config), validation_truth, base.tp_radius
        )
        evaluated += 1
        err = report.position_error_mean
        key = (-report.f_score, err if not math.isnan(err) else math.inf)
        if best is None or key < best:
            best = key
            best_config = config
            best_report = report
    if best_config is None:
        raise ValueError("no valid weight combination in the grids")
    return GridSearchResult(best_config, best_report, evaluated, skipped)

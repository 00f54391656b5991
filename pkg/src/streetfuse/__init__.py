"""Multi-view street-level detection fusion.

Triangulates per-image object detections into candidate positions, selects
the real ones by exact minimization of a binary MRF energy, clusters them
into object instances and estimates each instance's above-ground height
from camera geometry.
"""

from .config import ConfigError, RunConfig
from .geometry import (
    EARTH_RADIUS_M,
    CameraFrame,
    Detection,
    GeoPoint,
    LocalChart,
    Ray,
    detection_bearing,
    haversine_distance,
    intersect_rays,
    make_ray,
    pixel_pitch,
)
from .heights import (
    CalibrationError,
    DegenerateGeometryError,
    HeightEstimate,
    aggregate,
    calibrate_camera_height,
    single_view_height,
)
from .mrf import MrfGraph, MrfWeights, build_graph, energy
from .pipeline import (
    EvalReport,
    GroundTruthObject,
    InputValidationError,
    ObjectInstance,
    grid_search,
    match_and_score,
    run_pipeline,
)
from .qpbo import Labeling, PseudoBooleanProblem, from_mrf, solve_complete, solve_roof_duality
from .simulate import NoiseSpec, SceneSpec, generate, place_objects

__version__ = "0.1.0"

__all__ = [
    "CameraFrame",
    "CalibrationError",
    "ConfigError",
    "DegenerateGeometryError",
    "Detection",
    "EARTH_RADIUS_M",
    "EvalReport",
    "GeoPoint",
    "GroundTruthObject",
    "HeightEstimate",
    "InputValidationError",
    "Labeling",
    "LocalChart",
    "MrfGraph",
    "MrfWeights",
    "NoiseSpec",
    "ObjectInstance",
    "PseudoBooleanProblem",
    "Ray",
    "RunConfig",
    "SceneSpec",
    "aggregate",
    "build_graph",
    "calibrate_camera_height",
    "detection_bearing",
    "energy",
    "from_mrf",
    "generate",
    "grid_search",
    "haversine_distance",
    "intersect_rays",
    "make_ray",
    "match_and_score",
    "pixel_pitch",
    "place_objects",
    "run_pipeline",
    "single_view_height",
    "solve_complete",
    "solve_roof_duality",
]

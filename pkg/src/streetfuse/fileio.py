"""File formats: CSV records for frames/detections/truth/instances and a
GeoJSON point-feature export.

Inputs are line-delimited CSV with a fixed header; floats round-trip at
full precision. Instance exports use fixed decimal formatting (9 places
for degrees, 3 for meters) so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

from .geometry import CameraFrame, Detection, GeoPoint
from .heights import HeightEstimate
from .pipeline import EvalReport, GroundTruthObject, ObjectInstance, validate_inputs

FRAME_FIELDS = [
    "image_id",
    "lat",
    "lon",
    "heading",
    "pitch",
    "fov",
    "width",
    "height",
    "fov_top",
    "fov_bottom",
    "camera_height",
]
DETECTION_FIELDS = ["image_id", "class", "pixel_x", "pixel_y", "mono_depth"]
GROUND_TRUTH_FIELDS = ["class", "lat", "lon", "elevation"]
INSTANCE_FIELDS = [
    "class",
    "lat",
    "lon",
    "height_mean",
    "height_median",
    "height_std",
    "view_count",
]
REPORT_FIELDS = [
    "precision",
    "recall",
    "f_score",
    "error_mean",
    "error_median",
    "height_error_mean",
    "height_error_median",
    "height_std_mean",
    "true_positives",
    "false_positives",
    "false_negatives",
]


class InputFormatError(ValueError):
    """A malformed input file; the message carries file and line number."""


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def _deg(value: float) -> str:
    return f"{value:.9f}"


def _meters(value: float) -> str:
    return f"{value:.3f}"


class _RowReader:
    """CSV reader that validates the header and reports precise positions."""

    def __init__(self, path: str | Path, fields: list[str]):
        self.path = Path(path)
        self.fields = fields

    def __enter__(self):
        self._fh = open(self.path, "r", encoding="utf-8", newline="")
        self._reader = csv.reader(self._fh)
        header = next(self._reader, None)
        if header != self.fields:
            self._fh.close()
            raise InputFormatError(
                f"{self.path}:1: expected header {','.join(self.fields)}, "
                f"got {','.join(header) if header else '<empty file>'}"
            )
        return self

    def __exit__(self, *exc):
        self._fh.close()
        return False

    def rows(self):
        for lineno, row in enumerate(self._reader, start=2):
            if not row:
                continue
            if len(row) != len(self.fields):
                raise InputFormatError(
                    f"{self.path}:{lineno}: expected {len(self.fields)} fields, got {len(row)}"
                )
            yield lineno, row

    def fail(self, lineno: int, message: str):
        raise InputFormatError(f"{self.path}:{lineno}: {message}")


def _parse_float(reader: _RowReader, lineno: int, name: str, raw: str, optional: bool = False):
    if raw == "":
        if optional:
            return None
        reader.fail(lineno, f"missing value for {name}")
    try:
        return float(raw)
    except ValueError:
        reader.fail(lineno, f"bad {name}: {raw!r}")


def _parse_int(reader: _RowReader, lineno: int, name: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        reader.fail(lineno, f"bad {name}: {raw!r}")


def read_frames(path: str | Path) -> list[CameraFrame]:
    frames = []
    with _RowReader(path, FRAME_FIELDS) as reader:
        for lineno, row in reader.rows():
            values = dict(zip(FRAME_FIELDS, row))
            try:
                frames.append(
                    CameraFrame(
                        image_id=values["image_id"],
                        position=GeoPoint(
                            _parse_float(reader, lineno, "lat", values["lat"]),
                            _parse_float(reader, lineno, "lon", values["lon"]),
                        ),
                        heading=_parse_float(reader, lineno, "heading", values["heading"]),
                        pitch=_parse_float(reader, lineno, "pitch", values["pitch"]),
                        fov=_parse_float(reader, lineno, "fov", values["fov"]),
                        image_width=_parse_int(reader, lineno, "width", values["width"]),
                        image_height=_parse_int(reader, lineno, "height", values["height"]),
                        fov_top=_parse_float(reader, lineno, "fov_top", values["fov_top"], optional=True),
                        fov_bottom=_parse_float(
                            reader, lineno, "fov_bottom", values["fov_bottom"], optional=True
                        ),
                        camera_height=_parse_float(
                            reader, lineno, "camera_height", values["camera_height"]
                        ),
                    )
                )
            except ValueError as exc:
                if isinstance(exc, InputFormatError):
                    raise
                reader.fail(lineno, str(exc))
    return frames


def read_detections(path: str | Path) -> list[Detection]:
    detections = []
    with _RowReader(path, DETECTION_FIELDS) as reader:
        for lineno, row in reader.rows():
            values = dict(zip(DETECTION_FIELDS, row))
            try:
                detections.append(
                    Detection(
                        image_id=values["image_id"],
                        class_label=values["class"],
                        pixel_x=_parse_float(reader, lineno, "pixel_x", values["pixel_x"]),
                        pixel_y=_parse_float(reader, lineno, "pixel_y", values["pixel_y"]),
                        mono_depth=_parse_float(
                            reader, lineno, "mono_depth", values["mono_depth"], optional=True
                        ),
                    )
                )
            except ValueError as exc:
                if isinstance(exc, InputFormatError):
                    raise
                reader.fail(lineno, str(exc))
    return detections


def parse_inputs(
    frames_path: str | Path, detections_path: str | Path
) -> tuple[list[CameraFrame], list[Detection]]:
    """Read both input files and validate their cross-references."""
    frames = read_frames(frames_path)
    detections = read_detections(detections_path)
    validate_inputs(frames, detections)
    return frames, detections


def read_ground_truth(path: str | Path) -> list[GroundTruthObject]:
    objects = []
    with _RowReader(path, GROUND_TRUTH_FIELDS) as reader:
        for lineno, row in reader.rows():
            values = dict(zip(GROUND_TRUTH_FIELDS, row))
            try:
                objects.append(
                    GroundTruthObject(
                        class_label=values["class"],
                        position=GeoPoint(
                            _parse_float(reader, lineno, "lat", values["lat"]),
                            _parse_float(reader, lineno, "lon", values["lon"]),
                        ),
                        elevation=_parse_float(
                            reader, lineno, "elevation", values["elevation"], optional=True
                        ),
                    )
                )
            except ValueError as exc:
                if isinstance(exc, InputFormatError):
                    raise
                reader.fail(lineno, str(exc))
    return objects


def _write_rows(path: str | Path, fields: list[str], rows: Iterable[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_frames(frames: list[CameraFrame], path: str | Path) -> None:
    _write_rows(
        path,
        FRAME_FIELDS,
        (
            [
                f.image_id,
                f.position.lat,
                f.position.lon,
                f.heading,
                f.pitch,
                f.fov,
                f.image_width,
                f.image_height,
                f.fov_top,
                f.fov_bottom,
                f.camera_height,
            ]
            for f in frames
        ),
    )


def write_detections(detections: list[Detection], path: str | Path) -> None:
    _write_rows(
        path,
        DETECTION_FIELDS,
        ([d.image_id, d.class_label, d.pixel_x, d.pixel_y, d.mono_depth] for d in detections),
    )


def write_ground_truth(objects: list[GroundTruthObject], path: str | Path) -> None:
    _write_rows(
        path,
        GROUND_TRUTH_FIELDS,
        ([o.class_label, o.position.lat, o.position.lon, o.elevation] for o in objects),
    )


def write_instances_csv(instances: list[ObjectInstance], path: str | Path) -> None:
    _write_rows(
        path,
        INSTANCE_FIELDS,
        (
            [
                inst.class_label,
                _deg(inst.position.lat),
                _deg(inst.position.lon),
                _meters(inst.height.mean),
                _meters(inst.height.median),
                _meters(inst.height.std),
                inst.view_count,
            ]
            for inst in instances
        ),
    )


def read_instances_csv(path: str | Path) -> list[ObjectInstance]:
    """Read back an instances file.

    Only the aggregated height statistics survive serialization; the
    per-view list of a loaded instance is empty.
    """
    instances = []
    with _RowReader(path, INSTANCE_FIELDS) as reader:
        for lineno, row in reader.rows():
            values = dict(zip(INSTANCE_FIELDS, row))
            try:
                height = HeightEstimate(
                    per_view=(),
                    mean=_parse_float(reader, lineno, "height_mean", values["height_mean"]),
                    median=_parse_float(reader, lineno, "height_median", values["height_median"]),
                    std=_parse_float(reader, lineno, "height_std", values["height_std"]),
                )
                instances.append(
                    ObjectInstance(
                        class_label=values["class"],
                        position=GeoPoint(
                            _parse_float(reader, lineno, "lat", values["lat"]),
                            _parse_float(reader, lineno, "lon", values["lon"]),
                        ),
                        view_count=_parse_int(reader, lineno, "view_count", values["view_count"]),
                        height=height,
                    )
                )
            except ValueError as exc:
                if isinstance(exc, InputFormatError):
                    raise
                reader.fail(lineno, str(exc))
    return instances


def _json_string(text: str) -> str:
    import json

    return json.dumps(text, ensure_ascii=False)


def write_instances_geojson(instances: list[ObjectInstance], path: str | Path) -> None:
    """GeoJSON FeatureCollection of point features, one per instance.

    Coordinates are [longitude, latitude] with 9 decimal places; height
    statistics carry 3. The writer formats numbers itself so output bytes
    are stable across runs and platforms.
    """
    features = []
    for inst in instances:
        features.append(
            "    {\n"
            '      "type": "Feature",\n'
            '      "geometry": {"type": "Point", "coordinates": '
            f"[{_deg(inst.position.lon)}, {_deg(inst.position.lat)}]}},\n"
            '      "properties": {\n'
            f'        "class": {_json_string(inst.class_label)},\n'
            f'        "height_mean": {_meters(inst.height.mean)},\n'
            f'        "height_median": {_meters(inst.height.median)},\n'
            f'        "height_std": {_meters(inst.height.std)},\n'
            f'        "view_count": {inst.view_count}\n'
            "      }\n"
            "    }"
        )
    body = ",\n".join(features)
    text = '{\n  "type": "FeatureCollection",\n  "features": [\n' + body + "\n  ]\n}\n"
    if not features:
        text = '{\n  "type": "FeatureCollection",\n  "features": []\n}\n'
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def export_instances(instances: list[ObjectInstance], path: str | Path, format: str = "csv") -> None:
    """Write instances as delimited records ("csv") or GeoJSON ("geojson")."""
    if format == "csv":
        write_instances_csv(instances, path)
    elif format == "geojson":
        write_instances_geojson(instances, path)
    else:
        raise ValueError(f"unknown export format {format!r}; expected 'csv' or 'geojson'")


def write_eval_report(report: EvalReport, path: str | Path) -> None:
    _write_rows(
        path,
        REPORT_FIELDS,
        [
            [
                f"{report.precision:.6f}",
                f"{report.recall:.6f}",
                f"{report.f_score:.6f}",
                _meters(report.position_error_mean),
                _meters(report.position_error_median),
                _meters(report.height_error_mean),
                _meters(report.height_error_median),
                _meters(report.height_std_mean),
                report.true_positives,
                report.false_positives,
                report.false_negatives,
            ]
        ],
    )


def write_matches_csv(report: EvalReport, path: str | Path) -> None:
    rows = []
    for m in report.matches:
        height_error = (
            _meters(abs(m.prediction.height.mean - m.truth.elevation))
            if m.truth.elevation is not None
            else ""
        )
        rows.append(
            [
                m.prediction.class_label,
                _deg(m.prediction.position.lat),
                _deg(m.prediction.position.lon),
                _deg(m.truth.position.lat),
                _deg(m.truth.position.lon),
                _meters(m.distance),
                height_error,
            ]
        )
    _write_rows(
        path,
        ["class", "pred_lat", "pred_lon", "truth_lat", "truth_lon", "distance", "height_error"],
        rows,
    )


def format_eval_table(report: EvalReport) -> str:
    """Fixed-width metric table: detection columns plus error statistics."""
    headers = ["precision", "recall", "f-score", "error mean", "error median"]
    values = [
        f"{report.precision:.3f}",
        f"{report.recall:.3f}",
        f"{report.f_score:.3f}",
        _meters(report.position_error_mean),
        _meters(report.position_error_median),
    ]
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    head = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    vals = "  ".join(v.rjust(w) for v, w in zip(values, widths))
    lines = [head, vals]
    lines.append(
        "height: error mean %s  error median %s  std mean %s"
        % (
            _meters(report.height_error_mean),
            _meters(report.height_error_median),
            _meters(report.height_std_mean),
        )
    )
    lines.append(
        "matches: %d tp  %d fp  %d fn"
        % (report.true_positives, report.false_positives, report.false_negatives)
    )
    return "\n".join(lines)

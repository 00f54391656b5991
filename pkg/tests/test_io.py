"""Input parsing, export formats, and round-trip identities."""

import json
from pathlib import Path

import pytest

from streetfuse import fileio
from streetfuse.fileio import InputFormatError
from streetfuse.geometry import GeoPoint
from streetfuse.heights import HeightEstimate
from streetfuse.pipeline import InputValidationError, ObjectInstance
from streetfuse.simulate import NoiseSpec, SceneSpec, generate, place_objects

DATA = Path(__file__).parent / "data"


def scene_files(tmp_path, noise=NoiseSpec()):
    objects = place_objects(seed=2, count=4, street_length=21.0)
    spec = SceneSpec(seed=2, street_length=21.0, objects=objects, noise=noise)
    frames, detections, truth = generate(spec)
    fileio.write_frames(frames, tmp_path / "frames.csv")
    fileio.write_detections(detections, tmp_path / "detections.csv")
    fileio.write_ground_truth(truth, tmp_path / "ground_truth.csv")
    return frames, detections, truth


class TestRoundTrips:
    def test_frames_and_detections_round_trip_losslessly(self, tmp_path):
        frames, detections, truth = scene_files(
            tmp_path, NoiseSpec(bearing_sigma=0.4, gps_sigma=0.2, depth_sigma=0.9)
        )
        got_frames, got_dets = fileio.parse_inputs(
            tmp_path / "frames.csv", tmp_path / "detections.csv"
        )
        assert got_frames == frames
        assert got_dets == detections
        assert fileio.read_ground_truth(tmp_path / "ground_truth.csv") == truth

    def test_instances_csv_round_trip_at_format_precision(self, tmp_path):
        est = HeightEstimate((("a", 1.25),), 1.25, 1.25, 0.125)
        inst = ObjectInstance("sign", GeoPoint(53.34, -6.25), 4, est)
        fileio.write_instances_csv([inst], tmp_path / "i.csv")
        (got,) = fileio.read_instances_csv(tmp_path / "i.csv")
        assert got.class_label == "sign"
        assert got.view_count == 4
        assert got.position.lat == pytest.approx(53.34, abs=1e-9)
        assert got.height.mean == pytest.approx(1.25, abs=1e-3)
        assert got.height.per_view == ()

    def test_empty_detections_file_is_valid(self, tmp_path):
        fileio.write_detections([], tmp_path / "empty.csv")
        assert fileio.read_detections(tmp_path / "empty.csv") == []


class TestParseErrors:
    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "frames.csv"
        path.write_text(
            ",".join(fileio.FRAME_FIELDS)
            + "\nimg1,53.0,-6.0,0,0,68.77,2046,2046,,,2.18\nimg2,not-a-number,-6.0,0,0,68.77,2046,2046,,,2.18\n"
        )
        with pytest.raises(InputFormatError, match=r"frames\.csv:3"):
            fileio.read_frames(path)

    def test_wrong_field_count_reports_line(self, tmp_path):
        path = tmp_path / "detections.csv"
        path.write_text(",".join(fileio.DETECTION_FIELDS) + "\nimg1,drain,10\n")
        with pytest.raises(InputFormatError, match=r"detections\.csv:2"):
            fileio.read_detections(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "frames.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(InputFormatError, match="header"):
            fileio.read_frames(path)

    def test_dangling_image_id_named(self, tmp_path):
        scene_files(tmp_path)
        det_path = tmp_path / "detections.csv"
        with open(det_path, "a") as fh:
            fh.write("phantom,drain,10.0,10.0,\n")
        with pytest.raises(InputValidationError, match="phantom"):
            fileio.parse_inputs(tmp_path / "frames.csv", det_path)


class TestGoldenExports:
    def _instances(self):
        return [
            ObjectInstance(
                "drain",
                GeoPoint(53.340512345678901, -6.248912345678901),
                5,
                HeightEstimate((("p0", 0.011), ("p1", 0.013)), 0.0123456, 0.011, 0.00123),
            ),
            ObjectInstance(
                "sign",
                GeoPoint(53.34061, -6.24875),
                3,
                HeightEstimate((("p2", 2.41),), 2.4105, 2.41, 0.0),
            ),
        ]

    def test_csv_matches_golden_bytes(self, tmp_path):
        out = tmp_path / "instances.csv"
        fileio.write_instances_csv(self._instances(), out)
        assert out.read_bytes() == (DATA / "golden_instances.csv").read_bytes()

    def test_geojson_matches_golden_bytes(self, tmp_path):
        out = tmp_path / "instances.geojson"
        fileio.write_instances_geojson(self._instances(), out)
        assert out.read_bytes() == (DATA / "golden_instances.geojson").read_bytes()

    def test_geojson_is_valid_point_collection(self, tmp_path):
        out = tmp_path / "instances.geojson"
        fileio.write_instances_geojson(self._instances(), out)
        doc = json.loads(out.read_text())
        assert doc["type"] == "FeatureCollection"
        assert len(doc["features"]) == 2
        feature = doc["features"][0]
        assert feature["geometry"]["type"] == "Point"
        lon, lat = feature["geometry"]["coordinates"]
        assert lon == pytest.approx(-6.248912346)
        assert lat == pytest.approx(53.340512346)
        props = feature["properties"]
        assert set(props) == {"class", "height_mean", "height_median", "height_std", "view_count"}

    def test_empty_collection_valid(self, tmp_path):
        out = tmp_path / "empty.geojson"
        fileio.write_instances_geojson([], out)
        doc = json.loads(out.read_text())
        assert doc == {"type": "FeatureCollection", "features": []}

    def test_single_feature_has_all_fields(self, tmp_path):
        out = tmp_path / "one.geojson"
        fileio.write_instances_geojson(self._instances()[:1], out)
        doc = json.loads(out.read_text())
        assert len(doc["features"]) == 1

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="format"):
            fileio.export_instances([], tmp_path / "x", format="xml")


class TestStability:
    def test_serialization_is_reproducible(self, tmp_path):
        frames, detections, _ = scene_files(tmp_path, NoiseSpec(gps_sigma=0.3))
        fileio.write_frames(frames, tmp_path / "frames2.csv")
        assert (tmp_path / "frames.csv").read_bytes() == (tmp_path / "frames2.csv").read_bytes()

    def test_eval_report_file(self, tmp_path):
        from streetfuse.pipeline import match_and_score

        report = match_and_score([], [], 6.0)
        fileio.write_eval_report(report, tmp_path / "report.csv")
        text = (tmp_path / "report.csv").read_text().splitlines()
        assert text[0].split(",")[:3] == ["precision", "recall", "f_score"]
        assert len(text) == 2

    def test_format_eval_table_columns(self):
        from streetfuse.pipeline import match_and_score

        report = match_and_score([], [], 6.0)
        table = fileio.format_eval_table(report)
        head = table.splitlines()[0]
        for column in ("precision", "recall", "f-score", "error mean", "error median"):
            assert column in head

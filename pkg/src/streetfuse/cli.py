"""Command-line surface: simulate, fuse, eval, tune and calibrate.

Exit codes: 0 on success, 1 on any validation or usage error, 2 on I/O
failures. Every RunConfig field can be overridden by a flag of the same
name on all subcommands that run the pipeline.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import fileio
from .config import ConfigError, RunConfig, apply_overrides, load_config, parse_camera_height, save_config
from .heights import CalibrationError, calibrate_camera_height
from .pipeline import grid_search, match_and_score, run_pipeline
from .simulate import NoiseSpec, SceneSpec, generate, place_objects

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits 1 on usage errors (argparse default is 2)."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run configuration overrides")
    group.add_argument("--config", type=Path, help="JSON RunConfig file")
    group.add_argument("--alpha", type=float, help="weight of the activation term")
    group.add_argument("--beta", type=float, help="weight of the monocular-depth term")
    group.add_argument("--lam", "--lambda", dest="lam", type=float,
                       help="weight of the height-consistency term")
    group.add_argument("--max-ray-distance", type=float, help="ray cutoff in meters")
    group.add_argument("--linkage-cutoff", type=float, help="cluster merge distance in meters")
    group.add_argument("--tp-radius", type=float, help="true-positive match radius in meters")
    group.add_argument("--pitch-mode", choices=("zero", "camera", "corrected"))
    group.add_argument("--camera-height",
                       help="fixed camera height in meters, or calibrate-from-class:<label>")
    group.add_argument("--u0-variant", choices=("sum", "mean", "min", "max"))
    group.add_argument("--split-clusters", action=argparse.BooleanOptionalAction, default=None,
                       help="split clusters by same-image-pair multiplicity")
    group.add_argument("--seed", type=int, help="random seed echoed into outputs")


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if args.camera_height is not None:
        # The flag replaces any configured value: a fixed height clears a
        # configured calibration class and vice versa.
        camera_height, calibrate_class = parse_camera_height(args.camera_height)
        config = replace(config, camera_height=camera_height, calibrate_class=calibrate_class)
    return apply_overrides(
        config,
        alpha=args.alpha,
        beta=args.beta,
        lam=args.lam,
        max_ray_distance=args.max_ray_distance,
        linkage_cutoff=args.linkage_cutoff,
        tp_radius=args.tp_radius,
        pitch_mode=args.pitch_mode,
        split_clusters=args.split_clusters,
        u0_variant=args.u0_variant,
        seed=args.seed,
    )


def _input_paths(args: argparse.Namespace) -> tuple[Path, Path]:
    if args.scene_dir is not None:
        return args.scene_dir / "frames.csv", args.scene_dir / "detections.csv"
    if args.frames is None or args.detections is None:
        raise ConfigError("either --scene-dir or both --frames and --detections are required")
    return args.frames, args.detections


def _cmd_simulate(args: argparse.Namespace) -> int:
    noise = NoiseSpec(
        bearing_sigma=args.bearing_sigma,
        depth_sigma=args.depth_sigma,
        gps_sigma=args.gps_sigma,
        pixel_sigma=args.pixel_sigma,
        false_positive_rate=args.false_positive_rate,
        miss_rate=args.miss_rate,
    )
    objects = place_objects(
        seed=args.seed,
        count=args.num_objects,
        classes=tuple(args.classes.split(",")),
        street_length=args.street_length,
    )
    spec = SceneSpec(
        seed=args.seed,
        street_length=args.street_length,
        capture_spacing=args.capture_spacing,
        views_per_point=args.views_per_point,
        fov=args.fov,
        camera_height=args.camera_height,
        camera_pitch=args.camera_pitch,
        fov_top=args.fov_top,
        fov_bottom=args.fov_bottom,
        objects=objects,
        noise=noise,
    )
    frames, detections, truth = generate(spec)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_frames(frames, out / "frames.csv")
    fileio.write_detections(detections, out / "detections.csv")
    fileio.write_ground_truth(truth, out / "ground_truth.csv")
    print(
        f"seed {spec.seed}: wrote {len(frames)} frames, {len(detections)} detections, "
        f"{len(truth)} objects to {out}"
    )
    return 0


def _cmd_fuse(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    frames_path, detections_path = _input_paths(args)
    frames, detections = fileio.parse_inputs(frames_path, detections_path)
    instances = run_pipeline(frames, detections, config)
    fileio.export_instances(instances, args.out, args.format)
    print(f"wrote {len(instances)} instances to {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    truth_path = args.truth if args.truth else (args.scene_dir / "ground_truth.csv" if args.scene_dir else None)
    if truth_path is None:
        raise ConfigError("--truth (or --scene-dir) is required")
    truth = fileio.read_ground_truth(truth_path)
    frames = []
    if args.instances is not None:
        instances = fileio.read_instances_csv(args.instances)
    else:
        frames_path, detections_path = _input_paths(args)
        frames, detections = fileio.parse_inputs(frames_path, detections_path)
        instances = run_pipeline(frames, detections, config)
    report = match_and_score(instances, truth, config.tp_radius)
    print(f"tp radius {config.tp_radius:g} m")
    print(fileio.format_eval_table(report))
    if args.report_dir is not None:
        out = args.report_dir
        out.mkdir(parents=True, exist_ok=True)
        fileio.write_eval_report(report, out / "report.csv")
        fileio.write_matches_csv(report, out / "matches.csv")
        written = [out / "report.csv", out / "matches.csv"]
        if args.figures:
            from .report import save_eval_figures

            written += save_eval_figures(report, instances, truth, frames, out)
        print("wrote " + ", ".join(str(p) for p in written))
    return 0


def _parse_grid(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise ConfigError(f"bad grid specification {text!r}; expected comma-separated numbers")


def _cmd_tune(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    frames_path, detections_path = _input_paths(args)
    frames, detections = fileio.parse_inputs(frames_path, detections_path)
    truth = fileio.read_ground_truth(args.truth)
    result = grid_search(
        frames,
        detections,
        truth,
        _parse_grid(args.alphas),
        _parse_grid(args.betas),
        _parse_grid(args.lambdas),
        _parse_grid(args.cutoffs),
        base_config=config,
    )
    best = result.best_config
    print(
        f"evaluated {result.evaluated} configurations ({result.skipped} skipped); "
        f"validation truth: {args.truth}"
    )
    print(
        f"best: alpha={best.alpha:g} beta={best.beta:g} lam={best.lam:g} "
        f"linkage_cutoff={best.linkage_cutoff:g} -> f-score {result.best_report.f_score:.3f}"
    )
    print(fileio.format_eval_table(result.best_report))
    if args.out is not None:
        save_config(best, args.out)
        print(f"wrote {args.out}")
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    frames_path, detections_path = _input_paths(args)
    frames, detections = fileio.parse_inputs(frames_path, detections_path)
    config = replace(config, camera_height=0.0, calibrate_class=None)
    instances = [
        inst
        for inst in run_pipeline(frames, detections, config)
        if inst.class_label == args.class_label
    ]
    if args.truth is not None:
        truth = [t for t in fileio.read_ground_truth(args.truth) if t.class_label == args.class_label]
        report = match_and_score(instances, truth, config.tp_radius)
        instances = [m.prediction for m in report.matches]
    calibration = calibrate_camera_height(instances)
    print(
        f"camera height from {calibration.sample_count} {args.class_label!r} instances: "
        f"mean-based {calibration.mean_based:.3f} m, median-based {calibration.median_based:.3f} m"
    )
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="streetfuse", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="generate a synthetic survey scene")
    sim.add_argument("--out-dir", type=Path, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--num-objects", type=int, default=10)
    sim.add_argument("--classes", default="drain,sign")
    sim.add_argument("--street-length", type=float, default=45.0)
    sim.add_argument("--capture-spacing", type=float, default=3.0)
    sim.add_argument("--views-per-point", type=int, default=6)
    sim.add_argument("--fov", type=float, default=68.77)
    sim.add_argument("--camera-height", type=float, default=2.18)
    sim.add_argument("--camera-pitch", type=float, default=0.0)
    sim.add_argument("--fov-top", type=float, default=None)
    sim.add_argument("--fov-bottom", type=float, default=None)
    sim.add_argument("--bearing-sigma", type=float, default=0.0)
    sim.add_argument("--depth-sigma", type=float, default=0.0)
    sim.add_argument("--gps-sigma", type=float, default=0.0)
    sim.add_argument("--pixel-sigma", type=float, default=0.0)
    sim.add_argument("--false-positive-rate", type=float, default=0.0)
    sim.add_argument("--miss-rate", type=float, default=0.0)
    sim.set_defaults(func=_cmd_simulate)

    fuse = sub.add_parser("fuse", help="fuse detections into object instances")
    fuse.add_argument("--frames", type=Path)
    fuse.add_argument("--detections", type=Path)
    fuse.add_argument("--scene-dir", type=Path, help="directory written by `simulate`")
    fuse.add_argument("--out", type=Path, required=True)
    fuse.add_argument("--format", choices=("csv", "geojson"), default="csv")
    _add_config_flags(fuse)
    fuse.set_defaults(func=_cmd_fuse)

    ev = sub.add_parser("eval", help="score instances against ground truth")
    ev.add_argument("--instances", type=Path, help="instances CSV written by `fuse`")
    ev.add_argument("--frames", type=Path)
    ev.add_argument("--detections", type=Path)
    ev.add_argument("--scene-dir", type=Path)
    ev.add_argument("--truth", type=Path)
    ev.add_argument("--report-dir", type=Path,
                    help="write report.csv, matches.csv and figures here")
    ev.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                    help="render map/height figures alongside the report")
    _add_config_flags(ev)
    ev.set_defaults(func=_cmd_eval)

    tune = sub.add_parser("tune", help="grid-search the MRF weights and cluster cutoff")
    tune.add_argument("--frames", type=Path)
    tune.add_argument("--detections", type=Path)
    tune.add_argument("--scene-dir", type=Path)
    tune.add_argument("--truth", type=Path, required=True)
    tune.add_argument("--alphas", default="0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5")
    tune.add_argument("--betas", default="0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5")
    tune.add_argument("--lambdas", default="0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5")
    tune.add_argument("--cutoffs", default="1,2,3,4")
    tune.add_argument("--out", type=Path, help="write the best RunConfig as JSON")
    _add_config_flags(tune)
    tune.set_defaults(func=_cmd_tune)

    cal = sub.add_parser("calibrate", help="estimate camera height from ground-level objects")
    cal.add_argument("--frames", type=Path)
    cal.add_argument("--detections", type=Path)
    cal.add_argument("--scene-dir", type=Path)
    cal.add_argument("--class-label", required=True)
    cal.add_argument("--truth", type=Path,
                     help="restrict calibration to true-positive matches against this truth")
    _add_config_flags(cal)
    cal.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (fileio.InputFormatError, ConfigError, CalibrationError) as exc:
        print(f"streetfuse: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"streetfuse: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"streetfuse: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

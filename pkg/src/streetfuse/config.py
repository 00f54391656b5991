"""Run configuration shared by the library pipeline and the CLI."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .heights import PITCH_MODES
from .mrf import U0_VARIANTS, MrfWeights

CALIBRATE_PREFIX = "calibrate-from-class:"


class ConfigError(ValueError):
    """Invalid run configuration; the message names every offending field."""


@dataclass(frozen=True)
class RunConfig:
    """All tunables of one fusion run.

    ``camera_height`` overrides every frame's camera height when set;
    ``calibrate_class`` instead derives it from that class's instances
    assumed to sit at ground level. At most one of the two may be set.
    """

    alpha: float = 0.5
    beta: float = 0.05
    lam: float = 0.05
    max_ray_distance: float = 30.0
    linkage_cutoff: float = 2.0
    tp_radius: float = 6.0
    pitch_mode: str = "corrected"
    camera_height: float | None = None
    calibrate_class: str | None = None
    u0_variant: str = "sum"
    split_clusters: bool = True
    seed: int | None = None

    def __post_init__(self) -> None:
        problems = []
        for name in ("alpha", "beta", "lam"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                problems.append(f"{name}: must be in [0, 1), got {v!r}")
        if self.alpha + self.beta + self.lam > 1.0:
            problems.append(
                f"alpha/beta/lam: sum must not exceed 1, got {self.alpha + self.beta + self.lam!r}"
            )
        for name in ("max_ray_distance", "linkage_cutoff", "tp_radius"):
            if not getattr(self, name) > 0.0:
                problems.append(f"{name}: must be > 0, got {getattr(self, name)!r}")
        if self.pitch_mode not in PITCH_MODES:
            problems.append(f"pitch_mode: expected one of {PITCH_MODES}, got {self.pitch_mode!r}")
        if self.u0_variant not in U0_VARIANTS:
            problems.append(f"u0_variant: expected one of {U0_VARIANTS}, got {self.u0_variant!r}")
        if self.camera_height is not None and self.calibrate_class is not None:
            problems.append("camera_height: cannot combine a fixed value with calibrate-from-class")
        if problems:
            raise ConfigError("invalid configuration: " + "; ".join(problems))

    @property
    def weights(self) -> MrfWeights:
        return MrfWeights(self.alpha, self.beta, self.lam)


def parse_camera_height(value) -> tuple[float | None, str | None]:
    """Split the camera-height setting into (fixed value, calibration class).

    Accepts a number, or the string ``calibrate-from-class:<label>``.
    """
    if value is None:
        return None, None
    if isinstance(value, (int, float)):
        return float(value), None
    text = str(value)
    if text.startswith(CALIBRATE_PREFIX):
        label = text[len(CALIBRATE_PREFIX) :]
        if not label:
            raise ConfigError("camera_height: calibrate-from-class needs a class label")
        return None, label
    try:
        return float(text), None
    except ValueError:
        raise ConfigError(
            f"camera_height: expected a number or {CALIBRATE_PREFIX}<label>, got {value!r}"
        ) from None


def load_config(path: str | Path) -> RunConfig:
    """Read a RunConfig from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown configuration fields: {', '.join(unknown)}")
    if "camera_height" in raw:
        fixed, calibrate = parse_camera_height(raw.pop("camera_height"))
        raw["camera_height"] = fixed
        if calibrate is not None:
            if raw.get("calibrate_class") not in (None, calibrate):
                raise ConfigError(f"{path}: conflicting camera_height and calibrate_class")
            raw["calibrate_class"] = calibrate
    return RunConfig(**raw)


def config_to_dict(config: RunConfig) -> dict:
    """JSON-ready mapping of a RunConfig (round-trips through load_config)."""
    out = {}
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if value is not None:
            out[f.name] = value
    if config.calibrate_class is not None:
        out.pop("calibrate_class", None)
        out["camera_height"] = CALIBRATE_PREFIX + config.calibrate_class
    return out


def save_config(config: RunConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")


def apply_overrides(config: RunConfig, **overrides) -> RunConfig:
    """Replace fields that are not None in ``overrides``."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **changes) if changes else config

"""One configuration tree shared by every subcommand.

Precedence, lowest first: built-in defaults, the YAML config file,
``--set section.key=value`` overrides, then dedicated CLI flags.
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .epd import EpdConfig
from .errors import ConfigError
from .filter import BirthComponent, BirthModel, BoxMeasurement, FilterConfig, MotionModel, TrackerModels
from .metrics import TgospaParams
from .occlusion import DEFAULT_POD_CURVE, CameraModel, OcclusionConfig, PodCurve
from .simio import ObjectSpec, ScenarioSpec, crossing_spec

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "camera": CameraModel().to_dict(),
    "curve": DEFAULT_POD_CURVE.to_dict(),
    "occlusion": {"z_max": 15.0, "kappa": 0.85 / 2},
    "filter": {
        "gate_threshold": 6.0,
        "max_hypotheses": 100,
        "prune_log_weight": -300.0,
        "murty_factor": 10.0,
        "exist_threshold": 0.5,
        "constant_pd": 0.529,
        "strategy": "pro",
    },
    "epd": {
        "r_discard": 1e-3,
        "r_certain": 0.999,
        "mc_samples": 1000,
        "independence_eps": 0.01,
        "max_uncertain": 12,
        "weight_floor": 0.01,
    },
    "motion": {
        "fps": 30.0,
        "accel_std": [0.1, 0.02, 0.1],
        "size_std": 0.005,
        "survival": 0.99,
    },
    "measurement": {
        "noise_std": [2.0, 2.0, 2.0, 2.0],
        "clutter_rate": 0.5,
        "clutter_width": [10.0, 200.0],
        "clutter_height": [20.0, 500.0],
    },
    "birth": {
        "adaptive": True,
        "existence": 0.1,
        "assumed_height": 1.7,
        "pos_std": [0.3, 0.05, 1.0],
        "vel_std": [1.0, 0.05, 1.0],
        "size_std": [0.1, 0.15],
        "static": [],
    },
    "scenario": {
        "kind": "crossing",
        "n_frames": 200,
        "crossing_frame": 100,
        "occlusion_frames": 30,
        "objects": [],
    },
    "tgospa": {"p": 2.41, "c": 1.0, "gamma": 2.60},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        key = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(base[k], dict) and base[k]:
            if not isinstance(v, dict):
                raise ConfigError(f"config key {key!r} must be a mapping")
            out[k] = _merge(base[k], v, key + ".")
        else:
            out[k] = copy.deepcopy(v)
    return out


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> dict:
    cfg = default_config()
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"invalid YAML in {path}: {e}") from e
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
        cfg = _merge(cfg, data)
    for item in overrides or []:
        cfg = apply_override(cfg, item)
    validate(cfg)
    return cfg


def apply_override(cfg: dict, item: str) -> dict:
    """Apply one ``section.key=value`` override (value parsed as YAML)."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse override value {raw!r}") from e
    patch: Any = value
    for part in reversed(key.strip().split(".")):
        patch = {part: patch}
    return _merge(cfg, patch)


def validate(cfg: dict) -> None:
    """Build every component once so that bad values fail early."""
    try:
        camera(cfg)
        curve(cfg)
        occlusion(cfg)
        filter_config(cfg)
        epd_config(cfg)
        tracker_models(cfg)
        scenario_spec(cfg)
        tgospa_params(cfg)
        int(cfg["seed"])
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def camera(cfg: dict) -> CameraModel:
    return CameraModel(**cfg["camera"])


def curve(cfg: dict) -> PodCurve:
    return PodCurve.from_dict(cfg["curve"])


def occlusion(cfg: dict) -> OcclusionConfig:
    return OcclusionConfig(**cfg["occlusion"])


def filter_config(cfg: dict) -> FilterConfig:
    return FilterConfig(**cfg["filter"])


def epd_config(cfg: dict) -> EpdConfig:
    return EpdConfig(**cfg["epd"])


def tgospa_params(cfg: dict) -> TgospaParams:
    return TgospaParams(**cfg["tgospa"])


def tracker_models(cfg: dict, cam: CameraModel | None = None) -> TrackerModels:
    cam = cam or camera(cfg)
    mo, me, bi = cfg["motion"], cfg["measurement"], cfg["birth"]
    motion = MotionModel.constant_velocity(
        dt=1.0 / float(mo["fps"]),
        accel_std=tuple(mo["accel_std"]),
        size_std=float(mo["size_std"]),
        survival=float(mo["survival"]),
    )
    meas = BoxMeasurement(
        cam,
        np.diag(np.square(np.asarray(me["noise_std"], dtype=float))),
        clutter_rate=float(me["clutter_rate"]),
        clutter_width=tuple(me["clutter_width"]),
        clutter_height=tuple(me["clutter_height"]),
    )
    static = []
    for c in bi["static"]:
        mean = np.asarray(c["mean"], dtype=float)
        cov = np.asarray(c["cov"], dtype=float)
        if cov.ndim == 1:
            cov = np.diag(cov)
        static.append(BirthComponent(float(c["existence"]), mean, cov))
    birth = BirthModel(
        static=tuple(static),
        adaptive=bool(bi["adaptive"]),
        existence=float(bi["existence"]),
        assumed_height=float(bi["assumed_height"]),
        pos_std=tuple(bi["pos_std"]),
        vel_std=tuple(bi["vel_std"]),
        size_std=tuple(bi["size_std"]),
    )
    if not 0.0 < birth.existence <= 1.0:
        raise ConfigError("birth.existence must lie in (0, 1]")
    return TrackerModels(motion, meas, birth, cam, occlusion(cfg), curve(cfg), epd_config(cfg))


def scenario_spec(cfg: dict) -> ScenarioSpec:
    sc, me = cfg["scenario"], cfg["measurement"]
    common = dict(
        camera=camera(cfg),
        clutter_rate=float(me["clutter_rate"]),
        noise_std=tuple(me["noise_std"]),
        clutter_width=tuple(me["clutter_width"]),
        clutter_height=tuple(me["clutter_height"]),
        fps=float(cfg["motion"]["fps"]),
    )
    kind = sc.get("kind", "crossing")
    if kind == "crossing":
        return crossing_spec(
            n_frames=int(sc["n_frames"]),
            crossing_frame=int(sc["crossing_frame"]),
            occlusion_frames=int(sc["occlusion_frames"]),
            **common,
        )
    if kind == "custom":
        objs = tuple(ObjectSpec(**o) for o in sc["objects"])
        return ScenarioSpec(objs, n_frames=int(sc["n_frames"]), **common)
    raise ConfigError(f"unknown scenario kind {kind!r}")


def dump(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False)

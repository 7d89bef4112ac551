"""Synthetic occlusion scenarios and MOTChallenge-style text files."""

from __future__ import annotations

import configparser
import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, SpecInvalid
from .filter import TrackOutput
from .metrics import TrajectorySet
from .occlusion import (
    IH,
    IW,
    IX,
    IY,
    IZ,
    STATE_DIM,
    CameraModel,
    OcclusionConfig,
    PodCurve,
    project_boxes,
    visibility_ratio,
)


@dataclass(frozen=True)
class ObjectSpec:
    """Constant-velocity pedestrian alive over ``[start, end]`` (inclusive)."""

    id: int
    x: float
    z: float
    vx: float = 0.0
    vz: float = 0.0
    width: float = 0.5
    height: float = 1.7
    start: int = 1
    end: int | None = None
    y: float | None = None


@dataclass(frozen=True)
class ScenarioSpec:
    objects: tuple[ObjectSpec, ...]
    n_frames: int = 200
    fps: float = 30.0
    camera: CameraModel = CameraModel()
    clutter_rate: float = 0.5
    noise_std: tuple[float, float, float, float] = (2.0, 2.0, 2.0, 2.0)
    clutter_width: tuple[float, float] = (10.0, 200.0)
    clutter_height: tuple[float, float] = (20.0, 500.0)
    accel_std: float = 0.0

    def validate(self) -> None:
        if self.n_frames < 1:
            raise SpecInvalid("n_frames must be >= 1")
        if self.fps <= 0:
            raise SpecInvalid("fps must be positive")
        if self.clutter_rate < 0:
            raise SpecInvalid("clutter_rate must be nonnegative")
        if any(s < 0 for s in self.noise_std) or self.accel_std < 0:
            raise SpecInvalid("noise levels must be nonnegative")
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise SpecInvalid("object ids must be distinct")
        for o in self.objects:
            end = self.n_frames if o.end is None else o.end
            if not 1 <= o.start <= end <= self.n_frames:
                raise SpecInvalid(f"object {o.id}: invalid lifetime [{o.start}, {end}]")
            if o.width <= 0 or o.height <= 0:
                raise SpecInvalid(f"object {o.id}: width and height must be positive")
            vals = (o.x, o.z, o.vx, o.vz, o.width, o.height)
            if not all(math.isfinite(v) for v in vals):
                raise SpecInvalid(f"object {o.id}: non-finite parameter")

    @property
    def R(self) -> np.ndarray:
        return np.diag(np.square(self.noise_std))


@dataclass
class Scenario:
    states: list[dict[int, np.ndarray]]  # per frame (index 0 is frame 1)
    camera: CameraModel
    clutter_rate: float
    R: np.ndarray
    seed: int
    fps: float = 30.0
    clutter_width: tuple[float, float] = (10.0, 200.0)
    clutter_height: tuple[float, float] = (20.0, 500.0)

    @property
    def n_frames(self) -> int:
        return len(self.states)


@dataclass
class DetectionFrame:
    frame: int
    measurements: list[np.ndarray] = field(default_factory=list)
    confidences: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.frame < 1:
            raise ValueError("frame index must be >= 1")


def crossing_spec(
    n_frames: int = 200,
    crossing_frame: int = 100,
    occlusion_frames: int = 30,
    fps: float = 30.0,
    z_rear: float = 10.0,
    z_front: float = 6.0,
    w_rear: float = 0.5,
    w_front: float = 0.8,
    **kwargs,
) -> ScenarioSpec:
    """A static pedestrian fully hidden by a walker for ``occlusion_frames``.

    The walker's speed is chosen so that its box covers the rear box exactly
    for the requested number of frames, centred on ``crossing_frame``.
    """
    # Half-width slack in normalized image coordinates.
    slack = 0.5 * w_front / z_front - 0.5 * w_rear / z_rear
    if slack <= 0:
        raise SpecInvalid("the front object cannot fully cover the rear one")
    speed = 2 * slack * z_front * fps / occlusion_frames
    x0 = -speed * (crossing_frame - 1) / fps
    objs = (
        ObjectSpec(1, 0.0, z_rear, width=w_rear),
        ObjectSpec(2, x0, z_front, vx=speed, width=w_front, height=1.8),
    )
    return ScenarioSpec(objs, n_frames=n_frames, fps=fps, **kwargs)


def generate_scenario(spec: ScenarioSpec, seed: int = 0) -> Scenario:
    spec.validate()
    rng = np.random.default_rng(seed)
    dt = 1.0 / spec.fps
    frames: list[dict[int, np.ndarray]] = [dict() for _ in range(spec.n_frames)]
    for o in spec.objects:
        end = spec.n_frames if o.end is None else o.end
        s = np.zeros(STATE_DIM)
        s[IX], s[IX + 1] = o.x, o.vx
        s[IY] = spec.camera.height if o.y is None else o.y
        s[IZ], s[IZ + 1] = o.z, o.vz
        s[IW], s[IH] = o.width, o.height
        for k in range(o.start, end + 1):
            frames[k - 1][o.id] = s.copy()
            s[IX] += s[IX + 1] * dt
            s[IZ] += s[IZ + 1] * dt
            if spec.accel_std > 0:
                a = rng.normal(0.0, spec.accel_std, size=2)
                s[IX + 1] += a[0] * dt
                s[IZ + 1] += a[1] * dt
    return Scenario(
        frames,
        spec.camera,
        spec.clutter_rate,
        spec.R,
        seed,
        spec.fps,
        spec.clutter_width,
        spec.clutter_height,
    )


def frame_visibility(states: dict[int, np.ndarray], cam: CameraModel, cfg: OcclusionConfig) -> dict[int, float]:
    """Visibility ratio of every object given all others in the frame."""
    ids = sorted(states)
    out = {}
    for i in ids:
        _, ok = project_boxes(states[i][None, :], cam)
        if not ok[0]:
            out[i] = 0.0
            continue
        out[i] = visibility_ratio(states[i], [states[j] for j in ids if j != i], cam, cfg)
    return out


def ground_truth(sc: Scenario, cfg: OcclusionConfig = OcclusionConfig()) -> TrajectorySet:
    gt = TrajectorySet()
    for k, states in enumerate(sc.states, start=1):
        vis = frame_visibility(states, sc.camera, cfg)
        for i in sorted(states):
            b, ok = project_boxes(states[i][None, :], sc.camera)
            if not ok[0]:
                continue
            l, t, r, btm = b[0]
            gt.add(i, k, [l, t, r - l, btm - t], visibility=vis[i])
    return gt


def simulate_detections(
    sc: Scenario,
    curve: PodCurve,
    cfg: OcclusionConfig = OcclusionConfig(),
    seed: int = 0,
) -> list[DetectionFrame]:
    """Draw detections from the occlusion-dependent PoD plus Poisson clutter."""
    rng = np.random.default_rng(seed)
    cam = sc.camera
    vals, vecs = np.linalg.eigh(sc.R)
    L = vecs * np.sqrt(np.clip(vals, 0.0, None))
    out = []
    for k, states in enumerate(sc.states, start=1):
        fr = DetectionFrame(k)
        vis = frame_visibility(states, cam, cfg)
        for i in sorted(states):
            b, ok = project_boxes(states[i][None, :], cam)
            u = rng.random()
            noise = L @ rng.standard_normal(4)
            if not ok[0] or u >= float(curve(vis[i])):
                continue
            l, t, r, btm = b[0]
            fr.measurements.append(np.array([l, t, r - l, btm - t]) + noise)
            fr.confidences.append(1.0)
        n_clutter = rng.poisson(sc.clutter_rate)
        for _ in range(n_clutter):
            w = rng.uniform(*sc.clutter_width)
            h = rng.uniform(*sc.clutter_height)
            l = rng.uniform(0, cam.image_width)
            t = rng.uniform(0, cam.image_height)
            fr.measurements.append(np.array([l, t, w, h]))
            fr.confidences.append(float(rng.uniform(0.0, 1.0)))
        out.append(fr)
    return out


# ---------------------------------------------------------------------------
# Files

_FMT = "%.6f"


def _f(v: float) -> str:
    return _FMT % v


def write_detections(path, frames: Sequence[DetectionFrame]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for fr in frames:
            for z, conf in zip(fr.measurements, fr.confidences):
                w.writerow([fr.frame, -1, *map(_f, z), _f(conf), -1, -1, -1])


def _rows(path):
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            yield lineno, [c.strip() for c in row]


def _num(row, idx, lineno, kind=float):
    try:
        return kind(float(row[idx])) if kind is int else kind(row[idx])
    except (IndexError, ValueError) as e:
        raise ParseError(f"bad or missing column {idx + 1}", lineno) from e


def read_detections(path, n_frames: int | None = None) -> list[DetectionFrame]:
    """Detections grouped by frame; gaps (and frames up to ``n_frames``) are empty."""
    by_frame: dict[int, DetectionFrame] = {}
    for lineno, row in _rows(path):
        if len(row) < 7:
            raise ParseError(f"expected at least 7 columns, got {len(row)}", lineno)
        k = _num(row, 0, lineno, int)
        if k < 1:
            raise ParseError("frame index must be >= 1", lineno)
        z = np.array([_num(row, c, lineno) for c in range(2, 6)])
        fr = by_frame.setdefault(k, DetectionFrame(k))
        fr.measurements.append(z)
        fr.confidences.append(_num(row, 6, lineno))
    last = max(by_frame, default=0)
    if n_frames is not None:
        last = max(last, n_frames)
    return [by_frame.get(k, DetectionFrame(k)) for k in range(1, last + 1)]


def write_results(path, out: TrackOutput) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for k, ests in out.frames:
            for e in sorted(ests, key=lambda e: e.mark):
                if e.box is None:
                    continue
                b = e.box
                s = e.state
                w.writerow([k, e.mark, *map(_f, (b.left, b.top, b.width, b.height, e.existence, s[IX], s[IY], s[IZ]))])


def read_results(path) -> TrajectorySet:
    ts = TrajectorySet()
    for lineno, row in _rows(path):
        if len(row) < 6:
            raise ParseError(f"expected at least 6 columns, got {len(row)}", lineno)
        k = _num(row, 0, lineno, int)
        tid = _num(row, 1, lineno, int)
        box = [_num(row, c, lineno) for c in range(2, 6)]
        try:
            ts.add(tid, k, box)
        except ValueError as e:
            raise ParseError(str(e), lineno) from e
    return ts


def write_gt(path, gt: TrajectorySet) -> None:
    """MOT17 layout: frame, id, left, top, width, height, consider, class, visibility."""
    rows = []
    for tid in gt.ids:
        for k, box in sorted(gt.boxes[tid].items()):
            rows.append((k, tid, box, gt.vis(tid, k)))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for k, tid, box, v in rows:
            w.writerow([k, tid, *map(_f, box), 1, 1, _f(v)])


# MOT17 class 1 is "pedestrian"; other classes (vehicles, reflections, ...) are dropped.
PEDESTRIAN_CLASSES = frozenset({1})


def read_gt(path) -> TrajectorySet:
    ts = TrajectorySet()
    missing = 0
    for lineno, row in _rows(path):
        if len(row) < 6:
            raise ParseError(f"expected at least 6 columns, got {len(row)}", lineno)
        k = _num(row, 0, lineno, int)
        tid = _num(row, 1, lineno, int)
        box = [_num(row, c, lineno) for c in range(2, 6)]
        if len(row) >= 8 and _num(row, 7, lineno, int) not in PEDESTRIAN_CLASSES:
            continue
        if len(row) >= 9 and row[8] != "":
            v = _num(row, 8, lineno)
            if not 0.0 <= v <= 1.0:
                raise ParseError(f"visibility {v} outside [0, 1]", lineno)
        else:
            v = 1.0
            missing += 1
        try:
            ts.add(tid, k, box, visibility=v)
        except ValueError as e:
            raise ParseError(str(e), lineno) from e
    if missing:
        warnings.warn(f"{path}: {missing} rows without visibility, assuming 1", stacklevel=2)
    return ts


def write_seqinfo(path, n_frames: int, fps: float, cam: CameraModel) -> None:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["Sequence"] = {
        "seqLength": str(n_frames),
        "frameRate": f"{fps:g}",
        "imWidth": str(cam.image_width),
        "imHeight": str(cam.image_height),
    }
    with open(path, "w") as fh:
        cp.write(fh)


def read_seqinfo(path) -> dict:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if not cp.read(path):
        raise FileNotFoundError(path)
    s = cp["Sequence"]
    return {"seqLength": int(s["seqLength"]), "frameRate": float(s.get("frameRate", "30"))}


def find_seqinfo(det_path) -> Path | None:
    p = Path(det_path).with_name("seqinfo.ini")
    return p if p.exists() else None

"""Pedestrian box geometry, visibility ratio and visibility-dependent PoD.

State vectors use the order ``[x, vx, y, vy, z, vz, width, height]`` where
``(x, y, z)`` is the bottom centre of the pedestrian in a level camera frame
(x right, y down, z forward).  Index 4 is the depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import yaml

from .errors import BehindCamera, DegenerateBox

IX, IVX, IY, IVY, IZ, IVZ, IW, IH = range(8)
STATE_DIM = 8
NEAR_PLANE = 1e-6


@dataclass(frozen=True)
class PedestrianState:
    x: float
    y: float
    z: float
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    width: float = 0.5
    height: float = 1.75

    def as_vector(self) -> np.ndarray:
        return np.array([self.x, self.vx, self.y, self.vy, self.z, self.vz, self.width, self.height])

    @classmethod
    def from_vector(cls, v) -> "PedestrianState":
        v = np.asarray(v, dtype=float)
        return cls(x=v[IX], y=v[IY], z=v[IZ], vx=v[IVX], vy=v[IVY], vz=v[IVZ], width=v[IW], height=v[IH])


def _vec(state) -> np.ndarray:
    if isinstance(state, PedestrianState):
        return state.as_vector()
    return np.asarray(state, dtype=float)


@dataclass(frozen=True)
class BBox2D:
    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        if self.width < 0 or self.height < 0:
            raise ValueError("box dimensions must be nonnegative")

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_array(self) -> np.ndarray:
        return np.array([self.left, self.top, self.width, self.height])


@dataclass(frozen=True)
class CameraModel:
    fx: float = 1000.0
    fy: float = 1000.0
    cx: float = 960.0
    cy: float = 540.0
    height: float = 1.5
    tilt: float = 0.0
    image_width: int = 1920
    image_height: int = 1080

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image size must be positive")

    @property
    def image_area(self) -> float:
        return float(self.image_width * self.image_height)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass(frozen=True)
class PodCurve:
    """Piecewise-linear PoD as a function of visibility ratio."""

    knots: tuple[tuple[float, float], ...]

    def __post_init__(self):
        k = tuple((float(v), float(p)) for v, p in self.knots)
        vs = [v for v, _ in k]
        if len(k) < 2 or vs[0] != 0.0 or vs[-1] != 1.0:
            raise ValueError("curve knots must cover v=0 and v=1")
        if any(b <= a for a, b in zip(vs, vs[1:])):
            raise ValueError("curve knots must be strictly increasing in v")
        if any(not 0.0 <= p <= 1.0 for _, p in k):
            raise ValueError("curve values must lie in [0, 1]")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "_v", np.array(vs))
        object.__setattr__(self, "_p", np.array([p for _, p in k]))

    @classmethod
    def constant(cls, pd: float) -> "PodCurve":
        return cls(((0.0, pd), (1.0, pd)))

    def __call__(self, v):
        out = np.interp(v, self._v, self._p)
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> dict:
        return {"knots": [list(k) for k in self.knots]}

    @classmethod
    def from_dict(cls, d: dict) -> "PodCurve":
        return cls(tuple(tuple(k) for k in d["knots"]))


# Synthetic stand-in for a curve identified from data; replace per dataset.
DEFAULT_POD_CURVE = PodCurve(((0.0, 0.05), (0.25, 0.15), (0.5, 0.4), (0.75, 0.65), (1.0, 0.8)))


@dataclass(frozen=True)
class OcclusionConfig:
    z_max: float = 15.0
    kappa: float = 0.85 / 2

    def __post_init__(self):
        if self.z_max <= 0 or self.kappa < 0:
            raise ValueError("need z_max > 0 and kappa >= 0")


def load_curve(path) -> PodCurve:
    with open(path) as fh:
        return PodCurve.from_dict(yaml.safe_load(fh))


def save_curve(curve: PodCurve, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(curve.to_dict(), fh, sort_keys=False)


def load_camera(path) -> CameraModel:
    with open(path) as fh:
        return CameraModel.from_dict(yaml.safe_load(fh))


def save_camera(cam: CameraModel, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cam.to_dict(), fh, sort_keys=False)


def project_boxes(states: np.ndarray, cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized pinhole projection.

    Returns ``(boxes, valid)`` where ``boxes[:, :]`` holds ``left, top, right,
    bottom`` in pixels and ``valid`` flags states whose corners all lie in
    front of the near plane.  Invalid rows are zero boxes.
    """
    cols, valid = _project_cols(states, cam)
    return cols.T, valid


def _project_cols(states, cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """:func:`project_boxes` with the result laid out as (4, S) rows."""
    S = np.atleast_2d(np.asarray(states, dtype=float))
    x, y, z = S[:, IX], S[:, IY], S[:, IZ]
    hw = 0.5 * S[:, IW]
    h = S[:, IH]
    ct, st = np.cos(cam.tilt), np.sin(cam.tilt)
    # Corners of the upright rectangle: (x -/+ w/2, y) and (x -/+ w/2, y - h).
    # Bottom and top edges project separately; each has two corners.
    cols = np.empty((4, len(S)))
    valid = np.ones(len(S), dtype=bool)
    us, vs = [], []
    for yy in (y, y - h):
        yc = yy * ct - z * st
        zc = yy * st + z * ct
        ok = zc > NEAR_PLANE
        valid &= ok
        zs = np.where(ok, zc, 1.0)
        us.append(cam.fx * (x - hw) / zs + cam.cx)
        us.append(cam.fx * (x + hw) / zs + cam.cx)
        vs.append(cam.fy * yc / zs + cam.cy)
    np.minimum(np.minimum(us[0], us[1]), np.minimum(us[2], us[3]), out=cols[0])
    np.maximum(np.maximum(us[0], us[1]), np.maximum(us[2], us[3]), out=cols[2])
    np.minimum(vs[0], vs[1], out=cols[1])
    np.maximum(vs[0], vs[1], out=cols[3])
    if not valid.all():
        cols[:, ~valid] = 0.0
    return cols, valid


def project_bbox(state, cam: CameraModel) -> BBox2D:
    v = _vec(state)
    if v[IZ] <= NEAR_PLANE:
        raise BehindCamera(f"depth {v[IZ]} not in front of the camera")
    boxes, valid = project_boxes(v[None, :], cam)
    if not valid[0]:
        raise BehindCamera("box corners behind the camera")
    l, t, r, b = boxes[0]
    return BBox2D(float(l), float(t), float(max(r - l, 0.0)), float(max(b - t, 0.0)))


def eligible_occluders(x, others: Sequence, cfg: OcclusionConfig) -> list:
    """Subset of ``others`` close enough and sufficiently in front of ``x``."""
    zx = _vec(x)[IZ]
    return [o for o in others if _vec(o)[IZ] < cfg.z_max and _vec(o)[IZ] < zx - cfg.kappa]


def union_area(rects: Sequence[Sequence[float]]) -> float:
    """Exact area of a union of axis-aligned ``(l, t, r, b)`` rectangles.

    Coordinate compression: the plane is cut along every rectangle edge and
    each elementary cell is tested for coverage.
    """
    rects = [r for r in rects if r[2] > r[0] and r[3] > r[1]]
    if not rects:
        return 0.0
    R = np.asarray(rects, dtype=float)
    xs = np.unique(np.concatenate([R[:, 0], R[:, 2]]))
    ys = np.unique(np.concatenate([R[:, 1], R[:, 3]]))
    mx = 0.5 * (xs[1:] + xs[:-1])
    my = 0.5 * (ys[1:] + ys[:-1])
    inx = (R[:, 0, None] <= mx[None, :]) & (mx[None, :] <= R[:, 2, None])
    iny = (R[:, 1, None] <= my[None, :]) & (my[None, :] <= R[:, 3, None])
    covered = np.any(inx[:, :, None] & iny[:, None, :], axis=0)
    cell = np.diff(xs)[:, None] * np.diff(ys)[None, :]
    return float((covered * cell).sum())


def _clip(rect, to):
    return (max(rect[0], to[0]), max(rect[1], to[1]), min(rect[2], to[2]), min(rect[3], to[3]))


def visibility_ratio(x, others: Sequence, cam: CameraModel, cfg: OcclusionConfig) -> float:
    target = project_bbox(x, cam)
    if target.area <= 0.0:
        raise DegenerateBox("target box has zero area")
    t = (target.left, target.top, target.right, target.bottom)
    clipped = []
    for o in eligible_occluders(x, others, cfg):
        boxes, valid = project_boxes(_vec(o)[None, :], cam)
        if valid[0]:
            clipped.append(_clip(boxes[0], t))
    covered = union_area(clipped)
    return float(min(max(1.0 - covered / target.area, 0.0), 1.0))


def pod_spo_d(x, others: Sequence, cam: CameraModel, cfg: OcclusionConfig, curve: PodCurve) -> float:
    return curve(visibility_ratio(x, others, cam, cfg))


def visible_fraction_batch(target: np.ndarray, occluders: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Visibility ratio for a batch of independent scenes.

    ``target``: (S, 4) boxes ``l, t, r, b``; ``occluders``: (S, k, 4);
    ``active``: (S, k) boolean mask of occluders that take part.  Uses the
    same coordinate-compression rule as :func:`union_area`, vectorized over S.
    Targets with zero area get visibility 1.
    """
    S = target.shape[0]
    k = occluders.shape[1] if occluders.ndim == 3 else 0
    if k == 0:
        return np.ones(S)
    T = target[:, None, :]
    O = np.empty_like(occluders)
    O[..., 0] = np.maximum(occluders[..., 0], T[..., 0])
    O[..., 1] = np.maximum(occluders[..., 1], T[..., 1])
    O[..., 2] = np.minimum(occluders[..., 2], T[..., 2])
    O[..., 3] = np.minimum(occluders[..., 3], T[..., 3])
    ok = active & (O[..., 2] > O[..., 0]) & (O[..., 3] > O[..., 1])
    # Inactive rectangles collapse onto the target's top-left corner.
    corner = np.broadcast_to(target[:, None, [0, 1, 0, 1]], O.shape)
    O = np.where(ok[..., None], O, corner)
    xs = np.sort(np.concatenate([target[:, [0, 2]], O[..., 0], O[..., 2]], axis=1), axis=1)
    ys = np.sort(np.concatenate([target[:, [1, 3]], O[..., 1], O[..., 3]], axis=1), axis=1)
    mx = 0.5 * (xs[:, 1:] + xs[:, :-1])
    my = 0.5 * (ys[:, 1:] + ys[:, :-1])
    inx = (O[..., 0, None] <= mx[:, None, :]) & (mx[:, None, :] <= O[..., 2, None]) & ok[..., None]
    iny = (O[..., 1, None] <= my[:, None, :]) & (my[:, None, :] <= O[..., 3, None]) & ok[..., None]
    covered = np.any(inx[:, :, :, None] & iny[:, :, None, :], axis=1)
    cell = np.diff(xs, axis=1)[:, :, None] * np.diff(ys, axis=1)[:, None, :]
    area = (target[:, 2] - target[:, 0]) * (target[:, 3] - target[:, 1])
    cov = (covered * cell).sum(axis=(1, 2))
    with np.errstate(invalid="ignore", divide="ignore"):
        vis = np.where(area > 0, 1.0 - cov / np.where(area > 0, area, 1.0), 1.0)
    return np.clip(vis, 0.0, 1.0)


def occlusion_independence_test(
    spatial_x,
    spatial_o,
    cam: CameraModel,
    cfg: OcclusionConfig,
    curve: PodCurve,
    samples: int = 10_000,
    seed=0,
    eps: float = 0.01,
) -> bool:
    """True when the occluder's density leaves the expected PoD of x unchanged.

    Compares MC estimates of E[P_D(x, {o})] and E[P_D(x, {})] using the
    same x samples for both (common random numbers).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng_x = np.random.default_rng(_seed_seq(seed, 0))
    rng_o = np.random.default_rng(_seed_seq(seed, 1))
    xs = spatial_x.sample(rng_x, samples)
    os_ = spatial_o.sample(rng_o, samples)
    return abs(pod_shift_samples(xs, os_, cam, cfg, curve).mean()) < eps


def _seed_seq(seed, *extra) -> list[int]:
    base = [int(s) for s in np.atleast_1d(seed)]
    return base + [int(e) for e in extra]


@dataclass(frozen=True)
class ProjectedSamples:
    """State samples with their projected boxes, reused across PoD evaluations."""

    z: np.ndarray  # (S,) depths
    boxes: np.ndarray  # (S, 4) left, top, right, bottom
    valid: np.ndarray  # (S,) bool
    hull: tuple[float, float, float, float] | None  # over valid samples
    z_range: tuple[float, float] | None = None  # depth bounds of valid samples
    cols: np.ndarray | None = None  # (4, S) contiguous; boxes is its transpose

    @classmethod
    def of(cls, xs: np.ndarray, cam: CameraModel) -> "ProjectedSamples":
        cols, valid = _project_cols(xs, cam)
        z = np.asarray(xs, dtype=float)[:, IZ].copy()
        hull = z_range = None
        if valid.all():
            lo, hi = cols.min(axis=1), cols.max(axis=1)
            zv = z
        elif valid.any():
            v = cols[:, valid]
            lo, hi = v.min(axis=1), v.max(axis=1)
            zv = z[valid]
        if valid.any():
            hull = (float(lo[0]), float(lo[1]), float(hi[2]), float(hi[3]))
            z_range = (float(zv.min()), float(zv.max()))
        return cls(z, cols.T, valid, hull, z_range, cols)


def may_occlude(target: ProjectedSamples, occ: ProjectedSamples, cfg: OcclusionConfig) -> bool:
    """False when no occluder sample can ever overlap an eligible target sample.

    Checks depth eligibility bounds and the hulls of the projected boxes.
    A False answer is exact; True is only a possibility.
    """
    if target.hull is None or occ.hull is None:
        return False
    oz_min = occ.z_range[0]
    if oz_min >= cfg.z_max or oz_min >= target.z_range[1] - cfg.kappa:
        return False
    a, b = target.hull, occ.hull
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def visibility_from_projections(
    target: ProjectedSamples,
    occ: Sequence[ProjectedSamples],
    cfg: OcclusionConfig,
) -> np.ndarray:
    """Per-sample visibility ratio with the ``i``-th samples paired across inputs."""
    n = len(target.z)
    if not occ:
        return np.ones(n)
    if len(occ) <= INCLUSION_EXCLUSION_MAX:
        return visibility_all_subsets(target, occ, cfg)[-1]
    active = [o.valid & (o.z < cfg.z_max) & (o.z < target.z - cfg.kappa) for o in occ]
    return visible_fraction_batch(target.boxes, np.stack([o.boxes for o in occ], axis=1), np.stack(active, axis=1))


# Above this many occluders the sweep in visible_fraction_batch is cheaper.
INCLUSION_EXCLUSION_MAX = 6


@lru_cache(maxsize=None)
def _subset_signs(k: int) -> np.ndarray:
    """+1 for subsets of odd size, -1 for even, indexed by bitmask."""
    bits = np.array([bin(m).count("1") for m in range(1 << k)])
    out = np.where(bits % 2 == 1, 1.0, -1.0)
    out.setflags(write=False)
    return out


def visibility_all_subsets(
    target: ProjectedSamples,
    occ: Sequence[ProjectedSamples],
    cfg: OcclusionConfig,
) -> np.ndarray:
    """Per-sample visibility for every subset of ``occ`` at once.

    Row ``mask`` of the (2**k, S) result holds the visibility with the
    occluders whose bits are set in ``mask``.  Intersections of all subsets
    are built one occluder at a time, then a subset-sum (zeta) transform
    turns the signed intersection areas into union areas.
    """
    k = len(occ)
    tc = target.cols if target.cols is not None else target.boxes.T
    n = tc.shape[1]
    # L, T, R, B coordinates of every subset's intersection with the target.
    E = np.empty((4, 1 << k, n))
    E[:, 0] = tc
    for j, o in enumerate(occ):
        act = o.valid & (o.z < cfg.z_max) & (o.z < target.z - cfg.kappa)
        oc = o.cols if o.cols is not None else o.boxes.T
        lo, hi = 1 << j, 2 << j
        np.maximum(E[0, :lo], oc[0], out=E[0, lo:hi])
        np.maximum(E[1, :lo], oc[1], out=E[1, lo:hi])
        # Inactive occluders get an empty box: right edge left of the left edge.
        np.minimum(E[2, :lo], np.where(act, oc[2], -np.inf), out=E[2, lo:hi])
        np.minimum(E[3, :lo], oc[3], out=E[3, lo:hi])
    np.subtract(E[2], E[0], out=E[2])
    np.subtract(E[3], E[1], out=E[3])
    np.maximum(E[2:], 0.0, out=E[2:])
    C = E[2] * E[3]
    area = C[0].copy()
    C *= _subset_signs(k)[:, None]
    C[0] = 0.0
    for j in range(k):
        v = C.reshape(1 << (k - 1 - j), 2, 1 << j, n)
        v[:, 1] += v[:, 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        vis = np.where(area > 0, 1.0 - C / np.where(area > 0, area, 1.0), 1.0)
    return np.clip(vis, 0.0, 1.0)


def visibility_each(
    target: ProjectedSamples,
    occ: Sequence[ProjectedSamples],
    cfg: OcclusionConfig,
) -> np.ndarray:
    """(k, S) visibility with each occluder on its own.

    Row ``j`` equals row ``1 << j`` of :func:`visibility_all_subsets`.
    """
    tc = target.cols if target.cols is not None else target.boxes.T
    if not occ:
        return np.ones((0, tc.shape[1]))
    oc = np.stack([o.cols if o.cols is not None else o.boxes.T for o in occ], axis=1)  # (4, k, S)
    act = np.stack([o.valid & (o.z < cfg.z_max) & (o.z < target.z - cfg.kappa) for o in occ])
    w = np.minimum(tc[2], np.where(act, oc[2], -np.inf)) - np.maximum(tc[0], oc[0])
    h = np.minimum(tc[3], oc[3]) - np.maximum(tc[1], oc[1])
    inter = np.maximum(w, 0.0) * np.maximum(h, 0.0)
    area = np.maximum(tc[2] - tc[0], 0.0) * np.maximum(tc[3] - tc[1], 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        vis = np.where(area > 0, 1.0 - inter / np.where(area > 0, area, 1.0), 1.0)
    return np.clip(vis, 0.0, 1.0)


def pod_from_projections(
    target: ProjectedSamples,
    occ: Sequence[ProjectedSamples],
    cfg: OcclusionConfig,
    curve: PodCurve,
) -> np.ndarray:
    pd = curve(visibility_from_projections(target, occ, cfg))
    # Samples that cannot be imaged are never detected.
    return np.where(target.valid, pd, 0.0)


def pod_batch(
    xs: np.ndarray,
    occ: Sequence[np.ndarray],
    cam: CameraModel,
    cfg: OcclusionConfig,
    curve: PodCurve,
) -> np.ndarray:
    """P_D per sample for target samples ``xs`` (S, 8) and occluder samples."""
    t = ProjectedSamples.of(xs, cam)
    return pod_from_projections(t, [ProjectedSamples.of(o, cam) for o in occ], cfg, curve)


def pod_shift_samples(xs, os_, cam, cfg, curve) -> np.ndarray:
    """Per-sample P_D(x, {o}) - P_D(x, {})."""
    return pod_batch(xs, [os_], cam, cfg, curve) - pod_batch(xs, [], cam, cfg, curve)

"""Gaussian-mixture MBM filter with a per-mark PoD supplied by a strategy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .epd import EpdConfig, EpdContext, PodAssignment, constant_pod, eso_pod, pro_pod
from .errors import FrameError, MissingPod, OcctrackError
from .murty import murty_kbest
from .occlusion import (
    IH,
    IW,
    IX,
    IY,
    IZ,
    STATE_DIM,
    BBox2D,
    CameraModel,
    OcclusionConfig,
    PodCurve,
    project_boxes,
)
from .rfs import EXISTENCE_FLOOR, BernoulliComponent, MBHypothesis, MBMDensity, SpatialDensity

# Ranking-only bonus for pairing a measurement that cannot be clutter.
_NO_CLUTTER_BONUS = 1e6


@dataclass(frozen=True)
class FilterConfig:
    gate_threshold: float = 6.0
    max_hypotheses: int = 100
    prune_log_weight: float = -300.0
    murty_factor: float = 10.0
    exist_threshold: float = 0.5
    constant_pd: float = 0.529
    strategy: str = "pro"

    def __post_init__(self):
        if self.gate_threshold <= 0:
            raise ValueError("gate_threshold must be positive")
        if self.max_hypotheses < 1:
            raise ValueError("max_hypotheses must be >= 1")
        if self.murty_factor <= 0:
            raise ValueError("murty_factor must be positive")
        if not 0.0 <= self.constant_pd <= 1.0:
            raise ValueError("constant_pd must lie in [0, 1]")
        if self.strategy not in ("constant", "eso", "pro"):
            raise ValueError(f"unknown strategy {self.strategy!r}")


# ---------------------------------------------------------------------------
# Models


@dataclass(frozen=True)
class MotionModel:
    F: np.ndarray
    Q: np.ndarray
    survival: float = 0.99
    dt: float = 1.0

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        Q = np.asarray(self.Q, dtype=float)
        if not np.allclose(Q, Q.T):
            raise ValueError("Q must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if not 0.0 <= self.survival <= 1.0:
            raise ValueError("survival must lie in [0, 1]")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "Q", Q)

    @classmethod
    def constant_velocity(
        cls,
        dt: float = 1 / 30,
        accel_std=(0.3, 0.05, 0.3),
        size_std: float = 0.005,
        survival: float = 0.99,
    ) -> "MotionModel":
        """CV on x, y and z with random-walk width and height."""
        F = np.eye(STATE_DIM)
        Q = np.zeros((STATE_DIM, STATE_DIM))
        blk = np.array([[dt**3 / 3, dt**2 / 2], [dt**2 / 2, dt]])
        for k, q in zip((IX, IY, IZ), accel_std):
            F[k, k + 1] = dt
            Q[k : k + 2, k : k + 2] = q**2 * blk
        Q[IW, IW] = Q[IH, IH] = size_std**2 * dt
        return cls(F, Q, survival, dt)

    def predict_gaussian(self, mean, cov):
        return self.F @ mean, self.F @ cov @ self.F.T + self.Q


def _sqrtm_psd(P: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (P + P.T))
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass(frozen=True)
class UnscentedParams:
    alpha: float = 1e-3
    beta: float = 2.0
    kappa: float = 0.0


def unscented_moments(f: Callable[[np.ndarray], np.ndarray], mean, cov, params: UnscentedParams = UnscentedParams()):
    """Mean, covariance and cross-covariance of ``f(x)`` for Gaussian ``x``.

    ``f`` maps an ``(N, n)`` array of states to ``(N, d)`` outputs.
    """
    mean = np.asarray(mean, dtype=float)
    n = mean.size
    lam = params.alpha**2 * (n + params.kappa) - n
    S = _sqrtm_psd(cov) * math.sqrt(n + lam)
    X = np.vstack([mean, mean + S.T, mean - S.T])
    wm = np.full(2 * n + 1, 0.5 / (n + lam))
    wc = wm.copy()
    wm[0] = lam / (n + lam)
    wc[0] = wm[0] + 1.0 - params.alpha**2 + params.beta
    Y = f(X)
    y = wm @ Y
    dY = Y - y
    dX = X - mean
    P = (wc[:, None] * dY).T @ dY
    C = (wc[:, None] * dX).T @ dY
    return y, 0.5 * (P + P.T), C


def unscented_moments_batch(f, means, covs, params: UnscentedParams = UnscentedParams()):
    """:func:`unscented_moments` for a stack of ``(B, n)`` means and ``(B, n, n)`` covariances."""
    means = np.asarray(means, dtype=float)
    B, n = means.shape
    lam = params.alpha**2 * (n + params.kappa) - n
    vals, vecs = np.linalg.eigh(0.5 * (covs + np.swapaxes(covs, 1, 2)))
    S = vecs * np.sqrt(np.clip(vals, 0.0, None))[:, None, :] * math.sqrt(n + lam)
    St = np.swapaxes(S, 1, 2)
    X = np.concatenate([means[:, None, :], means[:, None, :] + St, means[:, None, :] - St], axis=1)
    wm = np.full(2 * n + 1, 0.5 / (n + lam))
    wc = wm.copy()
    wm[0] = lam / (n + lam)
    wc[0] = wm[0] + 1.0 - params.alpha**2 + params.beta
    Y = f(X.reshape(B * (2 * n + 1), n)).reshape(B, 2 * n + 1, -1)
    y = np.einsum("s,bsd->bd", wm, Y)
    dY = Y - y[:, None, :]
    dX = X - means[:, None, :]
    P = np.einsum("s,bsi,bsj->bij", wc, dY, dY)
    C = np.einsum("s,bsi,bsj->bij", wc, dX, dY)
    return y, 0.5 * (P + np.swapaxes(P, 1, 2)), C


@dataclass(frozen=True)
class LinearMeasurement:
    H: np.ndarray
    R: np.ndarray
    clutter_rate: float = 0.0
    clutter_density: float = 1.0

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if not np.allclose(R, R.T) or np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("R must be symmetric positive definite")
        if self.clutter_rate < 0:
            raise ValueError("clutter_rate must be nonnegative")
        object.__setattr__(self, "H", np.asarray(self.H, dtype=float))
        object.__setattr__(self, "R", R)

    def moments(self, mean, cov):
        zhat = self.H @ mean
        C = cov @ self.H.T
        return zhat, self.H @ C + self.R, C

    def moments_batch(self, means, covs):
        zhat = means @ self.H.T
        C = covs @ self.H.T
        return zhat, self.H @ C + self.R, C

    def clutter_intensity(self, z) -> float:
        return self.clutter_rate * self.clutter_density


def box_observation(states: np.ndarray, cam: CameraModel) -> np.ndarray:
    """``(left, top, width, height)`` of the projected boxes, row-wise."""
    b, _ = project_boxes(states, cam)
    return np.column_stack([b[:, 0], b[:, 1], b[:, 2] - b[:, 0], b[:, 3] - b[:, 1]])


@dataclass(frozen=True)
class BoxMeasurement:
    """Pinhole box measurement linearized by the unscented transform."""

    cam: CameraModel
    R: np.ndarray
    clutter_rate: float = 0.0
    clutter_width: tuple[float, float] = (10.0, 200.0)
    clutter_height: tuple[float, float] = (20.0, 500.0)
    ut: UnscentedParams = UnscentedParams()

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if R.shape != (4, 4) or not np.allclose(R, R.T) or np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("R must be a 4x4 symmetric positive-definite matrix")
        if self.clutter_rate < 0:
            raise ValueError("clutter_rate must be nonnegative")
        object.__setattr__(self, "R", R)

    @property
    def clutter_density(self) -> float:
        (w0, w1), (h0, h1) = self.clutter_width, self.clutter_height
        return 1.0 / (self.cam.image_area * (w1 - w0) * (h1 - h0))

    def moments(self, mean, cov):
        zhat, S, C = unscented_moments(lambda X: box_observation(X, self.cam), mean, cov, self.ut)
        return zhat, S + self.R, C

    def moments_batch(self, means, covs):
        zhat, S, C = unscented_moments_batch(lambda X: box_observation(X, self.cam), means, covs, self.ut)
        return zhat, S + self.R, C

    def clutter_intensity(self, z) -> float:
        (w0, w1), (h0, h1) = self.clutter_width, self.clutter_height
        inside = w0 <= z[2] <= w1 and h0 <= z[3] <= h1
        return self.clutter_rate * self.clutter_density if inside else 0.0


# ---------------------------------------------------------------------------
# Birth


class MarkCounter:
    """Monotone source of fresh marks."""

    def __init__(self, start: int = 0):
        self._next = start

    def __call__(self) -> int:
        m = self._next
        self._next += 1
        return m


@dataclass(frozen=True)
class BirthComponent:
    existence: float
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class BirthModel:
    """Static MB birth plus optional measurement-driven components.

    Adaptive births are created from the previous frame's measurements that
    fall outside the gate of every confirmed track.  A measured box is
    back-projected assuming the person stands on the ground plane with the
    nominal height ``assumed_height``.
    """

    static: tuple[BirthComponent, ...] = ()
    adaptive: bool = True
    existence: float = 0.1
    assumed_height: float = 1.7
    pos_std: tuple[float, float, float] = (0.3, 0.05, 1.0)
    vel_std: tuple[float, float, float] = (1.0, 0.05, 1.0)
    size_std: tuple[float, float] = (0.1, 0.15)

    def back_project(self, z, cam: CameraModel) -> np.ndarray:
        l, t, w, h = (float(v) for v in z)
        depth = cam.fy * self.assumed_height / max(h, 1e-6)
        x = (l + 0.5 * w - cam.cx) * depth / cam.fx
        mean = np.zeros(STATE_DIM)
        mean[IX], mean[IY], mean[IZ] = x, cam.height, depth
        mean[IW] = w * depth / cam.fx
        mean[IH] = self.assumed_height
        return mean

    def covariance(self) -> np.ndarray:
        d = np.zeros(STATE_DIM)
        d[[IX, IY, IZ]] = np.square(self.pos_std)
        d[[IX + 1, IY + 1, IZ + 1]] = np.square(self.vel_std)
        d[[IW, IH]] = np.square(self.size_std)
        return np.diag(d)

    def components(
        self,
        prev_Z: Sequence[np.ndarray],
        posterior: MBMDensity | None,
        meas,
        gate: float,
        threshold: float,
        cam: CameraModel | None,
    ) -> list[BirthComponent]:
        out = list(self.static)
        if not self.adaptive or cam is None or not prev_Z:
            return out
        tracks = []
        if posterior is not None:
            h = posterior.hypotheses[posterior.best_index()]
            tracks = [b for b in h.bernoullis if b.existence >= threshold]
        cov = self.covariance()
        for z in prev_Z:
            z = np.asarray(z, dtype=float)
            if any(_in_gate(b, z, meas, gate) for b in tracks):
                continue
            out.append(BirthComponent(self.existence, self.back_project(z, cam), cov))
        return out


def _in_gate(b: BernoulliComponent, z, meas, gate: float) -> bool:
    sp = b.spatial
    for k in range(sp.n_components):
        zhat, S, _ = meas.moments(sp.means[k], sp.covs[k])
        d = z - zhat
        if d @ np.linalg.solve(S, d) <= gate:
            return True
    return False


# ---------------------------------------------------------------------------
# Prediction and update


def predict(
    posterior: MBMDensity,
    motion: MotionModel,
    birth: Sequence[BernoulliComponent] = (),
) -> MBMDensity:
    """Kalman-predict every component, scale existence by survival, add births."""
    cache: dict[int, BernoulliComponent] = {}
    birth = tuple(birth)
    marks = {b.mark for b in birth}
    if len(marks) != len(birth):
        raise ValueError("birth marks must be distinct")

    # Bernoullis differing only in existence share one predicted density.
    spatial_cache: dict[int, tuple[SpatialDensity, SpatialDensity]] = {}

    def step(b: BernoulliComponent) -> BernoulliComponent:
        hit = cache.get(id(b))
        if hit is None:
            sp = b.spatial
            pair = spatial_cache.get(id(sp))
            if pair is None:
                means = sp.means @ motion.F.T
                covs = motion.F @ sp.covs @ motion.F.T + motion.Q
                pair = spatial_cache[id(sp)] = (sp, SpatialDensity._unchecked(sp.weights, means, covs))
            hit = BernoulliComponent(b.mark, motion.survival * b.existence, pair[1])
            cache[id(b)] = hit
        return hit

    hyps = []
    for h in posterior.hypotheses:
        if marks & set(h.marks):
            raise ValueError("birth marks must be fresh")
        hyps.append(MBHypothesis(h.log_weight, tuple(step(b) for b in h.bernoullis) + birth))
    return MBMDensity(tuple(hyps))


@dataclass
class _Detected:
    """Per-Bernoulli measurement-update quantities."""

    log_lik: np.ndarray  # (M,) log of the mixture likelihood of each z
    in_gate: np.ndarray  # (M,) bool
    comp_log_lik: np.ndarray  # (K, M)
    post_means: np.ndarray  # (K, M, n)
    post_covs: np.ndarray  # (K, n, n)


def _moments_batch(meas, means: np.ndarray, covs: np.ndarray):
    if hasattr(meas, "moments_batch"):
        return meas.moments_batch(means, covs)
    out = [meas.moments(m, P) for m, P in zip(means, covs)]
    return tuple(np.array(x) for x in zip(*out))


def _detection_terms_batch(bs: Sequence[BernoulliComponent], Z: np.ndarray, meas, gate: float) -> list[_Detected]:
    """Gaussian-mixture update terms for many Bernoullis at once."""
    owners = np.concatenate([np.full(b.spatial.n_components, i) for i, b in enumerate(bs)])
    means = np.concatenate([b.spatial.means for b in bs])
    covs = np.concatenate([b.spatial.covs for b in bs])
    logw = np.concatenate([np.log(np.where(b.spatial.weights > 0, b.spatial.weights, np.nan)) for b in bs])
    logw = np.where(np.isnan(logw), -np.inf, logw)
    zhat, S, C = _moments_batch(meas, means, covs)
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    Sinv = np.linalg.inv(S)
    G = C @ Sinv  # (K, n, d)
    D = Z[None, :, :] - zhat[:, None, :]  # (K, M, d)
    d2 = np.einsum("kmi,kij,kmj->km", D, Sinv, D)
    _, logdet = np.linalg.slogdet(S)
    ll = logw[:, None] - 0.5 * (d2 + logdet[:, None] + S.shape[1] * math.log(2 * math.pi))
    post_means = means[:, None, :] + np.einsum("kmd,knd->kmn", D, G)
    post_covs = covs - G @ S @ np.swapaxes(G, 1, 2)
    out = []
    for i in range(len(bs)):
        sel = owners == i
        cl = ll[sel]
        out.append(
            _Detected(
                np.logaddexp.reduce(cl, axis=0) if Z.shape[0] else np.zeros(0),
                (d2[sel] <= gate).any(axis=0),
                cl,
                post_means[sel],
                post_covs[sel],
            )
        )
    return out


def _detected_bernoulli(b: BernoulliComponent, det: _Detected, j: int) -> BernoulliComponent:
    lw = det.comp_log_lik[:, j]
    keep = np.isfinite(lw)
    w = np.exp(lw[keep] - np.logaddexp.reduce(lw[keep]))
    sp = SpatialDensity._unchecked(w / w.sum(), det.post_means[keep, j], det.post_covs[keep])
    return BernoulliComponent(b.mark, 1.0, sp)


def _missed_bernoulli(b: BernoulliComponent, pd: float) -> BernoulliComponent:
    denom = 1.0 - b.existence * pd
    r = 0.0 if denom <= 0 else b.existence * (1.0 - pd) / denom
    return BernoulliComponent(b.mark, min(max(r, 0.0), 1.0), b.spatial)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def update(
    prior: MBMDensity,
    Z: Sequence,
    pod: PodAssignment | dict,
    meas,
    cfg: FilterConfig,
) -> MBMDensity:
    """Measurement update of every hypothesis followed by pruning."""
    prior = prior.normalized()
    per_mark = pod.per_mark if isinstance(pod, PodAssignment) else pod
    M = len(Z)
    Z = np.asarray(Z, dtype=float).reshape(M, -1) if M else np.zeros((0, 0))
    log_clutter = np.array([_log(meas.clutter_intensity(z)) for z in Z])
    rank_clutter = np.where(np.isfinite(log_clutter), log_clutter, -_NO_CLUTTER_BONUS)

    distinct: dict[int, BernoulliComponent] = {}
    for h in prior.hypotheses:
        for b in h.bernoullis:
            if b.mark not in per_mark:
                raise MissingPod(f"no PoD for mark {b.mark}")
            distinct.setdefault(id(b), b)
    det_cache: dict[int, _Detected] = {}
    if M and distinct:
        bs = list(distinct.values())
        det_cache = dict(zip(distinct, _detection_terms_batch(bs, Z, meas, cfg.gate_threshold)))

    # Cost rows depend only on the Bernoulli and its mark's PoD.
    rows: dict[int, tuple[np.ndarray, float, np.ndarray]] = {}
    for key, b in distinct.items():
        pd = float(per_mark[b.mark])
        log_assoc = np.full(M, -np.inf)
        rp = b.existence * pd
        if M and rp > 0:
            det = det_cache[key]
            ok = det.in_gate & np.isfinite(det.log_lik)
            log_assoc[ok] = math.log(rp) + det.log_lik[ok]
        with np.errstate(invalid="ignore"):
            rank = -(log_assoc - rank_clutter)
        rows[key] = (log_assoc, _log(1.0 - rp), np.where(np.isnan(rank), np.inf, rank))

    miss_cache: dict[int, BernoulliComponent] = {}
    hit_cache: dict[tuple[int, int], BernoulliComponent] = {}
    children: list[MBHypothesis] = []
    for h, w in zip(prior.hypotheses, prior.weights):
        bs = h.bernoullis
        N = len(bs)
        # Rows: Bernoullis.  Columns: measurements, then one miss slot per row.
        cost = np.full((N, M + N), np.inf)
        for i, b in enumerate(bs):
            r = rows[id(b)]
            cost[i, :M] = r[2]
            cost[i, M + i] = -r[1]
        k_best = max(1, math.ceil(w * cfg.murty_factor))
        for _, cols in murty_kbest(cost, k_best) if N else [(0.0, ())]:
            lw = h.log_weight
            used = set()
            new_bs = []
            for i, j in enumerate(cols):
                b = bs[i]
                if j < M:
                    lw += rows[id(b)][0][j]
                    used.add(j)
                    # The detected posterior ignores the prior existence, so
                    # Bernoullis sharing a density share the result.
                    hk = (id(b.spatial), j)
                    nb = hit_cache.get(hk)
                    if nb is None:
                        nb = hit_cache[hk] = _detected_bernoulli(b, det_cache[id(b)], j)
                else:
                    lw += rows[id(b)][1]
                    nb = miss_cache.get(id(b))
                    if nb is None:
                        nb = miss_cache[id(b)] = _missed_bernoulli(b, float(per_mark[b.mark]))
                new_bs.append(nb)
            lw += sum(log_clutter[j] for j in range(M) if j not in used)
            if np.isfinite(lw):
                children.append(MBHypothesis(lw, tuple(new_bs)))
    if not children:
        raise OcctrackError("no feasible data-association hypothesis")
    return prune_and_cap(merge_duplicates(MBMDensity(tuple(children))), cfg)


def merge_duplicates(mbm: MBMDensity) -> MBMDensity:
    """Sum the weights of hypotheses holding the same Bernoulli objects.

    Bernoullis below the existence floor are ignored when comparing, since
    pruning removes them anyway.  The first occurrence keeps its position.
    """
    groups: dict[tuple, list] = {}
    for h in mbm.hypotheses:
        bs = tuple(b for b in h.bernoullis if b.existence >= EXISTENCE_FLOOR)
        key = tuple(sorted(id(b) for b in bs))
        if key in groups:
            groups[key][1].append(h.log_weight)
        else:
            groups[key] = [bs, [h.log_weight]]
    if len(groups) == len(mbm.hypotheses):
        return mbm
    return MBMDensity(tuple(MBHypothesis(float(np.logaddexp.reduce(lws)), bs) for bs, lws in groups.values()))


def prune_and_cap(mbm: MBMDensity, cfg: FilterConfig) -> MBMDensity:
    lw = np.array([h.log_weight for h in mbm.hypotheses])
    lw = lw - np.logaddexp.reduce(lw)
    keep = np.flatnonzero(lw >= cfg.prune_log_weight)
    if keep.size == 0:
        keep = np.array([int(np.argmax(lw))])
    # Stable sort: equal weights keep their original order.
    keep = keep[np.argsort(-lw[keep], kind="stable")][: cfg.max_hypotheses]
    keep = np.sort(keep)
    hyps = []
    for i in keep:
        h = mbm.hypotheses[i]
        bs = tuple(b for b in h.bernoullis if b.existence >= EXISTENCE_FLOOR)
        hyps.append(MBHypothesis(float(lw[i]), bs))
    return MBMDensity(tuple(hyps)).normalized()


# ---------------------------------------------------------------------------
# Estimation


@dataclass(frozen=True)
class TrackEstimate:
    mark: int
    state: np.ndarray
    box: BBox2D | None
    existence: float


@dataclass
class TrackOutput:
    frames: list[tuple[int, list[TrackEstimate]]] = field(default_factory=list)

    def trajectories(self) -> dict[int, dict[int, TrackEstimate]]:
        out: dict[int, dict[int, TrackEstimate]] = {}
        for k, ests in self.frames:
            for e in ests:
                out.setdefault(e.mark, {})[k] = e
        return out


def project_estimates_ut(
    means: Sequence[np.ndarray],
    covs: Sequence[np.ndarray],
    cam: CameraModel,
    params: UnscentedParams = UnscentedParams(),
) -> list[BBox2D]:
    """Mean projected box of each Gaussian state via the unscented transform."""
    out = []
    for m, P in zip(means, covs):
        y, _, _ = unscented_moments(lambda X: box_observation(X, cam), m, P, params)
        out.append(BBox2D(float(y[0]), float(y[1]), max(float(y[2]), 0.0), max(float(y[3]), 0.0)))
    return out


def estimate(mbm: MBMDensity, cfg: FilterConfig, cam: CameraModel | None = None) -> list[TrackEstimate]:
    """Bernoullis of the best hypothesis with existence at or above the threshold."""
    h = mbm.hypotheses[mbm.best_index()]
    chosen = [b for b in h.bernoullis if b.existence >= cfg.exist_threshold]
    means = [b.spatial.mean() for b in chosen]
    boxes = [None] * len(chosen)
    if cam is not None and chosen:
        boxes = project_estimates_ut(means, [b.spatial.covariance() for b in chosen], cam)
    return [TrackEstimate(b.mark, m, bx, b.existence) for b, m, bx in zip(chosen, means, boxes)]


# ---------------------------------------------------------------------------
# Recursion


@dataclass(frozen=True)
class TrackerModels:
    motion: MotionModel
    meas: object
    birth: BirthModel = BirthModel()
    cam: CameraModel | None = None
    occlusion: OcclusionConfig = OcclusionConfig()
    curve: PodCurve | None = None
    epd: EpdConfig = EpdConfig()


def strategy_pod(
    prior: MBMDensity,
    models: TrackerModels,
    cfg: FilterConfig,
    seed,
    diagnostics: list | None = None,
) -> PodAssignment:
    if cfg.strategy == "constant":
        return constant_pod(prior, cfg.constant_pd, diagnostics)
    if models.curve is None or models.cam is None:
        raise ValueError(f"strategy {cfg.strategy!r} needs a camera and a PoD curve")
    if cfg.strategy == "eso":
        return eso_pod(prior, models.cam, models.occlusion, models.curve, cfg.exist_threshold, diagnostics)
    ctx = EpdContext(models.cam, models.occlusion, models.curve, models.epd, seed)
    return pro_pod(prior, ctx, diagnostics)


def run_tracker(
    frames: Sequence,
    models: TrackerModels,
    cfg: FilterConfig,
    seed: int = 0,
    initial: MBMDensity | None = None,
    diagnostics: list | None = None,
    on_frame: Callable[[int, MBMDensity], None] | None = None,
) -> TrackOutput:
    """Run predict, PoD strategy, update and estimate over ``frames``.

    ``frames`` holds objects with ``frame`` and ``measurements`` attributes.
    Errors are re-raised as :class:`FrameError` carrying the frame index.
    """
    out = TrackOutput()
    post = initial if initial is not None else MBMDensity.empty()
    counter = MarkCounter(1 + max(post.marks, default=-1))
    prev_Z: list = []
    had_posterior = initial is not None
    for fr in frames:
        k = fr.frame
        try:
            comps = models.birth.components(
                prev_Z,
                post if had_posterior else None,
                models.meas,
                cfg.gate_threshold,
                cfg.exist_threshold,
                models.cam,
            )
            births = [BernoulliComponent(counter(), c.existence, SpatialDensity.gaussian(c.mean, c.cov)) for c in comps]
            pred = predict(post, models.motion, births)
            diag: list | None = [] if diagnostics is not None else None
            pod = strategy_pod(pred, models, cfg, (seed, k), diag)
            Z = [np.asarray(z, dtype=float) for z in fr.measurements]
            post = update(pred, Z, pod, models.meas, cfg)
            had_posterior = True
            out.frames.append((k, estimate(post, cfg, models.cam)))
            if diagnostics is not None:
                diagnostics.append((k, diag))
            if on_frame is not None:
                on_frame(k, post)
            prev_Z = Z
        except FrameError:
            raise
        except (OcctrackError, ValueError, np.linalg.LinAlgError) as e:
            raise FrameError(k, e) from e
    return out

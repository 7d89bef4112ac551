"""Expected probability of detection under the reduced Palm density.

The PRO strategy assigns every mark ``m`` the value

    P_D(m) = sum_h w_h r_h^m Pbar(m, h) / sum_h w_h r_h^m

where ``Pbar(m, h)`` averages the occlusion-dependent PoD over the spatial
density of ``m`` and over the remaining Bernoullis of hypothesis ``h``.  The
inner expectation is expanded over occluder subsets ``A`` with weights
``omega_h^m(A)`` and each term is integrated by Monte Carlo with common
random numbers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import CombinationBlowup, MarkNotInHypothesis, NeverExisting, SpaceTooLarge
from .occlusion import CameraModel, OcclusionConfig, PodCurve, ProjectedSamples, may_occlude, pod_batch, pod_from_projections, visibility_all_subsets, visibility_each
from .rfs import BernoulliComponent, DiscreteSpace, MBHypothesis, MBMDensity

STRATEGIES = ("constant", "eso", "pro")


@dataclass(frozen=True)
class EpdConfig:
    r_discard: float = 1e-3
    r_certain: float = 0.999
    mc_samples: int = 1000
    independence_eps: float = 0.01
    max_uncertain: int = 12
    simplify: bool = True
    # The lightest hypotheses of a mark are skipped while their combined
    # share of its existence mass stays below this; the EPD error is
    # bounded by the skipped share.
    weight_floor: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.r_discard < self.r_certain < 1.0:
            raise ValueError("need 0 < r_discard < r_certain < 1")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        if self.max_uncertain < 0:
            raise ValueError("max_uncertain must be >= 0")
        if not 0.0 <= self.weight_floor < 1.0:
            raise ValueError("weight_floor must lie in [0, 1)")


@dataclass(frozen=True)
class PodAssignment:
    per_mark: Mapping[int, float]
    strategy: str

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        for m, v in self.per_mark.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"PoD of mark {m} outside [0, 1]: {v}")

    def __getitem__(self, mark: int) -> float:
        return self.per_mark[mark]

    def __contains__(self, mark) -> bool:
        return mark in self.per_mark


def omega(A: Iterable[int], h: MBHypothesis, m: int) -> float:
    """Probability that exactly the marks in ``A`` exist among ``h`` minus ``m``."""
    if h.get(m) is None:
        raise MarkNotInHypothesis(f"mark {m} not in hypothesis")
    A = set(A)
    others = h.without(m)
    if not A <= {b.mark for b in others}:
        raise MarkNotInHypothesis("A must be a subset of the other marks")
    out = 1.0
    for b in others:
        out *= b.existence if b.mark in A else 1.0 - b.existence
    return out


def enumerate_combinations(M_c: Iterable[int], M_u: Sequence[int], cap: int = 12) -> list[frozenset]:
    """All ``A^u | M_c`` for ``A^u`` a subset of ``M_u``, ordered by size."""
    M_u = list(M_u)
    if len(M_u) > cap:
        raise CombinationBlowup(f"{len(M_u)} uncertain marks exceed the cap of {cap}")
    base = frozenset(M_c)
    out = []
    for k in range(len(M_u) + 1):
        for sub in itertools.combinations(M_u, k):
            out.append(base | frozenset(sub))
    return out


def _weights_over(A_u: frozenset, uncertain: Sequence[BernoulliComponent]) -> float:
    w = 1.0
    for b in uncertain:
        w *= b.existence if b.mark in A_u else 1.0 - b.existence
    return w


class EpdContext:
    """Geometry, configuration and per-frame MC caches for EPD evaluation.

    Samples are drawn once per (mark, spatial density) pair from a
    generator seeded by ``(*seed, mark)``, so every hypothesis and every
    occluder subset reuses the same draws.  Bernoullis that differ only in
    existence share their samples.  Results are memoized on object identity;
    a context must therefore not outlive the densities it was used with by
    much, and one context per frame is the intended usage.
    """

    def __init__(
        self,
        cam: CameraModel,
        cfg: OcclusionConfig,
        curve: PodCurve,
        epd_cfg: EpdConfig | None = None,
        seed=0,
    ):
        self.cam = cam
        self.cfg = cfg
        self.curve = curve
        self.epd_cfg = epd_cfg or EpdConfig()
        self.seed = [int(s) for s in np.atleast_1d(seed)]
        # Values hold a reference to the spatial density, keeping ids unique.
        self._samples: dict[tuple[int, int], tuple[object, np.ndarray, ProjectedSamples]] = {}
        self._indep: dict[tuple, bool] = {}
        self._memo: dict[tuple, tuple[np.ndarray, int]] = {}
        self._alone: dict[tuple[int, int], np.ndarray] = {}
        self._tables: dict[tuple, np.ndarray] = {}
        self._normals: dict[int, np.ndarray] = {}

    @staticmethod
    def _key(b: BernoulliComponent) -> tuple[int, int]:
        return (int(b.mark), id(b.spatial))

    def samples(self, b: BernoulliComponent) -> np.ndarray:
        return self._projected(b)[0]

    def _projected(self, b: BernoulliComponent) -> tuple[np.ndarray, ProjectedSamples]:
        key = self._key(b)
        hit = self._samples.get(key)
        if hit is not None:
            return hit[1], hit[2]
        sp = b.spatial
        if sp.n_components == 1:
            # Same draws as sp.sample with this mark's generator, shared by
            # every single-component density of the mark.
            eps = self._normals.get(b.mark)
            if eps is None:
                rng = np.random.default_rng([*self.seed, int(b.mark)])
                eps = self._normals[b.mark] = rng.standard_normal((self.epd_cfg.mc_samples, sp.dim))
            s = sp.means[0] + eps @ sp._sqrt[0].T
        else:
            s = sp.sample(np.random.default_rng([*self.seed, int(b.mark)]), self.epd_cfg.mc_samples)
        proj = ProjectedSamples.of(s, self.cam)
        self._samples[key] = (b.spatial, s, proj)
        return s, proj

    def pd_alone(self, b: BernoulliComponent) -> np.ndarray:
        key = self._key(b)
        if key not in self._alone:
            self._alone[key] = pod_from_projections(self._projected(b)[1], [], self.cfg, self.curve)
        return self._alone[key]

    def pd_with(self, b: BernoulliComponent, occ: Sequence[BernoulliComponent]) -> np.ndarray:
        if not occ:
            return self.pd_alone(b)
        target = self._projected(b)[1]
        return pod_from_projections(target, [self._projected(o)[1] for o in occ], self.cfg, self.curve)

    def pd_table(self, b: BernoulliComponent, occ: Sequence[BernoulliComponent]) -> np.ndarray:
        """Per-sample PoD of ``b`` for every subset of ``occ`` (rows by bitmask)."""
        key = (self._key(b), *(self._key(o) for o in occ))
        hit = self._tables.get(key)
        if hit is None:
            target = self._projected(b)[1]
            vis = visibility_all_subsets(target, [self._projected(o)[1] for o in occ], self.cfg)
            hit = self._tables[key] = np.where(target.valid, self.curve(vis), 0.0)
        return hit

    def test_independence(self, b: BernoulliComponent, others: Iterable[BernoulliComponent]) -> None:
        """Run the independence test of ``b`` against every untested occluder at once."""
        kb = self._key(b)
        target = self._projected(b)[1]
        todo, projs = [], []
        for o in others:
            key = (kb, self._key(o))
            if key in self._indep:
                continue
            po = self._projected(o)[1]
            if may_occlude(target, po, self.cfg):
                todo.append(key)
                projs.append(po)
            else:
                self._indep[key] = True
        if not todo:
            return
        pd = np.where(target.valid, self.curve(visibility_each(target, projs, self.cfg)), 0.0)
        shift = (pd - self.pd_alone(b)).mean(axis=1)
        for key, s in zip(todo, np.abs(shift)):
            self._indep[key] = bool(s < self.epd_cfg.independence_eps)

    def independent(self, b: BernoulliComponent, o: BernoulliComponent) -> bool:
        """Paired-sample test that ``o`` never changes the PoD of ``b``."""
        key = (self._key(b), self._key(o))
        hit = self._indep.get(key)
        if hit is None:
            if not may_occlude(self._projected(b)[1], self._projected(o)[1], self.cfg):
                hit = True
            else:
                t = self.pd_table(b, (o,))
                hit = bool(abs((t[1] - t[0]).mean()) < self.epd_cfg.independence_eps)
            self._indep[key] = hit
        return hit


def simplify_hypothesis(m: int, h: MBHypothesis, ctx: EpdContext):
    """Split the other Bernoullis of ``h`` into certain and uncertain occluders.

    Returns ``(certain, uncertain)`` as tuples of Bernoulli components.
    """
    b = h.get(m)
    if b is None:
        raise MarkNotInHypothesis(f"mark {m} not in hypothesis")
    ec = ctx.epd_cfg
    others = h.without(m)
    if not ec.simplify:
        return (), tuple(others)
    others = [o for o in others if o.existence >= ec.r_discard]
    ctx.test_independence(b, others)
    certain, uncertain = [], []
    for o in others:
        if ctx.independent(b, o):
            continue
        (certain if o.existence > ec.r_certain else uncertain).append(o)
    return tuple(certain), tuple(uncertain)


def epd_hypothesis_samples(m: int, h: MBHypothesis, ctx: EpdContext) -> np.ndarray:
    """Per-sample integrand whose mean is ``Pbar(m, h)``; zeros if ``m`` is absent."""
    b = h.get(m)
    if b is None:
        return np.zeros(ctx.epd_cfg.mc_samples)
    return _epd_samples(b, h, ctx)[0]


# Largest occluder count evaluated through visibility_all_subsets.
SUBSET_TABLE_MAX = 10


def _epd_samples(b: BernoulliComponent, h: MBHypothesis, ctx: EpdContext) -> tuple[np.ndarray, int]:
    certain, uncertain = simplify_hypothesis(b.mark, h, ctx)
    key = (
        ctx._key(b),
        tuple(ctx._key(o) for o in certain),
        tuple((ctx._key(o), o.existence) for o in uncertain),
    )
    hit = ctx._memo.get(key)
    if hit is not None:
        return hit
    combos = enumerate_combinations([o.mark for o in certain], [o.mark for o in uncertain], ctx.epd_cfg.max_uncertain)
    g = ctx.pd_alone(b)
    if len(certain) + len(uncertain) > SUBSET_TABLE_MAX:
        # The all-subsets table would be too large; go combination by combination.
        by_mark = {o.mark: o for o in (*certain, *uncertain)}
        certain_marks = frozenset(o.mark for o in certain)
        g = np.zeros(ctx.epd_cfg.mc_samples)
        for A in combos:
            w = _weights_over(A - certain_marks, uncertain)
            if w > 0.0:
                g += w * ctx.pd_with(b, [by_mark[k] for k in sorted(A)])
    elif certain or uncertain:
        # Rows whose mask contains every certain occluder, indexed by the
        # uncertain bits; weights follow the same bit order.
        pd = ctx.pd_table(b, (*certain, *uncertain))[(1 << len(certain)) - 1 :: 1 << len(certain)]
        w = np.ones(1)
        for o in uncertain:
            w = np.concatenate([w * (1.0 - o.existence), w * o.existence])
        g = w @ pd
    # Every spatial density in the key has cached samples, which keeps it
    # alive and its id unique for the lifetime of the context.
    out = (g, len(certain) + len(uncertain))
    ctx._memo[key] = out
    return out


def epd_hypothesis(m: int, h: MBHypothesis, ctx: EpdContext) -> float:
    if h.get(m) is None:
        return 0.0
    return float(np.clip(epd_hypothesis_samples(m, h, ctx).mean(), 0.0, 1.0))


def epd_standard_error(m: int, h: MBHypothesis, ctx: EpdContext) -> float:
    g = epd_hypothesis_samples(m, h, ctx)
    if g.size < 2:
        return 0.0
    return float(g.std(ddof=1) / math.sqrt(g.size))


def _mixture_weights(prior: MBMDensity, m: int, floor: float = 0.0) -> np.ndarray:
    w = prior.weights
    r = np.array([(b.existence if (b := h.get(m)) is not None else 0.0) for h in prior.hypotheses])
    wr = w * r
    total = wr.sum()
    if floor > 0 and total > 0:
        # Drop the lightest hypotheses while their combined share stays
        # within the floor; the EPD moves by at most that share.
        order = np.argsort(wr, kind="stable")
        drop = order[np.cumsum(wr[order]) <= floor * total]
        wr = wr.copy()
        wr[drop] = 0.0
    return wr


def combine_hypotheses(weights: np.ndarray, values: np.ndarray) -> float:
    total = float(weights.sum())
    if total <= 0.0:
        raise NeverExisting("mark has zero existence mass")
    return float(np.clip(weights @ values / total, 0.0, 1.0))


def epd_per_mark(prior: MBMDensity, m: int, ctx: EpdContext) -> float:
    wr = _mixture_weights(prior, m, ctx.epd_cfg.weight_floor)
    if wr.sum() <= 0.0:
        raise NeverExisting(f"mark {m} has zero existence mass")
    vals = np.array([epd_hypothesis(m, h, ctx) if wr[i] > 0 else 0.0 for i, h in enumerate(prior.hypotheses)])
    return combine_hypotheses(wr, vals)


@dataclass
class EpdDiagnostic:
    mark: int
    strategy: str
    epd: float
    n_hypotheses: int
    n_occluders: int


def _prime_independence(prior: MBMDensity, m: int, wr: np.ndarray, ctx: EpdContext) -> None:
    """One batched independence test per density of ``m`` over all its co-hypothesized occluders."""
    groups: dict[tuple, tuple[BernoulliComponent, dict]] = {}
    r_min = ctx.epd_cfg.r_discard
    for i, h in enumerate(prior.hypotheses):
        if wr[i] <= 0:
            continue
        b = h.get(m)
        _, others = groups.setdefault(ctx._key(b), (b, {}))
        for o in h.bernoullis:
            if o.mark != m and o.existence >= r_min:
                others.setdefault(ctx._key(o), o)
    for b, others in groups.values():
        ctx.test_independence(b, others.values())


def pro_pod(prior: MBMDensity, ctx: EpdContext, diagnostics: list | None = None) -> PodAssignment:
    per_mark = {}
    for m in prior.marks:
        wr = _mixture_weights(prior, m, ctx.epd_cfg.weight_floor)
        if wr.sum() <= 0.0:
            # Nothing to update for a mark that cannot exist.
            per_mark[m] = 0.0
            continue
        if ctx.epd_cfg.simplify:
            _prime_independence(prior, m, wr, ctx)
        vals = np.zeros(len(wr))
        n_occ = 0
        for i, h in enumerate(prior.hypotheses):
            if wr[i] > 0:
                g, k = _epd_samples(h.get(m), h, ctx)
                vals[i] = np.clip(g.mean(), 0.0, 1.0)
                n_occ = max(n_occ, k)
        per_mark[m] = combine_hypotheses(wr, vals)
        if diagnostics is not None:
            diagnostics.append(EpdDiagnostic(m, "pro", per_mark[m], int((wr > 0).sum()), n_occ))
    return PodAssignment(per_mark, "pro")


def constant_pod(prior: MBMDensity, pd: float, diagnostics: list | None = None) -> PodAssignment:
    per_mark = {m: float(pd) for m in prior.marks}
    if diagnostics is not None:
        for m in prior.marks:
            n = sum(h.get(m) is not None for h in prior.hypotheses)
            diagnostics.append(EpdDiagnostic(m, "constant", float(pd), n, 0))
    return PodAssignment(per_mark, "constant")


def estimator1(mbm: MBMDensity, threshold: float = 0.5) -> list[tuple[BernoulliComponent, np.ndarray]]:
    """Bernoullis of the best hypothesis with existence at least ``threshold``."""
    h = mbm.hypotheses[mbm.best_index()]
    return [(b, b.spatial.mean()) for b in h.bernoullis if b.existence >= threshold]


def eso_pod(
    prior: MBMDensity,
    cam: CameraModel,
    cfg: OcclusionConfig,
    curve: PodCurve,
    threshold: float = 0.5,
    diagnostics: list | None = None,
) -> PodAssignment:
    est = estimator1(prior, threshold)
    means = {b.mark: x for b, x in est}
    per_mark = {}
    n_occ = {}
    for m, x in means.items():
        occ = [o[None, :] for k, o in means.items() if k != m]
        per_mark[m] = float(pod_batch(x[None, :], occ, cam, cfg, curve)[0])
        n_occ[m] = len(occ)
    order = np.argsort(-prior.weights, kind="stable")
    for m in prior.marks:
        if m in per_mark:
            continue
        # Not estimated: evaluate without occluders at the best available mean.
        b = next(b for i in order if (b := prior.hypotheses[i].get(m)) is not None)
        per_mark[m] = float(pod_batch(b.spatial.mean()[None, :], [], cam, cfg, curve)[0])
        n_occ[m] = 0
    if diagnostics is not None:
        for m in prior.marks:
            n = sum(h.get(m) is not None for h in prior.hypotheses)
            diagnostics.append(EpdDiagnostic(m, "eso", per_mark[m], n, n_occ[m]))
    return PodAssignment(per_mark, "eso")


# ---------------------------------------------------------------------------
# Discrete oracle


PodFn = Callable[[np.ndarray, list], float]


def _cell_masses(spatial, space: DiscreteSpace) -> np.ndarray:
    p = np.array([spatial.pdf(x) for x in space.points]) * space.cell_volume
    s = p.sum()
    if s <= 0:
        raise ValueError("spatial density has no mass on the discrete space")
    return p / s


def _default_likelihood(meas_space: DiscreteSpace):
    pts = np.array([np.atleast_1d(z) for z in meas_space.points], dtype=float)

    def lik(x):
        d2 = ((pts - np.atleast_1d(x)) ** 2).sum(axis=1)
        return np.exp(-0.5 * d2)

    return lik


def _check_size(space: DiscreteSpace, meas_space: DiscreteSpace, n_marks: int):
    if len(space) > 4 or len(meas_space) > 4:
        raise SpaceTooLarge("oracle supports at most 4 cells per space")
    if space.max_cardinality > 3 or meas_space.max_cardinality > 3:
        raise SpaceTooLarge("oracle supports cardinality at most 3")
    if n_marks > space.max_cardinality:
        raise SpaceTooLarge("more marks than the state-space cardinality allows")


def _labeled_configs(prior: MBMDensity, space: DiscreteSpace):
    """Yield ``(config, prob)`` with config a tuple of cell index or -1 per mark."""
    marks = prior.marks
    n = len(space)
    tables = []
    for h, w in zip(prior.hypotheses, prior.weights):
        t = []
        for m in marks:
            b = h.get(m)
            if b is None:
                t.append(np.concatenate([[1.0], np.zeros(n)]))
            else:
                t.append(np.concatenate([[1.0 - b.existence], b.existence * _cell_masses(b.spatial, space)]))
        tables.append((w, t))
    for cfg in itertools.product(range(-1, n), repeat=len(marks)):
        p = 0.0
        for w, t in tables:
            p += w * math.prod(t[k][c + 1] for k, c in enumerate(cfg))
        yield cfg, p


def _clutter_log_terms(meas_space: DiscreteSpace, rate: float) -> np.ndarray:
    """Log-probabilities of clutter multisets up to the cardinality cap."""
    n = len(meas_space)
    out = []
    for k in range(meas_space.max_cardinality + 1):
        for combo in itertools.combinations_with_replacement(range(n), k):
            counts = np.bincount(combo, minlength=n)
            # Uniform clutter over the cells.
            lp = -rate + k * (math.log(rate) - math.log(n)) if rate > 0 else (0.0 if k == 0 else -np.inf)
            lp += math.lgamma(k + 1) - gammaln(counts + 1).sum()
            out.append(lp)
    return np.array(out)


class KldOracle:
    """Exhaustive ``D_KL(p || q)`` between the SPO-D and a mark-PoD SPO model.

    ``p`` uses ``pod_fn(x, occluders)`` with the true configuration of the
    other objects; ``q`` replaces it with a constant per mark.  Both joint
    densities over (labeled X, marked Z) are enumerated explicitly.
    Measurement likelihoods are normalized over the measurement cells and
    clutter is Poisson, uniform over the cells, with count truncated at the
    measurement-space cardinality cap.
    """

    def __init__(
        self,
        space: DiscreteSpace,
        meas_space: DiscreteSpace,
        prior: MBMDensity,
        pod_fn: PodFn,
        likelihood: Callable[[np.ndarray], np.ndarray] | None = None,
        clutter_rate: float = 0.5,
    ):
        prior = prior.normalized()
        self.marks = prior.marks
        _check_size(space, meas_space, len(self.marks))
        lik = likelihood or _default_likelihood(meas_space)
        L = np.array([np.asarray(lik(x), dtype=float) for x in space.points])
        L = L / L.sum(axis=1, keepdims=True)
        M = len(self.marks)
        nz = len(meas_space)
        rows_base, rows_det, rows_miss, rows_logP, rows_log1mP = [], [], [], [], []
        for cfg, px in _labeled_configs(prior, space):
            if px <= 0.0:
                continue
            present = [k for k, c in enumerate(cfg) if c >= 0]
            P = np.zeros(M)
            for k in present:
                others = [space.points[cfg[j]] for j in present if j != k]
                P[k] = pod_fn(space.points[cfg[k]], others)
            # Each present object is missed (-1) or detected in a cell.
            for out in itertools.product(range(-1, nz), repeat=len(present)):
                det = np.zeros(M, dtype=bool)
                miss = np.zeros(M, dtype=bool)
                lb = math.log(px)
                for k, j in zip(present, out):
                    if j < 0:
                        miss[k] = True
                    else:
                        det[k] = True
                        lb += math.log(L[cfg[k], j]) if L[cfg[k], j] > 0 else -np.inf
                rows_base.append(lb)
                rows_det.append(det)
                rows_miss.append(miss)
                rows_logP.append(np.log(np.where(det, P, 1.0)))
                rows_log1mP.append(np.log(np.where(miss, 1.0 - P, 1.0)))
        with np.errstate(divide="ignore"):
            self._base = np.array(rows_base)
            self._det = np.array(rows_det).reshape(-1, M)
            self._miss = np.array(rows_miss).reshape(-1, M)
            self._logp_det = np.array(rows_logP).reshape(-1, M)
            self._logp_miss = np.array(rows_log1mP).reshape(-1, M)
        self._clutter = _clutter_log_terms(meas_space, clutter_rate)
        self._clutter = self._clutter[np.isfinite(self._clutter)]

    def _vector(self, pod_map) -> np.ndarray:
        per = pod_map.per_mark if isinstance(pod_map, PodAssignment) else pod_map
        return np.array([per[m] for m in self.marks], dtype=float)

    def __call__(self, pod_map) -> float:
        q = self._vector(pod_map)
        with np.errstate(divide="ignore", invalid="ignore"):
            lq_det = np.where(self._det, np.log(q)[None, :], 0.0).sum(axis=1)
            lq_miss = np.where(self._miss, np.log1p(-q)[None, :], 0.0).sum(axis=1)
            logp_row = self._base + self._logp_det.sum(axis=1) + self._logp_miss.sum(axis=1)
            logq_row = self._base + lq_det + lq_miss
            # Pair every (X, detections) row with every clutter outcome.
            logp = logp_row[:, None] + self._clutter[None, :]
            logq = logq_row[:, None] + self._clutter[None, :]
            p = np.exp(logp)
            terms = np.where(p > 0, p * (logp - logq), 0.0)
        return float(terms.sum())


def kld_oracle(
    space: DiscreteSpace,
    meas_space: DiscreteSpace,
    prior: MBMDensity,
    pod_map,
    pod_fn: PodFn,
    likelihood=None,
    clutter_rate: float = 0.5,
) -> float:
    return KldOracle(space, meas_space, prior, pod_fn, likelihood, clutter_rate)(pod_map)


def epd_per_mark_discrete(prior: MBMDensity, m: int, space: DiscreteSpace, pod_fn: PodFn) -> float:
    """Exact EPD on a discrete space via the same omega expansion."""
    prior = prior.normalized()
    wr = _mixture_weights(prior, m)
    vals = np.zeros(len(wr))
    n = len(space)
    for i, h in enumerate(prior.hypotheses):
        b = h.get(m)
        if b is None or wr[i] == 0:
            continue
        others = h.without(m)
        masses = {o.mark: _cell_masses(o.spatial, space) for o in others}
        px = _cell_masses(b.spatial, space)
        total = 0.0
        for A in enumerate_combinations([], [o.mark for o in others], cap=len(others)):
            w = omega(A, h, m)
            if w == 0.0:
                continue
            A = sorted(A)
            inner = 0.0
            for xi in range(n):
                if px[xi] == 0:
                    continue
                for cells in itertools.product(range(n), repeat=len(A)):
                    po = math.prod(masses[a][c] for a, c in zip(A, cells))
                    if po == 0:
                        continue
                    inner += px[xi] * po * pod_fn(space.points[xi], [space.points[c] for c in cells])
            total += w * inner
        vals[i] = total
    return combine_hypotheses(wr, vals)

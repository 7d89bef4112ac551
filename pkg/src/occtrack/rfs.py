"""Finite-set statistics kernel.

Gaussian-mixture spatial densities, Bernoulli / multi-Bernoulli / Poisson /
PMB set densities, PHDs, reduced Palm densities and a brute-force set
integral over a discretized state space (used as a test oracle).

Finite point sets are passed as sequences of state vectors.  Repeated
points are allowed so that the discrete set-integral oracle can enumerate
ordered tuples with repetition.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import UnknownMark, ZeroPhd

EIG_FLOOR = 1e-9
# Bernoullis below this existence are dropped during hypothesis management.
EXISTENCE_FLOOR = 1e-4


def _as_points(X) -> list[np.ndarray]:
    return [np.atleast_1d(np.asarray(x, dtype=float)) for x in X]


@dataclass(frozen=True, eq=False)
class SpatialDensity:
    """Gaussian mixture over the state space."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        mu = np.asarray(self.means, dtype=float)
        if mu.ndim == 1:
            mu = mu[None, :]
        P = np.asarray(self.covs, dtype=float)
        if P.ndim == 2:
            P = P[None, :, :]
        if not (len(w) == len(mu) == len(P)) or len(w) == 0:
            raise ValueError("mixture component counts disagree")
        if np.any(w < 0):
            raise ValueError("negative mixture weight")
        s = w.sum()
        if abs(s - 1.0) > 1e-6:
            raise ValueError(f"mixture weights sum to {s}, expected 1")
        w = w / s
        if np.abs(P - np.swapaxes(P, 1, 2)).max() > 1e-9 * max(1.0, np.abs(P).max()):
            raise ValueError("covariance not symmetric")
        P = 0.5 * (P + np.swapaxes(P, 1, 2))
        for arr in (w, mu, P):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", P)

    @classmethod
    def _unchecked(cls, weights: np.ndarray, means: np.ndarray, covs: np.ndarray) -> "SpatialDensity":
        """Build from arrays already in canonical form, skipping validation.

        For filter internals whose outputs are normalized by construction;
        covariances are still symmetrized.
        """
        obj = object.__new__(cls)
        P = 0.5 * (covs + np.swapaxes(covs, 1, 2))
        for name, arr in (("weights", np.array(weights, dtype=float)), ("means", np.array(means, dtype=float)), ("covs", P)):
            arr.setflags(write=False)
            object.__setattr__(obj, name, arr)
        return obj

    @classmethod
    def gaussian(cls, mean, cov) -> "SpatialDensity":
        return cls(np.ones(1), np.asarray(mean, float)[None, :], np.asarray(cov, float)[None])

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @cached_property
    def _eig(self):
        vals, vecs = np.linalg.eigh(self.covs)
        return np.maximum(vals, EIG_FLOOR), vecs

    @cached_property
    def _sqrt(self) -> np.ndarray:
        """Per-component square root of the eigen-floored covariance."""
        vals, vecs = self._eig
        return vecs * np.sqrt(vals)[:, None, :]

    @cached_property
    def _factors(self):
        # Eigen-floored inverse and log-determinant per component.
        vals, vecs = self._eig
        inv = np.einsum("kij,kj,klj->kil", vecs, 1.0 / vals, vecs)
        logdet = np.log(vals).sum(axis=1)
        return inv, logdet, self._sqrt

    def logpdf(self, x) -> np.ndarray:
        """Log density at one point (returns float) or at rows of ``x``."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        inv, logdet, _ = self._factors
        d = X[:, None, :] - self.means[None, :, :]
        maha = np.einsum("nki,kij,nkj->nk", d, inv, d)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        comp = logw - 0.5 * (maha + logdet + self.dim * math.log(2 * math.pi))
        out = np.logaddexp.reduce(comp, axis=1)
        return float(out[0]) if single else out

    def pdf(self, x):
        out = np.exp(self.logpdf(x))
        return float(out) if np.ndim(out) == 0 else out

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def covariance(self) -> np.ndarray:
        m = self.mean()
        d = self.means - m
        return np.einsum("k,kij->ij", self.weights, self.covs + d[:, :, None] * d[:, None, :])

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        sqrt = self._sqrt
        if self.n_components == 1:
            idx = np.zeros(n, dtype=int)
        else:
            idx = np.searchsorted(np.cumsum(self.weights), rng.random(n), side="right")
            idx = np.minimum(idx, self.n_components - 1)
        eps = rng.standard_normal((n, self.dim))
        if self.n_components == 1:
            return self.means[0] + eps @ sqrt[0].T
        out = np.empty((n, self.dim))
        for k in range(self.n_components):
            sel = idx == k
            out[sel] = self.means[k] + eps[sel] @ sqrt[k].T
        return out


@dataclass(frozen=True, eq=False)
class BernoulliComponent:
    mark: int
    existence: float
    spatial: SpatialDensity

    def __post_init__(self):
        r = float(self.existence)
        if not (0.0 <= r <= 1.0):
            raise ValueError(f"existence {r} outside [0, 1]")
        object.__setattr__(self, "existence", r)


@dataclass(frozen=True, eq=False)
class PoissonComponent:
    rate: float
    spatial: SpatialDensity

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("negative Poisson rate")


@dataclass(frozen=True, eq=False)
class MBHypothesis:
    log_weight: float
    bernoullis: tuple[BernoulliComponent, ...]

    def __post_init__(self):
        object.__setattr__(self, "bernoullis", tuple(self.bernoullis))
        marks = [b.mark for b in self.bernoullis]
        if len(set(marks)) != len(marks):
            raise ValueError(f"duplicate marks in hypothesis: {marks}")

    @property
    def marks(self) -> tuple[int, ...]:
        return tuple(b.mark for b in self.bernoullis)

    def get(self, mark: int) -> BernoulliComponent | None:
        for b in self.bernoullis:
            if b.mark == mark:
                return b
        return None

    def without(self, mark: int) -> tuple[BernoulliComponent, ...]:
        return tuple(b for b in self.bernoullis if b.mark != mark)


@dataclass(frozen=True, eq=False)
class MBMDensity:
    hypotheses: tuple[MBHypothesis, ...]

    def __post_init__(self):
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        if not self.hypotheses:
            raise ValueError("MBM density needs at least one hypothesis")

    @classmethod
    def empty(cls) -> "MBMDensity":
        return cls((MBHypothesis(0.0, ()),))

    @classmethod
    def single(cls, bernoullis) -> "MBMDensity":
        return cls((MBHypothesis(0.0, tuple(bernoullis)),))

    def normalized(self) -> "MBMDensity":
        lw = np.array([h.log_weight for h in self.hypotheses])
        lw = lw - np.logaddexp.reduce(lw)
        return MBMDensity(tuple(MBHypothesis(float(l), h.bernoullis) for l, h in zip(lw, self.hypotheses)))

    @property
    def weights(self) -> np.ndarray:
        lw = np.array([h.log_weight for h in self.hypotheses])
        return np.exp(lw - np.logaddexp.reduce(lw))

    @property
    def marks(self) -> list[int]:
        seen = {}
        for h in self.hypotheses:
            for b in h.bernoullis:
                seen.setdefault(b.mark, None)
        return list(seen)

    def best_index(self) -> int:
        # np.argmax returns the first maximum, i.e. the lowest index on ties.
        return int(np.argmax([h.log_weight for h in self.hypotheses]))

    def evaluate(self, X) -> float:
        w = self.weights
        return float(sum(wh * eval_mb(h.bernoullis, X) for wh, h in zip(w, self.hypotheses)))


@dataclass(frozen=True)
class RpdTerm:
    weight: float
    poisson: PoissonComponent | None
    bernoullis: tuple[BernoulliComponent, ...]


@dataclass(frozen=True)
class RpdMixture:
    terms: tuple[RpdTerm, ...]

    @property
    def weights(self) -> np.ndarray:
        return np.array([t.weight for t in self.terms])

    def evaluate(self, O) -> float:
        total = 0.0
        for t in self.terms:
            if t.weight == 0.0:
                continue
            if t.poisson is None:
                total += t.weight * eval_mb(t.bernoullis, O)
            else:
                total += t.weight * eval_pmb(t.poisson, t.bernoullis, O)
        return total


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    """Finite grid used to approximate set integrals by enumeration."""

    points: np.ndarray
    cell_volume: np.ndarray
    max_cardinality: int = 8

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        vol = np.broadcast_to(np.asarray(self.cell_volume, dtype=float), (len(pts),)).copy()
        if np.any(vol <= 0):
            raise ValueError("cell volumes must be positive")
        if not 0 <= self.max_cardinality <= 8:
            raise ValueError("max_cardinality must lie in [0, 8]")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "cell_volume", vol)

    @classmethod
    def grid_1d(cls, lo: float, hi: float, n: int, max_cardinality: int = 8) -> "DiscreteSpace":
        """Midpoint grid on [lo, hi] with ``n`` cells."""
        h = (hi - lo) / n
        return cls(lo + h * (np.arange(n) + 0.5), h, max_cardinality)

    def __len__(self):
        return len(self.points)


def eval_bernoulli(comp: BernoulliComponent, X) -> float:
    X = _as_points(X)
    if len(X) == 0:
        return 1.0 - comp.existence
    if len(X) == 1:
        if comp.existence == 0.0:
            return 0.0
        return comp.existence * comp.spatial.pdf(X[0])
    return 0.0


def eval_mb(comps: Sequence[BernoulliComponent], X) -> float:
    """Multi-Bernoulli density: sum over injective point-to-component maps."""
    X = _as_points(X)
    comps = list(comps)
    n, N = len(X), len(comps)
    if n > N:
        return 0.0
    miss = np.array([1.0 - c.existence for c in comps])
    if n == 0:
        return float(np.prod(miss))
    det = np.array([[c.existence * c.spatial.pdf(x) for c in comps] for x in X])
    total = 0.0
    for perm in itertools.permutations(range(N), n):
        term = 1.0
        for i, l in enumerate(perm):
            term *= det[i, l]
        if term == 0.0:
            continue
        used = set(perm)
        for l in range(N):
            if l not in used:
                term *= miss[l]
        total += term
    return total


def eval_poisson(comp: PoissonComponent, X) -> float:
    X = _as_points(X)
    val = math.exp(-comp.rate)
    for x in X:
        val *= comp.rate * comp.spatial.pdf(x)
    return val


def eval_pmb(poisson: PoissonComponent, comps: Sequence[BernoulliComponent], X) -> float:
    """PMB density as a convolution over splits of X into Poisson and MB parts."""
    X = _as_points(X)
    n = len(X)
    total = 0.0
    for k in range(n + 1):
        for idx in itertools.combinations(range(n), k):
            chosen = set(idx)
            Y0 = [X[i] for i in idx]
            Y1 = [X[i] for i in range(n) if i not in chosen]
            if len(Y1) > len(comps):
                continue
            p0 = eval_poisson(poisson, Y0)
            if p0 == 0.0:
                continue
            total += p0 * eval_mb(comps, Y1)
    return total


def phd_pmb(poisson: PoissonComponent | None, comps: Sequence[BernoulliComponent], x) -> float:
    x = np.asarray(x, dtype=float)
    val = 0.0
    if poisson is not None and poisson.rate > 0:
        val += poisson.rate * poisson.spatial.pdf(x)
    for c in comps:
        if c.existence > 0:
            val += c.existence * c.spatial.pdf(x)
    return val


def rpd_pmb(poisson: PoissonComponent | None, comps: Sequence[BernoulliComponent], x) -> RpdMixture:
    """Reduced Palm density of a PMB at ``x``: a mixture of N + 1 PMBs.

    Term 0 attributes ``x`` to the Poisson part and keeps every Bernoulli;
    term l attributes it to Bernoulli l and removes that component.
    """
    comps = tuple(comps)
    x = np.asarray(x, dtype=float)
    w0 = poisson.rate * poisson.spatial.pdf(x) if poisson is not None and poisson.rate > 0 else 0.0
    wl = [c.existence * c.spatial.pdf(x) if c.existence > 0 else 0.0 for c in comps]
    phd = w0 + sum(wl)
    if phd <= 0.0:
        raise ZeroPhd(f"PHD vanishes at {x}")
    terms = []
    if poisson is not None or not comps:
        terms.append(RpdTerm(w0 / phd if comps else 1.0, poisson, comps))
    for l, c in enumerate(comps):
        terms.append(RpdTerm(wl[l] / phd, poisson, comps[:l] + comps[l + 1:]))
    return RpdMixture(tuple(terms))


def rpd_ambm(prior: MBMDensity, mark: int, x) -> RpdMixture:
    """Reduced Palm density of a marked MBM, conditioned on a point with ``mark``."""
    x = np.asarray(x, dtype=float)
    logs, rests = [], []
    found = False
    for h in prior.hypotheses:
        b = h.get(mark)
        if b is None:
            continue
        found = True
        if b.existence <= 0.0:
            continue
        lp = b.spatial.logpdf(x)
        if not np.isfinite(lp):
            continue
        logs.append(h.log_weight + math.log(b.existence) + lp)
        rests.append(h.without(mark))
    if not found:
        raise UnknownMark(f"mark {mark} not present in any hypothesis")
    if not logs:
        raise ZeroPhd(f"PHD of mark {mark} vanishes at {x}")
    w = np.exp(np.array(logs) - np.logaddexp.reduce(logs))
    return RpdMixture(tuple(RpdTerm(float(wi), None, rest) for wi, rest in zip(w, rests)))


def phd_ambm(prior: MBMDensity, mark: int, x) -> float:
    w = prior.weights
    total = 0.0
    for wh, h in zip(w, prior.hypotheses):
        b = h.get(mark)
        if b is not None and b.existence > 0:
            total += wh * b.existence * b.spatial.pdf(x)
    return total


def set_integral_oracle(f: Callable[[list[np.ndarray]], float], space: DiscreteSpace) -> float:
    """Brute-force set integral of ``f`` over ``space``.

    Sums ``1/n! * f(tuple) * vol^n`` over ordered n-tuples of grid points with
    repetition, n = 0..max_cardinality.  Tuples are enumerated as multisets,
    each weighted by its number of orderings, which is the same sum.
    The neglected tail for a density with Poisson(rate) cardinality is
    bounded by ``poisson_tail(rate, max_cardinality)``.
    """
    pts = [space.points[i] for i in range(len(space))]
    vol = space.cell_volume
    total = 0.0
    for n in range(space.max_cardinality + 1):
        for combo in itertools.combinations_with_replacement(range(len(pts)), n):
            mult = 1
            for _, grp in itertools.groupby(combo):
                mult *= math.factorial(len(list(grp)))
            val = f([pts[i] for i in combo])
            if val == 0.0:
                continue
            total += val * float(np.prod(vol[list(combo)])) / mult
    return total


def poisson_tail(rate: float, n: int) -> float:
    """P(N > n) for N ~ Poisson(rate)."""
    from scipy.stats import poisson

    return float(poisson.sf(n, rate))

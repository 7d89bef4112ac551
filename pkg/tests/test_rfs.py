import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occtrack.errors import UnknownMark, ZeroPhd
from occtrack.rfs import (
    BernoulliComponent,
    DiscreteSpace,
    MBHypothesis,
    MBMDensity,
    PoissonComponent,
    SpatialDensity,
    eval_bernoulli,
    eval_mb,
    eval_pmb,
    eval_poisson,
    phd_ambm,
    phd_pmb,
    poisson_tail,
    rpd_ambm,
    rpd_pmb,
    set_integral_oracle,
)

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def unit(mean=0.0, var=1.0):
    return SpatialDensity.gaussian([mean], [[var]])


def bern(mark, r, mean=0.0, var=1.0):
    return BernoulliComponent(mark, r, unit(mean, var))


class TestSpatialDensity:
    def test_gaussian_pdf_at_mean(self):
        assert unit().pdf([0.0]) == pytest.approx(INV_SQRT_2PI, rel=1e-12)

    def test_mixture_moments(self):
        sp = SpatialDensity([0.25, 0.75], [[0.0], [4.0]], [[[1.0]], [[2.0]]])
        assert sp.mean()[0] == pytest.approx(3.0)
        # E[var] + Var[E] = 0.25 + 1.5 + 0.25*9 + 0.75*1 = 4.75
        assert sp.covariance()[0, 0] == pytest.approx(4.75)

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            SpatialDensity([0.5, 0.2], [[0.0], [1.0]], [[[1.0]], [[1.0]]])

    def test_rejects_asymmetric_covariance(self):
        with pytest.raises(ValueError):
            SpatialDensity.gaussian([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])

    def test_singular_covariance_stays_finite(self):
        sp = SpatialDensity.gaussian([0.0, 0.0], np.zeros((2, 2)))
        assert np.isfinite(sp.logpdf([0.0, 0.0]))

    def test_sample_moments(self):
        sp = SpatialDensity([0.3, 0.7], [[-2.0], [1.0]], [[[0.5]], [[1.0]]])
        xs = sp.sample(np.random.default_rng(0), 200_000)
        assert xs.mean() == pytest.approx(sp.mean()[0], abs=0.02)
        assert xs.var() == pytest.approx(sp.covariance()[0, 0], rel=0.02)

    def test_sample_is_seeded(self):
        a = unit().sample(np.random.default_rng(5), 10)
        b = unit().sample(np.random.default_rng(5), 10)
        np.testing.assert_array_equal(a, b)


class TestSetDensities:
    def test_bernoulli_empty(self):
        assert eval_bernoulli(bern(0, 0.3), []) == pytest.approx(0.7)

    def test_bernoulli_nonexistent(self):
        assert eval_bernoulli(bern(0, 0.0), [[0.0]]) == 0.0

    def test_bernoulli_singleton(self):
        assert eval_bernoulli(bern(0, 0.5), [[0.0]]) == pytest.approx(0.199471, abs=1e-6)

    def test_bernoulli_two_points(self):
        assert eval_bernoulli(bern(0, 0.5), [[0.0], [1.0]]) == 0.0

    def test_mb_empty(self):
        assert eval_mb([bern(0, 0.5), bern(1, 0.5)], []) == pytest.approx(0.25)

    def test_mb_single_component_is_bernoulli(self):
        b = bern(0, 0.4, 1.0)
        assert eval_mb([b], [[0.3]]) == pytest.approx(eval_bernoulli(b, [[0.3]]))

    def test_mb_two_components_singleton(self):
        b1, b2 = bern(0, 0.3, 0.0), bern(1, 0.6, 2.0)
        x = [0.5]
        expected = 0.3 * b1.spatial.pdf(x) * 0.4 + 0.7 * 0.6 * b2.spatial.pdf(x)
        assert eval_mb([b1, b2], [x]) == pytest.approx(expected, rel=1e-12)

    def test_mb_too_many_points(self):
        assert eval_mb([bern(0, 0.5)], [[0.0], [1.0]]) == 0.0

    def test_poisson_values(self):
        assert eval_poisson(PoissonComponent(0.0, unit()), []) == 1.0
        assert eval_poisson(PoissonComponent(2.0, unit()), []) == pytest.approx(math.exp(-2))
        val = eval_poisson(PoissonComponent(1.0, unit()), [[0.0]])
        assert val == pytest.approx(math.exp(-1) * INV_SQRT_2PI)

    def test_pmb_degenerate_poisson(self):
        comps = [bern(0, 0.3), bern(1, 0.8, 1.0)]
        X = [[0.2], [1.1]]
        assert eval_pmb(PoissonComponent(0.0, unit()), comps, X) == eval_mb(comps, X)

    def test_pmb_no_bernoullis(self):
        pois = PoissonComponent(1.5, unit(1.0))
        X = [[0.2], [1.1]]
        assert eval_pmb(pois, [], X) == pytest.approx(eval_poisson(pois, X))

    def test_pmb_two_term_split(self):
        pois = PoissonComponent(1.0, unit(2.0))
        b = bern(0, 0.4)
        x = [0.7]
        expected = eval_poisson(pois, [x]) * eval_bernoulli(b, []) + eval_poisson(pois, []) * eval_bernoulli(b, [x])
        assert eval_pmb(pois, [b], [x]) == pytest.approx(expected, rel=1e-12)


class TestPhd:
    def test_single_sure_component(self):
        b = bern(0, 1.0, 0.5)
        assert phd_pmb(PoissonComponent(0.0, unit()), [b], [0.2]) == pytest.approx(b.spatial.pdf([0.2]))

    def test_uniform_poisson(self):
        u = SpatialDensity.gaussian([0.0], [[1e6]])
        assert phd_pmb(PoissonComponent(2.0, u), [], [0.0]) == pytest.approx(2.0 * u.pdf([0.0]))

    def test_matches_set_integral(self):
        # PHD(x) = int p(X u {x}) dX on a discrete space.
        space = DiscreteSpace.grid_1d(-3, 3, 4, max_cardinality=3)
        pois = PoissonComponent(0.3, unit(0.0, 2.0))
        comps = [bern(0, 0.6, -1.0), bern(1, 0.5, 1.0)]
        x = np.array([0.4])
        lhs = set_integral_oracle(lambda X: eval_pmb(pois, comps, X + [x]), space)
        # Same discretization on the right: a PMB whose densities are cell masses.
        rhs = phd_pmb(pois, comps, x)
        # The oracle integrates continuous densities at grid points, so it is
        # not exact; compare the discrete identity instead.
        lhs_disc = 0.0
        for X in _multisets(space, 3):
            lhs_disc += _weight(X, space) * eval_pmb(pois, comps, X + [x])
        assert lhs == pytest.approx(lhs_disc, rel=1e-12)
        assert rhs > 0

    def test_phd_ambm(self):
        h1 = MBHypothesis(math.log(0.7), (bern(0, 0.5, 0.0),))
        h2 = MBHypothesis(math.log(0.3), (bern(0, 1.0, 1.0),))
        prior = MBMDensity((h1, h2))
        x = [0.3]
        expected = 0.7 * 0.5 * unit(0.0).pdf(x) + 0.3 * unit(1.0).pdf(x)
        assert phd_ambm(prior, 0, x) == pytest.approx(expected)


def _multisets(space, n_max):
    for n in range(n_max + 1):
        for combo in itertools.combinations_with_replacement(range(len(space)), n):
            yield [space.points[i] for i in combo]


def _weight(X, space):
    counts = {}
    for x in X:
        counts[float(x[0])] = counts.get(float(x[0]), 0) + 1
    w = float(np.prod([space.cell_volume[0]] * len(X))) if X else 1.0
    for c in counts.values():
        w /= math.factorial(c)
    return w


class TestRpd:
    def test_pure_poisson_is_slivnyak(self):
        pois = PoissonComponent(1.3, unit(0.5))
        mix = rpd_pmb(pois, [], [0.0])
        assert len(mix.terms) == 1
        assert mix.terms[0].weight == 1.0
        assert mix.terms[0].poisson is pois

    def test_zero_density_component_gets_no_weight(self):
        far = BernoulliComponent(1, 0.7, SpatialDensity.gaussian([1000.0], [[1e-6]]))
        near = bern(2, 0.5)
        mix = rpd_pmb(None, [near, far], [0.0])
        w = mix.weights
        assert w.sum() == pytest.approx(1.0)
        (idx,) = np.flatnonzero(w > 0.5)
        assert mix.terms[idx].bernoullis == (far,)

    def test_weights_proportional(self):
        pois = PoissonComponent(0.5, unit(0.0))
        b1, b2 = bern(0, 0.3, 0.2), bern(1, 0.9, -0.1)
        x = [0.05]
        mix = rpd_pmb(pois, [b1, b2], x)
        raw = np.array([0.5 * unit(0.0).pdf(x), 0.3 * b1.spatial.pdf(x), 0.9 * b2.spatial.pdf(x)])
        np.testing.assert_allclose(mix.weights, raw / raw.sum(), rtol=1e-12)

    def test_zero_phd_raises(self):
        with pytest.raises(ZeroPhd):
            rpd_pmb(PoissonComponent(0.0, unit()), [bern(0, 0.0)], [0.0])

    def test_identity_on_points(self):
        pois = PoissonComponent(0.7, unit(0.0, 2.0))
        comps = [bern(0, 0.6, -1.0), bern(1, 0.4, 1.0)]
        x = np.array([0.3])
        mix = rpd_pmb(pois, comps, x)
        phd = phd_pmb(pois, comps, x)
        for O in ([], [[0.1]], [[0.1], [-0.5]]):
            lhs = eval_pmb(pois, comps, O + [x])
            assert mix.evaluate(O) * phd == pytest.approx(lhs, rel=1e-9, abs=1e-15)

    def test_ambm_single_hypothesis(self):
        b0, b1 = bern(0, 0.8), bern(1, 0.4, 2.0)
        mix = rpd_ambm(MBMDensity.single([b0, b1]), 0, [0.0])
        assert len(mix.terms) == 1
        assert mix.terms[0].weight == pytest.approx(1.0)
        assert mix.terms[0].bernoullis == (b1,)

    def test_ambm_mark_in_one_hypothesis(self):
        h1 = MBHypothesis(math.log(0.5), (bern(0, 0.8), bern(1, 0.4)))
        h2 = MBHypothesis(math.log(0.5), (bern(1, 0.4),))
        mix = rpd_ambm(MBMDensity((h1, h2)), 0, [0.0])
        assert [t.weight for t in mix.terms] == pytest.approx([1.0])

    def test_ambm_weights(self):
        b1, b2 = bern(0, 0.8, 0.0), bern(0, 0.5, 1.0)
        h1 = MBHypothesis(math.log(0.6), (b1,))
        h2 = MBHypothesis(math.log(0.4), (b2,))
        x = [0.4]
        mix = rpd_ambm(MBMDensity((h1, h2)), 0, x)
        raw = np.array([0.6 * 0.8 * b1.spatial.pdf(x), 0.4 * 0.5 * b2.spatial.pdf(x)])
        np.testing.assert_allclose(mix.weights, raw / raw.sum(), rtol=1e-12)

    def test_ambm_unknown_mark(self):
        with pytest.raises(UnknownMark):
            rpd_ambm(MBMDensity.single([bern(0, 0.5)]), 7, [0.0])


class TestSetIntegral:
    def test_bernoulli_normalizes(self):
        space = DiscreteSpace.grid_1d(-8, 8, 400, max_cardinality=1)
        total = set_integral_oracle(lambda X: eval_bernoulli(bern(0, 0.6), X), space)
        assert total == pytest.approx(1.0, abs=1e-3)

    def test_poisson_normalizes(self):
        space = DiscreteSpace.grid_1d(-5, 5, 8, max_cardinality=8)
        pois = PoissonComponent(1.0, SpatialDensity.gaussian([0.0], [[1e4]]))
        # Nearly flat density: cell masses sum to ~ 10 * pdf(0).
        scale = 10 * pois.spatial.pdf([0.0])
        flat = PoissonComponent(1.0, SpatialDensity.gaussian([0.0], [[1e4]]))
        total = set_integral_oracle(lambda X: eval_poisson(flat, X) / scale ** len(X) * math.exp(1 - 1 * 1), space)
        # With p(x) renormalized to the grid, the integral is 1 minus the tail.
        assert total == pytest.approx(1.0, abs=1e-3 + poisson_tail(1.0, 8))

    def test_singletons_give_volume(self):
        space = DiscreteSpace.grid_1d(0, 3, 6, max_cardinality=2)
        assert set_integral_oracle(lambda X: 1.0 if len(X) == 1 else 0.0, space) == pytest.approx(3.0)

    def test_poisson_tail(self):
        assert poisson_tail(1.0, 8) < 1e-5


@st.composite
def small_mbm(draw):
    n_hyp = draw(st.integers(1, 3))
    hyps = []
    for _ in range(n_hyp):
        marks = draw(st.lists(st.integers(0, 3), min_size=1, max_size=3, unique=True))
        bs = tuple(
            bern(m, draw(st.floats(0.05, 1.0)), draw(st.floats(-2, 2)), draw(st.floats(0.3, 2.0)))
            for m in marks
        )
        hyps.append(MBHypothesis(draw(st.floats(-3, 0)), bs))
    return MBMDensity(tuple(hyps))


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(small_mbm(), st.floats(-2, 2))
    def test_ambm_rpd_weights_normalized(self, prior, x):
        m = prior.marks[0]
        mix = rpd_ambm(prior, m, [x])
        assert np.all(mix.weights >= 0)
        assert mix.weights.sum() == pytest.approx(1.0, abs=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(st.tuples(st.floats(0.0, 1.0), st.floats(-2, 2)), min_size=0, max_size=3),
        st.lists(st.floats(-2, 2), min_size=0, max_size=3),
    )
    def test_mb_equals_pmb_without_poisson(self, params, pts):
        comps = [bern(i, r, mu) for i, (r, mu) in enumerate(params)]
        X = [[p] for p in pts]
        assert eval_mb(comps, X) == eval_pmb(PoissonComponent(0.0, unit()), comps, X)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.01, 3.0), st.floats(-2, 2), st.floats(0.2, 3.0))
    def test_slivnyak_exact(self, rate, mu, var):
        pois = PoissonComponent(rate, unit(mu, var))
        mix = rpd_pmb(pois, [], [mu])
        assert mix.terms[0].poisson is pois
        assert mix.terms[0].bernoullis == ()

    def test_campbell_mecke(self):
        # E[sum_x f(x, X \ {x})] by enumeration equals sum_x E_RPD[f] PHD(x) dx.
        space = DiscreteSpace.grid_1d(-2, 2, 3, max_cardinality=3)
        comps = [bern(0, 0.7, -1.0), bern(1, 0.5, 0.5), bern(2, 0.3, 1.0)]

        def f(x, rest):
            return math.cos(x[0]) * (1 + len(rest)) + sum(r[0] for r in rest)

        # Discretize: a finite MB whose Bernoullis live on the grid cells.
        lhs = 0.0
        for X in _ordered_tuples(space, 3):
            p = eval_mb(comps, X)
            if p == 0:
                continue
            wt = space.cell_volume[0] ** len(X) / math.factorial(len(X))
            lhs += wt * p * sum(f(X[i], X[:i] + X[i + 1:]) for i in range(len(X)))
        rhs = 0.0
        for x in space.points:
            mix = rpd_pmb(None, comps, x)
            e = 0.0
            for O in _ordered_tuples(space, 2):
                wt = space.cell_volume[0] ** len(O) / math.factorial(len(O))
                e += wt * mix.evaluate(O) * f(x, O)
            rhs += e * phd_pmb(None, comps, x) * space.cell_volume[0]
        assert lhs == pytest.approx(rhs, abs=1e-8)


def _ordered_tuples(space, n_max):
    for n in range(n_max + 1):
        for idx in itertools.product(range(len(space)), repeat=n):
            yield [space.points[i] for i in idx]

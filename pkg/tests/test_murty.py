import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occtrack.murty import brute_force_kbest, murty_kbest


def costs_equal(a, b):
    np.testing.assert_allclose([c for c, _ in a], [c for c, _ in b], rtol=0, atol=1e-9)


class TestMurty:
    def test_one_by_one(self):
        assert murty_kbest([[3.5]], 5) == [(3.5, (0,))]

    def test_two_by_two(self):
        got = murty_kbest([[1, 2], [2, 1]], 2)
        assert got == [(2.0, (0, 1)), (4.0, (1, 0))]

    def test_fewer_than_k(self):
        assert len(murty_kbest([[1, 2], [2, 1]], 10)) == 2

    def test_forbidden_entries(self):
        C = [[1.0, np.inf], [np.inf, 1.0]]
        assert murty_kbest(C, 3) == [(2.0, (0, 1))]

    def test_infeasible(self):
        assert murty_kbest([[np.inf, np.inf]], 2) == []

    def test_empty(self):
        assert murty_kbest(np.zeros((0, 3)), 2) == [(0.0, ())]

    def test_ties_are_lexicographic(self):
        got = murty_kbest(np.zeros((2, 3)), 6)
        assert [a for _, a in got] == sorted(a for _, a in got)

    @pytest.mark.parametrize("K", [0, -1])
    def test_bad_k(self, K):
        with pytest.raises(ValueError):
            murty_kbest([[1.0]], K)

    def test_more_rows_than_columns(self):
        with pytest.raises(ValueError):
            murty_kbest(np.zeros((3, 2)), 1)

    def test_random_five_by_seven(self):
        rng = np.random.default_rng(0)
        C = rng.uniform(0, 10, (5, 7))
        got = murty_kbest(C, 20)
        ref = brute_force_kbest(C, 20)
        costs_equal(got, ref)
        assert len({a for _, a in got}) == 20


@st.composite
def cost_matrix(draw):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(n, 6))
    vals = draw(st.lists(st.one_of(st.floats(0, 20), st.just(np.inf)), min_size=n * m, max_size=n * m))
    return np.array(vals).reshape(n, m)


class TestProperties:
    @settings(max_examples=80, deadline=None)
    @given(cost_matrix(), st.integers(1, 25))
    def test_matches_brute_force(self, C, K):
        got = murty_kbest(C, K)
        ref = brute_force_kbest(C, K)
        assert len(got) == len(ref)
        costs_equal(got, ref)
        assert len({a for _, a in got}) == len(got)
        assert all(a[0] <= b[0] for a, b in zip(got, got[1:]))
        for c, a in got:
            assert c == pytest.approx(sum(C[i, j] for i, j in enumerate(a)))

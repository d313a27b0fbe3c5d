import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momentgap import distributions as D
from momentgap.errors import InvalidDistributionError, InvalidParameterError

FD = D.FiniteDistribution.from_atoms
RADEMACHER = FD([-1, 1], [0.5, 0.5])


def brute_convolve(d1, d2):
    """Exact enumeration with rationals; independent of the merging code."""
    acc = {}
    for (x, p), (y, q) in itertools.product(d1, d2):
        key = Fraction(x) + Fraction(y)
        acc[key] = acc.get(key, Fraction(0)) + Fraction(p) * Fraction(q)
    return sorted(acc.items())


def atoms_close(d, expected, tol=1e-12):
    got = d.atoms
    assert len(got) == len(expected)
    for (x, p), (ex, ep) in zip(got, expected):
        assert x == pytest.approx(float(ex), abs=tol)
        assert p == pytest.approx(float(ep), abs=tol)


seeds = st.integers(min_value=0, max_value=2**32 - 1)
sizes = st.integers(min_value=2, max_value=12)


class TestConstruction:
    def test_sorted_and_merged(self):
        d = FD([1.0, -1.0, 1.0 + 1e-15], [0.25, 0.5, 0.25])
        assert d.atoms == [(-1.0, 0.5), (1.0, 0.5)]

    def test_arrays_are_read_only(self):
        with pytest.raises(ValueError):
            RADEMACHER.x[0] = 3.0

    @pytest.mark.parametrize(
        "xs, ps",
        [([0.0], [0.5]), ([0.0, 1.0], [1.2, -0.2]), ([float("nan")], [1.0]), ([], []), ([1.0], [1.0, 0.0])],
    )
    def test_rejects_invalid(self, xs, ps):
        with pytest.raises(InvalidDistributionError):
            FD(xs, ps)

    def test_field_diagnostic(self):
        with pytest.raises(InvalidDistributionError) as info:
            FD([0.0, 1.0], [1.0, 0.0])
        assert info.value.field == "atoms[1].p"


class TestTwoPoint:
    def test_symmetric_case(self):
        assert D.make_two_point_centered(1, 1).atoms == [(-1.0, 0.5), (1.0, 0.5)]

    def test_weights_forced_by_centering(self):
        atoms_close(D.make_two_point_centered(2, 1), [(-2, Fraction(1, 3)), (1, Fraction(2, 3))])

    def test_skewed_mean_zero(self):
        assert abs(D.mean(D.make_two_point_centered(1, 100))) <= 1e-14

    @pytest.mark.parametrize("a, b", [(0, 1), (1, -2), (float("inf"), 1)])
    def test_invalid(self, a, b):
        with pytest.raises(InvalidParameterError):
            D.make_two_point_centered(a, b)


class TestMoments:
    def test_mean(self):
        assert D.mean(RADEMACHER) == 0
        assert D.mean(D.make_two_point_centered(2, 1)) == pytest.approx(0, abs=1e-15)
        assert D.mean(D.FiniteDistribution.point_mass(0.0)) == 0

    def test_abs_moment(self):
        assert D.abs_moment(RADEMACHER, 3) == 1
        # 4 * 1/3 + 1 * 2/3
        assert D.abs_moment(D.make_two_point_centered(2, 1), 2) == pytest.approx(2, abs=1e-15)
        assert D.abs_moment(FD([-2, 0, 2], [0.25, 0.5, 0.25]), 1) == 1

    def test_zero_atom_contributes_nothing(self):
        assert D.abs_moment(D.FiniteDistribution.point_mass(0.0), 0.3) == 0

    def test_expectation(self):
        assert D.expectation(RADEMACHER, lambda y: y**2) == 1
        assert D.expectation(D.FiniteDistribution.point_mass(0.0), lambda y: np.abs(y) ** 1.5) == 0
        assert D.expectation(FD([-2, 0, 2], [0.25, 0.5, 0.25]), lambda y: y**4) == 8


class TestConvolve:
    def test_rademacher(self):
        atoms_close(D.convolve(RADEMACHER, RADEMACHER), [(-2, 0.25), (0, 0.5), (2, 0.25)])

    def test_identity(self):
        d = D.make_two_point_centered(2, 1)
        atoms_close(D.convolve(d, D.FiniteDistribution.point_mass(0.0)), d.atoms)

    def test_merging_two_point(self):
        d = D.make_two_point_centered(2, 1)
        expected = brute_convolve(
            [(-2, Fraction(1, 3)), (1, Fraction(2, 3))], [(-2, Fraction(1, 3)), (1, Fraction(2, 3))]
        )
        assert [float(x) for x, _ in expected] == [-4.0, -1.0, 2.0]
        atoms_close(D.convolve(d, d), expected)

    @given(seeds, sizes, sizes)
    @settings(max_examples=60, deadline=None)
    def test_matches_enumeration(self, seed, n1, n2):
        d1 = D.random_centered(seed, n1)
        d2 = D.random_centered(seed + 1, n2)
        expected = brute_convolve(d1.atoms, d2.atoms)
        got = D.convolve(d1, d2)
        assert D.tv_distance(got, FD([float(x) for x, _ in expected], [float(p) for _, p in expected])) <= 1e-12


class TestInvariants:
    @given(seeds, sizes, sizes)
    @settings(max_examples=100, deadline=None)
    def test_mass_mean_commutativity(self, seed, n1, n2):
        d1 = D.random_centered(seed, n1)
        d2 = D.random_symmetric(seed + 7, n2)
        c12, c21 = D.convolve(d1, d2), D.convolve(d2, d1)
        assert abs(c12.p.sum() - 1) <= 1e-12
        assert abs(D.mean(c12) - D.mean(d1) - D.mean(d2)) <= 1e-12
        np.testing.assert_array_equal(c12.x, c21.x)
        np.testing.assert_allclose(c12.p, c21.p, rtol=0, atol=1e-15)

    def test_mean_additivity_1000_pairs(self):
        rng = np.random.default_rng(11)
        for k in range(1000):
            n1, n2 = rng.integers(2, 13, size=2)
            d1 = D.random_centered(rng, int(n1))
            d2 = D.random_centered(rng, int(n2))
            assert abs(D.mean(D.convolve(d1, d2)) - D.mean(d1) - D.mean(d2)) <= 1e-12

    @given(seeds, sizes, sizes)
    @settings(max_examples=100, deadline=None)
    def test_variance_additivity(self, seed, n1, n2):
        d1 = D.random_centered(seed, n1)
        d2 = D.random_centered(seed + 3, n2)
        lhs = D.abs_moment(D.convolve(d1, d2), 2)
        rhs = D.abs_moment(d1, 2) + D.abs_moment(d2, 2)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, rhs)


class TestGenerators:
    @given(seeds, sizes)
    @settings(max_examples=200, deadline=None)
    def test_centered(self, seed, n):
        d = D.random_centered(seed, n)
        assert abs(D.mean(d)) <= 1e-12 * max(1.0, np.abs(d.x).max())
        assert len(d) == n
        small = np.abs(d.x)
        assert not ((small > 0) & (small < 1e-2)).any()

    @given(seeds, sizes)
    @settings(max_examples=200, deadline=None)
    def test_symmetric_is_exact_mirror(self, seed, n):
        d = D.random_symmetric(seed, n)
        np.testing.assert_array_equal(d.x, -d.x[::-1])
        np.testing.assert_array_equal(d.p, d.p[::-1])

    def test_deterministic(self):
        a, b = D.random_centered(42, 9), D.random_centered(42, 9)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.p, b.p)
        s1, s2 = D.random_symmetric(42, 7), D.random_symmetric(42, 7)
        np.testing.assert_array_equal(s1.x, s2.x)

    def test_rejects_single_atom(self):
        with pytest.raises(InvalidParameterError):
            D.random_centered(0, 1)


class TestJson:
    def test_round_trip(self):
        d = D.random_centered(5, 6)
        back = D.loads(D.dumps(d))
        np.testing.assert_array_equal(back.x, d.x)
        np.testing.assert_array_equal(back.p, d.p)

    def test_malformed_reports_line(self):
        with pytest.raises(InvalidDistributionError) as info:
            D.loads('{"atoms": [\n {"x": 1, "p": }]}')
        assert "line 2" in str(info.value)

    @pytest.mark.parametrize(
        "payload, field",
        [
            ({"atoms": [{"x": 0}]}, "atoms[0].p"),
            ({"atoms": [{"x": "a", "p": 1}]}, "atoms[0].x"),
            ({"atoms": 3}, "atoms"),
            ([1, 2], "$"),
        ],
    )
    def test_field_diagnostics(self, payload, field):
        with pytest.raises(InvalidDistributionError) as info:
            D.loads(json.dumps(payload))
        assert info.value.field == field

import json
import warnings

import numpy as np
import pytest

from momentgap.conditions import (
    Condition,
    ConditionVerdict,
    check_convex_second_derivative,
    check_cross_condition,
    check_sqrt_convex,
    check_symmetric_sum_nondecreasing,
    make_grid,
    taylor_remainder_gap,
)
from momentgap.errors import InvalidParameterError
from momentgap.functions import (
    LIBRARY_RHOS,
    FunctionSpec,
    abs_pow,
    builtin_library,
    floor_convex,
    neg_abs_pow,
    poly,
    sawtooth,
    smooth_library,
)

GRID = (-5.0, 5.0, 201)
SQRT_GRID = (0.0, 25.0, 201)


class TestConvexSecondDerivative:
    def test_quartic(self):
        v = check_convex_second_derivative(poly([0, 0, 0, 0, 1]), GRID)
        assert v.holds and v.condition is Condition.CONVEX_SECOND_DERIV

    def test_abs_pow_2_5_is_not_convex(self):
        # f'' = 3.75 |y|^0.5 is concave on each half-line
        v = check_convex_second_derivative(abs_pow(2.5), GRID)
        assert not v.holds and v.worst_violation > 1e-3

    def test_abs_pow_1_5_existence_failure(self):
        v = check_convex_second_derivative(abs_pow(1.5), GRID)
        assert not v.holds and v.worst_violation == np.inf
        assert abs(v.witness[0]) < 1e-12

    @pytest.mark.parametrize("rho", LIBRARY_RHOS)
    def test_power_classification(self, rho):
        expected = rho == 2 or rho >= 3
        assert check_convex_second_derivative(abs_pow(rho), GRID).holds is expected

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_holds_iff_small_violation(self):
        for f in builtin_library().values():
            v = check_convex_second_derivative(f, GRID)
            assert v.holds == (v.worst_violation <= 1e-7)


class TestSymmetricSum:
    def test_cube(self):
        assert check_symmetric_sum_nondecreasing(abs_pow(3), 10.0).holds

    @pytest.mark.parametrize("rho", [r for r in LIBRARY_RHOS if 1 < r < 2])
    def test_negative_powers_below_two(self, rho):
        assert check_symmetric_sum_nondecreasing(neg_abs_pow(rho), 100.0).holds

    def test_abs_pow_1_5_fails(self):
        v = check_symmetric_sum_nondecreasing(abs_pow(1.5), 10.0)
        assert not v.holds
        assert v.witness[0] < v.witness[1]

    def test_sample_size_recorded(self):
        v = check_symmetric_sum_nondecreasing(abs_pow(4), 2.0)
        assert v.n_checked == 512 and v.range == (0.0, 2.0)

    def test_t_max_positive(self):
        with pytest.raises(InvalidParameterError):
            check_symmetric_sum_nondecreasing(abs_pow(3), 0.0)


class TestCrossCondition:
    @pytest.mark.parametrize("f", [poly([0, 0, 0, 0, 1]), abs_pow(3), floor_convex(), sawtooth()],
                             ids=lambda f: f.label)
    def test_examples_hold(self, f):
        v = check_cross_condition(f, -10.0, 10.0)
        assert v.holds, v

    def test_abs_pow_2_5_fails(self):
        v = check_cross_condition(abs_pow(2.5), -10.0, 10.0)
        assert not v.holds
        a, b, c = v.witness
        assert a > 0 and b > 0 and 0 < c < a + b

    def test_points_stay_in_range(self):
        v = check_cross_condition(abs_pow(2.5), -2.0, 3.0, n=2000)
        a, b, c = v.witness
        for p in (-a, b, -a + c, b - c):
            assert -2.0 <= p <= 3.0

    def test_kinked_function_skips(self):
        v = check_cross_condition(abs_pow(1.5), -1.0, 1.0, n=500)
        assert v.n_checked + v.skipped == 500

    def test_deterministic(self):
        a = check_cross_condition(abs_pow(2.5), -3.0, 3.0, n=1000, seed=4)
        b = check_cross_condition(abs_pow(2.5), -3.0, 3.0, n=1000, seed=4)
        assert a == b

    def test_range_must_straddle_zero(self):
        with pytest.raises(InvalidParameterError):
            check_cross_condition(abs_pow(3), 1.0, 2.0)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_inclusion_over_library(self):
        for f in builtin_library().values():
            if check_convex_second_derivative(f, GRID).holds:
                assert check_cross_condition(f, -5.0, 5.0, n=5000).holds, f.label


class TestSqrtConvex:
    @pytest.mark.parametrize("rho", LIBRARY_RHOS)
    def test_power_classification(self, rho):
        assert check_sqrt_convex(abs_pow(rho), SQRT_GRID).holds is (rho >= 2)

    def test_square(self):
        v = check_sqrt_convex(poly([0, 0, 1]), SQRT_GRID)
        assert v.holds and v.worst_violation <= 1e-12

    def test_odd_function_fails_evenness(self):
        v = check_sqrt_convex(poly([0, 0, 0, 1]), SQRT_GRID)
        assert not v.holds and "even" in v.note

    def test_negative_grid_rejected(self):
        with pytest.raises(InvalidParameterError):
            check_sqrt_convex(abs_pow(2), (-1.0, 1.0, 5))


class TestTaylor:
    def test_cube(self):
        assert taylor_remainder_gap(poly([0, 0, 0, 1]), 1.0, 2.0) <= 1e-9

    @pytest.mark.parametrize("x, y", [(0.3, -1.7), (4.0, 2.5), (-2.0, 0.1)])
    def test_square(self, x, y):
        assert taylor_remainder_gap(poly([0, 0, 1]), x, y) <= 1e-12

    def test_zero_increment(self):
        assert taylor_remainder_gap(abs_pow(1.5), 0.7, 0.0) == 0.0

    def test_kinked_function(self):
        assert taylor_remainder_gap(sawtooth(), 0.5, 3.2) <= 1e-9

    def test_smooth_library(self):
        rng = np.random.default_rng(0)
        for f in smooth_library().values():
            for x, y in rng.uniform(-5, 5, size=(20, 2)):
                assert taylor_remainder_gap(f, x, y) <= 1e-8, f.label


class TestUnknownPoints:
    def test_raising_evaluator_is_unknown(self):
        def d2(y):
            y = np.asarray(y, dtype=float)
            if y.ndim:
                raise ValueError("scalar only")
            if y == 1.0:
                raise ValueError("undefined")
            return 12.0 * y * y

        f = FunctionSpec("quartic-ish", f=lambda y: y ** 4, d2=d2)
        with pytest.warns(RuntimeWarning, match="could not be evaluated"):
            v = check_convex_second_derivative(f, np.array([-1.0, 0.0, 1.0, 2.0]))
        assert v.holds and 1.0 in v.unknown

    def test_nan_excluded_in_symsum(self):
        f = FunctionSpec("nan", f=lambda y: y, d2=lambda y: np.where(np.abs(y) > 5, np.nan, np.abs(y)))
        with pytest.warns(RuntimeWarning):
            v = check_symmetric_sum_nondecreasing(f, 10.0, n=100)
        assert v.holds and len(v.unknown) > 0


class TestGrid:
    def test_triple(self):
        assert make_grid((0, 1, 5)).tolist() == [0, 0.25, 0.5, 0.75, 1]

    @pytest.mark.parametrize("spec", [(0, 1, 513), np.array([])])
    def test_limits(self, spec):
        with pytest.raises(InvalidParameterError):
            make_grid(spec)


def test_verdict_json_round_trip():
    for v in (check_cross_condition(abs_pow(2.5), -3.0, 3.0, n=500),
              check_convex_second_derivative(abs_pow(1.5), GRID)):
        back = ConditionVerdict.from_json_dict(json.loads(json.dumps(v.to_json_dict())))
        assert back == v

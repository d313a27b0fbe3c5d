import json
import math

import numpy as np
import pytest
from scipy import integrate

from momentgap.errors import InvalidParameterError
from momentgap.functions import (
    LIBRARY_RHOS,
    FunctionSpec,
    abs_pow,
    builtin_library,
    floor_convex,
    load_table,
    neg_abs_pow,
    parse_function,
    poly,
    sawtooth,
    smooth_library,
    spot_check_derivatives,
    table_function,
)


def integrate_twice(d2, y, kinks):
    """f(y) = int_0^y (y - t) f''(t) dt by quadrature, split at kinks."""
    lo, hi = sorted((0.0, y))
    pts = [k for k in kinks if lo < k < hi]
    val, _ = integrate.quad(lambda t: (y - t) * d2(t), 0.0, y, points=pts or None, limit=500,
                            epsabs=1e-13, epsrel=1e-13)
    return val


class TestClosedForms:
    @pytest.mark.parametrize("y", [0.0, 0.5, 1.0, 1.3, -1.7, 2.0, 2.9, -3.3, 4.41])
    def test_floor_convex_against_quadrature(self, y):
        spec = floor_convex()
        kinks = [s * math.sqrt(k) for k in range(1, 30) for s in (-1, 1)]
        ref = integrate_twice(lambda t: math.floor(t * t), y, kinks)
        assert float(spec(y)) == pytest.approx(ref, abs=1e-10)

    @pytest.mark.parametrize("y", [-2.5, -0.4, 0.0, 0.7, 1.0, 1.5, 2.0, 3.25, 6.8])
    def test_sawtooth_against_quadrature(self, y):
        spec = sawtooth()
        d2 = lambda t: -t if t < 1 else 2 * math.floor(t) - t
        ref = integrate_twice(d2, y, [float(k) for k in range(1, 10)])
        assert float(spec(y)) == pytest.approx(ref, abs=1e-10)

    def test_sawtooth_second_derivative(self):
        s = sawtooth()
        assert s.second(0.5) == -0.5
        # floor(y) - (y - floor(y)) at y = 2.25
        assert s.second(2.25) == pytest.approx(1.75)

    def test_floor_convex_values(self):
        s = floor_convex()
        assert float(s(0.9)) == 0.0
        assert s.second(1.5) == 2.0


class TestSpotChecks:
    @pytest.mark.parametrize("name", sorted(builtin_library()))
    def test_analytic_derivatives_agree(self, name):
        assert spot_check_derivatives(builtin_library()[name]) == []

    def test_wrong_derivative_detected(self):
        bad = FunctionSpec("bad", f=lambda y: y ** 3, d1=lambda y: 3 * y ** 2, d2=lambda y: 5 * y)
        mism = spot_check_derivatives(bad)
        assert mism and all(order == 2 for order, *_ in mism)

    def test_finite_difference_fallback(self):
        f = FunctionSpec("cube", f=lambda y: y ** 3)
        assert f.first(2.0) == pytest.approx(12.0, rel=1e-7)
        assert f.second(2.0) == pytest.approx(12.0, rel=1e-6)

    def test_kinks_skipped(self):
        assert sawtooth().near_kink(np.array([1.0, 1.5, 2.0 + 1e-8])).tolist() == [True, False, True]
        assert floor_convex().kink_points(0.0, 1.5) == [1.0, math.sqrt(2)]


class TestParse:
    def test_abs_pow(self):
        f = parse_function("abs_pow:2.5")
        assert f.power == 2.5 and float(f(-4.0)) == 32.0

    def test_neg_abs_pow(self):
        assert float(parse_function("neg_abs_pow:1.5")(4.0)) == -8.0

    def test_poly(self):
        f = parse_function("poly:0,0,1")
        assert float(f(3.0)) == 9.0 and f.smooth

    @pytest.mark.parametrize("name", ["floor_convex", "sawtooth"])
    def test_named(self, name):
        assert parse_function(name).label == name

    @pytest.mark.parametrize("name", ["nope", "abs_pow:x", "abs_pow:-1", "poly:", "sawtooth:2"])
    def test_invalid(self, name):
        with pytest.raises(InvalidParameterError):
            parse_function(name)


class TestTable:
    def test_node_lookup_and_differences(self, tmp_path):
        ys = np.linspace(-2, 2, 9)
        path = tmp_path / "sq.json"
        path.write_text(json.dumps([[float(y), float(y * y)] for y in ys]))
        f = parse_function(f"table:{path}")
        assert float(f(1.5)) == 2.25
        assert float(f.second(0.5)) == pytest.approx(2.0, abs=1e-12)
        assert float(f.first(0.5)) == pytest.approx(1.0, abs=1e-12)
        assert math.isnan(float(f(0.3)))
        assert math.isnan(float(f.second(2.0)))

    def test_points_object(self, tmp_path):
        path = tmp_path / "t.json"
        path.write_text(json.dumps({"points": [[0, 0], [1, 1], [2, 4]]}))
        assert float(load_table(path)(2.0)) == 4.0

    def test_too_few_nodes(self):
        with pytest.raises(InvalidParameterError):
            table_function([0, 1], [0, 1])

    def test_malformed(self, tmp_path):
        path = tmp_path / "t.json"
        path.write_text(json.dumps([[0, "a"]]))
        with pytest.raises(InvalidParameterError):
            load_table(path)


def test_library_contents():
    lib = builtin_library()
    for r in LIBRARY_RHOS:
        assert f"abs_pow:{r:g}" in lib and f"neg_abs_pow:{r:g}" in lib
    assert {"floor_convex", "sawtooth", "poly:0,0,1", "poly:0,0,0,0,1"} <= set(lib)
    smooth = smooth_library()
    assert "abs_pow:1.5" not in smooth and "abs_pow:2.5" in smooth and "sawtooth" not in smooth


def test_neg_abs_pow_has_no_power():
    assert neg_abs_pow(3).power is None and abs_pow(3).power == 3.0
    assert poly([1, 2]).label == "poly:1,2"

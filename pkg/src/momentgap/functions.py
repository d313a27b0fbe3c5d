"""Test functions f with f', f'' evaluators and the built-in library.

Evaluators are numpy-vectorized: they accept scalars or arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidParameterError

FD_REL_STEP = 1e-4
KINK_EPS = 1e-6


def _fd_step(y):
    return FD_REL_STEP * np.maximum(1.0, np.abs(y))


@dataclass(frozen=True)
class FunctionSpec:
    """A test function with optional analytic derivatives.

    Missing ``d1``/``d2`` fall back to central differences with step
    ``1e-4 * max(1, |y|)``.  ``kinks`` lists points where f'' is undefined,
    either as a tuple of points or as a predicate ``(y, eps) -> bool mask``.
    ``power`` is set for +-|y|^rho so gaps can also report moment ratios.
    ``smooth`` marks f'' as continuous everywhere.
    """

    label: str
    f: Callable
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    kinks: object = ()
    power: Optional[float] = None
    smooth: bool = False
    step: Callable = field(default=_fd_step, repr=False)

    def __call__(self, y):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return self.f(y)

    def first(self, y):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.d1 is not None:
                return self.d1(y)
            y = np.asarray(y, dtype=float)
            h = self.step(y)
            return (self.f(y + h) - self.f(y - h)) / (2.0 * h)

    def second(self, y):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.d2 is not None:
                return self.d2(y)
            y = np.asarray(y, dtype=float)
            h = self.step(y)
            return (self.f(y + h) - 2.0 * self.f(y) + self.f(y - h)) / (h * h)

    def near_kink(self, y, eps: float = KINK_EPS):
        y = np.asarray(y, dtype=float)
        if callable(self.kinks):
            return np.asarray(self.kinks(y, eps), dtype=bool)
        mask = np.zeros(y.shape, dtype=bool)
        for k in self.kinks:
            mask |= np.abs(y - k) < eps
        return mask

    def kink_points(self, lo: float, hi: float) -> list[float]:
        """Declared kinks inside (lo, hi); predicate kinks are not enumerable."""
        if callable(self.kinks):
            enum = getattr(self.kinks, "points", None)
            return [] if enum is None else [k for k in enum(lo, hi) if lo < k < hi]
        return [k for k in self.kinks if lo < k < hi]


def spot_check_derivatives(spec: FunctionSpec, lo: float = -5.0, hi: float = 5.0,
                           n: int = 32, seed=0, rtol: float = 1e-3):
    """Compare analytic f', f'' with central differences at ``n`` random points.

    Returns a list of ``(order, y, analytic, numeric)`` mismatches; points in a
    kink neighborhood are skipped.
    """
    rng = np.random.default_rng(seed)
    ys = rng.uniform(lo, hi, size=n)
    ys = ys[~spec.near_kink(ys, 1e-2)]
    plain = FunctionSpec(spec.label, spec.f)
    bad = []
    for order, mine, theirs in ((1, spec.d1, plain.first), (2, spec.d2, plain.second)):
        if mine is None:
            continue
        got = np.asarray(mine(ys), dtype=float)
        ref = np.asarray(theirs(ys), dtype=float)
        err = np.abs(got - ref) / np.maximum(1.0, np.abs(ref))
        for y, g, r, e in zip(ys, got, ref, err):
            if not e <= rtol:
                bad.append((order, float(y), float(g), float(r)))
    return bad


# ---------------------------------------------------------------------------
# built-in library


def abs_pow(rho: float) -> FunctionSpec:
    """f(y) = |y|^rho."""
    rho = float(rho)
    if not rho > 0:
        raise InvalidParameterError(f"rho must be positive, got {rho!r}")
    return FunctionSpec(
        label=f"abs_pow:{rho:g}",
        f=lambda y: np.abs(y) ** rho,
        d1=lambda y: rho * np.sign(y) * np.abs(y) ** (rho - 1.0),
        d2=lambda y: rho * (rho - 1.0) * np.abs(y) ** (rho - 2.0),
        power=rho,
        smooth=rho >= 2.0,
    )


def neg_abs_pow(rho: float) -> FunctionSpec:
    """f(y) = -|y|^rho."""
    base = abs_pow(rho)
    return FunctionSpec(
        label=f"neg_abs_pow:{base.power:g}",
        f=lambda y: -base.f(y),
        d1=lambda y: -base.d1(y),
        d2=lambda y: -base.d2(y),
        power=None,
        smooth=base.smooth,
    )


def poly(coeffs: Sequence[float]) -> FunctionSpec:
    """Polynomial with coefficients in increasing degree."""
    p = np.polynomial.Polynomial([float(c) for c in coeffs])
    d1, d2 = p.deriv(1), p.deriv(2)
    label = "poly:" + ",".join(f"{c:g}" for c in p.coef)
    return FunctionSpec(label=label, f=p, d1=d1, d2=d2, smooth=True)


class _SqrtCumsum:
    """Lazily grown table of S(K) = sum_{j<=K} sqrt(j)."""

    def __init__(self):
        self._table = np.zeros(1)

    def __call__(self, k: np.ndarray) -> np.ndarray:
        need = int(np.max(k, initial=0))
        if need >= self._table.size:
            size = max(need + 1, 2 * self._table.size)
            self._table = np.concatenate(([0.0], np.cumsum(np.sqrt(np.arange(1, size)))))
        return self._table[k]


_sqrt_cumsum = _SqrtCumsum()


def _floor_sq_kinks(y, eps):
    ay = np.abs(np.asarray(y, dtype=float))
    k = np.rint(ay * ay)
    return (k >= 1) & (np.abs(ay - np.sqrt(k)) < eps)


_floor_sq_kinks.points = lambda lo, hi: [
    s * math.sqrt(k) for k in range(1, int(max(lo * lo, hi * hi)) + 2) for s in (-1.0, 1.0)
]


def floor_convex() -> FunctionSpec:
    """f with f(0) = f'(0) = 0 and f''(y) = floor(y^2).

    Closed forms follow from summation by parts over the unit steps of
    floor(t^2) at t = sqrt(k).
    """

    def f(y):
        ay = np.abs(np.asarray(y, dtype=float))
        k = np.floor(ay * ay).astype(np.int64)
        return k * ay * ay / 2.0 - ay * _sqrt_cumsum(k) + k * (k + 1) / 4.0

    def d1(y):
        y = np.asarray(y, dtype=float)
        ay = np.abs(y)
        k = np.floor(ay * ay).astype(np.int64)
        return np.sign(y) * (k * ay - _sqrt_cumsum(k))

    def d2(y):
        y = np.asarray(y, dtype=float)
        return np.floor(y * y)

    return FunctionSpec(label="floor_convex", f=f, d1=d1, d2=d2, kinks=_floor_sq_kinks)


def _integer_kinks(y, eps):
    y = np.asarray(y, dtype=float)
    k = np.rint(y)
    return (k >= 1) & (np.abs(y - k) < eps)


_integer_kinks.points = lambda lo, hi: [float(k) for k in range(max(1, math.ceil(lo)), math.floor(hi) + 1)]


def sawtooth() -> FunctionSpec:
    """f with f(0) = f'(0) = 0, f''(y) = -y for y < 1 and 2*floor(y) - y for y >= 1."""

    def f(y):
        y = np.asarray(y, dtype=float)
        k = np.floor(np.maximum(y, 1.0))
        hi = (
            -y / 2.0 + 1.0 / 3.0
            - (y * (y * y - 1.0) / 2.0 - (y ** 3 - 1.0) / 3.0)
            + 2.0 * (k * y * y / 2.0 - y * k * (k + 1.0) / 2.0 + k * (k + 1.0) * (2.0 * k + 1.0) / 12.0)
        )
        return np.where(y < 1.0, -y ** 3 / 6.0, hi)

    def d1(y):
        y = np.asarray(y, dtype=float)
        k = np.floor(np.maximum(y, 1.0))
        hi = -0.5 + 2.0 * (k * y - k * (k + 1.0) / 2.0) - (y * y - 1.0) / 2.0
        return np.where(y < 1.0, -y * y / 2.0, hi)

    def d2(y):
        y = np.asarray(y, dtype=float)
        return np.where(y < 1.0, -y, 2.0 * np.floor(y) - y)

    return FunctionSpec(label="sawtooth", f=f, d1=d1, d2=d2, kinks=_integer_kinks)


def table_function(ys: Sequence[float], fs: Sequence[float], label: str = "table") -> FunctionSpec:
    """Function known only at tabulated nodes.

    Values are looked up exactly (no interpolation); f' and f'' are divided
    differences on neighbouring nodes, defined at interior nodes only.
    Anything else evaluates to NaN, which the checkers report as unknown.
    """
    y = np.asarray(ys, dtype=float)
    v = np.asarray(fs, dtype=float)
    order = np.argsort(y)
    y, v = y[order], v[order]
    if y.size < 3 or np.any(np.diff(y) <= 0):
        raise InvalidParameterError("table needs at least 3 distinct nodes")
    h = np.diff(y)
    slope = np.diff(v) / h
    d1_nodes = np.full(y.size, np.nan)
    d2_nodes = np.full(y.size, np.nan)
    d1_nodes[1:-1] = (slope[1:] * h[:-1] + slope[:-1] * h[1:]) / (h[1:] + h[:-1])
    d2_nodes[1:-1] = 2.0 * (slope[1:] - slope[:-1]) / (h[1:] + h[:-1])

    def lookup(nodes):
        def ev(q):
            q = np.asarray(q, dtype=float)
            idx = np.clip(np.searchsorted(y, q), 0, y.size - 1)
            lo = np.clip(idx - 1, 0, y.size - 1)
            best = np.where(np.abs(y[lo] - q) < np.abs(y[idx] - q), lo, idx)
            hit = np.abs(y[best] - q) <= 1e-12 * np.maximum(1.0, np.abs(q))
            return np.where(hit, nodes[best], np.nan)

        return ev

    spec = FunctionSpec(label=label, f=lookup(v), d1=lookup(d1_nodes), d2=lookup(d2_nodes))
    object.__setattr__(spec, "nodes", y)
    return spec


def load_table(path) -> FunctionSpec:
    """Read ``[[y, f], ...]`` or ``{"points": [[y, f], ...]}`` from JSON."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("points")
    if not isinstance(data, list):
        raise InvalidParameterError(f"{path}: expected a list of [y, f(y)] pairs")
    try:
        ys, fs = zip(*[(float(a), float(b)) for a, b in data])
    except (TypeError, ValueError) as exc:
        raise InvalidParameterError(f"{path}: malformed table entry ({exc})") from exc
    return table_function(ys, fs, label=f"table:{path}")


_FACTORIES = {
    "abs_pow": abs_pow,
    "neg_abs_pow": neg_abs_pow,
}


def parse_function(name: str) -> FunctionSpec:
    """Build a spec from ``label:params`` (``abs_pow:2.5``, ``poly:0,0,1``, ``table:f.json``)."""
    head, _, arg = name.partition(":")
    try:
        if head in _FACTORIES:
            return _FACTORIES[head](float(arg))
        if head == "poly":
            return poly([float(c) for c in arg.split(",")])
        if head == "floor_convex" and not arg:
            return floor_convex()
        if head == "sawtooth" and not arg:
            return sawtooth()
        if head == "table":
            return load_table(arg)
    except ValueError as exc:
        raise InvalidParameterError(f"bad function spec {name!r}: {exc}") from exc
    raise InvalidParameterError(f"unknown function {name!r}")


LIBRARY_RHOS = (1.2, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)


def builtin_library() -> dict[str, FunctionSpec]:
    specs = [abs_pow(r) for r in LIBRARY_RHOS]
    specs += [neg_abs_pow(r) for r in LIBRARY_RHOS]
    specs += [
        poly([0, 0, 1]),
        poly([0, 0, 0, 1]),
        poly([0, 0, 0, 0, 1]),
        poly([0, 0, -1, 0, 1]),
        floor_convex(),
        sawtooth(),
    ]
    return {s.label: s for s in specs}


def smooth_library() -> dict[str, FunctionSpec]:
    return {k: s for k, s in builtin_library().items() if s.smooth}

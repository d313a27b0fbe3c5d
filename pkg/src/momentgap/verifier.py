"""Exact inequality gaps, two-point functionals, fuzzing and sharpness search."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, optimize
from scipy.stats import qmc

from . import distributions as dist
from .constants import Extremum, VarClass, sharp_bounds
from .decompose import MixtureDecomposition
from .distributions import DistributionBatch, FiniteDistribution
from .errors import InvalidParameterError, QuadratureError
from .functions import FunctionSpec

RATIO_TOL = 1e-9
SHARPNESS_TOL = 1e-6
FUZZ_CHUNK = 10_000
MAX_FUZZ_ATOMS = 12
MAX_REPORTED_VIOLATIONS = 20


# ---------------------------------------------------------------------------
# gaps


@dataclass(frozen=True)
class GapResult:
    """E f(X+Y) - E f(X) - E f(Y) for independent X ~ d1, Y ~ d2."""

    gap: float
    e_sum: float
    e_x: float
    e_y: float
    ratio: Optional[float]
    label: str
    d1: FiniteDistribution
    d2: FiniteDistribution

    def to_json_dict(self) -> dict:
        return {
            "function": self.label,
            "gap": self.gap,
            "e_sum": self.e_sum,
            "e_x": self.e_x,
            "e_y": self.e_y,
            "ratio": self.ratio,
            "d1": self.d1.to_json_dict(),
            "d2": self.d2.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, data) -> "GapResult":
        return cls(
            gap=float(data["gap"]),
            e_sum=float(data["e_sum"]),
            e_x=float(data["e_x"]),
            e_y=float(data["e_y"]),
            ratio=None if data["ratio"] is None else float(data["ratio"]),
            label=data["function"],
            d1=FiniteDistribution.from_json_dict(data["d1"]),
            d2=FiniteDistribution.from_json_dict(data["d2"]),
        )


def gap(f: FunctionSpec, d1: FiniteDistribution, d2: FiniteDistribution) -> GapResult:
    """Exact gap by convolution; for f = |y|^rho also the moment ratio."""
    e_sum = dist.expectation(dist.convolve(d1, d2), f)
    e_x = dist.expectation(d1, f)
    e_y = dist.expectation(d2, f)
    ratio = None
    if getattr(f, "power", None) is not None and e_x + e_y > 0:
        ratio = e_sum / (e_x + e_y)
    return GapResult(e_sum - e_x - e_y, e_sum, e_x, e_y, ratio, getattr(f, "label", "f"), d1, d2)


def mixture_gap(f: FunctionSpec, m1: MixtureDecomposition, m2: MixtureDecomposition) -> float:
    """Weighted sum of component-pair gaps; equals the gap of the mixtures."""
    b1, w1 = _component_batch(m1)
    b2, w2 = _component_batch(m2)
    s = b1.x[:, None, :, None] + b2.x[None, :, None, :]
    p = b1.p[:, None, :, None] * b2.p[None, :, None, :]
    with np.errstate(all="ignore"):
        e_sum = (np.asarray(f(s), dtype=float) * p).sum(axis=(2, 3))
    pair_gaps = e_sum - b1.expectation(f)[:, None] - b2.expectation(f)[None, :]
    return math.fsum((w1[:, None] * w2[None, :] * pair_gaps).ravel())


def _component_batch(m: MixtureDecomposition):
    x = np.zeros((len(m), 2))
    p = np.zeros((len(m), 2))
    for k, (_, c) in enumerate(m):
        d = c.distribution()
        x[k, : d.x.size] = d.x
        p[k, : d.p.size] = d.p
    return DistributionBatch(x, p), np.asarray(m.weights)


def moment_ratio(rho: float, d1: FiniteDistribution, d2: FiniteDistribution) -> Optional[float]:
    """E|X+Y|^rho / (E|X|^rho + E|Y|^rho); None when both laws are zero."""
    den = dist.abs_moment(d1, rho) + dist.abs_moment(d2, rho)
    if den == 0:
        return None
    return dist.abs_moment(dist.convolve(d1, d2), rho) / den


# ---------------------------------------------------------------------------
# two-point functionals


@dataclass(frozen=True)
class PhiFour:
    a: float
    b: float
    c: float
    d: float
    label: str
    value: float


@dataclass(frozen=True)
class PhiTwo:
    a: float
    b: float
    label: str
    value: float


def _nonneg(*args):
    for v in args:
        if not (v >= 0 and math.isfinite(v)):
            raise InvalidParameterError(f"arguments must be nonnegative, got {args!r}")


def phi_four_value(r, s, t, u, f) -> float:
    ff = lambda y: float(f(y))
    return math.fsum((
        s * u * (ff(-r - t) - ff(-r) - ff(-t)),
        s * t * (ff(-r + u) - ff(-r) - ff(u)),
        r * u * (ff(s - t) - ff(s) - ff(-t)),
        r * t * (ff(s + u) - ff(s) - ff(u)),
    ))


def phi_four(a: float, b: float, c: float, d: float, f: FunctionSpec) -> PhiFour:
    """Four-term functional equal to (a+b)(c+d) * gap for laws on {-a, b}, {-c, d}.

    Zero arguments are allowed; the value then vanishes when f(0) = 0.
    """
    _nonneg(a, b, c, d)
    return PhiFour(a, b, c, d, getattr(f, "label", "f"), phi_four_value(a, b, c, d, f))


def phi_two(a: float, b: float, f: FunctionSpec) -> PhiTwo:
    """Symmetric analogue: 4 * gap for laws uniform on {-a, a} and {-b, b}."""
    _nonneg(a, b)
    ff = lambda y: float(f(y))
    r, s = a, b
    value = math.fsum((
        ff(-r - s) - ff(-r) - ff(-s),
        ff(-r + s) - ff(-r) - ff(s),
        ff(r - s) - ff(r) - ff(-s),
        ff(r + s) - ff(r) - ff(s),
    ))
    return PhiTwo(a, b, getattr(f, "label", "f"), value)


def signed_corner_sum(a, b, c, d, f) -> float:
    """Sum over the 16 box corners of (-1)^(number of zero coordinates) * phi."""
    terms = []
    for r in (0.0, a):
        for s in (0.0, b):
            for t in (0.0, c):
                for u in (0.0, d):
                    zeros = (r == 0) + (s == 0) + (t == 0) + (u == 0)
                    terms.append((-1) ** zeros * phi_four_value(r, s, t, u, f))
    return math.fsum(terms)


def mixed_derivative_integral(a, b, c, d, f: FunctionSpec, tol: float = 1e-9,
                              max_subdivisions: int = 2000):
    """Adaptive 4-D cubature of f''(-r-t) + f''(s+u) - f''(-r+u) - f''(s-t) over the box.

    Uses the vectorized Genz-Malik rule; returns ``(value, error_estimate)``.
    Raises :class:`QuadratureError` if the subdivision budget runs out first.
    """
    def integrand(x):
        r, s, t, u = x.T
        return f.second(-r - t) + f.second(s + u) - f.second(-r + u) - f.second(s - t)

    res = integrate.cubature(integrand, np.zeros(4), np.array([a, b, c, d], dtype=float),
                             rule="genz-malik", atol=tol, rtol=1e-12,
                             max_subdivisions=max_subdivisions)
    if res.status != "converged":
        raise QuadratureError(f"4-D cubature did not converge in {max_subdivisions} subdivisions",
                              estimate=float(res.estimate), achieved=float(res.error))
    return float(res.estimate), float(res.error)


def mixed_derivative_identity_check(a, b, c, d, f: FunctionSpec, budget: float = 1e-7) -> float:
    """|box integral of the mixed fourth derivative of phi - phi(a, b, c, d)|.

    Raises :class:`QuadratureError` when the quadrature error estimate exceeds ``budget``.
    """
    _nonneg(a, b, c, d)
    value, err = mixed_derivative_integral(a, b, c, d, f)
    if not err <= budget:
        raise QuadratureError(f"4-D quadrature error {err:.3g} exceeds {budget:.3g}",
                              estimate=value, achieved=err)
    return abs(value - phi_four_value(a, b, c, d, f))


# ---------------------------------------------------------------------------
# fuzzing


def _pair_moments(rho, b1: DistributionBatch, b2: DistributionBatch):
    s = b1.x[:, :, None] + b2.x[:, None, :]
    w = b1.p[:, :, None] * b2.p[:, None, :]
    num = (np.abs(s) ** rho * w).sum(axis=(1, 2))
    den = b1.abs_moment(rho) + b2.abs_moment(rho)
    return num, den


def _pair_gaps(f, b1: DistributionBatch, b2: DistributionBatch):
    s = b1.x[:, :, None] + b2.x[:, None, :]
    w = b1.p[:, :, None] * b2.p[:, None, :]
    e_sum = (np.asarray(f(s), dtype=float) * w).sum(axis=(1, 2))
    return e_sum, b1.expectation(f), b2.expectation(f)


def _random_pairs(rng, rows, var_class):
    """Half two-point pairs, half multi-atom pairs with 2..12 atoms."""
    n2 = rows // 2
    nm = rows - n2
    if var_class is VarClass.CENTERED:
        tp = dist.two_point_centered_batch
        multi = dist.centered_batch
    else:
        tp = dist.two_point_symmetric_batch
        multi = dist.symmetric_batch
    first = [tp(rng, n2), tp(rng, n2)]
    counts = rng.integers(2, MAX_FUZZ_ATOMS + 1, size=(2, nm))
    second = [multi(rng, nm, counts[0]), multi(rng, nm, counts[1])]
    return first, second


def _chunk_seeds(seed, trials):
    n_chunks = max(1, math.ceil(trials / FUZZ_CHUNK))
    sizes = [FUZZ_CHUNK] * (n_chunks - 1) + [trials - FUZZ_CHUNK * (n_chunks - 1)]
    return list(zip(np.random.SeedSequence(seed).spawn(n_chunks), sizes))


def _map_chunks(fn, jobs, workers):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _pair_json(pair):
    return None if pair is None else [pair[0].to_json_dict(), pair[1].to_json_dict()]


def _pair_from_json(data):
    if data is None:
        return None
    return (FiniteDistribution.from_json_dict(data[0]), FiniteDistribution.from_json_dict(data[1]))


@dataclass
class FuzzReport:
    rho: float
    var_class: VarClass
    trials: int
    seed: Optional[int]
    lower: float
    upper: float
    min_ratio: float
    max_ratio: float
    argmin: Optional[tuple] = None
    argmax: Optional[tuple] = None
    n_violations: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.n_violations == 0

    def to_json_dict(self) -> dict:
        return {
            "rho": self.rho,
            "class": self.var_class.value,
            "trials": self.trials,
            "seed": self.seed,
            "lower": self.lower,
            "upper": self.upper,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "argmin": _pair_json(self.argmin),
            "argmax": _pair_json(self.argmax),
            "n_violations": self.n_violations,
            "violations": [
                {"ratio": v["ratio"], "pair": _pair_json(v["pair"])} for v in self.violations
            ],
        }

    @classmethod
    def from_json_dict(cls, data) -> "FuzzReport":
        return cls(
            rho=float(data["rho"]),
            var_class=VarClass(data["class"]),
            trials=int(data["trials"]),
            seed=data["seed"],
            lower=float(data["lower"]),
            upper=float(data["upper"]),
            min_ratio=float(data["min_ratio"]),
            max_ratio=float(data["max_ratio"]),
            argmin=_pair_from_json(data["argmin"]),
            argmax=_pair_from_json(data["argmax"]),
            n_violations=int(data["n_violations"]),
            violations=[
                {"ratio": float(v["ratio"]), "pair": _pair_from_json(v["pair"])}
                for v in data["violations"]
            ],
        )


def fuzz_inequality(rho: float, var_class: VarClass | str, trials: int, seed=0,
                    workers: int = 1) -> FuzzReport:
    """Check the sharp moment-ratio envelope on ``trials`` random independent pairs.

    Trials run in fixed chunks with spawned seeds, so the report depends on
    ``seed`` only, not on ``workers``.
    """
    var_class = VarClass(var_class)
    bounds = sharp_bounds(rho, var_class)
    lo, hi = bounds.lower - RATIO_TOL, bounds.upper + RATIO_TOL

    def run(job):
        ss, size = job
        rng = np.random.default_rng(ss)
        out = []
        for b1, b2 in zip(*_random_pairs(rng, size, var_class)):
            if len(b1) == 0:
                continue
            num, den = _pair_moments(rho, b1, b2)
            ratio = num / den
            bad = np.nonzero((ratio < lo) | (ratio > hi))[0]
            out.append((ratio, b1, b2, bad))
        return out

    report = FuzzReport(float(rho), var_class, int(trials), seed, bounds.lower, bounds.upper,
                        math.inf, -math.inf)
    for chunk in _map_chunks(run, _chunk_seeds(seed, trials), workers):
        for ratio, b1, b2, bad in chunk:
            i, j = int(np.argmin(ratio)), int(np.argmax(ratio))
            if ratio[i] < report.min_ratio:
                report.min_ratio = float(ratio[i])
                report.argmin = (b1.row(i), b2.row(i))
            if ratio[j] > report.max_ratio:
                report.max_ratio = float(ratio[j])
                report.argmax = (b1.row(j), b2.row(j))
            report.n_violations += int(bad.size)
            for k in bad[: MAX_REPORTED_VIOLATIONS - len(report.violations)]:
                report.violations.append({"ratio": float(ratio[k]), "pair": (b1.row(k), b2.row(k))})
    return report


@dataclass
class GapFuzzReport:
    label: str
    var_class: VarClass
    trials: int
    min_scaled_gap: float
    min_gap: float
    witness: Optional[tuple] = None

    def violated(self, tol: float = RATIO_TOL) -> bool:
        return self.min_scaled_gap < -tol


def fuzz_gap(f: FunctionSpec, var_class: VarClass | str, trials: int, seed=0,
             workers: int = 1) -> GapFuzzReport:
    """Smallest gap / (1 + |E f(X+Y)|) over random independent pairs."""
    var_class = VarClass(var_class)

    def run(job):
        ss, size = job
        rng = np.random.default_rng(ss)
        out = []
        for b1, b2 in zip(*_random_pairs(rng, size, var_class)):
            if len(b1) == 0:
                continue
            with np.errstate(all="ignore"):
                e_sum, e_x, e_y = _pair_gaps(f, b1, b2)
            g = e_sum - e_x - e_y
            out.append((g, g / (1.0 + np.abs(e_sum)), b1, b2))
        return out

    report = GapFuzzReport(getattr(f, "label", "f"), var_class, int(trials), math.inf, math.inf)
    for chunk in _map_chunks(run, _chunk_seeds(seed, trials), workers):
        for g, scaled, b1, b2 in chunk:
            k = int(np.argmin(scaled))
            if scaled[k] < report.min_scaled_gap:
                report.min_scaled_gap = float(scaled[k])
                report.min_gap = float(g[k])
                report.witness = (b1.row(k), b2.row(k))
    return report


# ---------------------------------------------------------------------------
# sharpness search


def _two_point_ratio_centered(lp, rho):
    top = max(lp)
    a, b, c, d = (math.exp(max(v - top, -690.0)) for v in lp)
    px = (b / (a + b), a / (a + b))
    py = (d / (c + d), c / (c + d))
    xs = (-a, b)
    ys = (-c, d)
    num = 0.0
    for pi, xi in zip(px, xs):
        for qj, yj in zip(py, ys):
            num += pi * qj * abs(xi + yj) ** rho
    den = px[0] * a ** rho + px[1] * b ** rho + py[0] * c ** rho + py[1] * d ** rho
    return num / den


def _two_point_ratio_symmetric(lp, rho):
    top = max(lp)
    a, b = (math.exp(max(v - top, -690.0)) for v in lp)
    return 0.5 * (abs(a + b) ** rho + abs(a - b) ** rho) / (a ** rho + b ** rho)


def _witness(lp, var_class):
    top = max(lp)
    vals = [math.exp(max(v - top, -690.0)) for v in lp]
    if var_class is VarClass.CENTERED:
        a, b, c, d = vals
        return dist.make_two_point_centered(a, b), dist.make_two_point_centered(c, d)
    a, b = vals
    return dist.make_two_point_symmetric(a), dist.make_two_point_symmetric(b)


@dataclass
class SharpnessResult:
    rho: float
    var_class: VarClass
    which: Extremum
    ratio: float
    target: float
    params: tuple
    witness: tuple

    @property
    def error(self) -> float:
        return abs(self.ratio - self.target)

    @property
    def attained(self) -> bool:
        return self.error <= SHARPNESS_TOL

    def to_json_dict(self) -> dict:
        return {
            "rho": self.rho,
            "class": self.var_class.value,
            "side": self.which.value,
            "ratio": self.ratio,
            "target": self.target,
            "error": self.error,
            "attained": self.attained,
            "params": list(self.params),
            "witness": _pair_json(self.witness),
        }

    @classmethod
    def from_json_dict(cls, data) -> "SharpnessResult":
        return cls(
            rho=float(data["rho"]),
            var_class=VarClass(data["class"]),
            which=Extremum(data["side"]),
            ratio=float(data["ratio"]),
            target=float(data["target"]),
            params=tuple(float(v) for v in data["params"]),
            witness=_pair_from_json(data["witness"]),
        )


def ratio_extremize(rho: float, var_class: VarClass | str, which: Extremum | str, seed=0,
                    restarts: int = 20) -> SharpnessResult:
    """Extremize the moment ratio over two-point pairs by multi-start Nelder-Mead.

    Parameters are log-magnitudes (4 for centered pairs, 2 for symmetric);
    starts come from a scrambled Halton sequence on [-6, 6]^k.  The result
    records the sharp constant it should reach; check ``attained``.
    """
    var_class = VarClass(var_class)
    which = Extremum(which)
    target = sharp_bounds(rho, var_class).constant(which)
    if var_class is VarClass.CENTERED:
        fn, k = _two_point_ratio_centered, 4
    else:
        fn, k = _two_point_ratio_symmetric, 2
    sign = -1.0 if which is Extremum.MAX else 1.0
    objective = lambda lp: sign * fn(lp, rho)
    starts = qmc.Halton(d=k, scramble=True, seed=seed).random(restarts) * 12.0 - 6.0
    opts = {"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000 * k, "adaptive": True}
    best = None
    for x0 in starts:
        res = optimize.minimize(objective, x0, method="Nelder-Mead", options=opts)
        if best is None or res.fun < best.fun:
            best = res
    # one polish from the incumbent
    res = optimize.minimize(objective, best.x, method="Nelder-Mead", options=opts)
    if res.fun < best.fun:
        best = res
    lp = tuple(float(v) for v in best.x)
    return SharpnessResult(float(rho), var_class, which, sign * float(best.fun), float(target),
                           lp, _witness(lp, var_class))


# ---------------------------------------------------------------------------
# auxiliary function from the symmetric small-rho lower bound


@dataclass(frozen=True)
class HCheck:
    rho: float
    z_max: float
    n_points: int
    h_at_one: float
    min_h: float
    max_decrease: float

    @property
    def worst_violation(self) -> float:
        return max(0.0, -self.min_h, abs(self.h_at_one), self.max_decrease)

    @property
    def ok(self) -> bool:
        return self.min_h >= -1e-12 and abs(self.h_at_one) <= 1e-12 and self.max_decrease <= 1e-12


def h_function(rho: float, z):
    z = np.asarray(z, dtype=float)
    c = 2.0 ** (rho - 1.0)
    return (1.0 + z) ** rho + (z - 1.0) ** rho - c - c * z ** rho


def h_nonneg_check(rho: float, z_max: float, n: int = 10_000) -> HCheck:
    """h(z) >= 0, h(1) = 0 and h nondecreasing on an ``n``-point grid of [1, z_max]."""
    if not 0.0 < rho < 1.0:
        raise InvalidParameterError(f"h check needs 0 < rho < 1, got {rho!r}")
    if not z_max > 1.0:
        raise InvalidParameterError(f"z_max must exceed 1, got {z_max!r}")
    z = np.linspace(1.0, z_max, n)
    h = h_function(rho, z)
    dec = (h[:-1] - h[1:]) / np.maximum(1.0, np.abs(h[1:]))
    return HCheck(float(rho), float(z_max), n, float(h[0]), float(h.min()), float(max(dec.max(), 0.0)))

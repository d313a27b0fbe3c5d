"""Sample-based membership checks for the function classes of the moment inequalities.

Each check returns a :class:`ConditionVerdict`.  A passing verdict is
evidence on the sampled points, never a proof; the sample size is recorded.

Violations are measured relative to the magnitude of the f'' values being
compared (``raw / max(1, |values|)``), so finite-difference noise on large
f'' does not masquerade as a violation.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.stats import qmc

from .errors import InvalidParameterError, QuadratureError
from .functions import FunctionSpec

VIOLATION_TOL = 1e-7
EVEN_TOL = 1e-9
MAX_GRID = 512


class Condition(str, enum.Enum):
    CONVEX_SECOND_DERIV = "ConvexSecondDeriv"
    SYMMETRIC_SUM_NONDECREASING = "SymmetricSumNondecreasing"
    CROSS_CONDITION = "CrossCondition"
    SQRT_CONVEX = "SqrtConvex"


@dataclass
class ConditionVerdict:
    condition: Condition
    holds: bool
    worst_violation: float
    witness: tuple
    n_checked: int
    range: Optional[tuple[float, float]] = None
    unknown: list = field(default_factory=list)
    skipped: int = 0
    note: str = ""

    def to_json_dict(self) -> dict:
        return {
            "condition": self.condition.value,
            "holds": self.holds,
            "worst_violation": _finite_or_str(self.worst_violation),
            "witness": [float(w) for w in self.witness],
            "n_checked": self.n_checked,
            "range": None if self.range is None else [float(v) for v in self.range],
            "unknown": [float(u) for u in self.unknown],
            "skipped": self.skipped,
            "note": self.note,
        }

    @classmethod
    def from_json_dict(cls, data) -> "ConditionVerdict":
        wv = data["worst_violation"]
        return cls(
            condition=Condition(data["condition"]),
            holds=bool(data["holds"]),
            worst_violation=float(wv),
            witness=tuple(data["witness"]),
            n_checked=int(data["n_checked"]),
            range=None if data["range"] is None else tuple(data["range"]),
            unknown=list(data["unknown"]),
            skipped=int(data["skipped"]),
            note=data.get("note", ""),
        )


def _finite_or_str(v):
    return v if math.isfinite(v) else str(v)


def _verdict(condition, worst, witness, n, **kw):
    worst = max(0.0, float(worst))
    return ConditionVerdict(condition, worst <= VIOLATION_TOL, worst, tuple(witness), n, **kw)


def make_grid(spec) -> np.ndarray:
    """Grid from an array or a ``(lo, hi, n)`` triple; at most 512 points."""
    if isinstance(spec, tuple) and len(spec) == 3:
        lo, hi, n = spec
        grid = np.linspace(float(lo), float(hi), int(n))
    else:
        grid = np.asarray(spec, dtype=float).ravel()
    if grid.size == 0:
        raise InvalidParameterError("grid is empty")
    if grid.size > MAX_GRID:
        raise InvalidParameterError(f"grid has {grid.size} points, limit is {MAX_GRID}")
    return grid


def _safe_eval(fn, y):
    """Vectorized evaluation; points where the evaluator raises become NaN."""
    y = np.asarray(y, dtype=float)
    try:
        with np.errstate(all="ignore"):
            return np.asarray(fn(y), dtype=float) * np.ones_like(y)
    except Exception:
        out = np.empty_like(y)
        flat = out.ravel()
        for i, v in enumerate(y.ravel()):
            try:
                with np.errstate(all="ignore"):
                    flat[i] = float(fn(v))
            except Exception:
                flat[i] = np.nan
        return out


def _warn_unknown(points, what):
    if len(points):
        warnings.warn(
            f"{what} could not be evaluated at {len(points)} point(s), e.g. y={points[0]!r}; excluded",
            RuntimeWarning,
            stacklevel=3,
        )


def _midpoint_convexity(values_at, grid, condition, rng_note=None):
    """All-pairs midpoint convexity of a function sampled through ``values_at``."""
    vals = values_at(grid)
    unknown = grid[np.isnan(vals)]
    inf_pts = grid[np.isinf(vals)]
    if inf_pts.size:
        return _verdict(condition, math.inf, (float(inf_pts[0]),), grid.size,
                        unknown=list(unknown), note="f'' does not exist (infinite) at witness")
    i, j = np.triu_indices(grid.size, k=1)
    mid = 0.5 * (grid[i] + grid[j])
    mvals = values_at(mid)
    ok = ~(np.isnan(vals[i]) | np.isnan(vals[j]) | np.isnan(mvals))
    unknown = np.unique(np.concatenate((unknown, mid[np.isnan(mvals)])))
    _warn_unknown(unknown, "condition function")
    if np.isinf(mvals[ok]).any():
        k = np.nonzero(ok & np.isinf(mvals))[0][0]
        return _verdict(condition, math.inf, (float(mid[k]), float(grid[i[k]]), float(grid[j[k]])),
                        int(ok.sum()), unknown=list(unknown),
                        note="f'' does not exist (infinite) at witness")
    i, j, mid, mvals = i[ok], j[ok], mid[ok], mvals[ok]
    if mid.size == 0:
        return _verdict(condition, 0.0, (), 0, unknown=list(unknown), note="no evaluable pairs")
    avg = 0.5 * (vals[i] + vals[j])
    scale = np.maximum(1.0, np.maximum(np.abs(mvals), np.maximum(np.abs(vals[i]), np.abs(vals[j]))))
    viol = (mvals - avg) / scale
    k = int(np.argmax(viol))
    return _verdict(condition, viol[k], (float(mid[k]), float(grid[i[k]]), float(grid[j[k]])),
                    int(mid.size), unknown=list(unknown))


def check_convex_second_derivative(f: FunctionSpec, grid) -> ConditionVerdict:
    """Midpoint convexity of f'' over all grid pairs.

    Declared kink points are removed from the grid and from the midpoints.
    Witness is ``(midpoint, x, y)``.
    """
    grid = make_grid(grid)
    grid = grid[~f.near_kink(grid)]

    def values_at(y):
        v = _safe_eval(f.second, y)
        return np.where(f.near_kink(y), np.nan, v)

    v = _midpoint_convexity(values_at, grid, Condition.CONVEX_SECOND_DERIV)
    v.range = (float(grid.min()), float(grid.max())) if grid.size else None
    return v


def check_symmetric_sum_nondecreasing(f: FunctionSpec, t_max: float, n: int = MAX_GRID) -> ConditionVerdict:
    """g(t) = f''(t) + f''(-t) sampled on ``n`` points of (0, t_max]; no adjacent decrease allowed."""
    if not t_max > 0:
        raise InvalidParameterError(f"t_max must be positive, got {t_max!r}")
    t = np.linspace(t_max / n, t_max, n)
    t = t[~(f.near_kink(t) | f.near_kink(-t))]
    g = _safe_eval(f.second, t) + _safe_eval(f.second, -t)
    unknown = t[np.isnan(g)]
    _warn_unknown(unknown, "f''")
    keep = ~np.isnan(g)
    t, g = t[keep], g[keep]
    if np.isinf(g).any():
        k = int(np.nonzero(np.isinf(g))[0][0])
        return _verdict(Condition.SYMMETRIC_SUM_NONDECREASING, math.inf, (float(t[k]),), t.size,
                        range=(0.0, float(t_max)), unknown=list(unknown),
                        note="f'' does not exist (infinite) at witness")
    if t.size < 2:
        return _verdict(Condition.SYMMETRIC_SUM_NONDECREASING, 0.0, (), t.size,
                        range=(0.0, float(t_max)), unknown=list(unknown))
    drop = (g[:-1] - g[1:]) / np.maximum(1.0, np.maximum(np.abs(g[:-1]), np.abs(g[1:])))
    k = int(np.argmax(drop))
    return _verdict(Condition.SYMMETRIC_SUM_NONDECREASING, drop[k], (float(t[k]), float(t[k + 1])),
                    t.size, range=(0.0, float(t_max)), unknown=list(unknown))


def check_cross_condition(f: FunctionSpec, lo: float, hi: float, n: int = 20000,
                          seed=0) -> ConditionVerdict:
    """Sampled check of f''(-a) + f''(b) >= f''(-a+c) + f''(b-c) on (lo, hi) = (-B, C).

    Triples come from a scrambled Halton sequence: a in (0, B), b in (0, C),
    c in (0, a+b), which keeps all four points inside the range.  Triples
    touching a declared kink or a point where f'' is not finite are skipped,
    since the condition is only imposed where f'' is defined.
    Witness is ``(a, b, c)``.
    """
    B, C = -float(lo), float(hi)
    if not (B > 0 and C > 0):
        raise InvalidParameterError(f"range must straddle zero, got ({lo!r}, {hi!r})")
    u = qmc.Halton(d=3, scramble=True, seed=seed).random(n)
    a = B * u[:, 0]
    b = C * u[:, 1]
    c = (a + b) * u[:, 2]
    pts = np.stack((-a, b, -a + c, b - c))
    ok = (a > 0) & (b > 0) & (c > 0) & (c < a + b)
    ok &= ~f.near_kink(pts).any(axis=0)
    vals = _safe_eval(f.second, pts)
    unknown = np.unique(pts[np.isnan(vals)])
    _warn_unknown(unknown, "f''")
    ok &= np.isfinite(vals).all(axis=0)
    skipped = int(n - ok.sum())
    lhs = vals[0] + vals[1]
    rhs = vals[2] + vals[3]
    scale = np.maximum(1.0, np.abs(vals).max(axis=0))
    viol = np.where(ok, (rhs - lhs) / np.where(ok, scale, 1.0), -np.inf)
    if not ok.any():
        return _verdict(Condition.CROSS_CONDITION, 0.0, (), 0, range=(float(lo), float(hi)),
                        unknown=list(unknown), skipped=skipped, note="no admissible triples")
    k = int(np.argmax(viol))
    return _verdict(Condition.CROSS_CONDITION, viol[k], (float(a[k]), float(b[k]), float(c[k])),
                    int(ok.sum()), range=(float(lo), float(hi)), unknown=list(unknown),
                    skipped=skipped)


def check_sqrt_convex(f: FunctionSpec, grid) -> ConditionVerdict:
    """f even and u -> f(sqrt(u)) midpoint convex on a grid of u >= 0."""
    grid = make_grid(grid)
    if (grid < 0).any():
        raise InvalidParameterError("sqrt-convexity grid must be nonnegative")
    ys = np.concatenate((grid, np.sqrt(grid)))
    fp, fm = _safe_eval(f, ys), _safe_eval(f, -ys)
    odd = np.abs(fp - fm) / np.maximum(1.0, np.abs(fp))
    odd = np.where(np.isnan(odd), 0.0, odd)
    if odd.max() > EVEN_TOL:
        k = int(np.argmax(odd))
        return ConditionVerdict(Condition.SQRT_CONVEX, False, float(odd[k]), (float(ys[k]),),
                                int(ys.size), range=(float(grid.min()), float(grid.max())),
                                note="f is not even at witness")
    v = _midpoint_convexity(lambda u: _safe_eval(f, np.sqrt(u)), grid, Condition.SQRT_CONVEX)
    v.range = (float(grid.min()), float(grid.max()))
    return v


def taylor_remainder_gap(f: FunctionSpec, x: float, y: float, tol: float = 1e-10) -> float:
    """|f(x+y) - f(x) - f'(x) y - y^2 * int_0^1 (1-z) f''(x+zy) dz|.

    The integral is computed by adaptive quadrature to absolute tolerance
    ``tol``, splitting at declared kinks and at the origin.
    """
    x, y = float(x), float(y)
    if y == 0.0:
        return 0.0
    lo, hi = min(x, x + y), max(x, x + y)
    # the origin is where |y|^rho-type f'' lose smoothness, so it is always a break
    cuts = set(f.kink_points(lo, hi)) | ({0.0} if lo < 0.0 < hi else set())
    breaks = sorted({(k - x) / y for k in cuts})
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            q, err = integrate.quad(
                lambda z: (1.0 - z) * float(f.second(x + z * y)),
                0.0, 1.0, epsabs=tol, epsrel=0.0, limit=500,
                points=breaks or None,
            )
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature did not converge for x={x}, y={y}: {exc}") from exc
    if not err <= tol:
        raise QuadratureError(f"quadrature error {err:.3g} above {tol:.3g}", estimate=q, achieved=err)
    lhs = float(f(x + y))
    rhs = float(f(x)) + float(f.first(x)) * y + y * y * q
    return abs(lhs - rhs)

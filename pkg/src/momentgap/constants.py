"""Sharp constants A, B in  A (E|X|^r + E|Y|^r) <= E|X+Y|^r <= B (E|X|^r + E|Y|^r).

For independent centered X, Y and 1 <= r <= 3 two of the constants are the
extremes over z in [0, 1] of

    psi(r, z) = (2^(r-1) (z + z^(r-1)) + (1-z)^r) / ((1+z)(1+z^(r-1))),

which is exactly the moment ratio of an i.i.d. pair with law
P(-1) = z/(1+z), P(z) = 1/(1+z).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParameterError, UnsupportedRegimeError, SharpnessNotAttained

RHO_MAX = 64.0
GRID_POINTS = 1001
Z_TOL = 1e-10
BOUNDARY_TOL = 1e-9
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class VarClass(str, enum.Enum):
    CENTERED = "centered"
    SYMMETRIC = "symmetric"


class Extremum(str, enum.Enum):
    MIN = "min"
    MAX = "max"


class Regime(str, enum.Enum):
    POWER_TWO_RHO_MINUS_2 = "PowerTwoRhoMinus2"
    ONE = "One"
    PSI_MIN = "PsiMin"
    PSI_MAX = "PsiMax"


def _check_rho(rho):
    rho = float(rho)
    if not (rho > 0 and math.isfinite(rho)):
        raise InvalidParameterError(f"rho must be positive, got {rho!r}")
    if rho > RHO_MAX:
        raise InvalidParameterError(f"rho={rho!r} exceeds the supported maximum {RHO_MAX:g}")
    return rho


def _z_pow(rho, z):
    """z^(rho-1) with the z = 0 convention: 1 when rho == 1, else 0."""
    z = np.asarray(z, dtype=float)
    if rho == 1.0:
        return np.ones_like(z)
    with np.errstate(divide="ignore"):
        return np.where(z > 0, z ** (rho - 1.0), 0.0)


def psi(rho: float, z):
    """Evaluate psi(rho, z) for rho >= 1 and z in [0, 1] (vectorized in z)."""
    rho = float(rho)
    if not (rho >= 1.0 and math.isfinite(rho)):
        raise InvalidParameterError(f"psi needs rho >= 1, got {rho!r}")
    z_arr = np.asarray(z, dtype=float)
    if np.any(~((z_arr >= 0.0) & (z_arr <= 1.0))):
        raise InvalidParameterError(f"psi needs z in [0, 1], got {z!r}")
    zr = _z_pow(rho, z_arr)
    out = (2.0 ** (rho - 1.0) * (z_arr + zr) + (1.0 - z_arr) ** rho) / ((1.0 + z_arr) * (1.0 + zr))
    return float(out) if out.ndim == 0 else out


def golden_section(fn, lo: float, hi: float, tol: float = Z_TOL, maximize: bool = False):
    """Golden-section search on [lo, hi] until the bracket is narrower than ``tol``.

    Returns ``(x, fn(x))`` for the best point seen, endpoints included.
    """
    sign = -1.0 if maximize else 1.0
    g = lambda t: sign * fn(t)
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc <= gd:
            b, d, gd = d, c, gc
            c = b - INV_PHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + INV_PHI * (b - a)
            gd = g(d)
    candidates = [(gc, c), (gd, d), (g(lo), lo), (g(hi), hi), (g(0.5 * (a + b)), 0.5 * (a + b))]
    best_g, best_x = min(candidates)
    return best_x, sign * best_g


@dataclass(frozen=True)
class PsiPoint:
    rho: float
    z: float
    value: float


def psi_extremum(rho: float, which: Extremum | str) -> PsiPoint:
    """Global extremum of psi(rho, .) on [0, 1].

    psi is not assumed unimodal: a 1001-point scan picks the best cell and
    golden-section search refines inside its neighbours.
    """
    which = Extremum(which)
    maximize = which is Extremum.MAX
    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    vals = psi(rho, grid)
    k = int(np.argmax(vals) if maximize else np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, GRID_POINTS - 1)]
    z, v = golden_section(lambda t: psi(rho, t), lo, hi, maximize=maximize)
    if (v < vals[k]) if maximize else (v > vals[k]):
        z, v = float(grid[k]), float(vals[k])
    return PsiPoint(float(rho), float(z), float(v))


@dataclass(frozen=True)
class BoundsReport:
    rho: float
    var_class: VarClass
    lower: float
    upper: float
    lower_regime: Regime
    upper_regime: Regime
    psi_argopt: Optional[float] = None

    def constant(self, which: Extremum | str) -> float:
        return self.lower if Extremum(which) is Extremum.MIN else self.upper

    def regime(self, which: Extremum | str) -> Regime:
        return self.lower_regime if Extremum(which) is Extremum.MIN else self.upper_regime

    def to_json_dict(self) -> dict:
        return {
            "rho": self.rho,
            "class": self.var_class.value,
            "lower": self.lower,
            "upper": self.upper,
            "lower_regime": self.lower_regime.value,
            "upper_regime": self.upper_regime.value,
            "z_argopt": self.psi_argopt,
        }

    @classmethod
    def from_json_dict(cls, data) -> "BoundsReport":
        return cls(
            rho=float(data["rho"]),
            var_class=VarClass(data["class"]),
            lower=float(data["lower"]),
            upper=float(data["upper"]),
            lower_regime=Regime(data["lower_regime"]),
            upper_regime=Regime(data["upper_regime"]),
            psi_argopt=None if data["z_argopt"] is None else float(data["z_argopt"]),
        )


def _centered(rho, segment):
    pw = 2.0 ** (rho - 2.0)
    if segment == 0:  # 1 <= rho <= 2
        pt = psi_extremum(rho, Extremum.MAX)
        return pw, pt.value, Regime.POWER_TWO_RHO_MINUS_2, Regime.PSI_MAX, pt.z
    if segment == 1:  # 2 <= rho <= 3
        pt = psi_extremum(rho, Extremum.MIN)
        return pt.value, pw, Regime.PSI_MIN, Regime.POWER_TWO_RHO_MINUS_2, pt.z
    return 1.0, pw, Regime.ONE, Regime.POWER_TWO_RHO_MINUS_2, None


def _symmetric(rho, segment):
    pw = 2.0 ** (rho - 2.0)
    if segment == 0:  # 0 < rho <= 2
        return pw, 1.0, Regime.POWER_TWO_RHO_MINUS_2, Regime.ONE, None
    return 1.0, pw, Regime.ONE, Regime.POWER_TWO_RHO_MINUS_2, None


def sharp_bounds(rho: float, var_class: VarClass | str, allow_trivial: bool = False) -> BoundsReport:
    """Sharp lower/upper constants for the given exponent and variable class.

    Centered variables need rho >= 1; below that the best constants are the
    trivial (0, 1), returned only with ``allow_trivial``.  At a regime
    boundary both neighbouring formulas are evaluated and must agree.
    """
    rho = _check_rho(rho)
    var_class = VarClass(var_class)
    if var_class is VarClass.CENTERED:
        if rho < 1.0:
            if not allow_trivial:
                raise UnsupportedRegimeError(
                    f"centered bounds need rho >= 1 (got {rho:g}); pass allow_trivial for (0, 1)"
                )
            return BoundsReport(rho, var_class, 0.0, 1.0, Regime.ONE, Regime.ONE)
        cuts, table = (2.0, 3.0), _centered
    else:
        cuts, table = (2.0,), _symmetric
    segment = sum(rho > c for c in cuts)
    out = table(rho, segment)
    if rho in cuts:
        other = table(rho, segment + 1)
        if abs(out[0] - other[0]) > BOUNDARY_TOL or abs(out[1] - other[1]) > BOUNDARY_TOL:
            raise RuntimeError(
                f"regimes disagree at rho={rho:g}: {out[:2]} vs {other[:2]}"
            )
    lower, upper, lr, ur, z = out
    return BoundsReport(rho, var_class, float(lower), float(upper), lr, ur, z)


def equality_witness(rho: float, var_class: VarClass | str, side: Extremum | str):
    """Pair of laws whose moment ratio attains the sharp constant on ``side``.

    Power-of-two constants are attained by the i.i.d. Rademacher pair; the
    others come from the two-point ratio optimizer.  Raises
    :class:`SharpnessNotAttained` when the optimizer cannot close to 1e-6.
    """
    from . import distributions as dist
    from . import verifier

    report = sharp_bounds(rho, var_class)
    side = Extremum(side)
    if report.regime(side) is Regime.POWER_TWO_RHO_MINUS_2:
        r = dist.rademacher()
        return r, r
    result = verifier.ratio_extremize(rho, var_class, side)
    if not result.attained:
        raise SharpnessNotAttained(
            f"best ratio {result.ratio!r} misses {result.target!r} by {result.error:.3g}", result
        )
    return result.witness

"""Two-point mixture decompositions of centered and symmetric laws.

A centered law is rewritten as a probability mixture of centered two-point
laws (plus a point mass at zero); a symmetric law as a mixture of symmetric
two-point laws.  Inequalities for sums of independent variables that are
bilinear in the two laws then reduce to the two-point case.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import distributions as dist
from .distributions import FiniteDistribution
from .errors import InvalidDistributionError, PreconditionError

RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class ZeroMass:
    kind = "zero"

    def distribution(self) -> FiniteDistribution:
        return FiniteDistribution.point_mass(0.0)


@dataclass(frozen=True)
class TwoPointCentered:
    """Support {-a, b} with P(-a) = b/(a+b)."""

    a: float
    b: float
    kind = "centered"

    def distribution(self) -> FiniteDistribution:
        return dist.make_two_point_centered(self.a, self.b)


@dataclass(frozen=True)
class TwoPointSymmetric:
    a: float
    kind = "symmetric"

    def distribution(self) -> FiniteDistribution:
        return dist.make_two_point_symmetric(self.a)


Component = Union[ZeroMass, TwoPointCentered, TwoPointSymmetric]


@dataclass(frozen=True)
class MixtureDecomposition:
    weights: tuple[float, ...]
    components: tuple[Component, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.components):
            raise ValueError("weights and components differ in length")
        if any(w <= 0 for w in self.weights):
            raise ValueError("mixture weights must be positive")
        if abs(math.fsum(self.weights) - 1.0) > dist.MASS_TOL:
            raise ValueError(f"mixture weights sum to {math.fsum(self.weights)!r}")

    def __iter__(self):
        return iter(zip(self.weights, self.components))

    def __len__(self):
        return len(self.components)

    def to_json_dict(self) -> dict:
        out = []
        for w, c in self:
            item = {"weight": w, "kind": c.kind}
            if isinstance(c, TwoPointCentered):
                item.update(a=c.a, b=c.b)
            elif isinstance(c, TwoPointSymmetric):
                item.update(a=c.a)
            out.append(item)
        return {"components": out}

    @classmethod
    def from_json_dict(cls, data) -> "MixtureDecomposition":
        weights, comps = [], []
        for i, item in enumerate(data["components"]):
            kind = item.get("kind")
            if kind == "zero":
                comps.append(ZeroMass())
            elif kind == "centered":
                comps.append(TwoPointCentered(float(item["a"]), float(item["b"])))
            elif kind == "symmetric":
                comps.append(TwoPointSymmetric(float(item["a"])))
            else:
                raise InvalidDistributionError(f"unknown kind {kind!r}", field=f"components[{i}].kind")
            weights.append(float(item["weight"]))
        return cls(tuple(weights), tuple(comps))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def _zero_split(d: FiniteDistribution):
    tol = dist.MERGE_RTOL
    zero = np.abs(d.x) <= tol
    return float(d.p[zero].sum()), d.x[~zero], d.p[~zero]


def decompose_centered(d: FiniteDistribution) -> MixtureDecomposition:
    """Split a centered law into centered two-point pieces.

    Negative and positive atoms are both walked from the smallest magnitude
    outward.  Each step emits a two-point law on {-a_i, b_j} whose weight is
    the largest one that keeps the first moments balanced
    (``b_j * dp_pos == a_i * dp_neg``) without overdrawing either atom, and
    then advances past whichever atom was used up.  Mass at zero is split off
    first as a ``ZeroMass`` component.
    """
    m = dist.mean(d)
    if not d.is_centered():
        raise PreconditionError(f"distribution is not centered (mean = {m!r})", measured=m)

    p_zero, x, p = _zero_split(d)
    weights: list[float] = []
    comps: list[Component] = []
    if p_zero > 0:
        weights.append(p_zero)
        comps.append(ZeroMass())

    neg = x < 0
    a_vals = -x[neg][::-1]  # increasing magnitude
    a_mass = p[neg][::-1].copy()
    b_vals = x[~neg]
    b_mass = p[~neg].copy()

    a_orig, b_orig = a_mass.copy(), b_mass.copy()
    i = j = 0
    while i < a_vals.size and j < b_vals.size:
        a, b = a_vals[i], b_vals[j]
        # weight w puts w*b/(a+b) on -a and w*a/(a+b) on b
        w = min(a_mass[i] * (a + b) / b, b_mass[j] * (a + b) / a)
        a_mass[i] -= w * b / (a + b)
        b_mass[j] -= w * a / (a + b)
        weights.append(float(w))
        comps.append(TwoPointCentered(float(a), float(b)))
        # float residue below RESIDUAL_TOL of an atom's mass counts as used up
        if a_mass[i] <= RESIDUAL_TOL * a_orig[i]:
            i += 1
        if b_mass[j] <= RESIDUAL_TOL * b_orig[j]:
            j += 1

    total = math.fsum(weights)
    weights = [w / total for w in weights]
    return MixtureDecomposition(tuple(weights), tuple(comps))


def decompose_symmetric(d: FiniteDistribution) -> MixtureDecomposition:
    """Read a symmetric law off as symmetric two-point pieces (and zero)."""
    bad = dist._asymmetry(d, dist.MASS_TOL)
    if bad is not None:
        raise PreconditionError(
            f"distribution is not symmetric: P({bad!r}) != P({-bad!r})", measured=bad
        )
    p_zero, x, p = _zero_split(d)
    weights: list[float] = []
    comps: list[Component] = []
    if p_zero > 0:
        weights.append(p_zero)
        comps.append(ZeroMass())
    pos = x > 0
    for value, prob in zip(x[pos], p[pos]):
        weights.append(2.0 * float(prob))
        comps.append(TwoPointSymmetric(float(value)))
    total = math.fsum(weights)
    weights = [w / total for w in weights]
    return MixtureDecomposition(tuple(weights), tuple(comps))


def recompose(m: MixtureDecomposition) -> FiniteDistribution:
    return dist.mixture(m.weights, [c.distribution() for c in m.components])


def component_bound(d: FiniteDistribution) -> int:
    """Maximum number of components ``decompose_centered`` may emit for ``d``."""
    n_neg = int((d.x < -dist.MERGE_RTOL).sum())
    n_pos = int((d.x > dist.MERGE_RTOL).sum())
    has_zero = int(n_neg + n_pos < d.x.size)
    return max(n_neg + n_pos - 1, 0) + has_zero

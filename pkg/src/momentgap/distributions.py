"""Finite-support probability distributions with exact moment arithmetic.

Every expectation here is a finite sum over atoms; nothing is sampled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidDistributionError, InvalidParameterError

MASS_TOL = 1e-12
MERGE_RTOL = 1e-12
CENTER_TOL = 1e-9

# generator constants
MAG_LO, MAG_HI = 1e-2, 1e2
SMALL_ATOM = 1e-2


def _merge(x: np.ndarray, p: np.ndarray, drop_zero: bool = True):
    """Sort atoms and merge those closer than ``MERGE_RTOL * max(1, |x|)``.

    Weights may be signed (used by the TV distance); merged atoms sit at the
    weight-dominant member of their group so mirrored inputs stay mirrored.
    """
    order = np.argsort(x, kind="stable")
    x = x[order]
    p = p[order]
    if x.size == 0:
        return x, p
    gaps = np.diff(x)
    scale = MERGE_RTOL * np.maximum(1.0, np.maximum(np.abs(x[:-1]), np.abs(x[1:])))
    starts = np.concatenate(([0], np.nonzero(gaps > scale)[0] + 1))
    if starts.size == x.size:
        merged_x, merged_p = x, p
    else:
        merged_p = np.add.reduceat(p, starts)
        ends = np.append(starts[1:], x.size)
        merged_x = np.empty(starts.size)
        for k, (s, e) in enumerate(zip(starts, ends)):
            merged_x[k] = x[s + int(np.argmax(np.abs(p[s:e])))]
    if drop_zero:
        keep = merged_p != 0.0
        merged_x, merged_p = merged_x[keep], merged_p[keep]
    return merged_x, merged_p


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Law of a random variable with finitely many atoms.

    ``x`` is strictly increasing, ``p`` strictly positive and sums to one.
    Both arrays are read-only; build instances with :meth:`from_atoms`.
    """

    x: np.ndarray
    p: np.ndarray

    @classmethod
    def from_atoms(cls, xs: Iterable[float], ps: Iterable[float]) -> "FiniteDistribution":
        x = np.asarray(list(xs) if not isinstance(xs, np.ndarray) else xs, dtype=float).ravel()
        p = np.asarray(list(ps) if not isinstance(ps, np.ndarray) else ps, dtype=float).ravel()
        if x.shape != p.shape:
            raise InvalidDistributionError(f"{x.size} atoms but {p.size} probabilities")
        if x.size == 0:
            raise InvalidDistributionError("no atoms")
        for i in range(x.size):
            if not math.isfinite(x[i]):
                raise InvalidDistributionError(f"non-finite value {x[i]!r}", field=f"atoms[{i}].x")
            if not (math.isfinite(p[i]) and 0.0 < p[i] <= 1.0):
                raise InvalidDistributionError(
                    f"probability {p[i]!r} outside (0, 1]", field=f"atoms[{i}].p"
                )
        total = math.fsum(p)
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidDistributionError(f"probabilities sum to {total!r}, not 1")
        return cls._trusted(x, p)

    @classmethod
    def _trusted(cls, x, p) -> "FiniteDistribution":
        x, p = _merge(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
        x = np.array(x, dtype=float)
        p = np.array(p, dtype=float)
        x.setflags(write=False)
        p.setflags(write=False)
        return cls(x, p)

    @classmethod
    def point_mass(cls, value: float = 0.0) -> "FiniteDistribution":
        return cls._trusted([float(value)], [1.0])

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.x, self.p)]

    def __len__(self):
        return self.x.size

    def __repr__(self):
        body = ", ".join(f"({a:.6g}, {b:.6g})" for a, b in self.atoms)
        return f"FiniteDistribution([{body}])"

    def scaled(self, factor: float) -> "FiniteDistribution":
        """Law of ``factor * X``."""
        if factor == 0:
            return FiniteDistribution.point_mass(0.0)
        return FiniteDistribution._trusted(self.x * factor, self.p)

    def prob(self, value: float) -> float:
        """P(X = value), matching atoms with the merge tolerance."""
        tol = MERGE_RTOL * max(1.0, abs(value))
        hit = np.abs(self.x - value) <= tol
        return float(self.p[hit].sum())

    def is_centered(self) -> bool:
        return abs(mean(self)) <= CENTER_TOL * (1.0 + float(np.abs(self.x).max()))

    def is_symmetric(self, tol: float = MASS_TOL) -> bool:
        return _asymmetry(self, tol) is None

    def to_json_dict(self) -> dict:
        return {"atoms": [{"x": a, "p": b} for a, b in self.atoms]}

    @classmethod
    def from_json_dict(cls, data) -> "FiniteDistribution":
        if not isinstance(data, dict) or "atoms" not in data:
            raise InvalidDistributionError("expected an object with an 'atoms' list", field="$")
        atoms = data["atoms"]
        if not isinstance(atoms, list):
            raise InvalidDistributionError("must be a list", field="atoms")
        xs, ps = [], []
        for i, atom in enumerate(atoms):
            if not isinstance(atom, dict):
                raise InvalidDistributionError("must be an object", field=f"atoms[{i}]")
            for key, sink in (("x", xs), ("p", ps)):
                if key not in atom:
                    raise InvalidDistributionError("missing", field=f"atoms[{i}].{key}")
                value = atom[key]
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise InvalidDistributionError(
                        f"expected a number, got {value!r}", field=f"atoms[{i}].{key}"
                    )
                sink.append(float(value))
        return cls.from_atoms(xs, ps)


def _asymmetry(d: FiniteDistribution, tol: float):
    """First atom x with |P(x) - P(-x)| > tol, or None."""
    for value, prob in zip(d.x, d.p):
        if abs(prob - d.prob(-value)) > tol:
            return float(value)
    return None


def loads(text: str) -> FiniteDistribution:
    """Parse the JSON distribution format ``{"atoms": [{"x": .., "p": ..}, ...]}``."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidDistributionError(
            f"malformed JSON: {exc.msg}", field=f"line {exc.lineno} column {exc.colno}"
        ) from exc
    return FiniteDistribution.from_json_dict(data)


def load(path) -> FiniteDistribution:
    return loads(Path(path).read_text())


def dumps(d: FiniteDistribution) -> str:
    return json.dumps(d.to_json_dict())


def make_two_point_centered(a: float, b: float) -> FiniteDistribution:
    """Centered law on {-a, b}: P(-a) = b/(a+b), P(b) = a/(a+b)."""
    if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
        raise InvalidParameterError(f"two-point parameters must be positive, got a={a!r}, b={b!r}")
    return FiniteDistribution._trusted([-a, b], [b / (a + b), a / (a + b)])


def make_two_point_symmetric(a: float) -> FiniteDistribution:
    if not (a > 0 and math.isfinite(a)):
        raise InvalidParameterError(f"symmetric two-point parameter must be positive, got {a!r}")
    return FiniteDistribution._trusted([-a, a], [0.5, 0.5])


def rademacher() -> FiniteDistribution:
    return make_two_point_symmetric(1.0)


def mean(d: FiniteDistribution) -> float:
    return math.fsum(d.x * d.p)


def abs_moment(d: FiniteDistribution, rho: float) -> float:
    """E|X|^rho, with |0|^rho = 0."""
    if not rho > 0:
        raise InvalidParameterError(f"rho must be positive, got {rho!r}")
    return math.fsum(np.abs(d.x) ** rho * d.p)


def expectation(d: FiniteDistribution, f: Callable) -> float:
    """E f(X) for a vectorized evaluator (or a FunctionSpec)."""
    values = np.asarray(f(d.x), dtype=float)
    return math.fsum(values * d.p)


def convolve(d1: FiniteDistribution, d2: FiniteDistribution) -> FiniteDistribution:
    """Law of X + Y for independent X ~ d1, Y ~ d2."""
    x = (d1.x[:, None] + d2.x[None, :]).ravel()
    p = (d1.p[:, None] * d2.p[None, :]).ravel()
    return FiniteDistribution._trusted(x, p)


def tv_distance(d1: FiniteDistribution, d2: FiniteDistribution) -> float:
    x = np.concatenate((d1.x, d2.x))
    w = np.concatenate((d1.p, -d2.p))
    _, diff = _merge(x, w, drop_zero=False)
    return 0.5 * math.fsum(np.abs(diff))


def mixture(weights: Sequence[float], parts: Sequence[FiniteDistribution]) -> FiniteDistribution:
    x = np.concatenate([d.x for d in parts])
    p = np.concatenate([w * d.p for w, d in zip(weights, parts)])
    return FiniteDistribution._trusted(x, p)


# ---------------------------------------------------------------------------
# random generators


@dataclass(frozen=True)
class DistributionBatch:
    """Many finite distributions stored as zero-padded (rows, atoms) arrays."""

    x: np.ndarray
    p: np.ndarray

    def __len__(self):
        return self.x.shape[0]

    def row(self, i: int) -> FiniteDistribution:
        keep = self.p[i] > 0
        return FiniteDistribution._trusted(self.x[i, keep], self.p[i, keep])

    def abs_moment(self, rho: float) -> np.ndarray:
        return (np.abs(self.x) ** rho * self.p).sum(axis=1)

    def expectation(self, f: Callable) -> np.ndarray:
        return (np.asarray(f(self.x), dtype=float) * self.p).sum(axis=1)


def _log_uniform(rng, size):
    return np.exp(rng.uniform(math.log(MAG_LO), math.log(MAG_HI), size=size))


def _counts(n_atoms, rows):
    counts = np.broadcast_to(np.asarray(n_atoms, dtype=int), (rows,)).copy()
    if (counts < 2).any():
        raise InvalidParameterError("n_atoms must be >= 2")
    return counts


def _bad_rows(x, mask):
    ax = np.abs(x)
    small = mask & (ax > 0) & (ax < SMALL_ATOM)
    bad = small.any(axis=1)
    # distinctness: after sorting, padded atoms (+inf) never collide
    xs = np.sort(np.where(mask, x, np.inf), axis=1)
    with np.errstate(invalid="ignore"):
        gaps = np.diff(xs, axis=1)
    scale = MERGE_RTOL * np.maximum(1.0, np.abs(xs[:, 1:]))
    bad |= (np.isfinite(gaps) & (gaps <= scale)).any(axis=1)
    return bad


def centered_batch(rng: np.random.Generator, rows: int, n_atoms) -> DistributionBatch:
    """``rows`` random centered laws; ``n_atoms`` is an int or per-row array."""
    counts = _counts(n_atoms, rows)
    width = int(counts.max())
    mask = np.arange(width)[None, :] < counts[:, None]
    x = np.zeros((rows, width))
    p = np.zeros((rows, width))
    todo = np.arange(rows)
    while todo.size:
        m = mask[todo]
        mags = _log_uniform(rng, (todo.size, width))
        signs = np.where(rng.random((todo.size, width)) < 0.5, -1.0, 1.0)
        w = rng.standard_exponential((todo.size, width)) * m
        w /= w.sum(axis=1, keepdims=True)
        vals = signs * mags * m
        vals = vals - (vals * w).sum(axis=1, keepdims=True)
        vals = vals * m
        bad = _bad_rows(vals, m)
        good = todo[~bad]
        x[good] = vals[~bad]
        p[good] = w[~bad]
        todo = todo[bad]
    return DistributionBatch(x, p)


def symmetric_batch(rng: np.random.Generator, rows: int, n_atoms) -> DistributionBatch:
    """Random symmetric laws; odd ``n_atoms`` adds an atom at zero."""
    counts = _counts(n_atoms, rows)
    half = counts // 2
    has_zero = counts % 2 == 1
    width = int((2 * half + has_zero).max())
    hw = int(half.max())
    x = np.zeros((rows, width))
    p = np.zeros((rows, width))
    todo = np.arange(rows)
    while todo.size:
        m = np.arange(hw)[None, :] < half[todo][:, None]
        mags = _log_uniform(rng, (todo.size, hw)) * m
        w = rng.standard_exponential((todo.size, hw + 1))
        w[:, :hw] *= m
        w[:, hw] *= has_zero[todo]
        w /= w.sum(axis=1, keepdims=True)
        bad = _bad_rows(mags, m)
        for r_local, r in enumerate(todo):
            if bad[r_local]:
                continue
            k = half[r]
            xs = np.concatenate((-mags[r_local, :k], mags[r_local, :k]))
            ps = np.concatenate((w[r_local, :k], w[r_local, :k])) / 2.0
            if has_zero[r]:
                xs = np.append(xs, 0.0)
                ps = np.append(ps, w[r_local, hw])
            x[r, : xs.size] = xs
            p[r, : ps.size] = ps
        todo = todo[bad]
    return DistributionBatch(x, p)


def two_point_centered_batch(rng: np.random.Generator, rows: int) -> DistributionBatch:
    a, b = _log_uniform(rng, (2, rows))
    x = np.stack((-a, b), axis=1)
    p = np.stack((b / (a + b), a / (a + b)), axis=1)
    return DistributionBatch(x, p)


def two_point_symmetric_batch(rng: np.random.Generator, rows: int) -> DistributionBatch:
    a = _log_uniform(rng, rows)
    x = np.stack((-a, a), axis=1)
    p = np.full((rows, 2), 0.5)
    return DistributionBatch(x, p)


def random_centered(seed, n_atoms: int) -> FiniteDistribution:
    """Random centered law: log-uniform magnitudes, Dirichlet weights, then recentered."""
    return centered_batch(np.random.default_rng(seed), 1, n_atoms).row(0)


def random_symmetric(seed, n_atoms: int) -> FiniteDistribution:
    return symmetric_batch(np.random.default_rng(seed), 1, n_atoms).row(0)
